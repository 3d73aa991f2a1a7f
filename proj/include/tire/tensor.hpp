#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tire/error.hpp"

namespace tire::ad {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

struct Node;

// Value-semantic handle to a node of the reverse-mode tape. Copies share the
// underlying node. A graph/tape belongs to one logical execution context;
// concurrent mutation is not supported.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor scalar(double v);
  // Leaf with requires_grad set; the unit of optimization.
  static Tensor param(Shape shape, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t numel() const;

  const std::vector<double>& values() const;
  std::vector<double>& values();

  bool requires_grad() const;
  bool has_grad() const;
  const std::vector<double>& grad() const;
  void zero_grad();

  double item() const;  // scalar tensors only

  // Leaf copy of the current values, cut off from the tape.
  Tensor detach() const;

  std::shared_ptr<Node>& node() { return node_; }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Forward ops. All differentiable; shape mismatches raise ShapeError naming
// the op and both shapes.
//
// conv2d:            x [N,Cin,H,W], w [Cout,Cin,kh,kw], optional bias [Cout];
//                    output side = floor((n + 2*pad - k)/stride) + 1
// transpose_conv2d:  x [N,Cin,H,W], w [Cin,Cout,kh,kw], optional bias [Cout];
//                    output side = (n - 1)*stride - 2*pad + k
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad);
Tensor transpose_conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad);
Tensor max_pool2d(const Tensor& x);  // 2x2, stride 2
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor sigmoid(const Tensor& x);
Tensor tanh_act(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor concat_channels(const Tensor& a, const Tensor& b);  // along axis 1 of NCHW
Tensor mse_loss(const Tensor& pred, const Tensor& target);
// Binary cross entropy with predictions clamped to [1e-7, 1 - 1e-7].
Tensor bce_loss(const Tensor& pred, const Tensor& target);

// Reverse pass from a scalar loss. Gradients accumulate additively into every
// requires_grad tensor reachable from the loss; call zero_grad between steps.
void backward(const Tensor& loss);

void zero_grads(std::vector<Tensor>& params);

struct AdamState {
  std::vector<std::vector<double>> m, v;
  long step = 0;
};

// Bias-corrected Adam. Parameters without an accumulated gradient this step
// are treated as having zero gradient.
void adam_step(std::vector<Tensor>& params, AdamState& state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

// Named-tensor checkpoint: one line of JSON
// {"tensors":[{"name":...,"shape":[...],"dtype":"f64"},...]} followed by the
// concatenated little-endian IEEE-754 payloads in header order.
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& tensors);
struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<double> values;
};
std::vector<CheckpointEntry> load_checkpoint(const std::string& path);

}  // namespace tire::ad
