#include "tire/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace tire::ad {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads assume a little-endian host");

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d <= 0) throw ShapeError("tensor dims must be positive, got " + shape_str(s));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

struct Node {
  Shape shape;
  std::vector<double> val;
  std::vector<double> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;
};

namespace {

void ensure_grad(Node& n) {
  if (n.grad.size() != n.val.size()) n.grad.assign(n.val.size(), 0.0);
}

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  if (values.size() != n) {
    throw ShapeError("tensor data length " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->val = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}

std::shared_ptr<Node> make_op(const char* op, Shape shape,
                              std::vector<std::shared_ptr<Node>> parents) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->shape = std::move(shape);
  node->val.resize(shape_numel(node->shape));
  node->parents = std::move(parents);
  for (const auto& p : node->parents) node->requires_grad |= p->requires_grad;
  return node;
}

const std::shared_ptr<Node>& need(const Tensor& t, const char* op) {
  if (!t.defined()) throw ShapeError(std::string(op) + ": undefined tensor");
  return t.node();
}

Tensor wrap(std::shared_ptr<Node> n) {
  Tensor t;
  t.node() = std::move(n);
  return t;
}

void check_same_shape(const char* op, const Node& a, const Node& b) {
  if (a.shape != b.shape) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                     shape_str(b.shape));
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

constexpr double kBceLo = 1e-7;
constexpr double kBceHi = 1.0 - 1e-7;

}  // namespace

// --- Tensor surface ---------------------------------------------------------

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  return wrap(make_leaf(std::move(shape), std::move(values), false));
}

Tensor Tensor::zeros(Shape shape) {
  const std::size_t n = shape_numel(shape);
  return wrap(make_leaf(std::move(shape), std::vector<double>(n, 0.0), false));
}

Tensor Tensor::full(Shape shape, double v) {
  const std::size_t n = shape_numel(shape);
  return wrap(make_leaf(std::move(shape), std::vector<double>(n, v), false));
}

Tensor Tensor::scalar(double v) { return wrap(make_leaf({1}, {v}, false)); }

Tensor Tensor::param(Shape shape, std::vector<double> values) {
  return wrap(make_leaf(std::move(shape), std::move(values), true));
}

const Shape& Tensor::shape() const { return need(*this, "shape")->shape; }
std::size_t Tensor::numel() const { return need(*this, "numel")->val.size(); }
const std::vector<double>& Tensor::values() const { return need(*this, "values")->val; }
std::vector<double>& Tensor::values() { return need(*this, "values")->val; }
bool Tensor::requires_grad() const { return need(*this, "requires_grad")->requires_grad; }
bool Tensor::has_grad() const {
  const auto& n = need(*this, "has_grad");
  return n->grad.size() == n->val.size();
}

const std::vector<double>& Tensor::grad() const {
  const auto& n = need(*this, "grad");
  if (n->grad.size() != n->val.size()) throw ShapeError("grad: no gradient accumulated");
  return n->grad;
}

void Tensor::zero_grad() {
  auto& n = need(*this, "zero_grad");
  n->grad.assign(n->val.size(), 0.0);
}

double Tensor::item() const {
  const auto& n = need(*this, "item");
  if (n->val.size() != 1) throw ShapeError("item: tensor is not scalar, shape " + shape_str(n->shape));
  return n->val[0];
}

Tensor Tensor::detach() const {
  const auto& n = need(*this, "detach");
  return wrap(make_leaf(n->shape, n->val, false));
}

// --- Elementwise ops --------------------------------------------------------

Tensor relu(const Tensor& x) {
  auto xn = need(x, "relu");
  auto out = make_op("relu", xn->shape, {xn});
  for (std::size_t i = 0; i < xn->val.size(); ++i) out->val[i] = xn->val[i] > 0.0 ? xn->val[i] : 0.0;
  Node* xp = xn.get();
  out->backprop = [xp](Node& self) {
    if (!xp->requires_grad) return;
    ensure_grad(*xp);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (xp->val[i] > 0.0) xp->grad[i] += self.grad[i];
    }
  };
  return wrap(out);
}

Tensor leaky_relu(const Tensor& x, double slope) {
  auto xn = need(x, "leaky_relu");
  auto out = make_op("leaky_relu", xn->shape, {xn});
  for (std::size_t i = 0; i < xn->val.size(); ++i) {
    out->val[i] = xn->val[i] > 0.0 ? xn->val[i] : slope * xn->val[i];
  }
  Node* xp = xn.get();
  out->backprop = [xp, slope](Node& self) {
    if (!xp->requires_grad) return;
    ensure_grad(*xp);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      xp->grad[i] += self.grad[i] * (xp->val[i] > 0.0 ? 1.0 : slope);
    }
  };
  return wrap(out);
}

Tensor sigmoid(const Tensor& x) {
  auto xn = need(x, "sigmoid");
  auto out = make_op("sigmoid", xn->shape, {xn});
  for (std::size_t i = 0; i < xn->val.size(); ++i) out->val[i] = stable_sigmoid(xn->val[i]);
  Node* xp = xn.get();
  out->backprop = [xp](Node& self) {
    if (!xp->requires_grad) return;
    ensure_grad(*xp);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double y = self.val[i];
      xp->grad[i] += self.grad[i] * y * (1.0 - y);
    }
  };
  return wrap(out);
}

Tensor tanh_act(const Tensor& x) {
  auto xn = need(x, "tanh");
  auto out = make_op("tanh", xn->shape, {xn});
  for (std::size_t i = 0; i < xn->val.size(); ++i) out->val[i] = std::tanh(xn->val[i]);
  Node* xp = xn.get();
  out->backprop = [xp](Node& self) {
    if (!xp->requires_grad) return;
    ensure_grad(*xp);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double y = self.val[i];
      xp->grad[i] += self.grad[i] * (1.0 - y * y);
    }
  };
  return wrap(out);
}

Tensor add(const Tensor& a, const Tensor& b) {
  auto an = need(a, "add"), bn = need(b, "add");
  check_same_shape("add", *an, *bn);
  auto out = make_op("add", an->shape, {an, bn});
  for (std::size_t i = 0; i < an->val.size(); ++i) out->val[i] = an->val[i] + bn->val[i];
  Node* ap = an.get();
  Node* bp = bn.get();
  out->backprop = [ap, bp](Node& self) {
    if (ap->requires_grad) {
      ensure_grad(*ap);
      for (std::size_t i = 0; i < self.grad.size(); ++i) ap->grad[i] += self.grad[i];
    }
    if (bp->requires_grad) {
      ensure_grad(*bp);
      for (std::size_t i = 0; i < self.grad.size(); ++i) bp->grad[i] += self.grad[i];
    }
  };
  return wrap(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  auto an = need(a, "mul"), bn = need(b, "mul");
  check_same_shape("mul", *an, *bn);
  auto out = make_op("mul", an->shape, {an, bn});
  for (std::size_t i = 0; i < an->val.size(); ++i) out->val[i] = an->val[i] * bn->val[i];
  Node* ap = an.get();
  Node* bp = bn.get();
  out->backprop = [ap, bp](Node& self) {
    if (ap->requires_grad) {
      ensure_grad(*ap);
      for (std::size_t i = 0; i < self.grad.size(); ++i) ap->grad[i] += self.grad[i] * bp->val[i];
    }
    if (bp->requires_grad) {
      ensure_grad(*bp);
      for (std::size_t i = 0; i < self.grad.size(); ++i) bp->grad[i] += self.grad[i] * ap->val[i];
    }
  };
  return wrap(out);
}

Tensor scale(const Tensor& a, double c) {
  auto an = need(a, "scale");
  auto out = make_op("scale", an->shape, {an});
  for (std::size_t i = 0; i < an->val.size(); ++i) out->val[i] = c * an->val[i];
  Node* ap = an.get();
  out->backprop = [ap, c](Node& self) {
    if (!ap->requires_grad) return;
    ensure_grad(*ap);
    for (std::size_t i = 0; i < self.grad.size(); ++i) ap->grad[i] += c * self.grad[i];
  };
  return wrap(out);
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  auto an = need(a, "concat"), bn = need(b, "concat");
  if (an->shape.size() != 4 || bn->shape.size() != 4) {
    throw ShapeError("concat: need 4-d NCHW tensors, got " + shape_str(an->shape) + " and " +
                     shape_str(bn->shape));
  }
  if (an->shape[0] != bn->shape[0] || an->shape[2] != bn->shape[2] ||
      an->shape[3] != bn->shape[3]) {
    throw ShapeError("concat: incompatible shapes " + shape_str(an->shape) + " vs " +
                     shape_str(bn->shape));
  }
  const int n = an->shape[0], ca = an->shape[1], cb = bn->shape[1];
  const int hw = an->shape[2] * an->shape[3];
  auto out = make_op("concat", {n, ca + cb, an->shape[2], an->shape[3]}, {an, bn});
  for (int b0 = 0; b0 < n; ++b0) {
    std::memcpy(&out->val[static_cast<std::size_t>(b0) * (ca + cb) * hw],
                &an->val[static_cast<std::size_t>(b0) * ca * hw], sizeof(double) * ca * hw);
    std::memcpy(&out->val[(static_cast<std::size_t>(b0) * (ca + cb) + ca) * hw],
                &bn->val[static_cast<std::size_t>(b0) * cb * hw], sizeof(double) * cb * hw);
  }
  Node* ap = an.get();
  Node* bp = bn.get();
  out->backprop = [ap, bp, n, ca, cb, hw](Node& self) {
    for (int b0 = 0; b0 < n; ++b0) {
      if (ap->requires_grad) {
        ensure_grad(*ap);
        const double* src = &self.grad[static_cast<std::size_t>(b0) * (ca + cb) * hw];
        double* dst = &ap->grad[static_cast<std::size_t>(b0) * ca * hw];
        for (int i = 0; i < ca * hw; ++i) dst[i] += src[i];
      }
      if (bp->requires_grad) {
        ensure_grad(*bp);
        const double* src = &self.grad[(static_cast<std::size_t>(b0) * (ca + cb) + ca) * hw];
        double* dst = &bp->grad[static_cast<std::size_t>(b0) * cb * hw];
        for (int i = 0; i < cb * hw; ++i) dst[i] += src[i];
      }
    }
  };
  return wrap(out);
}

// --- Convolutions and pooling ----------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad) {
  auto xn = need(x, "conv2d"), wn = need(w, "conv2d");
  if (xn->shape.size() != 4 || wn->shape.size() != 4) {
    throw ShapeError("conv2d: need x [N,C,H,W] and w [F,C,kh,kw], got " + shape_str(xn->shape) +
                     " and " + shape_str(wn->shape));
  }
  if (xn->shape[1] != wn->shape[1]) {
    throw ShapeError("conv2d: channel mismatch " + shape_str(xn->shape) + " vs " +
                     shape_str(wn->shape));
  }
  if (stride < 1 || pad < 0) throw ShapeError("conv2d: bad stride/pad");
  const int N = xn->shape[0], C = xn->shape[1], H = xn->shape[2], W = xn->shape[3];
  const int F = wn->shape[0], kh = wn->shape[2], kw = wn->shape[3];
  const int Ho = (H + 2 * pad - kh) / stride + 1;
  const int Wo = (W + 2 * pad - kw) / stride + 1;
  if (H + 2 * pad < kh || W + 2 * pad < kw) {
    throw ShapeError("conv2d: kernel larger than padded input, " + shape_str(xn->shape) + " vs " +
                     shape_str(wn->shape));
  }

  std::shared_ptr<Node> bn;
  if (bias.defined()) {
    bn = bias.node();
    if (bn->shape != Shape{F}) {
      throw ShapeError("conv2d: bias shape " + shape_str(bn->shape) + " does not match filters " +
                       std::to_string(F));
    }
  }

  std::vector<std::shared_ptr<Node>> parents{xn, wn};
  if (bn) parents.push_back(bn);
  auto out = make_op("conv2d", {N, F, Ho, Wo}, std::move(parents));

  const double* xv = xn->val.data();
  const double* wv = wn->val.data();
  double* ov = out->val.data();
  for (int n = 0; n < N; ++n) {
    for (int f = 0; f < F; ++f) {
      const double b0 = bn ? bn->val[f] : 0.0;
      for (int oy = 0; oy < Ho; ++oy) {
        const int iy0 = oy * stride - pad;
        const int ky_lo = iy0 < 0 ? -iy0 : 0;
        const int ky_hi = iy0 + kh > H ? H - iy0 : kh;
        for (int ox = 0; ox < Wo; ++ox) {
          const int ix0 = ox * stride - pad;
          const int kx_lo = ix0 < 0 ? -ix0 : 0;
          const int kx_hi = ix0 + kw > W ? W - ix0 : kw;
          double acc = b0;
          for (int c = 0; c < C; ++c) {
            const double* xc = xv + (static_cast<std::size_t>(n) * C + c) * H * W;
            const double* wf = wv + (static_cast<std::size_t>(f) * C + c) * kh * kw;
            for (int ky = ky_lo; ky < ky_hi; ++ky) {
              const double* xrow = xc + static_cast<std::size_t>(iy0 + ky) * W + ix0;
              const double* wrow = wf + static_cast<std::size_t>(ky) * kw;
              for (int kx = kx_lo; kx < kx_hi; ++kx) acc += xrow[kx] * wrow[kx];
            }
          }
          ov[((static_cast<std::size_t>(n) * F + f) * Ho + oy) * Wo + ox] = acc;
        }
      }
    }
  }

  Node* xp = xn.get();
  Node* wp = wn.get();
  Node* bp = bn ? bn.get() : nullptr;
  out->backprop = [xp, wp, bp, N, C, H, W, F, kh, kw, Ho, Wo, stride, pad](Node& self) {
    const bool dx = xp->requires_grad, dw = wp->requires_grad;
    const bool db = bp && bp->requires_grad;
    if (dx) ensure_grad(*xp);
    if (dw) ensure_grad(*wp);
    if (db) ensure_grad(*bp);
    if (!dx && !dw && !db) return;
    const double* gv = self.grad.data();
    for (int n = 0; n < N; ++n) {
      for (int f = 0; f < F; ++f) {
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy0 = oy * stride - pad;
          const int ky_lo = iy0 < 0 ? -iy0 : 0;
          const int ky_hi = iy0 + kh > H ? H - iy0 : kh;
          for (int ox = 0; ox < Wo; ++ox) {
            const double g = gv[((static_cast<std::size_t>(n) * F + f) * Ho + oy) * Wo + ox];
            if (g == 0.0) continue;
            const int ix0 = ox * stride - pad;
            const int kx_lo = ix0 < 0 ? -ix0 : 0;
            const int kx_hi = ix0 + kw > W ? W - ix0 : kw;
            if (db) bp->grad[f] += g;
            for (int c = 0; c < C; ++c) {
              const std::size_t xoff = (static_cast<std::size_t>(n) * C + c) * H * W;
              const std::size_t woff = (static_cast<std::size_t>(f) * C + c) * kh * kw;
              for (int ky = ky_lo; ky < ky_hi; ++ky) {
                const double* xrow = xp->val.data() + xoff + static_cast<std::size_t>(iy0 + ky) * W + ix0;
                const double* wrow = wp->val.data() + woff + static_cast<std::size_t>(ky) * kw;
                double* dxrow = dx ? xp->grad.data() + xoff + static_cast<std::size_t>(iy0 + ky) * W + ix0
                                   : nullptr;
                double* dwrow = dw ? wp->grad.data() + woff + static_cast<std::size_t>(ky) * kw
                                   : nullptr;
                if (dx && dw) {
                  for (int kx = kx_lo; kx < kx_hi; ++kx) {
                    dxrow[kx] += g * wrow[kx];
                    dwrow[kx] += g * xrow[kx];
                  }
                } else if (dx) {
                  for (int kx = kx_lo; kx < kx_hi; ++kx) dxrow[kx] += g * wrow[kx];
                } else if (dw) {
                  for (int kx = kx_lo; kx < kx_hi; ++kx) dwrow[kx] += g * xrow[kx];
                }
              }
            }
          }
        }
      }
    }
  };
  return wrap(out);
}

Tensor transpose_conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad) {
  auto xn = need(x, "transpose_conv2d"), wn = need(w, "transpose_conv2d");
  if (xn->shape.size() != 4 || wn->shape.size() != 4) {
    throw ShapeError("transpose_conv2d: need x [N,Cin,H,W] and w [Cin,Cout,kh,kw], got " +
                     shape_str(xn->shape) + " and " + shape_str(wn->shape));
  }
  if (xn->shape[1] != wn->shape[0]) {
    throw ShapeError("transpose_conv2d: channel mismatch " + shape_str(xn->shape) + " vs " +
                     shape_str(wn->shape));
  }
  if (stride < 1 || pad < 0) throw ShapeError("transpose_conv2d: bad stride/pad");
  const int N = xn->shape[0], C = xn->shape[1], H = xn->shape[2], W = xn->shape[3];
  const int F = wn->shape[1], kh = wn->shape[2], kw = wn->shape[3];
  const int Ho = (H - 1) * stride - 2 * pad + kh;
  const int Wo = (W - 1) * stride - 2 * pad + kw;
  if (Ho < 1 || Wo < 1) {
    throw ShapeError("transpose_conv2d: empty output for input " + shape_str(xn->shape));
  }

  std::shared_ptr<Node> bn;
  if (bias.defined()) {
    bn = bias.node();
    if (bn->shape != Shape{F}) {
      throw ShapeError("transpose_conv2d: bias shape " + shape_str(bn->shape) +
                       " does not match filters " + std::to_string(F));
    }
  }

  std::vector<std::shared_ptr<Node>> parents{xn, wn};
  if (bn) parents.push_back(bn);
  auto out = make_op("transpose_conv2d", {N, F, Ho, Wo}, std::move(parents));

  double* ov = out->val.data();
  if (bn) {
    for (int n = 0; n < N; ++n)
      for (int f = 0; f < F; ++f) {
        double* dst = ov + (static_cast<std::size_t>(n) * F + f) * Ho * Wo;
        std::fill(dst, dst + static_cast<std::size_t>(Ho) * Wo, bn->val[f]);
      }
  }
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const double* xc = xn->val.data() + (static_cast<std::size_t>(n) * C + c) * H * W;
      for (int iy = 0; iy < H; ++iy) {
        const int oy0 = iy * stride - pad;
        const int ky_lo = oy0 < 0 ? -oy0 : 0;
        const int ky_hi = oy0 + kh > Ho ? Ho - oy0 : kh;
        for (int ix = 0; ix < W; ++ix) {
          const double v = xc[static_cast<std::size_t>(iy) * W + ix];
          if (v == 0.0) continue;
          const int ox0 = ix * stride - pad;
          const int kx_lo = ox0 < 0 ? -ox0 : 0;
          const int kx_hi = ox0 + kw > Wo ? Wo - ox0 : kw;
          for (int f = 0; f < F; ++f) {
            const double* wf = wn->val.data() + (static_cast<std::size_t>(c) * F + f) * kh * kw;
            double* of = ov + (static_cast<std::size_t>(n) * F + f) * Ho * Wo;
            for (int ky = ky_lo; ky < ky_hi; ++ky) {
              double* orow = of + static_cast<std::size_t>(oy0 + ky) * Wo + ox0;
              const double* wrow = wf + static_cast<std::size_t>(ky) * kw;
              for (int kx = kx_lo; kx < kx_hi; ++kx) orow[kx] += v * wrow[kx];
            }
          }
        }
      }
    }
  }

  Node* xp = xn.get();
  Node* wp = wn.get();
  Node* bp = bn ? bn.get() : nullptr;
  out->backprop = [xp, wp, bp, N, C, H, W, F, kh, kw, Ho, Wo, stride, pad](Node& self) {
    const bool dx = xp->requires_grad, dw = wp->requires_grad;
    const bool db = bp && bp->requires_grad;
    if (dx) ensure_grad(*xp);
    if (dw) ensure_grad(*wp);
    if (db) ensure_grad(*bp);
    if (!dx && !dw && !db) return;
    const double* gv = self.grad.data();
    if (db) {
      for (int n = 0; n < N; ++n)
        for (int f = 0; f < F; ++f) {
          const double* gf = gv + (static_cast<std::size_t>(n) * F + f) * Ho * Wo;
          double acc = 0.0;
          for (int i = 0; i < Ho * Wo; ++i) acc += gf[i];
          bp->grad[f] += acc;
        }
    }
    for (int n = 0; n < N; ++n) {
      for (int c = 0; c < C; ++c) {
        const std::size_t xoff = (static_cast<std::size_t>(n) * C + c) * H * W;
        for (int iy = 0; iy < H; ++iy) {
          const int oy0 = iy * stride - pad;
          const int ky_lo = oy0 < 0 ? -oy0 : 0;
          const int ky_hi = oy0 + kh > Ho ? Ho - oy0 : kh;
          for (int ix = 0; ix < W; ++ix) {
            const std::size_t xi = xoff + static_cast<std::size_t>(iy) * W + ix;
            const int ox0 = ix * stride - pad;
            const int kx_lo = ox0 < 0 ? -ox0 : 0;
            const int kx_hi = ox0 + kw > Wo ? Wo - ox0 : kw;
            const double xval = xp->val[xi];
            double dxacc = 0.0;
            for (int f = 0; f < F; ++f) {
              const std::size_t woff = (static_cast<std::size_t>(c) * F + f) * kh * kw;
              const double* gf = gv + (static_cast<std::size_t>(n) * F + f) * Ho * Wo;
              for (int ky = ky_lo; ky < ky_hi; ++ky) {
                const double* grow = gf + static_cast<std::size_t>(oy0 + ky) * Wo + ox0;
                const double* wrow = wp->val.data() + woff + static_cast<std::size_t>(ky) * kw;
                double* dwrow = dw ? wp->grad.data() + woff + static_cast<std::size_t>(ky) * kw
                                   : nullptr;
                if (dx && dw) {
                  for (int kx = kx_lo; kx < kx_hi; ++kx) {
                    dxacc += grow[kx] * wrow[kx];
                    dwrow[kx] += grow[kx] * xval;
                  }
                } else if (dx) {
                  for (int kx = kx_lo; kx < kx_hi; ++kx) dxacc += grow[kx] * wrow[kx];
                } else if (dw) {
                  for (int kx = kx_lo; kx < kx_hi; ++kx) dwrow[kx] += grow[kx] * xval;
                }
              }
            }
            if (dx) xp->grad[xi] += dxacc;
          }
        }
      }
    }
  };
  return wrap(out);
}

Tensor max_pool2d(const Tensor& x) {
  auto xn = need(x, "max_pool2d");
  if (xn->shape.size() != 4) {
    throw ShapeError("max_pool2d: need NCHW tensor, got " + shape_str(xn->shape));
  }
  const int N = xn->shape[0], C = xn->shape[1], H = xn->shape[2], W = xn->shape[3];
  if (H % 2 != 0 || W % 2 != 0) {
    throw ShapeError("max_pool2d: spatial dims must be even, got " + shape_str(xn->shape));
  }
  const int Ho = H / 2, Wo = W / 2;
  auto out = make_op("max_pool2d", {N, C, Ho, Wo}, {xn});
  std::vector<std::uint32_t> argmax(out->val.size());
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const double* xc = xn->val.data() + (static_cast<std::size_t>(n) * C + c) * H * W;
      for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) {
          std::uint32_t best_i = static_cast<std::uint32_t>((2 * oy) * W + 2 * ox);
          double best = xc[best_i];
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const std::uint32_t i = static_cast<std::uint32_t>((2 * oy + dy) * W + 2 * ox + dx);
              if (xc[i] > best) {  // first max wins ties
                best = xc[i];
                best_i = i;
              }
            }
          }
          const std::size_t o = ((static_cast<std::size_t>(n) * C + c) * Ho + oy) * Wo + ox;
          out->val[o] = best;
          argmax[o] = best_i;
        }
      }
    }
  }
  Node* xp = xn.get();
  out->backprop = [xp, argmax = std::move(argmax), N, C, H, W, Ho, Wo](Node& self) {
    if (!xp->requires_grad) return;
    ensure_grad(*xp);
    for (int n = 0; n < N; ++n) {
      for (int c = 0; c < C; ++c) {
        const std::size_t xoff = (static_cast<std::size_t>(n) * C + c) * H * W;
        const std::size_t ooff = (static_cast<std::size_t>(n) * C + c) * Ho * Wo;
        for (int i = 0; i < Ho * Wo; ++i) {
          xp->grad[xoff + argmax[ooff + i]] += self.grad[ooff + i];
        }
      }
    }
  };
  return wrap(out);
}

// --- Losses ------------------------------------------------------------------

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  auto pn = need(pred, "mse_loss"), tn = need(target, "mse_loss");
  check_same_shape("mse_loss", *pn, *tn);
  auto out = make_op("mse_loss", {1}, {pn, tn});
  const std::size_t K = pn->val.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < K; ++i) {
    const double d = pn->val[i] - tn->val[i];
    acc += d * d;
  }
  out->val[0] = acc / static_cast<double>(K);
  Node* pp = pn.get();
  Node* tp = tn.get();
  out->backprop = [pp, tp, K](Node& self) {
    const double g = self.grad[0] * 2.0 / static_cast<double>(K);
    if (pp->requires_grad) {
      ensure_grad(*pp);
      for (std::size_t i = 0; i < K; ++i) pp->grad[i] += g * (pp->val[i] - tp->val[i]);
    }
    if (tp->requires_grad) {
      ensure_grad(*tp);
      for (std::size_t i = 0; i < K; ++i) tp->grad[i] += g * (tp->val[i] - pp->val[i]);
    }
  };
  return wrap(out);
}

Tensor bce_loss(const Tensor& pred, const Tensor& target) {
  auto pn = need(pred, "bce_loss"), tn = need(target, "bce_loss");
  check_same_shape("bce_loss", *pn, *tn);
  auto out = make_op("bce_loss", {1}, {pn, tn});
  const std::size_t K = pn->val.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < K; ++i) {
    const double p = std::clamp(pn->val[i], kBceLo, kBceHi);
    const double t = tn->val[i];
    acc -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
  }
  out->val[0] = acc / static_cast<double>(K);
  Node* pp = pn.get();
  Node* tp = tn.get();
  out->backprop = [pp, tp, K](Node& self) {
    const double g = self.grad[0] / static_cast<double>(K);
    if (pp->requires_grad) {
      ensure_grad(*pp);
      for (std::size_t i = 0; i < K; ++i) {
        const double raw = pp->val[i];
        if (raw <= kBceLo || raw >= kBceHi) continue;  // clamped: zero gradient
        pp->grad[i] += g * (raw - tp->val[i]) / (raw * (1.0 - raw));
      }
    }
    if (tp->requires_grad) {
      ensure_grad(*tp);
      for (std::size_t i = 0; i < K; ++i) {
        const double p = std::clamp(pp->val[i], kBceLo, kBceHi);
        tp->grad[i] += g * (std::log(1.0 - p) - std::log(p));
      }
    }
  };
  return wrap(out);
}

// --- Reverse pass -------------------------------------------------------------

void backward(const Tensor& loss) {
  const auto& root = need(loss, "backward");
  if (root->val.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_str(root->shape));
  }

  // Iterative post-order DFS; reversing it yields each node before its parents.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  ensure_grad(*root);
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && n->requires_grad) n->backprop(*n);
  }
}

void zero_grads(std::vector<Tensor>& params) {
  for (auto& p : params) p.zero_grad();
}

void adam_step(std::vector<Tensor>& params, AdamState& state, double lr, double beta1, double beta2,
               double eps) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].numel(), 0.0);
      state.v[i].assign(params[i].numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: state/param count mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].values();
    if (state.m[i].size() != p.size()) throw ShapeError("adam_step: parameter size changed");
    const bool hg = params[i].has_grad();
    const std::vector<double>* g = hg ? &params[i].grad() : nullptr;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g ? (*g)[j] : 0.0;
      state.m[i][j] = beta1 * state.m[i][j] + (1.0 - beta1) * gj;
      state.v[i][j] = beta2 * state.v[i][j] + (1.0 - beta2) * gj * gj;
      const double mhat = state.m[i][j] / bc1;
      const double vhat = state.v[i][j] / bc2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

// --- Checkpoints ---------------------------------------------------------------

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& tensors) {
  nlohmann::json header;
  header["tensors"] = nlohmann::json::array();
  for (const auto& [name, t] : tensors) {
    nlohmann::json jt;
    jt["name"] = name;
    jt["shape"] = t.shape();
    jt["dtype"] = "f64";
    header["tensors"].push_back(std::move(jt));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write checkpoint " + path);
  f << header.dump() << '\n';
  for (const auto& [name, t] : tensors) {
    (void)name;
    const auto& v = t.values();
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  if (!f) throw DataError("short write to checkpoint " + path);
}

std::vector<CheckpointEntry> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint " + path);
  std::string header_line;
  if (!std::getline(f, header_line)) throw DataError("checkpoint missing header: " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint header parse error in " + path + ": " + e.what());
  }
  std::vector<CheckpointEntry> out;
  for (const auto& jt : header.at("tensors")) {
    CheckpointEntry e;
    e.name = jt.at("name").get<std::string>();
    e.shape = jt.at("shape").get<Shape>();
    if (jt.at("dtype").get<std::string>() != "f64") {
      throw DataError("checkpoint tensor " + e.name + " has unsupported dtype");
    }
    e.values.resize(shape_numel(e.shape));
    f.read(reinterpret_cast<char*>(e.values.data()),
           static_cast<std::streamsize>(e.values.size() * sizeof(double)));
    if (!f) throw DataError("checkpoint payload truncated for tensor " + e.name + " in " + path);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace tire::ad
