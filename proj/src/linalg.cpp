#include "tire/linalg.hpp"

#include <cmath>
#include <numeric>

#include "tire/error.hpp"

namespace tire {

LuFactors lu_factor(Mat m) {
  const std::size_t n = m.n;
  LuFactors f;
  f.perm.resize(n);
  std::iota(f.perm.begin(), f.perm.end(), 0u);

  double scale = 0.0;
  for (double v : m.a) scale = std::max(scale, std::abs(v));
  const double tol = std::max(scale, 1.0) * 1e-13;

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    double best = std::abs(m(k, k));
    for (std::size_t r = k + 1; r < n; ++r) {
      const double v = std::abs(m(r, k));
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (best < tol) {
      f.singular = true;
      break;
    }
    if (pivot != k) {
      for (std::size_t c = 0; c < n; ++c) std::swap(m(k, c), m(pivot, c));
      std::swap(f.perm[k], f.perm[pivot]);
    }
    for (std::size_t r = k + 1; r < n; ++r) {
      const double factor = m(r, k) / m(k, k);
      m(r, k) = factor;
      for (std::size_t c = k + 1; c < n; ++c) m(r, c) -= factor * m(k, c);
    }
  }
  f.lu = std::move(m);
  return f;
}

std::vector<double> lu_solve(const LuFactors& f, const std::vector<double>& rhs) {
  if (f.singular) throw NumericError("lu_solve: singular factorization");
  const std::size_t n = f.lu.n;
  if (rhs.size() != n) throw ShapeError("lu_solve: rhs size mismatch");

  std::vector<double> x(n);
  for (std::size_t r = 0; r < n; ++r) x[r] = rhs[f.perm[r]];
  // Ly = Pb
  for (std::size_t r = 1; r < n; ++r) {
    double s = x[r];
    for (std::size_t c = 0; c < r; ++c) s -= f.lu(r, c) * x[c];
    x[r] = s;
  }
  // Ux = y
  for (std::size_t ri = n; ri-- > 0;) {
    double s = x[ri];
    for (std::size_t c = ri + 1; c < n; ++c) s -= f.lu(ri, c) * x[c];
    x[ri] = s / f.lu(ri, ri);
  }
  return x;
}

}  // namespace tire
