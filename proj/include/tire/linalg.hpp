#pragma once

#include <cstddef>
#include <vector>

namespace tire {

// Row-major dense matrix, just big enough for the kriging systems.
struct Mat {
  std::size_t n = 0;
  std::vector<double> a;  // n*n

  Mat() = default;
  explicit Mat(std::size_t n_) : n(n_), a(n_ * n_, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return a[r * n + c]; }
  double operator()(std::size_t r, std::size_t c) const { return a[r * n + c]; }
};

// LU factorization with partial pivoting. singular is set when a pivot
// underflows the scaled tolerance; solves against a singular factorization
// are invalid.
struct LuFactors {
  Mat lu;
  std::vector<std::size_t> perm;
  bool singular = false;
};

LuFactors lu_factor(Mat m);
std::vector<double> lu_solve(const LuFactors& f, const std::vector<double>& rhs);

}  // namespace tire
