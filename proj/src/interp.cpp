#include "tire/interp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>

#include "tire/linalg.hpp"
#include "tire/parallel.hpp"
#include "tire/rng.hpp"

namespace tire {

double VariogramModel::operator()(double h) const {
  return nugget + (sill - nugget) * (1.0 - std::exp(-3.0 * h / range_param));
}

void VariogramModel::validate() const {
  if (nugget < 0.0) throw ConfigError("variogram nugget must be >= 0");
  if (!(sill > nugget)) throw ConfigError("variogram sill must exceed nugget");
  if (!(range_param > 0.0)) throw ConfigError("variogram range must be > 0");
}

Grid idw_interpolate(const SampleSet& s, double power) {
  if (s.empty()) throw ConfigError("idw_interpolate: empty sample set");
  if (!(power > 0.0)) throw ConfigError("idw power must be > 0");
  const auto& samples = s.entries();
  Grid out(s.width(), s.height());
  parallel_for(static_cast<std::size_t>(s.height()), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < s.width(); ++x) {
      const PixelCoord here{x, y};
      double num = 0.0, den = 0.0;
      bool exact = false;
      for (const auto& e : samples) {
        const double d = euclidean_distance(here, e.coord);
        if (d == 0.0) {
          out(x, y) = e.value;
          exact = true;
          break;
        }
        const double w = std::pow(d, -power);
        num += w * e.value;
        den += w;
      }
      if (!exact) out(x, y) = num / den;
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Variogram fitting

namespace {

// Plain Nelder-Mead, good enough for a 3-parameter least-squares fit.
std::pair<std::vector<double>, double> nelder_mead(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
    int max_iter) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> simplex(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) {
    simplex[i + 1][i] += (x0[i] != 0.0 ? 0.1 * std::abs(x0[i]) : 0.05);
  }
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fv[i] = f(simplex[i]);

  for (int iter = 0; iter < max_iter; ++iter) {
    std::vector<std::size_t> ord(n + 1);
    for (std::size_t i = 0; i <= n; ++i) ord[i] = i;
    std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t best = ord[0], worst = ord[n], second = ord[n - 1];
    if (std::abs(fv[worst] - fv[best]) <= 1e-15 * (1.0 + std::abs(fv[best]))) break;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t d = 0; d < n; ++d) centroid[d] += simplex[i][d] / static_cast<double>(n);
    }
    auto blend = [&](double t) {
      std::vector<double> p(n);
      for (std::size_t d = 0; d < n; ++d) p[d] = centroid[d] + t * (simplex[worst][d] - centroid[d]);
      return p;
    };

    const auto refl = blend(-1.0);
    const double f_refl = f(refl);
    if (f_refl < fv[best]) {
      const auto expanded = blend(-2.0);
      const double f_exp = f(expanded);
      if (f_exp < f_refl) {
        simplex[worst] = expanded;
        fv[worst] = f_exp;
      } else {
        simplex[worst] = refl;
        fv[worst] = f_refl;
      }
    } else if (f_refl < fv[second]) {
      simplex[worst] = refl;
      fv[worst] = f_refl;
    } else {
      const auto contracted = blend(0.5);
      const double f_con = f(contracted);
      if (f_con < fv[worst]) {
        simplex[worst] = contracted;
        fv[worst] = f_con;
      } else {
        for (std::size_t i = 0; i <= n; ++i) {
          if (i == best) continue;
          for (std::size_t d = 0; d < n; ++d) {
            simplex[i][d] = simplex[best][d] + 0.5 * (simplex[i][d] - simplex[best][d]);
          }
          fv[i] = f(simplex[i]);
        }
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    if (fv[i] < fv[best]) best = i;
  }
  return {simplex[best], fv[best]};
}

}  // namespace

VariogramModel fit_variogram(const SampleSet& s, int n_bins, std::uint64_t seed) {
  if (s.size() < 8) {
    throw ConfigError("fit_variogram needs at least 8 samples, got " + std::to_string(s.size()));
  }
  if (n_bins < 2) throw ConfigError("fit_variogram needs at least 2 bins");

  const auto& e = s.entries();
  double hmax = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    for (std::size_t j = i + 1; j < e.size(); ++j) {
      hmax = std::max(hmax, euclidean_distance(e[i].coord, e[j].coord));
    }
  }
  if (hmax == 0.0) throw ConfigError("fit_variogram: all samples at one location");

  std::vector<double> sum_h(n_bins, 0.0), sum_g(n_bins, 0.0);
  std::vector<std::size_t> count(n_bins, 0);
  for (std::size_t i = 0; i < e.size(); ++i) {
    for (std::size_t j = i + 1; j < e.size(); ++j) {
      const double h = euclidean_distance(e[i].coord, e[j].coord);
      const double dv = e[i].value - e[j].value;
      const int bin = std::min(n_bins - 1, static_cast<int>(h / hmax * n_bins));
      sum_h[bin] += h;
      sum_g[bin] += 0.5 * dv * dv;
      ++count[bin];
    }
  }
  std::vector<double> bh, bg;
  for (int b = 0; b < n_bins; ++b) {
    if (count[b] == 0) continue;
    bh.push_back(sum_h[b] / static_cast<double>(count[b]));
    bg.push_back(sum_g[b] / static_cast<double>(count[b]));
  }
  double gmax = 0.0;
  for (double g : bg) gmax = std::max(gmax, g);

  // Parameters squared to stay positive: nugget = a^2, sill = a^2 + b^2, range = c^2.
  const auto objective = [&](const std::vector<double>& p) {
    const double nugget = p[0] * p[0];
    const double excess = p[1] * p[1];
    const double range = std::max(p[2] * p[2], 1e-9);
    double sse = 0.0;
    for (std::size_t i = 0; i < bh.size(); ++i) {
      const double model = nugget + excess * (1.0 - std::exp(-3.0 * bh[i] / range));
      const double r = model - bg[i];
      sse += r * r;
    }
    return sse;
  };

  Rng rng(mix_seed(seed, 0xf17ULL));
  std::vector<std::vector<double>> starts;
  starts.push_back({0.0, std::sqrt(std::max(gmax, 1e-12)), std::sqrt(hmax / 3.0)});
  starts.push_back({std::sqrt(0.1 * gmax + 1e-15), std::sqrt(std::max(0.9 * gmax, 1e-12)),
                    std::sqrt(hmax / 10.0)});
  for (int i = 0; i < 6; ++i) {
    starts.push_back({std::sqrt(rng.uniform(0.0, 0.5 * gmax) + 1e-15),
                      std::sqrt(rng.uniform(0.2 * gmax, 1.5 * gmax) + 1e-12),
                      std::sqrt(rng.uniform(hmax / 10.0, hmax))});
  }

  std::vector<double> best;
  double best_f = HUGE_VAL;
  for (const auto& s0 : starts) {
    auto [x, fx] = nelder_mead(objective, s0, 400);
    if (fx < best_f) {
      best_f = fx;
      best = x;
    }
  }

  VariogramModel m;
  m.nugget = best[0] * best[0];
  m.sill = m.nugget + std::max(best[1] * best[1], 1e-12);
  m.range_param = std::max(best[2] * best[2], 1e-6);
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Ordinary kriging

KrigingResult kriging_interpolate(const SampleSet& s, const VariogramModel& v) {
  if (s.empty()) throw ConfigError("kriging_interpolate: empty sample set");
  v.validate();
  const std::size_t k = s.size();
  if (k > 4096) {
    throw ConfigError("kriging_interpolate: " + std::to_string(k) +
                      " samples exceed the dense-solver limit (4096)");
  }
  const auto& e = s.entries();

  Mat m(k + 1);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      m(i, j) = v(euclidean_distance(e[i].coord, e[j].coord));
    }
    m(i, k) = 1.0;
    m(k, i) = 1.0;
  }
  m(k, k) = 0.0;
  const LuFactors lu = lu_factor(std::move(m));

  KrigingResult res;
  res.grid = Grid(s.width(), s.height());
  std::vector<int> row_fallbacks(static_cast<std::size_t>(s.height()), 0);
  std::vector<double> row_wsum_err(static_cast<std::size_t>(s.height()), 0.0);

  parallel_for(static_cast<std::size_t>(s.height()), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    std::vector<double> rhs(k + 1);
    for (int x = 0; x < s.width(); ++x) {
      const PixelCoord here{x, y};
      bool ok = !lu.singular;
      double pred = 0.0;
      if (ok) {
        for (std::size_t i = 0; i < k; ++i) rhs[i] = v(euclidean_distance(here, e[i].coord));
        rhs[k] = 1.0;
        const auto w = lu_solve(lu, rhs);
        double wsum = 0.0;
        pred = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
          pred += w[i] * e[i].value;
          wsum += w[i];
        }
        ok = std::isfinite(pred) && std::abs(wsum - 1.0) <= 1e-10;
        if (ok) row_wsum_err[row] = std::max(row_wsum_err[row], std::abs(wsum - 1.0));
      }
      if (ok) {
        res.grid(x, y) = pred;
      } else {
        ++row_fallbacks[row];
        double num = 0.0, den = 0.0;
        bool exact = false;
        for (const auto& smp : e) {
          const double d = euclidean_distance(here, smp.coord);
          if (d == 0.0) {
            res.grid(x, y) = smp.value;
            exact = true;
            break;
          }
          const double wgt = 1.0 / (d * d);
          num += wgt * smp.value;
          den += wgt;
        }
        if (!exact) res.grid(x, y) = num / den;
      }
    }
  });
  for (int c : row_fallbacks) res.fallback_pixels += c;
  for (double werr : row_wsum_err) res.max_weight_sum_error = std::max(res.max_weight_sum_error, werr);
  return res;
}

}  // namespace tire
