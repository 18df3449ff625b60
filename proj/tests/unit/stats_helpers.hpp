#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace shmm::testing {

/// CDF of t = mu^T m for m ~ vMF_p(mu, kappa): density proportional to
/// (1 - t^2)^{(p-3)/2} exp(kappa t) on [-1, 1], tabulated by the trapezoid rule.
class CosineMarginal {
 public:
  CosineMarginal(int p, double kappa, int grid = 400000) : grid_(grid + 1), cdf_(grid + 1, 0.0) {
    std::vector<double> log_f(grid_);
    double max_log = -INFINITY;
    for (int i = 0; i < grid_; ++i) {
      const double t = -1.0 + 2.0 * i / grid;
      const double one_minus = (1.0 - t) * (1.0 + t);
      log_f[i] = (one_minus <= 0.0 && p != 3) ? -INFINITY
                                               : 0.5 * (p - 3) * std::log(std::max(one_minus, 1e-300)) + kappa * t;
      if (p == 3) log_f[i] = kappa * t;
      max_log = std::max(max_log, log_f[i]);
    }
    const double h = 2.0 / grid;
    for (int i = 1; i < grid_; ++i) {
      cdf_[i] = cdf_[i - 1] + 0.5 * h * (std::exp(log_f[i - 1] - max_log) + std::exp(log_f[i] - max_log));
    }
    for (double& c : cdf_) c /= cdf_.back();
  }

  double operator()(double t) const {
    const double pos = (t + 1.0) * 0.5 * (grid_ - 1);
    if (pos <= 0.0) return 0.0;
    if (pos >= grid_ - 1) return 1.0;
    const int i = static_cast<int>(pos);
    const double frac = pos - i;
    return cdf_[i] * (1.0 - frac) + cdf_[i + 1] * frac;
  }

 private:
  int grid_;
  std::vector<double> cdf_;
};

/// One-sample Kolmogorov-Smirnov statistic.
template <class Cdf>
double ks_statistic(std::vector<double> samples, const Cdf& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, f - i / n, (i + 1) / n - f});
  }
  return d;
}

/// Asymptotic KS critical value at significance 0.01.
inline double ks_critical_001(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

}  // namespace shmm::testing
