#pragma once

// Independent reference computations used only by the tests. Nothing here
// shares code with the library's evaluation paths.

#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <functional>
#include <vector>

namespace shmm::oracle {

using Big = boost::multiprecision::cpp_bin_float_50;

/// log I_v(x) by direct power-series summation in 50-digit arithmetic.
inline double log_bessel_i_series(double v, double x) {
  const Big bx(x);
  const Big bv(v);
  const Big q2 = bx * bx / 4;
  Big term = 1;
  Big sum = 1;
  for (int q = 1; q < 100000; ++q) {
    term *= q2 / (Big(q) * (Big(q) + bv));
    sum += term;
    if (term < sum * Big("1e-45")) break;
  }
  const Big log_i = bv * log(bx / 2) - boost::math::lgamma(bv + 1) + log(sum);
  return static_cast<double>(log_i);
}

/// A_p(x) = I_{p/2}(x) / I_{p/2-1}(x) from the two power series, 50 digits.
inline Big bessel_ratio_series_big(int p, const Big& x) {
  const Big nu = Big(p) / 2;
  const Big q2 = x * x / 4;
  Big s = 1;
  Big num = 1 / nu;
  Big den = 1;
  for (int q = 1; q < 100000; ++q) {
    s *= q2 / (Big(q) * (Big(q) + nu - 1));
    den += s;
    num += s / (Big(q) + nu);
    if (s < den * Big("1e-48")) break;
  }
  return x / 2 * num / den;
}

inline double bessel_ratio_series(int p, double x) {
  return static_cast<double>(bessel_ratio_series_big(p, Big(x)));
}

/// coth(x) - 1/x in 50-digit arithmetic.
inline double langevin(double x) {
  const Big bx(x);
  return static_cast<double>(cosh(bx) / sinh(bx) - 1 / bx);
}

/// Bisection root of f on [lo, hi] where f(lo) < 0 < f(hi).
inline double bisect(const std::function<double(double)>& f, double lo, double hi, double abs_tol) {
  for (int i = 0; i < 4000 && hi - lo > abs_tol; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) < 0.0) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Root of A_p(kappa) = r_bar by bisection on the 50-digit series/CF-free
/// evaluation: brackets are widened geometrically, then halved to 1e-40.
inline Big kappa_root_big(int p, const Big& r_bar, const std::function<Big(int, const Big&)>& ratio) {
  Big lo = 1e-6;
  Big hi = 1;
  while (ratio(p, hi) < r_bar) hi *= 2;
  for (int i = 0; i < 400; ++i) {
    const Big mid = (lo + hi) / 2;
    if (ratio(p, mid) < r_bar) lo = mid; else hi = mid;
    if (hi - lo < Big("1e-40") * hi) break;
  }
  return (lo + hi) / 2;
}

}  // namespace shmm::oracle
