#include "shmm/special_fns.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace shmm {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Power series sum_q (x/2)^{2q+v} / (q! Gamma(q+v+1)), summed outward from its
// largest term so that nothing overflows for large v.
double log_bessel_i_series(double v, double x) {
  const double log_half_x = std::log(0.5 * x);
  const double quarter_x2 = 0.25 * x * x;
  const double peak = std::floor(0.5 * (std::sqrt(v * v + x * x) - v));
  const double log_peak_term =
      (2.0 * peak + v) * log_half_x - std::lgamma(peak + 1.0) - std::lgamma(peak + v + 1.0);

  double sum = 1.0;
  double term = 1.0;
  for (double q = peak; q < peak + 1e7; q += 1.0) {
    term *= quarter_x2 / ((q + 1.0) * (q + 1.0 + v));
    sum += term;
    if (term < kEps * sum) break;
  }
  term = 1.0;
  for (double q = peak; q > 0.0; q -= 1.0) {
    term *= q * (q + v) / quarter_x2;
    sum += term;
    if (term < kEps * sum) break;
  }
  return log_peak_term + std::log(sum);
}

// Hankel expansion: I_v(x) ~ e^x / sqrt(2 pi x) * sum_k (-1)^k a_k(v) / x^k.
// Returns log(I_v(x) e^{-x}).
double log_bessel_i_hankel_scaled(double v, double x) {
  const double mu = 4.0 * v * v;
  double sum = 1.0;
  double term = 1.0;
  double prev_abs = std::numeric_limits<double>::infinity();
  for (int k = 1; k < 500; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = -term * (mu - odd * odd) / (8.0 * k * x);
    const double next_abs = std::abs(next);
    if (next_abs == 0.0) break;         // half-integer order: series terminates
    if (next_abs > prev_abs) break;     // asymptotic series started to diverge
    sum += next;
    term = next;
    prev_abs = next_abs;
    if (next_abs < kEps * std::abs(sum)) break;
  }
  return std::log(sum) - 0.5 * std::log(2.0 * std::numbers::pi * x);
}

// Debye polynomials u_k(t) from
//   u_{k+1}(t) = t^2 (1 - t^2) u_k'(t) / 2 + (1/8) int_0^t (1 - 5 s^2) u_k(s) ds.
constexpr int kDebyeTerms = 13;

using Poly = std::vector<double>;

std::array<Poly, kDebyeTerms> make_debye_polys() {
  std::array<Poly, kDebyeTerms> u;
  u[0] = {1.0};
  for (int k = 0; k + 1 < kDebyeTerms; ++k) {
    const Poly& cur = u[k];
    Poly next(cur.size() + 3, 0.0);
    for (std::size_t j = 1; j < cur.size(); ++j) {
      const double dj = static_cast<double>(j) * cur[j];  // coefficient of t^{j-1} in u_k'
      next[j + 1] += 0.5 * dj;
      next[j + 3] -= 0.5 * dj;
    }
    for (std::size_t j = 0; j < cur.size(); ++j) {
      next[j + 1] += 0.125 * cur[j] / static_cast<double>(j + 1);
      next[j + 3] -= 0.125 * 5.0 * cur[j] / static_cast<double>(j + 3);
    }
    u[k + 1] = std::move(next);
  }
  return u;
}

double eval_poly(const Poly& c, double t) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * t + *it;
  return acc;
}

double log_bessel_i_debye(double v, double x) {
  static const std::array<Poly, kDebyeTerms> polys = make_debye_polys();
  const double z = x / v;
  const double root = std::hypot(1.0, z);
  const double t = 1.0 / root;
  // v * eta with eta = sqrt(1 + z^2) - asinh(1/z)
  const double v_eta = std::hypot(v, x) - v * std::asinh(v / x);

  double sum = 1.0;
  double inv_v_pow = 1.0;
  for (int k = 1; k < kDebyeTerms; ++k) {
    inv_v_pow /= v;
    const double term = eval_poly(polys[k], t) * inv_v_pow;
    sum += term;
    if (std::abs(term) < kEps * std::abs(sum)) break;
  }
  return v_eta - 0.5 * std::log(2.0 * std::numbers::pi * v) - 0.5 * std::log(root) +
         std::log(sum);
}

void check_p(int p) {
  if (p < 2) throw DomainError("dimension p must be >= 2");
}

}  // namespace

double log_bessel_i(BesselOrder order, double kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw DomainError("log_bessel_i requires a finite kappa > 0");
  }
  const double v = order.value();
  if (v >= 10.0) {
    return kappa < v ? log_bessel_i_series(v, kappa) : log_bessel_i_debye(v, kappa);
  }
  // The Hankel expansion cancels badly until kappa clears v^2.
  return kappa < 100.0 ? log_bessel_i_series(v, kappa) : kappa + log_bessel_i_hankel_scaled(v, kappa);
}

double log_bessel_i_scaled(BesselOrder order, double kappa) {
  const double v = order.value();
  if (v < 10.0 && kappa >= 100.0 && std::isfinite(kappa)) return log_bessel_i_hankel_scaled(v, kappa);
  return log_bessel_i(order, kappa) - kappa;
}

BesselRatio bessel_ratio(int p, double kappa) {
  check_p(p);
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) {
    throw DomainError("bessel_ratio requires a finite kappa >= 0");
  }
  if (kappa == 0.0) return {0.0, 1.0};
  return detail::bessel_ratio_cf<double>(p, kappa);
}

double bessel_ratio_a(int p, double kappa) { return bessel_ratio(p, kappa).value; }

double bessel_ratio_a_prime(int p, double kappa, double a_value) {
  check_p(p);
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw DomainError("bessel_ratio_a_prime requires a finite kappa > 0");
  }
  return 1.0 - a_value * a_value - (p - 1) * a_value / kappa;
}

double bessel_ratio_a_prime(int p, double kappa, const BesselRatio& a) {
  check_p(p);
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw DomainError("bessel_ratio_a_prime requires a finite kappa > 0");
  }
  // 1 - a^2 = (1 - a)(1 + a)
  return a.complement * (1.0 + a.value) - (p - 1) * a.value / kappa;
}

}  // namespace shmm
