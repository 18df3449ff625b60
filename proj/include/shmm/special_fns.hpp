#pragma once

#include <cmath>
#include <limits>

#include "shmm/errors.hpp"

// Modified Bessel functions of the first kind, evaluated in log space, and the
// ratio A_p(kappa) = I_{p/2}(kappa) / I_{p/2-1}(kappa) that drives the vMF
// concentration estimate.

namespace shmm {

/// Order v >= 0 of a modified Bessel function.
class BesselOrder {
 public:
  explicit BesselOrder(double v) : v_(v) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("Bessel order must be finite and >= 0");
  }
  double value() const { return v_; }

 private:
  double v_;
};

/// log I_v(kappa) for kappa > 0.
///
/// Regimes: for v >= 10 a peak-centred power series below kappa = v and the
/// Debye uniform expansion above; for v < 10 the series below kappa = 100 and
/// the Hankel large-argument expansion above. No intermediate leaves log space.
double log_bessel_i(BesselOrder v, double kappa);

/// log(I_v(kappa) e^{-kappa}). Small at large kappa, so sums that later add
/// kappa back round only once at full magnitude.
double log_bessel_i_scaled(BesselOrder v, double kappa);

/// A_p(kappa) together with 1 - A_p(kappa). The complement is evaluated
/// directly, so it keeps full relative precision when A_p is close to 1.
template <class Real>
struct BesselRatioT {
  Real value;
  Real complement;
};
using BesselRatio = BesselRatioT<double>;

/// A_p(kappa) with its complement; p >= 2, kappa >= 0 (A_p(0) := 0).
BesselRatio bessel_ratio(int p, double kappa);

/// A_p(kappa) in (0, 1); kappa == 0 returns the limit value 0.
double bessel_ratio_a(int p, double kappa);

/// A_p'(kappa) = 1 - a^2 - (p-1) a / kappa where a = A_p(kappa).
double bessel_ratio_a_prime(int p, double kappa, double a_value);

/// Same derivative, using the complement to limit cancellation at large kappa.
double bessel_ratio_a_prime(int p, double kappa, const BesselRatio& a);

namespace detail {

/// Perron continued fraction for I_nu(x)/I_{nu-1}(x) with nu = p/2:
///
///   x / (2nu + x - (2nu+1)x / (2nu+1+2x - (2nu+3)x / (2nu+2+2x - ...)))
///
/// evaluated with the modified Lentz algorithm. It converges for every x > 0
/// in at most a few dozen terms, which makes it usable from tiny kappa up to
/// the concentration cap. Templated so tests can run it in extended precision.
template <class Real>
BesselRatioT<Real> bessel_ratio_cf(int p, const Real& x) {
  using std::abs;
  const Real two_nu = Real(p);
  const Real eps = std::numeric_limits<Real>::epsilon();
  const Real tiny = std::numeric_limits<Real>::min() / eps;

  // Tail S = b1 + a2/(b2 + a3/(b3 + ...)), a_k = -(2nu+2k-1)x, b_k = 2nu+k+2x.
  Real f = two_nu + 1 + 2 * x;
  Real c = f;
  Real d = 0;
  constexpr int kMaxTerms = 100000;
  int k = 2;
  for (; k < kMaxTerms; ++k) {
    const Real a = -(two_nu + 2 * k - 1) * x;
    const Real b = two_nu + k + 2 * x;
    d = b + a * d;
    if (abs(d) < tiny) d = tiny;
    d = 1 / d;
    c = b + a / c;
    if (abs(c) < tiny) c = tiny;
    const Real delta = c * d;
    f *= delta;
    if (abs(delta - 1) <= eps) break;
  }
  if (k == kMaxTerms) throw NoConvergence("Bessel ratio continued fraction did not converge");

  const Real tail = -(two_nu + 1) * x / f;
  const Real denom = two_nu + x + tail;
  return {x / denom, (two_nu + tail) / denom};
}

}  // namespace detail

}  // namespace shmm
