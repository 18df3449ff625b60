#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "shmm/matrix.hpp"
#include "shmm/special_fns.hpp"

// von Mises-Fisher distribution on the unit sphere S^{p-1}.

namespace shmm {

/// Concentrations are capped here; beyond it the density is numerically a
/// point mass for every dimension we handle.
inline constexpr double kKappaMax = 1e6;

struct VmfParams {
  std::vector<double> mu;  // unit mean direction, length p
  double kappa = 0.0;

  int dim() const { return static_cast<int>(mu.size()); }
};

/// Throws DomainError unless p >= 2, ||mu|| = 1 within 1e-12 and
/// 0 <= kappa <= kKappaMax.
void validate(const VmfParams& params);

/// log C_p(kappa); for kappa == 0 the log density of the uniform distribution.
double vmf_log_normalizer(int p, double kappa);

/// log f_p(m; mu, kappa). m must be unit norm within 1e-9.
double vmf_log_pdf(const VmfParams& params, std::span<const double> m);

/// Weighted resultant of unit vectors.
struct ResultantStats {
  std::vector<double> resultant;
  double weight = 0.0;

  double norm() const;
  /// Mean resultant length ||resultant|| / weight.
  double r_bar() const;
};

ResultantStats accumulate_resultant(const RowMatrix& vectors, std::span<const double> weights);

enum class KappaStatus {
  Converged,
  DegenerateResultant,  // r_bar ~ 1, kappa capped at kKappaMax
  NearUniform,          // r_bar ~ 0, kappa set to 0
};

struct NewtonIterate {
  int iteration;    // 0 is the closed-form initializer
  double kappa;
  double residual;  // A_p(kappa) - r_bar
  bool bracketed;   // produced by the safeguarded fallback
};

struct KappaEstimate {
  double kappa = 0.0;
  int iterations = 0;
  double residual = 0.0;
  KappaStatus status = KappaStatus::Converged;
  bool used_fallback = false;
  std::vector<NewtonIterate> history;
};

struct KappaOptions {
  double tol = 1e-13;
  int max_iter = 50;
};

/// Closed-form starting point (r p - r^3) / (1 - r^2).
double banerjee_kappa(int p, double r_bar);

/// A_p(kappa) - r_bar, formed from complements when r_bar > 1/2 so that the
/// residual keeps precision as A_p approaches 1.
double kappa_residual(int p, double kappa, double r_bar);

/// Solves A_p(kappa) = r_bar by Newton's method from the closed-form
/// initializer. Falls back to a bracketed Newton-bisection hybrid if an iterate
/// leaves (0, inf) or the residual grows. Throws NoConvergence if the budget
/// is exhausted.
KappaEstimate estimate_kappa(int p, double r_bar, const KappaOptions& options = {});
KappaEstimate estimate_kappa(const ResultantStats& stats, const KappaOptions& options = {});

enum class FitStatus { Ok, DegenerateResultant, NearUniform, ZeroResultant };

struct VmfFit {
  VmfParams params;
  FitStatus status = FitStatus::Ok;
  double r_bar = 0.0;
  int newton_iterations = 0;
};

/// Plain (unsafeguarded) Newton iterates for A_p(kappa) = r_bar from an
/// arbitrary start. The returned path has steps + 1 entries, the first being
/// kappa0. Used to study convergence; estimate_kappa is the production solver.
template <class Real>
std::vector<Real> newton_kappa_path(int p, const Real& r_bar, const Real& kappa0, int steps) {
  std::vector<Real> path{kappa0};
  Real kappa = kappa0;
  for (int i = 0; i < steps; ++i) {
    const auto ratio = detail::bessel_ratio_cf<Real>(p, kappa);
    const Real a = ratio.value;
    const Real deriv = ratio.complement * (1 + a) - (p - 1) * a / kappa;
    kappa = kappa - (a - r_bar) / deriv;
    path.push_back(kappa);
  }
  return path;
}

/// Weighted maximum-likelihood fit. Rows of `vectors` are unit p-vectors.
VmfFit fit_vmf(const RowMatrix& vectors, std::span<const double> weights,
               const KappaOptions& options = {});

/// Fit from precomputed resultant statistics.
VmfFit fit_vmf(const ResultantStats& stats, const KappaOptions& options = {});

/// Wood's rejection sampler for the component along mu, a uniform tangent
/// direction, and a Householder reflection taking e_1 to mu.
class VmfSampler {
 public:
  explicit VmfSampler(VmfParams params);

  void sample(std::mt19937_64& rng, std::span<double> out) const;
  const VmfParams& params() const { return params_; }

 private:
  struct Cosine {
    double w;            // mu^T m
    double one_minus_w;  // 1 - w without cancellation
  };
  Cosine sample_cosine(std::mt19937_64& rng) const;

  VmfParams params_;
  double b_ = 0.0;
  double x0_ = 0.0;
  double c_ = 0.0;
  std::vector<double> householder_;  // e_1 - mu, or empty when mu == e_1
  double householder_norm2_ = 0.0;
};

/// n draws from vMF(mu, kappa); deterministic in `seed`.
RowMatrix sample_vmf(const VmfParams& params, std::size_t n, std::uint64_t seed);

}  // namespace shmm
