#include "shmm/vmf.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "shmm/simd/kernels.hpp"

namespace shmm {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kNearUniformRbar = 1e-10;
constexpr double kDegenerateGap = 1e-12;
constexpr int kBracketBudget = 400;

struct Evaluation {
  BesselRatio ratio;
  double residual;
};

double residual_from(const BesselRatio& ratio, double r_bar) {
  if (r_bar > 0.5) return (1.0 - r_bar) - ratio.complement;
  return ratio.value - r_bar;
}

Evaluation evaluate(int p, double kappa, double r_bar) {
  const BesselRatio ratio = bessel_ratio(p, kappa);
  return {ratio, residual_from(ratio, r_bar)};
}

bool converged_step(double step, double kappa) { return std::abs(step) <= 8.0 * kEps * kappa; }

// Newton-bisection hybrid on a bracket [lo, hi] with residual(lo) < 0 < residual(hi).
void bracketed_solve(int p, double r_bar, double start, KappaEstimate& est) {
  double lo = start;
  double hi = start;
  for (int i = 0; evaluate(p, lo, r_bar).residual > 0.0; ++i) {
    if (i > 2000) throw NoConvergence("could not bracket kappa from below");
    lo *= 0.5;
  }
  for (int i = 0; evaluate(p, hi, r_bar).residual < 0.0; ++i) {
    if (hi >= kKappaMax) break;  // caller guarantees the root is below the cap
    hi = std::min(2.0 * hi, kKappaMax);
    if (i > 2000) throw NoConvergence("could not bracket kappa from above");
  }

  double x = (start > lo && start < hi) ? start : 0.5 * (lo + hi);
  for (int it = 0; it < kBracketBudget; ++it) {
    const Evaluation e = evaluate(p, x, r_bar);
    if (e.residual == 0.0) {
      est.kappa = x;
      return;
    }
    if (e.residual < 0.0) lo = x; else hi = x;
    const double deriv = bessel_ratio_a_prime(p, x, e.ratio);
    double next = x - e.residual / deriv;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    const double step = next - x;
    x = next;
    ++est.iterations;
    est.history.push_back({static_cast<int>(est.history.size()), x,
                           evaluate(p, x, r_bar).residual, true});
    if (converged_step(step, x) || hi - lo <= 8.0 * kEps * hi) {
      est.kappa = x;
      return;
    }
  }
  throw NoConvergence("bracketed kappa solve exceeded its iteration budget");
}

}  // namespace

void validate(const VmfParams& params) {
  if (params.dim() < 2) throw DomainError("vMF dimension must be >= 2");
  const double n2 = simd::dot(params.mu, params.mu);
  if (!(std::abs(std::sqrt(n2) - 1.0) <= 1e-12)) throw DomainError("vMF mean direction is not unit norm");
  if (!(params.kappa >= 0.0) || !(params.kappa <= kKappaMax)) {
    throw DomainError("vMF concentration outside [0, kKappaMax]");
  }
}

double vmf_log_normalizer(int p, double kappa) {
  if (p < 2) throw DomainError("vMF dimension must be >= 2");
  const double half_p = 0.5 * p;
  if (kappa == 0.0) {
    // minus log of the surface area 2 pi^{p/2} / Gamma(p/2)
    return std::lgamma(half_p) - std::numbers::ln2 - half_p * std::log(std::numbers::pi);
  }
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw DomainError("vMF concentration must be >= 0");
  return ((half_p - 1.0) * std::log(kappa) - half_p * std::log(2.0 * std::numbers::pi) -
          log_bessel_i_scaled(BesselOrder(half_p - 1.0), kappa)) -
         kappa;
}

double vmf_log_pdf(const VmfParams& params, std::span<const double> m) {
  if (m.size() != params.mu.size()) throw DimensionMismatch("vMF observation dimension mismatch");
  const double n2 = simd::dot(m, m);
  if (!(std::abs(std::sqrt(n2) - 1.0) <= 1e-9)) throw DomainError("vMF observation is not unit norm");
  return vmf_log_normalizer(params.dim(), params.kappa) + params.kappa * simd::dot(params.mu, m);
}

double ResultantStats::norm() const { return std::sqrt(simd::dot(resultant, resultant)); }

double ResultantStats::r_bar() const { return weight > 0.0 ? norm() / weight : 0.0; }

ResultantStats accumulate_resultant(const RowMatrix& vectors, std::span<const double> weights) {
  if (weights.size() != vectors.rows()) throw DimensionMismatch("one weight per vector required");
  ResultantStats stats;
  stats.resultant.assign(vectors.cols(), 0.0);
  for (std::size_t i = 0; i < vectors.rows(); ++i) {
    if (!(weights[i] >= 0.0)) throw DomainError("weights must be non-negative");
    if (weights[i] == 0.0) continue;
    simd::axpy(weights[i], vectors.row(i), stats.resultant);
    stats.weight += weights[i];
  }
  return stats;
}

double banerjee_kappa(int p, double r_bar) {
  return (r_bar * p - r_bar * r_bar * r_bar) / ((1.0 - r_bar) * (1.0 + r_bar));
}

double kappa_residual(int p, double kappa, double r_bar) {
  return evaluate(p, kappa, r_bar).residual;
}

KappaEstimate estimate_kappa(int p, double r_bar, const KappaOptions& options) {
  if (p < 2) throw DomainError("vMF dimension must be >= 2");
  if (!(options.tol > 0.0) || options.max_iter < 1) throw DomainError("invalid Newton options");
  if (!(r_bar >= 0.0) || !(r_bar <= 1.0 + 1e-9)) throw DomainError("mean resultant length outside [0, 1]");

  KappaEstimate est;
  if (r_bar < kNearUniformRbar) {
    est.kappa = 0.0;
    est.residual = -r_bar;
    est.status = KappaStatus::NearUniform;
    return est;
  }
  if (r_bar >= 1.0 - kDegenerateGap || kappa_residual(p, kKappaMax, r_bar) <= 0.0) {
    est.kappa = kKappaMax;
    est.residual = r_bar >= 1.0 ? 0.0 : kappa_residual(p, kKappaMax, r_bar);
    est.status = KappaStatus::DegenerateResultant;
    return est;
  }

  double kappa = std::min(banerjee_kappa(p, r_bar), kKappaMax);
  Evaluation e = evaluate(p, kappa, r_bar);
  est.history.push_back({0, kappa, e.residual, false});

  bool done = e.residual == 0.0;
  bool fallback = false;
  while (!done) {
    if (est.iterations >= options.max_iter) {
      throw NoConvergence("Newton iteration for kappa exceeded max_iter");
    }
    const double deriv = bessel_ratio_a_prime(p, kappa, e.ratio);
    const double step = e.residual / deriv;
    const double next = kappa - step;
    if (!(next > 0.0) || !std::isfinite(next)) {
      fallback = true;
      break;
    }
    const Evaluation ne = evaluate(p, next, r_bar);
    if (std::abs(ne.residual) > std::abs(e.residual) && std::abs(e.residual) > options.tol) {
      fallback = true;
      break;
    }
    kappa = next;
    e = ne;
    ++est.iterations;
    est.history.push_back({est.iterations, kappa, e.residual, false});
    done = e.residual == 0.0 || converged_step(step, kappa);
  }

  if (fallback) {
    est.used_fallback = true;
    bracketed_solve(p, r_bar, kappa, est);
    kappa = est.kappa;
  }

  est.kappa = kappa;
  est.residual = kappa_residual(p, kappa, r_bar);
  if (!(std::abs(est.residual) <= options.tol)) {
    throw NoConvergence("kappa solve stopped with residual above tolerance");
  }
  return est;
}

KappaEstimate estimate_kappa(const ResultantStats& stats, const KappaOptions& options) {
  const int p = static_cast<int>(stats.resultant.size());
  return estimate_kappa(p, std::min(stats.r_bar(), 1.0), options);
}

VmfFit fit_vmf(const ResultantStats& stats, const KappaOptions& options) {
  const std::size_t p = stats.resultant.size();
  if (p < 2) throw DomainError("vMF dimension must be >= 2");
  if (!(stats.weight > 0.0)) throw EmptyInput("fit_vmf needs positive total weight");

  VmfFit fit;
  const double norm = stats.norm();
  if (norm < 1e-12 * stats.weight) {
    fit.params.mu.assign(p, 0.0);
    fit.params.mu[0] = 1.0;
    fit.params.kappa = 0.0;
    fit.status = FitStatus::ZeroResultant;
    return fit;
  }
  fit.params.mu.resize(p);
  for (std::size_t i = 0; i < p; ++i) fit.params.mu[i] = stats.resultant[i] / norm;
  fit.r_bar = std::min(norm / stats.weight, 1.0);

  const KappaEstimate est = estimate_kappa(static_cast<int>(p), fit.r_bar, options);
  fit.params.kappa = est.kappa;
  fit.newton_iterations = est.iterations;
  switch (est.status) {
    case KappaStatus::Converged: fit.status = FitStatus::Ok; break;
    case KappaStatus::DegenerateResultant: fit.status = FitStatus::DegenerateResultant; break;
    case KappaStatus::NearUniform: fit.status = FitStatus::NearUniform; break;
  }
  return fit;
}

VmfFit fit_vmf(const RowMatrix& vectors, std::span<const double> weights, const KappaOptions& options) {
  if (vectors.rows() == 0) throw EmptyInput("fit_vmf called without vectors");
  return fit_vmf(accumulate_resultant(vectors, weights), options);
}

VmfSampler::VmfSampler(VmfParams params) : params_(std::move(params)) {
  validate(params_);
  const double kappa = params_.kappa;
  const double pm1 = params_.dim() - 1.0;
  b_ = pm1 / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + pm1 * pm1));
  x0_ = (1.0 - b_) / (1.0 + b_);
  // 1 - x0^2 = 4b / (1+b)^2
  c_ = kappa * x0_ + pm1 * std::log(4.0 * b_ / ((1.0 + b_) * (1.0 + b_)));

  householder_ = params_.mu;
  for (double& v : householder_) v = -v;
  householder_[0] += 1.0;
  householder_norm2_ = simd::dot(householder_, householder_);
  if (householder_norm2_ < 1e-30) householder_.clear();
}

VmfSampler::Cosine VmfSampler::sample_cosine(std::mt19937_64& rng) const {
  const double pm1 = params_.dim() - 1.0;
  std::gamma_distribution<double> gamma(0.5 * pm1, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (;;) {
    const double g1 = gamma(rng);
    const double g2 = gamma(rng);
    const double z = g1 / (g1 + g2);
    const double denom = 1.0 - (1.0 - b_) * z;
    const double w = (1.0 - (1.0 + b_) * z) / denom;
    const double u = uniform(rng);
    if (params_.kappa * w + pm1 * std::log(1.0 - x0_ * w) - c_ >= std::log(u)) {
      return {w, 2.0 * b_ * z / denom};
    }
  }
}

void VmfSampler::sample(std::mt19937_64& rng, std::span<double> out) const {
  const std::size_t p = params_.mu.size();
  if (out.size() != p) throw DimensionMismatch("sample buffer has wrong dimension");

  const auto [w, one_minus_w] = sample_cosine(rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  double tangent_norm2 = 0.0;
  do {
    tangent_norm2 = 0.0;
    for (std::size_t i = 1; i < p; ++i) {
      out[i] = normal(rng);
      tangent_norm2 += out[i] * out[i];
    }
  } while (tangent_norm2 == 0.0);

  const double scale = std::sqrt(std::max(0.0, one_minus_w * (1.0 + w)) / tangent_norm2);
  out[0] = w;
  for (std::size_t i = 1; i < p; ++i) out[i] *= scale;

  if (!householder_.empty()) {
    const double proj = simd::dot(householder_, out);
    simd::axpy(-2.0 * proj / householder_norm2_, householder_, out);
  }
  const double inv_norm = 1.0 / std::sqrt(simd::dot(out, out));
  for (double& v : out) v *= inv_norm;
}

RowMatrix sample_vmf(const VmfParams& params, std::size_t n, std::uint64_t seed) {
  const VmfSampler sampler(params);
  std::mt19937_64 rng(seed);
  RowMatrix out(n, params.mu.size());
  for (std::size_t i = 0; i < n; ++i) sampler.sample(rng, out.row(i));
  return out;
}

}  // namespace shmm
