#include "shmm/emission.hpp"

#include <cmath>
#include <numbers>

#include "shmm/simd/kernels.hpp"

namespace shmm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)
constexpr double kMinStateWeight = 1e-8;

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError(std::string("non-finite ") + what);
}

}  // namespace

std::string_view to_string(TextModel model) {
  switch (model) {
    case TextModel::Vmf: return "vmf";
    case TextModel::DiagonalGaussian: return "diagonal-gaussian";
    case TextModel::None: return "none";
  }
  return "none";
}

TextModel parse_text_model(std::string_view name) {
  if (name == "vmf") return TextModel::Vmf;
  if (name == "diagonal-gaussian") return TextModel::DiagonalGaussian;
  if (name == "none") return TextModel::None;
  throw ParseError("unknown text model '" + std::string(name) + "'");
}

void EmissionConfig::validate() const {
  if (!use_time && !use_location && text == TextModel::None) {
    throw DomainError("emission config must enable at least one modality");
  }
}

EmissionConfig preset_by_name(std::string_view name) {
  if (name == "shmm") return presets::shmm();
  if (name == "hmm") return presets::hmm();
  if (name == "st-hmm") return presets::st_hmm();
  if (name == "ghmm") return presets::ghmm();
  throw ParseError("unknown preset '" + std::string(name) + "' (expected shmm, hmm, st-hmm or ghmm)");
}

Cov2 floor_eigenvalues(const Cov2& c, double floor) {
  const double half_trace = 0.5 * (c.xx + c.yy);
  const double half_diff = 0.5 * (c.xx - c.yy);
  const double radius = std::hypot(half_diff, c.xy);
  const double l1 = half_trace + radius;
  const double l2 = half_trace - radius;
  if (l2 >= floor) return c;
  if (radius == 0.0) return {std::max(l1, floor), 0.0, std::max(l2, floor)};
  // unit eigenvector of l1
  const double angle = 0.5 * std::atan2(2.0 * c.xy, c.xx - c.yy);
  const double cs = std::cos(angle);
  const double sn = std::sin(angle);
  const double a = std::max(l1, floor);
  const double b = std::max(l2, floor);
  return {a * cs * cs + b * sn * sn, (a - b) * cs * sn, a * sn * sn + b * cs * cs};
}

PreparedEmission::PreparedEmission(const StateParams& state, const EmissionConfig& config) : config_(config) {
  config_.validate();
  if (config_.use_time) {
    if (!(state.sigma_t > 0.0)) throw DomainError("sigma_t must be positive");
    mu_t_ = state.mu_t;
    inv_sigma_t_ = 1.0 / state.sigma_t;
    time_log_norm_ = -0.5 * kLog2Pi - std::log(state.sigma_t);
  }
  if (config_.use_location) {
    const double det = state.sigma_l.det();
    if (!(det > 0.0) || !(state.sigma_l.xx > 0.0)) throw DomainError("location covariance is not positive definite");
    mu_l_ = state.mu_l;
    precision_ = {state.sigma_l.yy / det, -state.sigma_l.xy / det, state.sigma_l.xx / det};
    loc_log_norm_ = -kLog2Pi - 0.5 * std::log(det);
  }
  if (config_.text == TextModel::Vmf) {
    validate(state.text);
    scaled_mu_ = state.text.mu;
    for (double& v : scaled_mu_) v *= state.text.kappa;
    vmf_log_norm_ = vmf_log_normalizer(state.text.dim(), state.text.kappa);
  } else if (config_.text == TextModel::DiagonalGaussian) {
    const auto& g = state.text_gauss;
    if (g.mean.empty() || g.mean.size() != g.var.size()) throw DomainError("Gaussian text parameters are malformed");
    gauss_mean_ = g.mean;
    gauss_inv_var_.resize(g.var.size());
    gauss_log_norm_ = 0.0;
    for (std::size_t j = 0; j < g.var.size(); ++j) {
      if (!(g.var[j] > 0.0)) throw DomainError("Gaussian text variance must be positive");
      gauss_inv_var_[j] = 1.0 / g.var[j];
      gauss_log_norm_ -= 0.5 * (kLog2Pi + std::log(g.var[j]));
    }
  }
}

double PreparedEmission::log_time(double t_day) const {
  require_finite(t_day, "timestamp");
  const double z = (t_day - mu_t_) * inv_sigma_t_;
  return time_log_norm_ - 0.5 * z * z;
}

double PreparedEmission::log_location(const std::array<double, 2>& loc) const {
  require_finite(loc[0], "location");
  require_finite(loc[1], "location");
  const double dx = loc[0] - mu_l_[0];
  const double dy = loc[1] - mu_l_[1];
  const double q = precision_.xx * dx * dx + 2.0 * precision_.xy * dx * dy + precision_.yy * dy * dy;
  return loc_log_norm_ - 0.5 * q;
}

double PreparedEmission::log_text(std::span<const double> embedding) const {
  if (config_.text == TextModel::Vmf) {
    if (embedding.size() != scaled_mu_.size()) throw DimensionMismatch("embedding dimension mismatch");
    const double d = simd::dot(scaled_mu_, embedding);
    require_finite(d, "embedding");
    return vmf_log_norm_ + d;
  }
  if (config_.text == TextModel::DiagonalGaussian) {
    if (embedding.size() != gauss_mean_.size()) throw DimensionMismatch("embedding dimension mismatch");
    double q = 0.0;
    for (std::size_t j = 0; j < embedding.size(); ++j) {
      const double d = embedding[j] - gauss_mean_[j];
      q += d * d * gauss_inv_var_[j];
    }
    require_finite(q, "embedding");
    return gauss_log_norm_ - 0.5 * q;
  }
  return 0.0;
}

double PreparedEmission::log_density(const SemanticRecord& record) const {
  double total = 0.0;
  if (config_.use_time) total += log_time(record.t_day);
  if (config_.use_location) total += log_location(record.loc);
  if (config_.text != TextModel::None) total += log_text(record.embedding);
  return total;
}

double log_emission(const StateParams& state, const EmissionConfig& config, const SemanticRecord& record) {
  return PreparedEmission(state, config).log_density(record);
}

StateParams m_step_state(std::span<const SemanticRecord* const> records, std::span<const double> weights,
                         const EmissionConfig& config, const Floors& floors, const KappaOptions& kappa_options) {
  if (records.size() != weights.size()) throw DimensionMismatch("one responsibility per record required");

  double total = 0.0;
  double sum_t = 0.0;
  std::array<double, 2> sum_l{};
  for (std::size_t i = 0; i < records.size(); ++i) {
    const double w = weights[i];
    if (!(w >= 0.0)) throw DomainError("responsibilities must be non-negative");
    if (w == 0.0) continue;
    total += w;
    sum_t += w * records[i]->t_day;
    sum_l[0] += w * records[i]->loc[0];
    sum_l[1] += w * records[i]->loc[1];
  }
  if (total < kMinStateWeight) throw EmptyState("state received no responsibility");

  StateParams out;
  out.mu_t = sum_t / total;
  out.mu_l = {sum_l[0] / total, sum_l[1] / total};

  double var_t = 0.0;
  Cov2 cov{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < records.size(); ++i) {
    const double w = weights[i];
    if (w == 0.0) continue;
    const double dt = records[i]->t_day - out.mu_t;
    const double dx = records[i]->loc[0] - out.mu_l[0];
    const double dy = records[i]->loc[1] - out.mu_l[1];
    var_t += w * dt * dt;
    cov.xx += w * dx * dx;
    cov.xy += w * dx * dy;
    cov.yy += w * dy * dy;
  }
  out.sigma_t = std::max(std::sqrt(var_t / total), floors.sigma_t);
  out.sigma_l = floor_eigenvalues({cov.xx / total, cov.xy / total, cov.yy / total}, floors.var);

  if (config.text == TextModel::None) return out;

  std::size_t p = 0;
  for (std::size_t i = 0; i < records.size() && p == 0; ++i) {
    if (weights[i] > 0.0) p = records[i]->embedding.size();
  }
  if (p < 2) throw DimensionMismatch("records carry no text embedding");

  if (config.text == TextModel::Vmf) {
    ResultantStats stats;
    stats.resultant.assign(p, 0.0);
    stats.weight = total;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (weights[i] == 0.0) continue;
      if (records[i]->embedding.size() != p) throw DimensionMismatch("embedding dimension mismatch");
      simd::axpy(weights[i], records[i]->embedding, stats.resultant);
    }
    out.text = fit_vmf(stats, kappa_options).params;
  } else {
    auto& g = out.text_gauss;
    g.mean.assign(p, 0.0);
    g.var.assign(p, 0.0);
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (weights[i] == 0.0) continue;
      if (records[i]->embedding.size() != p) throw DimensionMismatch("embedding dimension mismatch");
      simd::axpy(weights[i] / total, records[i]->embedding, g.mean);
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (weights[i] == 0.0) continue;
      for (std::size_t j = 0; j < p; ++j) {
        const double d = records[i]->embedding[j] - g.mean[j];
        g.var[j] += weights[i] * d * d;
      }
    }
    for (double& v : g.var) v = std::max(v / total, floors.var);
  }
  return out;
}

}  // namespace shmm
