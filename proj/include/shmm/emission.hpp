#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shmm/record.hpp"
#include "shmm/vmf.hpp"

// Per-state emission densities. A record factorises into independent time,
// location and text terms; which of them participate is controlled by an
// EmissionConfig, which is how the location-only, space-time and Gaussian-text
// baselines are expressed.

namespace shmm {

enum class TextModel { Vmf, DiagonalGaussian, None };

std::string_view to_string(TextModel model);
TextModel parse_text_model(std::string_view name);

struct EmissionConfig {
  bool use_time = true;
  bool use_location = true;
  TextModel text = TextModel::Vmf;

  /// Throws DomainError when every modality is disabled.
  void validate() const;
  bool operator==(const EmissionConfig&) const = default;
};

namespace presets {
inline EmissionConfig shmm() { return {true, true, TextModel::Vmf}; }
inline EmissionConfig hmm() { return {false, true, TextModel::None}; }
inline EmissionConfig st_hmm() { return {true, true, TextModel::None}; }
inline EmissionConfig ghmm() { return {true, true, TextModel::DiagonalGaussian}; }
}  // namespace presets

/// Preset by name: "shmm", "hmm", "st-hmm", "ghmm".
EmissionConfig preset_by_name(std::string_view name);

/// Regularisation floors applied in every M-step.
struct Floors {
  double sigma_t = 60.0;  // seconds
  double var = 1e-6;      // squared location units, also the GHMM text variance
};

/// Symmetric 2x2 covariance.
struct Cov2 {
  double xx = 1.0;
  double xy = 0.0;
  double yy = 1.0;

  double det() const { return xx * yy - xy * xy; }
};

/// Clamp the eigenvalues of `c` from below at `floor`.
Cov2 floor_eigenvalues(const Cov2& c, double floor);

struct DiagGaussian {
  std::vector<double> mean;
  std::vector<double> var;
};

struct StateParams {
  double mu_t = 0.0;      // seconds in day
  double sigma_t = 1.0;   // standard deviation, seconds
  std::array<double, 2> mu_l{};
  Cov2 sigma_l;
  VmfParams text;         // used when config.text == Vmf
  DiagGaussian text_gauss;  // used when config.text == DiagonalGaussian
};

/// Per-state constants precomputed once so that scoring a record costs a few
/// multiplies and one length-p dot product.
class PreparedEmission {
 public:
  PreparedEmission(const StateParams& state, const EmissionConfig& config);

  double log_density(const SemanticRecord& record) const;
  double log_time(double t_day) const;
  double log_location(const std::array<double, 2>& loc) const;
  double log_text(std::span<const double> embedding) const;

 private:
  EmissionConfig config_;
  double mu_t_ = 0.0;
  double inv_sigma_t_ = 1.0;
  double time_log_norm_ = 0.0;
  std::array<double, 2> mu_l_{};
  Cov2 precision_;
  double loc_log_norm_ = 0.0;
  std::vector<double> scaled_mu_;  // kappa * mu
  double vmf_log_norm_ = 0.0;
  std::vector<double> gauss_mean_;
  std::vector<double> gauss_inv_var_;
  double gauss_log_norm_ = 0.0;
};

/// Sum of the enabled per-modality log densities of `record` under `state`.
double log_emission(const StateParams& state, const EmissionConfig& config, const SemanticRecord& record);

/// Weighted maximum-likelihood state parameters. `records[i]` carries weight
/// `weights[i]` (a responsibility). Time and location are always fitted; the
/// text model follows `config.text`. Throws EmptyState when the total weight
/// is below 1e-8.
StateParams m_step_state(std::span<const SemanticRecord* const> records, std::span<const double> weights,
                         const EmissionConfig& config, const Floors& floors = {},
                         const KappaOptions& kappa_options = {});

}  // namespace shmm
