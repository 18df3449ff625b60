#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Synthetic checks of the concentration estimator: Newton convergence and
// estimation error against sample size, concentration and dimension.

namespace shmm {

enum class SynthExperiment { NewtonConvergence, EstimationVsN, EstimationVsKappa, EstimationVsP };

SynthExperiment parse_synth_experiment(std::string_view name);
std::string_view to_string(SynthExperiment experiment);

struct SynthOptions {
  int p = 100;
  double kappa = 100.0;
  std::size_t n = 100000;
  std::vector<std::size_t> n_grid{100, 1000, 10000, 100000};
  std::vector<double> kappa_grid{10, 50, 100, 500, 1000, 5000};
  std::vector<int> p_grid{10, 50, 100, 200, 500};
  int repeats = 20;
  std::uint64_t seed = 0;
  int threads = 1;

  /// Throws DomainError on an empty or out-of-range grid.
  void validate(SynthExperiment experiment) const;
};

struct SynthRow {
  double x;
  std::string metric;
  double value;
};

/// Newton convergence: per iteration, "kappa" and "residual" (|A_p(kappa) -
/// r_bar|) for one sample. The estimation experiments report, per grid point,
/// the mean over repeats of "kappa_rel_error" (|k^ - k| / k) and
/// "mu_rel_error" (||mu^ - mu||), and "kappa_rel_error_sd".
std::vector<SynthRow> run_synth(SynthExperiment experiment, const SynthOptions& options);

/// Error of one fit on n fresh samples.
struct EstimationError {
  double kappa_rel;
  double mu_rel;
};
EstimationError estimation_error(int p, double kappa, std::size_t n, std::uint64_t seed);

/// "x,metric,value" with a header line.
std::string synth_csv(const std::vector<SynthRow>& rows);

}  // namespace shmm
