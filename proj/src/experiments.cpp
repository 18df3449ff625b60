#include "shmm/experiments.hpp"

#include <cmath>
#include <random>

#include "shmm/errors.hpp"
#include "shmm/model_io.hpp"
#include "shmm/parallel.hpp"
#include "shmm/vmf.hpp"

namespace shmm {

namespace {

std::vector<double> random_direction(std::mt19937_64& rng, int p) {
  std::normal_distribution<double> normal;
  std::vector<double> v(p);
  double n2 = 0.0;
  for (double& x : v) {
    x = normal(rng);
    n2 += x * x;
  }
  for (double& x : v) x /= std::sqrt(n2);
  return v;
}

// Resultant of n samples drawn without materialising the sample matrix.
ResultantStats sample_resultant(const VmfSampler& sampler, std::size_t n, std::mt19937_64& rng) {
  const int p = sampler.params().dim();
  ResultantStats stats;
  stats.resultant.assign(p, 0.0);
  std::vector<double> x(p);
  for (std::size_t i = 0; i < n; ++i) {
    sampler.sample(rng, x);
    for (int d = 0; d < p; ++d) stats.resultant[d] += x[d];
  }
  stats.weight = static_cast<double>(n);
  return stats;
}

std::uint64_t derive_seed(std::uint64_t seed, std::size_t grid_index, int repeat) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(grid_index), static_cast<std::uint32_t>(repeat)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

SynthExperiment parse_synth_experiment(std::string_view name) {
  if (name == "newton_convergence") return SynthExperiment::NewtonConvergence;
  if (name == "estimation_vs_n") return SynthExperiment::EstimationVsN;
  if (name == "estimation_vs_kappa") return SynthExperiment::EstimationVsKappa;
  if (name == "estimation_vs_p") return SynthExperiment::EstimationVsP;
  throw DomainError("unknown experiment '" + std::string(name) + "'");
}

std::string_view to_string(SynthExperiment experiment) {
  switch (experiment) {
    case SynthExperiment::NewtonConvergence: return "newton_convergence";
    case SynthExperiment::EstimationVsN: return "estimation_vs_n";
    case SynthExperiment::EstimationVsKappa: return "estimation_vs_kappa";
    case SynthExperiment::EstimationVsP: return "estimation_vs_p";
  }
  return "?";
}

void SynthOptions::validate(SynthExperiment experiment) const {
  auto bad = [](const std::string& what) { throw DomainError("invalid synthetic parameters: " + what); };
  if (p < 2) bad("p must be >= 2");
  if (!(kappa > 0.0 && kappa <= kKappaMax)) bad("kappa must lie in (0, 1e6]");
  if (n < 1) bad("n must be >= 1");
  if (repeats < 1) bad("repeats must be >= 1");
  switch (experiment) {
    case SynthExperiment::NewtonConvergence: break;
    case SynthExperiment::EstimationVsN:
      if (n_grid.empty()) bad("empty sample-size grid");
      for (auto v : n_grid) {
        if (v < 2) bad("grid sample sizes must be >= 2");
      }
      break;
    case SynthExperiment::EstimationVsKappa:
      if (kappa_grid.empty()) bad("empty kappa grid");
      for (double v : kappa_grid) {
        if (!(v > 0.0 && v <= kKappaMax)) bad("grid kappas must lie in (0, 1e6]");
      }
      break;
    case SynthExperiment::EstimationVsP:
      if (p_grid.empty()) bad("empty dimension grid");
      for (int v : p_grid) {
        if (v < 2) bad("grid dimensions must be >= 2");
      }
      break;
  }
}

EstimationError estimation_error(int p, double kappa, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  VmfSampler sampler({random_direction(rng, p), kappa});
  const auto fit = fit_vmf(sample_resultant(sampler, n, rng));
  double d2 = 0.0;
  for (int d = 0; d < p; ++d) {
    const double diff = fit.params.mu[d] - sampler.params().mu[d];
    d2 += diff * diff;
  }
  return {std::abs(fit.params.kappa - kappa) / kappa, std::sqrt(d2)};
}

std::vector<SynthRow> run_synth(SynthExperiment experiment, const SynthOptions& options) {
  options.validate(experiment);
  std::vector<SynthRow> rows;
  if (experiment == SynthExperiment::NewtonConvergence) {
    std::mt19937_64 rng(options.seed);
    VmfSampler sampler({random_direction(rng, options.p), options.kappa});
    const auto stats = sample_resultant(sampler, options.n, rng);
    const auto est = estimate_kappa(options.p, stats.r_bar());
    for (const auto& it : est.history) {
      rows.push_back({static_cast<double>(it.iteration), "kappa", it.kappa});
      rows.push_back({static_cast<double>(it.iteration), "residual", std::abs(it.residual)});
    }
    return rows;
  }

  struct Point {
    double x;
    int p;
    double kappa;
    std::size_t n;
  };
  std::vector<Point> grid;
  if (experiment == SynthExperiment::EstimationVsN) {
    for (auto n : options.n_grid) grid.push_back({static_cast<double>(n), options.p, options.kappa, n});
  } else if (experiment == SynthExperiment::EstimationVsKappa) {
    for (double k : options.kappa_grid) grid.push_back({k, options.p, k, options.n});
  } else {
    for (int p : options.p_grid) grid.push_back({static_cast<double>(p), p, options.kappa, options.n});
  }

  const std::size_t reps = options.repeats;
  std::vector<EstimationError> errors(grid.size() * reps);
  parallel_for(errors.size(), options.threads, [&](std::size_t job) {
    const std::size_t g = job / reps;
    const int r = static_cast<int>(job % reps);
    errors[job] = estimation_error(grid[g].p, grid[g].kappa, grid[g].n, derive_seed(options.seed, g, r));
  });
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double mean_k = 0.0, mean_mu = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      mean_k += errors[g * reps + r].kappa_rel;
      mean_mu += errors[g * reps + r].mu_rel;
    }
    mean_k /= reps;
    mean_mu /= reps;
    double var = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      const double d = errors[g * reps + r].kappa_rel - mean_k;
      var += d * d;
    }
    const double sd = reps > 1 ? std::sqrt(var / (reps - 1)) : 0.0;
    rows.push_back({grid[g].x, "kappa_rel_error", mean_k});
    rows.push_back({grid[g].x, "mu_rel_error", mean_mu});
    rows.push_back({grid[g].x, "kappa_rel_error_sd", sd});
  }
  return rows;
}

std::string synth_csv(const std::vector<SynthRow>& rows) {
  std::string out = "x,metric,value\n";
  for (const auto& r : rows) out += format_double(r.x) + ',' + r.metric + ',' + format_double(r.value) + '\n';
  return out;
}

}  // namespace shmm
