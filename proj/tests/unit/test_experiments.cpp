#include <doctest.h>

#include <cmath>

#include "shmm/errors.hpp"
#include "shmm/experiments.hpp"

using namespace shmm;

namespace {

std::vector<double> metric(const std::vector<SynthRow>& rows, const std::string& name) {
  std::vector<double> out;
  for (const auto& r : rows) {
    if (r.metric == name) out.push_back(r.value);
  }
  return out;
}

}  // namespace

TEST_CASE("newton convergence experiment") {
  SynthOptions opt;
  opt.seed = 4;
  const auto rows = run_synth(SynthExperiment::NewtonConvergence, opt);
  const auto residual = metric(rows, "residual");
  REQUIRE(residual.size() >= 4);
  // row 0 is the closed-form start; three Newton steps reach the tolerance
  for (std::size_t i = 3; i < residual.size(); ++i) CHECK(residual[i] < 1e-13);
  CHECK(residual[0] > residual.back());
  CHECK(rows[0].x == 0.0);
}

TEST_CASE("estimation error shrinks with sample size") {
  SynthOptions opt;
  opt.seed = 1;
  opt.n_grid = {100, 1000, 10000, 100000};
  const auto rows = run_synth(SynthExperiment::EstimationVsN, opt);
  const auto k_err = metric(rows, "kappa_rel_error");
  const auto mu_err = metric(rows, "mu_rel_error");
  REQUIRE(k_err.size() == 4);
  for (std::size_t i = 1; i < k_err.size(); ++i) {
    CHECK(k_err[i] <= k_err[i - 1]);
    CHECK(mu_err[i] <= mu_err[i - 1]);
  }
  CHECK(k_err.back() < 0.01);
}

TEST_CASE("estimation across kappa and dimension") {
  SynthOptions opt;
  opt.repeats = 2;
  opt.kappa_grid = {10, 100, 1000};
  for (double e : metric(run_synth(SynthExperiment::EstimationVsKappa, opt), "kappa_rel_error")) CHECK(e < 0.05);
  opt.p_grid = {5, 50, 200};
  for (double e : metric(run_synth(SynthExperiment::EstimationVsP, opt), "kappa_rel_error")) CHECK(e < 0.05);
}

TEST_CASE("experiment parameters and output") {
  CHECK(parse_synth_experiment("estimation_vs_p") == SynthExperiment::EstimationVsP);
  CHECK(to_string(SynthExperiment::NewtonConvergence) == "newton_convergence");
  CHECK_THROWS_AS(parse_synth_experiment("bogus"), DomainError);
  SynthOptions opt;
  opt.kappa_grid = {};
  CHECK_THROWS_AS(run_synth(SynthExperiment::EstimationVsKappa, opt), DomainError);
  opt.p = 1;
  CHECK_THROWS_AS(run_synth(SynthExperiment::NewtonConvergence, opt), DomainError);
  CHECK(synth_csv({{1.0, "residual", 0.5}}) == "x,metric,value\n1,residual,0.5\n");
}
