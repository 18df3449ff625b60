#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "shmm/simd/kernels.hpp"
#include "shmm/vmf.hpp"
#include "stats_helpers.hpp"

using namespace shmm;

namespace {

std::vector<double> unit(std::vector<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return v;
}

std::vector<double> random_unit(std::mt19937_64& rng, int p) {
  std::normal_distribution<double> normal;
  std::vector<double> v(p);
  for (double& x : v) x = normal(rng);
  return unit(v);
}

std::vector<double> basis(int p, int i) {
  std::vector<double> v(p, 0.0);
  v[i] = 1.0;
  return v;
}

}  // namespace

TEST_CASE("vmf_log_pdf examples in three dimensions") {
  const VmfParams params{unit({1.0, 2.0, -0.5}), 1.0};
  // C_3(1) = 1 / (4 pi sinh 1)
  const double log_c3 = std::log(1.0 / (4.0 * std::numbers::pi * std::sinh(1.0)));
  CHECK(log_c3 + 1.0 == doctest::Approx(-1.6924636).epsilon(1e-7));
  CHECK(vmf_log_pdf(params, params.mu) == doctest::Approx(log_c3 + 1.0).epsilon(1e-13));

  std::vector<double> anti = params.mu;
  for (double& x : anti) x = -x;
  CHECK(vmf_log_pdf(params, anti) == doctest::Approx(log_c3 - 1.0).epsilon(1e-13));
  CHECK(vmf_log_pdf(params, anti) == doctest::Approx(-3.6924636).epsilon(1e-7));

  const VmfParams uniform{basis(3, 0), 0.0};
  CHECK(vmf_log_pdf(uniform, unit({0.3, -0.2, 0.9})) == doctest::Approx(-std::log(4 * std::numbers::pi)).epsilon(1e-14));
  CHECK(-std::log(4 * std::numbers::pi) == doctest::Approx(-2.5310242).epsilon(1e-7));
}

TEST_CASE("vmf_log_normalizer matches C_3 closed form across kappa") {
  for (double k : {0.01, 0.1, 1.0, 10.0, 100.0, 1e4}) {
    // log(k / (4 pi sinh k)) with sinh in log form
    const double want = std::log(k) - std::log(2.0 * std::numbers::pi) - k - std::log1p(-std::exp(-2.0 * k));
    CAPTURE(k);
    CHECK(std::abs(vmf_log_normalizer(3, k) - want) <= 1e-12 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("vmf_log_pdf rejects non-unit observations") {
  const VmfParams params{basis(3, 0), 2.0};
  CHECK_THROWS_AS(vmf_log_pdf(params, std::vector<double>{1.0, 1e-4, 0.0}), DomainError);
  CHECK_THROWS_AS(vmf_log_pdf(params, std::vector<double>{1.0, 0.0}), DimensionMismatch);
  CHECK_NOTHROW(vmf_log_pdf(params, std::vector<double>{1.0 + 1e-10, 0.0, 0.0}));
}

TEST_CASE("vmf density integrates to one on S^2") {
  const VmfParams base{unit({0.2, -0.6, 0.7}), 1.0};
  const int n_theta = 2000;
  const int n_phi = 400;
  for (double kappa : {0.1, 1.0, 10.0}) {
    VmfParams params = base;
    params.kappa = kappa;
    const double h_theta = std::numbers::pi / n_theta;
    const double h_phi = 2.0 * std::numbers::pi / n_phi;
    double total = 0.0;
    for (int i = 0; i <= n_theta; ++i) {
      const double theta = i * h_theta;
      const double simpson = (i == 0 || i == n_theta) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      double ring = 0.0;
      for (int j = 0; j < n_phi; ++j) {
        const double phi = j * h_phi;
        const std::vector<double> m{std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                                    std::cos(theta)};
        ring += std::exp(vmf_log_pdf(params, m));
      }
      total += simpson * ring * h_phi * std::sin(theta);
    }
    total *= h_theta / 3.0;
    CAPTURE(kappa);
    CHECK(std::abs(total - 1.0) < 1e-6);
  }
}

TEST_CASE("log-pdf is maximised at the mean direction") {
  std::mt19937_64 rng(3);
  for (int p : {2, 5, 40}) {
    const VmfParams params{random_unit(rng, p), 3.7};
    const double at_mean = vmf_log_pdf(params, params.mu);
    for (int i = 0; i < 200; ++i) CHECK(vmf_log_pdf(params, random_unit(rng, p)) < at_mean);
  }
}

TEST_CASE("estimate_kappa inverts the p = 3 closed form") {
  const double r_bar = oracle::langevin(5.0);
  CHECK(r_bar == doctest::Approx(0.8000908).epsilon(1e-7));
  const KappaEstimate est = estimate_kappa(3, r_bar);
  CHECK(est.status == KappaStatus::Converged);
  CHECK(std::abs(est.kappa - 5.0) < 1e-9);
  CHECK(std::abs(est.residual) <= 1e-13);
  CHECK(est.history.front().iteration == 0);
  CHECK(est.history.front().kappa == doctest::Approx(banerjee_kappa(3, r_bar)));
}

TEST_CASE("estimate_kappa agrees with a bisection oracle at p = 2") {
  const double want = oracle::bisect([](double k) { return bessel_ratio_a(2, k) - 0.5; }, 1e-6, 100.0, 1e-14);
  const KappaEstimate est = estimate_kappa(2, 0.5);
  CHECK(std::abs(est.kappa - want) < 1e-12);
  CHECK(std::abs(bessel_ratio_a(2, est.kappa) - 0.5) <= 1e-13);
}

TEST_CASE("estimate_kappa root is unique across a random grid") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> dim(2, 300);
  std::uniform_real_distribution<double> rbar(0.001, 0.999);
  for (int i = 0; i < 100; ++i) {
    const int p = dim(rng);
    const double r = rbar(rng);
    const KappaEstimate est = estimate_kappa(p, r);
    double hi = 1.0;
    while (kappa_residual(p, hi, r) < 0.0) hi *= 2.0;
    const double want = oracle::bisect([&](double k) { return kappa_residual(p, k, r); }, 0.0, hi, 0.0);
    CAPTURE(p);
    CAPTURE(r);
    CHECK(std::abs(est.kappa - want) <= 1e-10 * std::max(1.0, want));
  }
}

TEST_CASE("estimate_kappa degenerate inputs") {
  const KappaEstimate uniform = estimate_kappa(10, 1e-12);
  CHECK(uniform.status == KappaStatus::NearUniform);
  CHECK(uniform.kappa == 0.0);

  const KappaEstimate point = estimate_kappa(10, 1.0 - 1e-13);
  CHECK(point.status == KappaStatus::DegenerateResultant);
  CHECK(point.kappa == kKappaMax);

  // root beyond the cap: p = 300 with 1 - r_bar = 1e-11 puts kappa near 1.5e13
  const KappaEstimate capped = estimate_kappa(300, 1.0 - 1e-11);
  CHECK(capped.status == KappaStatus::DegenerateResultant);
  CHECK(capped.kappa == kKappaMax);

  CHECK_THROWS_AS(estimate_kappa(1, 0.5), DomainError);
  CHECK_THROWS_AS(estimate_kappa(3, 1.5), DomainError);
  CHECK_THROWS_AS(estimate_kappa(3, 0.5, KappaOptions{0.0, 50}), DomainError);
}

TEST_CASE("estimate_kappa handles a near-cap root") {
  // 1 - A_p(kappa) ~ (p-1)/(2 kappa) puts this root around 5e5
  const double r = 1.0 - 1e-6;
  const KappaEstimate est = estimate_kappa(2, r);
  CHECK(est.status == KappaStatus::Converged);
  CHECK(est.kappa > 4e5);
  CHECK(est.kappa < kKappaMax);
  CHECK(std::abs(est.residual) <= 1e-13);
}

TEST_CASE("Newton approaches the root monotonically from below") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> dim(2, 200);
  std::uniform_real_distribution<double> log_k(std::log(0.5), std::log(1e3));
  std::uniform_real_distribution<double> frac(0.05, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int p = dim(rng);
    const double root = std::exp(log_k(rng));
    const double r = bessel_ratio_a(p, root);
    const double k0 = frac(rng) * root;
    const auto path = newton_kappa_path<double>(p, r, k0, 8);
    for (std::size_t i = 1; i < path.size(); ++i) {
      CAPTURE(p);
      CAPTURE(root);
      CHECK(path[i] >= path[i - 1] * (1.0 - 1e-14));
      CHECK(path[i] <= root * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("Newton errors contract quadratically with |C| < 1") {
  using oracle::Big;
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> dim(2, 200);
  std::uniform_real_distribution<double> log_k(std::log(0.5), std::log(1e3));
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int p = dim(rng);
    const Big root = std::exp(log_k(rng));
    const Big r = detail::bessel_ratio_cf<Big>(p, root).value;
    const Big k0 = root * Big(0.7);
    const auto path = newton_kappa_path<Big>(p, r, k0, 8);
    for (std::size_t n = 0; n + 1 < path.size(); ++n) {
      const Big e = path[n] - root;
      const Big e_next = path[n + 1] - root;
      if (abs(e) < Big(1e-20) || abs(e) > Big(10)) continue;
      const double c = static_cast<double>(abs(e_next) / (e * e));
      CHECK(c > 0.0);
      CHECK(c < 1.0);
      ++checked;
    }
  }
  CHECK(checked > 20);
}

TEST_CASE("fit_vmf degenerate inputs") {
  RowMatrix same(4, 3);
  for (std::size_t i = 0; i < 4; ++i) same(i, 0) = 1.0;
  const std::vector<double> w(4, 1.0);
  const VmfFit point = fit_vmf(same, w);
  CHECK(point.status == FitStatus::DegenerateResultant);
  CHECK(point.params.kappa == kKappaMax);
  CHECK(point.params.mu == basis(3, 0));

  RowMatrix anti(2, 3);
  anti(0, 1) = 1.0;
  anti(1, 1) = -1.0;
  const VmfFit zero = fit_vmf(anti, std::vector<double>{1.0, 1.0});
  CHECK(zero.status == FitStatus::ZeroResultant);
  CHECK(zero.params.kappa == 0.0);
  CHECK(zero.params.mu == basis(3, 0));

  CHECK_THROWS_AS(fit_vmf(RowMatrix(0, 3), std::vector<double>{}), EmptyInput);
  CHECK_THROWS_AS(fit_vmf(same, std::vector<double>(4, 0.0)), EmptyInput);
  CHECK_THROWS_AS(fit_vmf(same, std::vector<double>(3, 1.0)), DimensionMismatch);
}

TEST_CASE("fit_vmf weighted fit equals replicated unweighted fit") {
  std::mt19937_64 rng(4);
  const int p = 6;
  RowMatrix x(5, p);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto v = random_unit(rng, p);
    std::copy(v.begin(), v.end(), x.row(i).begin());
  }
  // integer weights == repeating rows
  const std::vector<double> w{1, 3, 2, 1, 4};
  RowMatrix rep(11, p);
  std::size_t r = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    for (int c = 0; c < w[i]; ++c, ++r) std::copy(x.row(i).begin(), x.row(i).end(), rep.row(r).begin());
  }
  const VmfFit a = fit_vmf(x, w);
  const VmfFit b = fit_vmf(rep, std::vector<double>(11, 1.0));
  CHECK(a.params.kappa == doctest::Approx(b.params.kappa).epsilon(1e-12));
  for (int i = 0; i < p; ++i) CHECK(a.params.mu[i] == doctest::Approx(b.params.mu[i]).epsilon(1e-12));
}

TEST_CASE("fit_vmf recovers parameters from samples") {
  std::mt19937_64 rng(8);
  const VmfParams truth{random_unit(rng, 30), 50.0};
  const RowMatrix xs = sample_vmf(truth, 100000, 99);
  const VmfFit fit = fit_vmf(xs, std::vector<double>(xs.rows(), 1.0));
  CHECK(std::abs(fit.params.kappa - 50.0) / 50.0 < 0.02);
  CHECK(simd::dot(fit.params.mu, truth.mu) > 0.999);

  const VmfParams big{random_unit(rng, 100), 100.0};
  const RowMatrix ys = sample_vmf(big, 100000, 5);
  const VmfFit fit2 = fit_vmf(ys, std::vector<double>(ys.rows(), 1.0));
  CHECK(std::abs(fit2.params.kappa - 100.0) / 100.0 < 0.05);
}

TEST_CASE("sample_vmf basic contract") {
  const VmfParams params{unit({1, 1, 1, 1}), 3.0};
  const RowMatrix a = sample_vmf(params, 500, 42);
  const RowMatrix b = sample_vmf(params, 500, 42);
  const RowMatrix c = sample_vmf(params, 500, 43);
  bool all_equal = true;
  bool any_diff = false;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    CHECK(std::abs(std::sqrt(simd::dot(a.row(i), a.row(i))) - 1.0) <= 1e-12);
    for (std::size_t j = 0; j < a.cols(); ++j) {
      all_equal = all_equal && a(i, j) == b(i, j);
      any_diff = any_diff || a(i, j) != c(i, j);
    }
  }
  CHECK(all_equal);
  CHECK(any_diff);
  CHECK_THROWS_AS(sample_vmf(VmfParams{{1.0, 1.0}, 1.0}, 3, 1), DomainError);
}

TEST_CASE("sample_vmf moments") {
  {
    const RowMatrix xs = sample_vmf(VmfParams{basis(3, 2), 0.0}, 1000000, 1);
    std::vector<double> mean(3, 0.0);
    for (std::size_t i = 0; i < xs.rows(); ++i) simd::axpy(1.0 / xs.rows(), xs.row(i), mean);
    CHECK(std::sqrt(simd::dot(mean, mean)) < 0.005);
  }
  {
    const VmfParams params{unit({0.3, -1.0, 0.2}), 5.0};
    const RowMatrix xs = sample_vmf(params, 1000000, 2);
    double mean_cos = 0.0;
    for (std::size_t i = 0; i < xs.rows(); ++i) mean_cos += simd::dot(xs.row(i), params.mu);
    mean_cos /= xs.rows();
    CHECK(std::abs(mean_cos - 0.8000908) < 0.002);
  }
}

TEST_CASE("sample_vmf cosine marginal passes Kolmogorov-Smirnov") {
  struct Case {
    int p;
    double kappa;
  };
  std::mt19937_64 rng(21);
  for (const Case c : {Case{3, 1.0}, Case{10, 20.0}, Case{30, 100.0}}) {
    const VmfParams params{random_unit(rng, c.p), c.kappa};
    const std::size_t n = 20000;
    const RowMatrix xs = sample_vmf(params, n, 1000 + c.p);
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = simd::dot(xs.row(i), params.mu);
    const testing::CosineMarginal cdf(c.p, c.kappa);
    const double d = testing::ks_statistic(t, cdf);
    CAPTURE(c.p);
    CAPTURE(c.kappa);
    CHECK(d < testing::ks_critical_001(n));
  }
}
