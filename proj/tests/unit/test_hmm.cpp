#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "shmm/alignment.hpp"
#include "shmm/errors.hpp"
#include "shmm/hmm.hpp"
#include "shmm/planted.hpp"
#include "brute_force.hpp"

using namespace shmm;
using namespace shmm::brute;

namespace {

ShmmModel permuted(const ShmmModel& m, const std::vector<int>& perm) {
  // new state i is old state perm[i]
  ShmmModel out = m;
  const int k = m.n_states();
  for (int i = 0; i < k; ++i) {
    out.pi[i] = m.pi[perm[i]];
    out.states[i] = m.states[perm[i]];
    for (int j = 0; j < k; ++j) out.trans(i, j) = m.trans(perm[i], perm[j]);
  }
  return out;
}

}  // namespace

TEST_CASE("forward log-likelihood matches path enumeration") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const int k = 1 + trial % 4;
    const int r = 1 + trial % 6;
    const auto m = random_model(rng, k, 4);
    const auto t = random_trace(rng, r, 4);
    const double oracle = brute_log_likelihood(m, t);
    CHECK(std::abs(log_likelihood(m, t) - oracle) < 1e-9);
    CHECK(std::abs(forward_backward(m, t).log_likelihood - oracle) < 1e-9);
  }
}

TEST_CASE("K=3, R=4 brute force over 81 paths") {
  std::mt19937_64 rng(3);
  const auto m = random_model(rng, 3, 5);
  const auto t = random_trace(rng, 4, 5);
  int count = 0;
  for_each_path(3, 4, [&](const std::vector<int>&) { ++count; });
  CHECK(count == 81);
  CHECK(std::abs(log_likelihood(m, t) - brute_log_likelihood(m, t)) < 1e-9);
}

TEST_CASE("posteriors match enumerated marginals") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const int k = 2 + trial % 3;
    const int r = 2 + trial % 4;
    const auto m = random_model(rng, k, 3);
    const auto t = random_trace(rng, r, 3);
    const double ll = brute_log_likelihood(m, t);
    RowMatrix gamma(r, k);
    RowMatrix xi(k, k);
    for_each_path(k, r, [&](const std::vector<int>& path) {
      const double w = std::exp(brute_path_log_prob(m, t, path) - ll);
      for (int i = 0; i < r; ++i) gamma(i, path[i]) += w;
      for (int i = 1; i < r; ++i) xi(path[i - 1], path[i]) += w;
    });
    const auto stats = forward_backward(m, t);
    double xi_total = 0.0;
    for (int i = 0; i < r; ++i) {
      double row = 0.0;
      for (int z = 0; z < k; ++z) {
        CHECK(std::abs(stats.gamma(i, z) - gamma(i, z)) < 1e-9);
        row += stats.gamma(i, z);
      }
      CHECK(std::abs(row - 1.0) < 1e-9);
    }
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) {
        CHECK(stats.xi_sum(a, b) >= 0.0);
        CHECK(std::abs(stats.xi_sum(a, b) - xi(a, b)) < 1e-9);
        xi_total += stats.xi_sum(a, b);
      }
    }
    // one unit of mass per transition slot
    CHECK(std::abs(xi_total - (r - 1)) < 1e-9);
  }
}

TEST_CASE("single-state model") {
  std::mt19937_64 rng(7);
  const auto m = random_model(rng, 1, 3);
  const auto t = random_trace(rng, 5, 3);
  double expected = 0.0;
  for (const auto& rec : t.records) expected += log_emission(m.states[0], m.config, rec);
  const auto stats = forward_backward(m, t);
  CHECK(std::abs(stats.log_likelihood - expected) < 1e-9);
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(stats.gamma(i, 0) == doctest::Approx(1.0).epsilon(1e-12));
  const auto path = viterbi(m, t);
  CHECK(std::all_of(path.begin(), path.end(), [](int z) { return z == 0; }));

  std::vector<SemanticRecord> cands;
  for (int c = 0; c < 6; ++c) cands.push_back(random_record(rng, 3));
  const auto ranked = score_next(m, t, cands);
  for (std::size_t i = 1; i < ranked.size(); ++i) {
    CHECK(log_emission(m.states[0], m.config, cands[ranked[i - 1].index]) >=
          log_emission(m.states[0], m.config, cands[ranked[i].index]));
  }
}

TEST_CASE("length-1 trace gives gamma proportional to pi times emission") {
  std::mt19937_64 rng(9);
  const auto m = random_model(rng, 3, 4);
  const auto t = random_trace(rng, 1, 4);
  std::vector<double> w(3);
  for (int z = 0; z < 3; ++z) w[z] = m.pi[z] * std::exp(log_emission(m.states[z], m.config, t.records[0]));
  const double s = w[0] + w[1] + w[2];
  const auto stats = forward_backward(m, t);
  for (int z = 0; z < 3; ++z) CHECK(std::abs(stats.gamma(0, z) - w[z] / s) < 1e-12);
  CHECK(stats.xi_sum.flat()[0] == 0.0);
}

TEST_CASE("viterbi matches exhaustive argmax") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 40; ++trial) {
    const int k = 1 + trial % 4;
    const int r = 1 + (trial / 4) % 6;
    const auto m = random_model(rng, k, 3);
    const auto t = random_trace(rng, r, 3);
    double best = -INFINITY;
    std::vector<int> best_path;
    for_each_path(k, r, [&](const std::vector<int>& path) {
      const double lp = brute_path_log_prob(m, t, path);
      if (lp > best) {
        best = lp;
        best_path = path;
      }
    });
    const auto path = viterbi(m, t);
    CHECK(std::abs(path_log_prob(m, t, path) - best) < 1e-9);
    CHECK(path == best_path);
  }
}

TEST_CASE("viterbi follows a deterministic chain") {
  std::mt19937_64 rng(17);
  auto m = random_model(rng, 3, 3);
  m.pi = {1.0, 0.0, 0.0};
  m.trans.fill(0.0);
  m.trans(0, 1) = m.trans(1, 2) = m.trans(2, 0) = 1.0;
  Trace t;
  for (int i = 0; i < 6; ++i) {
    const auto& s = m.states[i % 3];
    SemanticRecord r;
    r.t_day = s.mu_t;
    r.loc = s.mu_l;
    r.embedding = s.text.mu;
    t.records.push_back(r);
  }
  CHECK(viterbi(m, t) == std::vector<int>{0, 1, 2, 0, 1, 2});
  CHECK(std::isfinite(log_likelihood(m, t)));
}

TEST_CASE("viterbi ties go to the lowest index") {
  std::mt19937_64 rng(19);
  auto m = random_model(rng, 3, 3);
  m.states[1] = m.states[0];
  m.states[2] = m.states[0];
  m.pi = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  m.trans.fill(1.0 / 3);
  const auto t = random_trace(rng, 4, 3);
  CHECK(viterbi(m, t) == std::vector<int>{0, 0, 0, 0});
}

TEST_CASE("likelihood is invariant under state relabelling") {
  std::mt19937_64 rng(23);
  const auto m = random_model(rng, 4, 5);
  const auto t = random_trace(rng, 6, 5);
  std::vector<int> perm{2, 0, 3, 1};
  const auto pm = permuted(m, perm);
  CHECK(std::abs(log_likelihood(m, t) - log_likelihood(pm, t)) < 1e-12);
  const auto path = viterbi(m, t);
  const auto ppath = viterbi(pm, t);
  for (std::size_t i = 0; i < path.size(); ++i) CHECK(perm[ppath[i]] == path[i]);
}

TEST_CASE("score_next matches enumeration over extended paths") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 30; ++trial) {
    const int k = 1 + trial % 4;
    const int r = 1 + trial % 5;
    const auto m = random_model(rng, k, 3);
    const auto prefix = random_trace(rng, r, 3);
    std::vector<SemanticRecord> cands;
    for (int c = 0; c < 5; ++c) cands.push_back(random_record(rng, 3));
    const auto ranked = score_next(m, prefix, cands);
    REQUIRE(ranked.size() == cands.size());
    for (const auto& sc : ranked) {
      Trace ext = prefix;
      ext.records.push_back(cands[sc.index]);
      CHECK(std::abs(sc.score - brute_log_likelihood(m, ext)) < 1e-9);
    }
    for (std::size_t i = 1; i < ranked.size(); ++i) CHECK(ranked[i - 1].score >= ranked[i].score);
  }
}

TEST_CASE("score_next on a single candidate equals forward on the extended trace") {
  std::mt19937_64 rng(31);
  const auto m = random_model(rng, 3, 4);
  const auto prefix = random_trace(rng, 3, 4);
  const auto cand = random_record(rng, 4);
  Trace ext = prefix;
  ext.records.push_back(cand);
  const auto scored = score_next(m, prefix, std::span<const SemanticRecord>(&cand, 1));
  CHECK(std::abs(scored[0].score - log_likelihood(m, ext)) < 1e-9);
}

TEST_CASE("score_next keeps duplicates in input order and truncates") {
  std::mt19937_64 rng(37);
  const auto m = random_model(rng, 3, 3);
  const auto prefix = random_trace(rng, 2, 3);
  const auto a = random_record(rng, 3);
  const auto b = random_record(rng, 3);
  const std::vector<SemanticRecord> cands{a, b, a, b, a};
  const auto ranked = score_next(m, prefix, cands);
  std::vector<std::size_t> order;
  for (const auto& s : ranked) order.push_back(s.index);
  const bool a_first = ranked[0].index == 0;
  const std::vector<std::size_t> expect = a_first ? std::vector<std::size_t>{0, 2, 4, 1, 3}
                                                  : std::vector<std::size_t>{1, 3, 0, 2, 4};
  CHECK(order == expect);
  CHECK(ranked[0].score == ranked[1].score);
  CHECK(score_next(m, prefix, cands, 2).size() == 2);
}

TEST_CASE("dimension and input errors") {
  std::mt19937_64 rng(41);
  const auto m = random_model(rng, 2, 3);
  CHECK_THROWS_AS(forward_backward(m, Trace{}), EmptyInput);
  CHECK_THROWS_AS(forward_backward(m, random_trace(rng, 3, 4)), DimensionMismatch);
  CHECK_THROWS_AS(viterbi(m, random_trace(rng, 3, 5)), DimensionMismatch);
  const std::vector<SemanticRecord> bad{random_record(rng, 4)};
  CHECK_THROWS_AS(score_next(m, random_trace(rng, 2, 3), bad), DimensionMismatch);
  auto broken = m;
  broken.trans(0, 0) += 0.1;
  CHECK_THROWS_AS(broken.validate(), DomainError);
  CHECK_THROWS_AS(baum_welch({}, TrainOptions{}), EmptyCorpus);
}

TEST_CASE("non-finite likelihood is reported") {
  std::mt19937_64 rng(43);
  const auto t = random_trace(rng, 3, 3);
  auto m = random_model(rng, 2, 3);
  m.pi = {0.0, 0.0};
  CHECK_THROWS_AS(forward_backward(m, t), NonFiniteLikelihood);
  m = random_model(rng, 2, 3);
  m.states[0].mu_t = std::nan("");
  m.states[1].mu_t = std::nan("");
  CHECK_THROWS_AS(log_likelihood(m, t), NonFiniteLikelihood);
}

TEST_CASE("hungarian matches brute-force assignment") {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 6;
    RowMatrix cost(n, n);
    for (double& c : cost.flat()) c = u(rng);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = INFINITY;
    do {
      double c = 0.0;
      for (int i = 0; i < n; ++i) c += cost(i, perm[i]);
      best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    const auto a = hungarian(cost);
    double got = 0.0;
    for (int i = 0; i < n; ++i) got += cost(i, a[i]);
    CHECK(got == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("EM with one state converges to the pooled fit") {
  PlantedOptions po;
  po.n_states = 1;
  po.dim = 6;
  po.kappa = 20.0;
  const auto truth = make_planted_model(po);
  const auto corpus = sample_corpus(truth, 40, 8, 3);
  TrainOptions opt;
  opt.n_states = 1;
  const auto res = baum_welch(corpus.traces, opt);
  CHECK(res.converged);
  CHECK(res.history.size() <= 3);  // at most two M-steps

  std::vector<const SemanticRecord*> ptrs;
  for (const auto& t : corpus.traces) {
    for (const auto& r : t.records) ptrs.push_back(&r);
  }
  const std::vector<double> ones(ptrs.size(), 1.0);
  const auto pooled = m_step_state(ptrs, ones, opt.config);
  const auto& s = res.model.states[0];
  CHECK(s.mu_t == doctest::Approx(pooled.mu_t).epsilon(1e-10));
  CHECK(s.sigma_t == doctest::Approx(pooled.sigma_t).epsilon(1e-8));
  CHECK(s.mu_l[0] == doctest::Approx(pooled.mu_l[0]).epsilon(1e-12));
  CHECK(s.sigma_l.xx == doctest::Approx(pooled.sigma_l.xx).epsilon(1e-8));
  CHECK(s.text.kappa == doctest::Approx(pooled.text.kappa).epsilon(1e-8));
  CHECK(res.model.trans(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("EM is monotone, deterministic and recovers a planted model") {
  PlantedOptions po;
  po.n_states = 3;
  po.dim = 8;
  po.kappas = {15.0, 40.0, 100.0};
  po.seed = 5;
  const auto truth = make_planted_model(po);
  const auto corpus = sample_corpus(truth, 150, 15, 7);

  TrainOptions opt;
  opt.n_states = 3;
  opt.seed = 2;
  opt.stop.max_iters = 60;
  opt.stop.rel_tol = 1e-10;
  const auto a = baum_welch(corpus.traces, opt);
  opt.threads = 3;
  const auto b = baum_welch(corpus.traces, opt);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].log_likelihood == b.history[i].log_likelihood);
  }
  for (std::size_t i = 1; i < a.history.size(); ++i) {
    const double prev = a.history[i - 1].log_likelihood;
    CHECK(a.history[i].log_likelihood >= prev - 1e-8 * std::abs(prev));
  }
  CHECK(a.history.back().log_likelihood ==
        doctest::Approx(corpus_log_likelihood(a.model, corpus.traces)).epsilon(1e-12));

  const auto match = align_states(truth, a.model);
  for (int i = 0; i < 3; ++i) {
    const auto& est = a.model.states[match[i]];
    CHECK(est.text.kappa == doctest::Approx(truth.states[i].text.kappa).epsilon(0.15));
    double cos = 0.0;
    for (int d = 0; d < po.dim; ++d) cos += est.text.mu[d] * truth.states[i].text.mu[d];
    CHECK(cos > 0.98);
    double tv = 0.0;
    for (int j = 0; j < 3; ++j) tv += std::abs(a.model.trans(match[i], match[j]) - truth.trans(i, j));
    CHECK(0.5 * tv < 0.06);
  }
}

TEST_CASE("dead states are reseeded") {
  PlantedOptions po;
  po.n_states = 2;
  po.dim = 4;
  const auto truth = make_planted_model(po);
  const auto corpus = sample_corpus(truth, 30, 6, 1);
  ShmmModel init = truth;
  init.pi = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  init.trans = RowMatrix(3, 3, 1.0 / 3);
  StateParams far = truth.states[0];
  far.mu_l = {100.0, -60.0};
  far.sigma_l = {1e-6, 0.0, 1e-6};
  init.states.push_back(far);
  TrainOptions opt;
  opt.n_states = 3;
  opt.initial = init;
  opt.stop.max_iters = 3;
  const auto res = baum_welch(corpus.traces, opt);
  CHECK(res.reseeded_states >= 1);
  CHECK(res.model.states[2].mu_l[0] < 0.0);
  CHECK(std::isfinite(res.history.back().log_likelihood));
}
