#include "shmm/hmm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "shmm/parallel.hpp"
#include "shmm/random.hpp"
#include "shmm/simd/kernels.hpp"

namespace shmm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double max_of(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  return m;
}

double log_sum_exp(std::span<const double> v) {
  const double m = max_of(v);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

void check_trace(const ShmmModel& model, const Trace& trace) {
  if (trace.empty()) throw EmptyInput("trace has no records");
  if (model.config.text == TextModel::None) return;
  for (const auto& r : trace.records) {
    if (static_cast<int>(r.embedding.size()) != model.embedding_dim) {
      throw DimensionMismatch("record embedding dimension does not match the model");
    }
  }
}

std::vector<PreparedEmission> prepare(const ShmmModel& model) {
  std::vector<PreparedEmission> out;
  out.reserve(model.states.size());
  for (const auto& s : model.states) out.emplace_back(s, model.config);
  return out;
}

RowMatrix emission_matrix(const std::vector<PreparedEmission>& prepared, const Trace& trace) {
  RowMatrix e(trace.size(), prepared.size());
  for (std::size_t t = 0; t < trace.size(); ++t) {
    for (std::size_t k = 0; k < prepared.size(); ++k) e(t, k) = prepared[k].log_density(trace.records[t]);
  }
  return e;
}

// next(z') = m + log sum_z exp(prev(z) - m) A(z, z'), with m = max prev.
void transition_step(const RowMatrix& trans, std::span<const double> prev, std::span<double> next,
                     std::vector<double>& scratch) {
  const std::size_t k = prev.size();
  const double m = max_of(prev);
  scratch.assign(k, 0.0);
  if (m == kNegInf) {
    std::fill(next.begin(), next.end(), kNegInf);
    return;
  }
  for (std::size_t z = 0; z < k; ++z) {
    const double w = std::exp(prev[z] - m);
    if (w != 0.0) simd::axpy(w, trans.row(z), scratch);
  }
  for (std::size_t z = 0; z < k; ++z) next[z] = m + std::log(scratch[z]);
}

RowMatrix forward(const ShmmModel& model, const RowMatrix& e) {
  const std::size_t r = e.rows();
  const std::size_t k = e.cols();
  RowMatrix alpha(r, k);
  for (std::size_t z = 0; z < k; ++z) alpha(0, z) = std::log(model.pi[z]) + e(0, z);
  std::vector<double> scratch;
  for (std::size_t t = 1; t < r; ++t) {
    transition_step(model.trans, alpha.row(t - 1), alpha.row(t), scratch);
    for (std::size_t z = 0; z < k; ++z) alpha(t, z) += e(t, z);
  }
  return alpha;
}

double finite_or_throw(double ll) {
  if (!std::isfinite(ll)) throw NonFiniteLikelihood("trace log-likelihood is not finite");
  return ll;
}

void normalise_with_floor(std::span<double> v, double floor) {
  double total = std::accumulate(v.begin(), v.end(), 0.0);
  if (!(total > 0.0)) {
    std::fill(v.begin(), v.end(), 1.0 / v.size());
    return;
  }
  for (double& x : v) x /= total;
  if (floor <= 0.0) return;
  const double denom = 1.0 + floor * v.size();
  for (double& x : v) x = (x + floor) / denom;
}

}  // namespace

void ShmmModel::validate() const {
  const std::size_t k = pi.size();
  if (k == 0) throw DomainError("model has no states");
  if (trans.rows() != k || trans.cols() != k || states.size() != k) {
    throw DimensionMismatch("model component sizes disagree");
  }
  config.validate();
  auto check_prob = [](std::span<const double> v, const char* what) {
    double s = 0.0;
    for (double x : v) {
      if (!(x >= 0.0)) throw DomainError(std::string(what) + " has a negative or NaN entry");
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-9) throw DomainError(std::string(what) + " does not sum to 1");
  };
  check_prob(pi, "pi");
  for (std::size_t z = 0; z < k; ++z) check_prob(trans.row(z), "transition row");
}

RowMatrix emission_log_matrix(const ShmmModel& model, const Trace& trace) {
  check_trace(model, trace);
  return emission_matrix(prepare(model), trace);
}

double log_likelihood(const ShmmModel& model, const Trace& trace) {
  const RowMatrix e = emission_log_matrix(model, trace);
  const RowMatrix alpha = forward(model, e);
  return finite_or_throw(log_sum_exp(alpha.row(alpha.rows() - 1)));
}

namespace {

TraceStats forward_backward_prepared(const ShmmModel& model, const std::vector<PreparedEmission>& prepared,
                                     const Trace& trace) {
  check_trace(model, trace);
  const std::size_t r = trace.size();
  const std::size_t k = prepared.size();
  const RowMatrix e = emission_matrix(prepared, trace);
  const RowMatrix alpha = forward(model, e);

  TraceStats out;
  out.log_likelihood = finite_or_throw(log_sum_exp(alpha.row(r - 1)));
  out.gamma = RowMatrix(r, k);
  out.xi_sum = RowMatrix(k, k);
  out.best_emission.resize(r);
  for (std::size_t t = 0; t < r; ++t) out.best_emission[t] = max_of(e.row(t));

  std::vector<double> log_beta(k, 0.0);
  std::vector<double> u(k);
  std::vector<double> wa(k);
  std::vector<double> row(k);
  auto set_gamma = [&](std::size_t t) {
    double s = 0.0;
    for (std::size_t z = 0; z < k; ++z) {
      out.gamma(t, z) = std::exp(alpha(t, z) + log_beta[z] - out.log_likelihood);
      s += out.gamma(t, z);
    }
    for (std::size_t z = 0; z < k; ++z) out.gamma(t, z) /= s;
  };
  set_gamma(r - 1);

  for (std::size_t t = r - 1; t-- > 0;) {
    // u(z') = exp(e_{t+1}(z') + beta_{t+1}(z') - mb)
    double mb = kNegInf;
    for (std::size_t z = 0; z < k; ++z) mb = std::max(mb, e(t + 1, z) + log_beta[z]);
    for (std::size_t z = 0; z < k; ++z) u[z] = std::exp(e(t + 1, z) + log_beta[z] - mb);

    // xi_t(z, z') = wa(z) A(z, z') u(z') / normaliser
    const double ma = max_of(alpha.row(t));
    double slot_total = 0.0;
    for (std::size_t z = 0; z < k; ++z) {
      wa[z] = std::exp(alpha(t, z) - ma);
      row[z] = simd::dot(model.trans.row(z), u);  // sum_z' A(z, z') u(z')
      slot_total += wa[z] * row[z];
    }
    for (std::size_t z = 0; z < k; ++z) {
      if (wa[z] != 0.0) simd::mul_axpy(wa[z] / slot_total, model.trans.row(z), u, out.xi_sum.row(z));
      log_beta[z] = mb + std::log(row[z]);
    }
    set_gamma(t);
  }
  return out;
}

}  // namespace

TraceStats forward_backward(const ShmmModel& model, const Trace& trace) {
  return forward_backward_prepared(model, prepare(model), trace);
}

std::vector<int> viterbi(const ShmmModel& model, const Trace& trace) {
  const RowMatrix e = emission_log_matrix(model, trace);
  const std::size_t r = e.rows();
  const std::size_t k = e.cols();
  RowMatrix log_a(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) log_a(i, j) = std::log(model.trans(i, j));
  }
  RowMatrix delta(r, k);
  std::vector<int> back(r * k, 0);
  for (std::size_t z = 0; z < k; ++z) delta(0, z) = std::log(model.pi[z]) + e(0, z);
  for (std::size_t t = 1; t < r; ++t) {
    for (std::size_t to = 0; to < k; ++to) {
      double best = kNegInf;
      int arg = 0;
      for (std::size_t from = 0; from < k; ++from) {
        const double v = delta(t - 1, from) + log_a(from, to);
        if (v > best) {
          best = v;
          arg = static_cast<int>(from);
        }
      }
      delta(t, to) = best + e(t, to);
      back[t * k + to] = arg;
    }
  }
  std::vector<int> path(r, 0);
  double best = kNegInf;
  for (std::size_t z = 0; z < k; ++z) {
    if (delta(r - 1, z) > best) {
      best = delta(r - 1, z);
      path[r - 1] = static_cast<int>(z);
    }
  }
  for (std::size_t t = r - 1; t > 0; --t) path[t - 1] = back[t * k + path[t]];
  return path;
}

double path_log_prob(const ShmmModel& model, const Trace& trace, std::span<const int> path) {
  const RowMatrix e = emission_log_matrix(model, trace);
  if (path.size() != e.rows()) throw DimensionMismatch("path length differs from trace length");
  double lp = std::log(model.pi[path[0]]) + e(0, path[0]);
  for (std::size_t t = 1; t < path.size(); ++t) lp += std::log(model.trans(path[t - 1], path[t])) + e(t, path[t]);
  return lp;
}

std::vector<ScoredCandidate> score_next(const ShmmModel& model, const Trace& prefix,
                                        std::span<const SemanticRecord> candidates, int k_top) {
  const auto prepared = prepare(model);
  check_trace(model, prefix);
  if (candidates.empty()) throw EmptyInput("no candidates to score");
  const std::size_t k = prepared.size();
  const RowMatrix alpha = forward(model, emission_matrix(prepared, prefix));
  std::vector<double> predicted(k);
  std::vector<double> scratch;
  transition_step(model.trans, alpha.row(alpha.rows() - 1), predicted, scratch);

  std::vector<ScoredCandidate> scored;
  scored.reserve(candidates.size());
  std::vector<double> terms(k);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (model.config.text != TextModel::None &&
        static_cast<int>(candidates[c].embedding.size()) != model.embedding_dim) {
      throw DimensionMismatch("candidate embedding dimension does not match the model");
    }
    for (std::size_t z = 0; z < k; ++z) terms[z] = predicted[z] + prepared[z].log_density(candidates[c]);
    scored.push_back({c, log_sum_exp(terms)});
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const ScoredCandidate& a, const ScoredCandidate& b) { return a.score > b.score; });
  if (k_top > 0 && static_cast<std::size_t>(k_top) < scored.size()) scored.resize(k_top);
  return scored;
}

double corpus_log_likelihood(const ShmmModel& model, const std::vector<Trace>& corpus, int threads) {
  std::vector<double> ll(corpus.size());
  parallel_for(corpus.size(), threads, [&](std::size_t i) { ll[i] = log_likelihood(model, corpus[i]); });
  return std::accumulate(ll.begin(), ll.end(), 0.0);
}

namespace {

struct FlatCorpus {
  std::vector<const SemanticRecord*> records;
  std::vector<std::size_t> trace_offset;  // first flat index of each trace
};

FlatCorpus flatten(const std::vector<Trace>& corpus) {
  FlatCorpus flat;
  for (const auto& trace : corpus) {
    flat.trace_offset.push_back(flat.records.size());
    for (const auto& r : trace.records) flat.records.push_back(&r);
  }
  return flat;
}

int embedding_dim_of(const std::vector<Trace>& corpus, const EmissionConfig& config) {
  if (config.text == TextModel::None) return 0;
  const std::size_t p = corpus.front().records.front().embedding.size();
  if (p < 2) throw DimensionMismatch("text modality enabled but records carry no embedding");
  for (const auto& trace : corpus) {
    for (const auto& r : trace.records) {
      if (r.embedding.size() != p) throw DimensionMismatch("records disagree on embedding dimension");
    }
  }
  return static_cast<int>(p);
}

void check_corpus(const std::vector<Trace>& corpus) {
  if (corpus.empty()) throw EmptyCorpus("corpus has no traces");
  for (const auto& t : corpus) {
    if (t.empty()) throw EmptyCorpus("corpus contains an empty trace");
  }
}

double squared_distance(const std::array<double, 2>& a, const std::array<double, 2>& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  return dx * dx + dy * dy;
}

std::vector<int> kmeans_labels(const std::vector<const SemanticRecord*>& records, int k, std::uint64_t seed) {
  const std::size_t n = records.size();
  std::mt19937_64 rng(seed);
  std::vector<std::array<double, 2>> centres;
  centres.push_back(records[uniform_index(rng, n)]->loc);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(centres.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(records[i]->loc, centres.back()));
      total += d2[i];
    }
    std::size_t pick = uniform_index(rng, n);
    if (total > 0.0) {
      const double target = uniform01(rng) * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target) {
          pick = i;
          break;
        }
      }
    }
    centres.push_back(records[pick]->loc);
  }

  std::vector<int> labels(n, -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = squared_distance(records[i]->loc, centres[0]);
      for (int c = 1; c < k; ++c) {
        const double d = squared_distance(records[i]->loc, centres[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<std::array<double, 2>> sums(k, {0.0, 0.0});
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums[labels[i]][0] += records[i]->loc[0];
      sums[labels[i]][1] += records[i]->loc[1];
      ++counts[labels[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) centres[c] = {sums[c][0] / counts[c], sums[c][1] / counts[c]};
    }
  }
  return labels;
}

StateParams reseeded_state(const StateParams& pooled, const SemanticRecord& record, const EmissionConfig& config) {
  StateParams s = pooled;
  s.mu_t = record.t_day;
  s.mu_l = record.loc;
  if (config.text == TextModel::Vmf) s.text.mu = record.embedding;
  if (config.text == TextModel::DiagonalGaussian) s.text_gauss.mean = record.embedding;
  return s;
}

}  // namespace

ShmmModel initialize_kmeans(const std::vector<Trace>& corpus, const TrainOptions& options) {
  check_corpus(corpus);
  options.config.validate();
  const int k = options.n_states;
  if (k < 1) throw DomainError("number of states must be >= 1");

  const FlatCorpus flat = flatten(corpus);
  ShmmModel model;
  model.config = options.config;
  model.embedding_dim = embedding_dim_of(corpus, options.config);

  const std::vector<int> labels = kmeans_labels(flat.records, k, options.seed);
  const std::vector<double> ones(flat.records.size(), 1.0);
  const StateParams pooled = m_step_state(flat.records, ones, options.config, options.floors, options.kappa);

  std::vector<double> w(flat.records.size());
  for (int c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = labels[i] == c ? 1.0 : 0.0;
    try {
      model.states.push_back(m_step_state(flat.records, w, options.config, options.floors, options.kappa));
    } catch (const EmptyState&) {
      model.states.push_back(reseeded_state(pooled, *flat.records[c % flat.records.size()], options.config));
    }
  }

  model.pi.assign(k, options.init_pseudo_count);
  model.trans = RowMatrix(k, k, options.init_pseudo_count);
  for (std::size_t t = 0; t < corpus.size(); ++t) {
    const std::size_t base = flat.trace_offset[t];
    model.pi[labels[base]] += 1.0;
    for (std::size_t i = 1; i < corpus[t].size(); ++i) model.trans(labels[base + i - 1], labels[base + i]) += 1.0;
  }
  normalise_with_floor(model.pi, 0.0);
  for (int z = 0; z < k; ++z) normalise_with_floor(model.trans.row(z), 0.0);
  return model;
}

TrainResult baum_welch(const std::vector<Trace>& corpus, const TrainOptions& options) {
  check_corpus(corpus);
  TrainResult result;
  result.model = options.initial ? *options.initial : initialize_kmeans(corpus, options);
  ShmmModel& model = result.model;
  model.validate();
  const int k = model.n_states();
  if (model.config.text != TextModel::None && model.embedding_dim != embedding_dim_of(corpus, model.config)) {
    throw DimensionMismatch("corpus embedding dimension does not match the initial model");
  }

  const FlatCorpus flat = flatten(corpus);
  const std::vector<double> ones(flat.records.size(), 1.0);
  std::optional<StateParams> pooled;

  const auto start = std::chrono::steady_clock::now();
  std::vector<TraceStats> stats(corpus.size());
  std::vector<double> weights(flat.records.size());

  for (int iter = 0;; ++iter) {
    const auto prepared = prepare(model);
    parallel_for(corpus.size(), options.threads,
                 [&](std::size_t i) { stats[i] = forward_backward_prepared(model, prepared, corpus[i]); });
    double ll = 0.0;
    for (const auto& s : stats) ll += s.log_likelihood;
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back({iter, ll, seconds});

    if (iter > 0) {
      const double prev = result.history[iter - 1].log_likelihood;
      if ((ll - prev) / std::abs(prev) < options.stop.rel_tol) {
        result.converged = true;
        break;
      }
    }
    if (iter >= options.stop.max_iters) break;

    // M-step, statistics reduced in trace order
    ShmmModel next = model;
    std::vector<int> dead;
    for (int z = 0; z < k; ++z) {
      for (std::size_t t = 0; t < corpus.size(); ++t) {
        const std::size_t base = flat.trace_offset[t];
        for (std::size_t i = 0; i < corpus[t].size(); ++i) weights[base + i] = stats[t].gamma(i, z);
      }
      try {
        next.states[z] = m_step_state(flat.records, weights, model.config, options.floors, options.kappa);
      } catch (const EmptyState&) {
        dead.push_back(z);
      }
    }
    if (!dead.empty()) {
      if (!pooled) pooled = m_step_state(flat.records, ones, model.config, options.floors, options.kappa);
      std::vector<std::pair<double, std::size_t>> worst;
      for (std::size_t t = 0; t < corpus.size(); ++t) {
        for (std::size_t i = 0; i < corpus[t].size(); ++i) {
          worst.push_back({stats[t].best_emission[i], flat.trace_offset[t] + i});
        }
      }
      std::stable_sort(worst.begin(), worst.end(), [](auto& a, auto& b) { return a.first < b.first; });
      for (std::size_t d = 0; d < dead.size(); ++d) {
        next.states[dead[d]] = reseeded_state(*pooled, *flat.records[worst[d % worst.size()].second], model.config);
        ++result.reseeded_states;
      }
    }

    std::fill(next.pi.begin(), next.pi.end(), 0.0);
    next.trans.fill(0.0);
    for (std::size_t t = 0; t < corpus.size(); ++t) {
      for (int z = 0; z < k; ++z) next.pi[z] += stats[t].gamma(0, z);
      simd::axpy(1.0, stats[t].xi_sum.flat(), next.trans.flat());
    }
    normalise_with_floor(next.pi, options.prob_floor);
    for (int z = 0; z < k; ++z) normalise_with_floor(next.trans.row(z), options.prob_floor);
    model = std::move(next);
  }
  return result;
}

}  // namespace shmm
