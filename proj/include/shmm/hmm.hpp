#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "shmm/emission.hpp"
#include "shmm/matrix.hpp"
#include "shmm/record.hpp"

// Hidden Markov machinery over semantic traces. All recursions run in log
// space; the transition step is evaluated as m + log(sum_z w(z) A(z, .)) with
// w = exp(log_alpha - m), which lets the K x K work go through the simd
// kernels while staying a log-sum-exp.

namespace shmm {

struct ShmmModel {
  std::vector<double> pi;    // K initial-state probabilities
  RowMatrix trans;           // K x K row-stochastic
  std::vector<StateParams> states;
  EmissionConfig config;
  int embedding_dim = 0;     // p; 0 when the text modality is disabled

  int n_states() const { return static_cast<int>(pi.size()); }

  /// Throws DomainError unless pi and every row of trans are probability
  /// vectors (sums within 1e-9, no negative entries) and sizes agree.
  void validate() const;
};

/// E-step quantities for one trace.
struct TraceStats {
  RowMatrix gamma;                   // R x K posteriors; rows sum to 1
  RowMatrix xi_sum;                  // K x K expected transition counts
  std::vector<double> best_emission; // per record, max_z log emission
  double log_likelihood = 0.0;
};

/// R x K matrix of log emission densities.
RowMatrix emission_log_matrix(const ShmmModel& model, const Trace& trace);

TraceStats forward_backward(const ShmmModel& model, const Trace& trace);

/// log p(trace | model) from the forward pass alone.
double log_likelihood(const ShmmModel& model, const Trace& trace);

/// Most probable state path; ties go to the lowest state index.
std::vector<int> viterbi(const ShmmModel& model, const Trace& trace);

/// log p(trace, path | model).
double path_log_prob(const ShmmModel& model, const Trace& trace, std::span<const int> path);

struct ScoredCandidate {
  std::size_t index;  // position in the candidate list
  double score;       // log p(prefix, candidate)
};

/// Ranks candidates for the record following `prefix` by the one-step-ahead
/// forward marginal log sum_z alpha(z) sum_z' A(z, z') f(candidate | z').
/// Ranking is descending with ties in input order; at most k_top entries are
/// returned (all when k_top <= 0).
std::vector<ScoredCandidate> score_next(const ShmmModel& model, const Trace& prefix,
                                        std::span<const SemanticRecord> candidates, int k_top = 0);

struct StopCriteria {
  double rel_tol = 1e-6;
  int max_iters = 200;
};

struct TrainOptions {
  int n_states = 1;
  EmissionConfig config = presets::shmm();
  StopCriteria stop;
  Floors floors;
  KappaOptions kappa;
  double prob_floor = 1e-6;         // additive smoothing of pi and A rows
  double init_pseudo_count = 0.1;   // label-count smoothing in the k-means init
  std::uint64_t seed = 0;
  int threads = 1;
  std::optional<ShmmModel> initial;  // skips the k-means initialisation
};

struct IterationRecord {
  int iteration;
  double log_likelihood;
  double seconds;  // EM wall time since the first E-step
};

struct TrainResult {
  ShmmModel model;                      // the model whose likelihood is history.back()
  std::vector<IterationRecord> history;
  bool converged = false;
  int reseeded_states = 0;
};

/// Deterministic initial model: k-means++ / Lloyd on record locations, state
/// parameters from cluster moments, pi and A from smoothed label counts.
ShmmModel initialize_kmeans(const std::vector<Trace>& corpus, const TrainOptions& options);

/// Baum-Welch over a multi-trace corpus. history[i] is the corpus
/// log-likelihood of the i-th model (0 = initial); stops when the relative
/// improvement drops below stop.rel_tol or after stop.max_iters M-steps.
TrainResult baum_welch(const std::vector<Trace>& corpus, const TrainOptions& options);

double corpus_log_likelihood(const ShmmModel& model, const std::vector<Trace>& corpus, int threads = 1);

}  // namespace shmm
