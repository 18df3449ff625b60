#pragma once

#include <cstdint>
#include <vector>

#include "shmm/hmm.hpp"

// Synthetic corpora drawn from a known SHMM: a Markov chain over states, a
// Gaussian time of day and location per state, and vMF message embeddings.

namespace shmm {

struct PlantedOptions {
  int n_states = 5;
  int dim = 10;
  std::vector<double> kappas;        // per-state text concentration; empty uses `kappa`
  double kappa = 50.0;
  double self_transition = 0.5;      // diagonal mass, the rest spread by random weights
  double location_spacing = 0.05;    // degrees between state centres; 0 stacks them
  double location_sd = 0.005;        // degrees
  double time_spacing = 14400.0;     // seconds between state mean times; 0 stacks them
  double time_sd = 1800.0;           // seconds
  std::array<double, 2> origin{-118.25, 34.05};
  std::uint64_t seed = 1;
};

/// A random ground-truth model with the layout described by `options`.
ShmmModel make_planted_model(const PlantedOptions& options);

struct PlantedCorpus {
  std::vector<Trace> traces;
  std::vector<std::vector<int>> states;  // hidden state of every record
};

/// Simulates `n_traces` traces of `trace_len` records each from `truth`.
PlantedCorpus sample_corpus(const ShmmModel& truth, std::size_t n_traces, std::size_t trace_len,
                            std::uint64_t seed);

}  // namespace shmm
