#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "shmm/data_io.hpp"
#include "shmm/hmm.hpp"

namespace CLI {
class App;
}

namespace shmm::cli {

/// Everything a command reads. Populated from an optional key = value config
/// file and command-line flags (flags win); see add_run_options for names.
struct RunConfig {
  // paths
  std::filesystem::path input;        // raw NDJSON records (preprocess)
  std::filesystem::path embeddings;   // keyword vectors (preprocess, summarize)
  std::filesystem::path corpus;       // preprocessed traces (train, predict)
  std::filesystem::path test_corpus;  // optional explicit test set (predict)
  std::filesystem::path model;        // model JSON (summarize, predict)
  std::filesystem::path output_dir = ".";
  std::string dataset = "dataset";

  // model and EM
  int n_states = 10;
  std::string preset = "shmm";
  StopCriteria stop;
  double prob_floor = 1e-6;

  // ingestion
  double delta_t_hours = 6.0;
  std::size_t min_len = 2;
  double utc_offset_hours = 0.0;
  std::string idf = "smooth";

  // evaluation
  double train_frac = 0.7;
  double dist_thresh_km = 3.5;
  double time_thresh_s = 300.0;
  std::size_t pool_size = 10;
  bool projected = false;  // locations in metres rather than lon/lat
  std::vector<int> k_list{1, 2, 3, 4, 5};

  // summaries
  std::size_t keywords = 10;
  std::size_t transitions = 5;

  // synthetic experiments and planted corpora
  std::string experiment = "newton_convergence";
  int dim = 100;
  double kappa = 100.0;
  std::size_t samples = 100000;
  std::vector<double> grid;  // empty: the experiment's default grid
  int repeats = 20;
  std::vector<double> kappas;
  std::size_t traces = 500;
  std::size_t trace_len = 20;
  double self_transition = 0.5;
  double location_spacing = 0.05;
  double location_sd = 0.005;
  double time_spacing = 14400.0;
  double time_sd = 1800.0;

  std::uint64_t seed = 0;
  int threads = 1;

  TrainOptions train_options() const;
  PoolOptions pool_options() const;

  /// Config echo for run reports.
  nlohmann::json to_json() const;
};

/// Registers the global flags (--config, --seed, --threads, --output-dir) and
/// every RunConfig key on `app`.
void add_run_options(CLI::App& app, RunConfig& config);

}  // namespace shmm::cli
