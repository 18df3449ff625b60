#pragma once

#include "shmm/cli/run_config.hpp"

// Pipeline commands. Each writes its outputs under config.output_dir and
// returns a JSON report; preprocess, train and predict also save theirs.

namespace shmm::cli {

/// Raw NDJSON -> corpus.ndjson + preprocess_report.json.
nlohmann::json cmd_preprocess(const RunConfig& config);

/// corpus -> model.json + loglik.csv (iteration, loglik, seconds) + train_report.json.
nlohmann::json cmd_train(const RunConfig& config);

/// model + keyword vectors -> summary.csv.
nlohmann::json cmd_summarize(const RunConfig& config);

/// model + test traces -> accuracy.csv + predict_report.json.
nlohmann::json cmd_predict(const RunConfig& config);

/// synth_<experiment>.csv with columns x, metric, value.
nlohmann::json cmd_synth(const RunConfig& config);

/// Planted corpus.ndjson + truth_model.json.
nlohmann::json cmd_generate(const RunConfig& config);

/// Parses arguments, runs the chosen subcommand and returns the exit code.
int run_cli(int argc, char** argv);

}  // namespace shmm::cli
