#include "shmm/cli/run_config.hpp"

#include <CLI11.hpp>

#include "shmm/emission.hpp"

namespace shmm::cli {

TrainOptions RunConfig::train_options() const {
  TrainOptions opt;
  opt.n_states = n_states;
  opt.config = preset_by_name(preset);
  opt.stop = stop;
  opt.prob_floor = prob_floor;
  opt.seed = seed;
  opt.threads = threads;
  return opt;
}

PoolOptions RunConfig::pool_options() const {
  PoolOptions opt;
  opt.dist_thresh = dist_thresh_km * 1000.0;
  opt.time_thresh = time_thresh_s;
  opt.pool_size = pool_size;
  opt.geographic = !projected;
  return opt;
}

nlohmann::json RunConfig::to_json() const {
  return {
      {"input", input.string()},
      {"embeddings", embeddings.string()},
      {"corpus", corpus.string()},
      {"test_corpus", test_corpus.string()},
      {"model", model.string()},
      {"output_dir", output_dir.string()},
      {"dataset", dataset},
      {"n_states", n_states},
      {"preset", preset},
      {"rel_tol", stop.rel_tol},
      {"max_iters", stop.max_iters},
      {"prob_floor", prob_floor},
      {"delta_t_hours", delta_t_hours},
      {"min_len", min_len},
      {"utc_offset_hours", utc_offset_hours},
      {"idf", idf},
      {"train_frac", train_frac},
      {"dist_thresh_km", dist_thresh_km},
      {"time_thresh_s", time_thresh_s},
      {"pool_size", pool_size},
      {"projected", projected},
      {"k_list", k_list},
      {"keywords", keywords},
      {"transitions", transitions},
      {"seed", seed},
      {"threads", threads},
  };
}

void add_run_options(CLI::App& app, RunConfig& c) {
  app.set_config("--config", "", "key = value configuration file; flags override it");
  app.add_option("--seed", c.seed, "Seed for every randomised step")->capture_default_str();
  app.add_option("--threads", c.threads, "Worker thread cap")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--output-dir", c.output_dir, "Directory receiving all outputs")->capture_default_str();

  app.add_option("--input", c.input, "Raw NDJSON records (.gz accepted)")->group("Paths");
  app.add_option("--embeddings", c.embeddings, "Keyword vector file")->group("Paths");
  app.add_option("--corpus", c.corpus, "Preprocessed trace corpus")->group("Paths");
  app.add_option("--test-corpus", c.test_corpus, "Explicit test traces for predict")->group("Paths");
  app.add_option("--model", c.model, "Model JSON")->group("Paths");
  app.add_option("--dataset", c.dataset, "Dataset label for metrics")->group("Paths")->capture_default_str();

  const std::string em = "Model";
  app.add_option("--n-states", c.n_states, "Number of latent states K")
      ->check(CLI::PositiveNumber)->group(em)->capture_default_str();
  app.add_option("--preset", c.preset, "Emission preset")
      ->check(CLI::IsMember({"shmm", "hmm", "st-hmm", "ghmm"}))->group(em)->capture_default_str();
  app.add_option("--rel-tol", c.stop.rel_tol, "EM relative-improvement stop")->group(em)->capture_default_str();
  app.add_option("--max-iters", c.stop.max_iters, "EM iteration budget")
      ->check(CLI::NonNegativeNumber)->group(em)->capture_default_str();
  app.add_option("--prob-floor", c.prob_floor, "Additive smoothing of pi and A")
      ->check(CLI::NonNegativeNumber)->group(em)->capture_default_str();

  const std::string ingest = "Ingestion";
  app.add_option("--delta-t-hours", c.delta_t_hours, "Segmentation gap")
      ->check(CLI::PositiveNumber)->group(ingest)->capture_default_str();
  app.add_option("--min-len", c.min_len, "Shortest kept trace")->group(ingest)->capture_default_str();
  app.add_option("--utc-offset-hours", c.utc_offset_hours, "Local time offset")->group(ingest)->capture_default_str();
  app.add_option("--idf", c.idf, "idf scheme")
      ->check(CLI::IsMember({"smooth", "uniform"}))->group(ingest)->capture_default_str();

  const std::string eval = "Evaluation";
  app.add_option("--train-frac", c.train_frac, "Fraction of traces used for training")
      ->check(CLI::Range(0.0, 1.0))->group(eval)->capture_default_str();
  app.add_option("--dist-thresh-km", c.dist_thresh_km, "Candidate distance threshold")
      ->check(CLI::NonNegativeNumber)->group(eval)->capture_default_str();
  app.add_option("--time-thresh-s", c.time_thresh_s, "Candidate time-of-day threshold")
      ->check(CLI::NonNegativeNumber)->group(eval)->capture_default_str();
  app.add_option("--pool-size", c.pool_size, "Candidates per pool, truth included")
      ->check(CLI::PositiveNumber)->group(eval)->capture_default_str();
  app.add_flag("--projected", c.projected, "Locations are planar metres, not lon/lat")->group(eval);
  app.add_option("--k-list", c.k_list, "Accuracy cut-offs")->delimiter(',')->group(eval)->capture_default_str();

  const std::string summary = "Summaries";
  app.add_option("--keywords", c.keywords, "Keywords per state")->group(summary)->capture_default_str();
  app.add_option("--transitions", c.transitions, "Outgoing transitions per state")
      ->group(summary)->capture_default_str();

  const std::string synth = "Synthetic";
  app.add_option("--experiment", c.experiment, "Synthetic experiment")
      ->check(CLI::IsMember({"newton_convergence", "estimation_vs_n", "estimation_vs_kappa", "estimation_vs_p"}))
      ->group(synth)->capture_default_str();
  app.add_option("--dim", c.dim, "Embedding dimension p")->group(synth)->capture_default_str();
  app.add_option("--kappa", c.kappa, "Concentration")->group(synth)->capture_default_str();
  app.add_option("--samples", c.samples, "Sample size N")->group(synth)->capture_default_str();
  app.add_option("--grid", c.grid, "Experiment grid override")->delimiter(',')->group(synth);
  app.add_option("--repeats", c.repeats, "Repetitions per grid point")->group(synth)->capture_default_str();
  app.add_option("--kappas", c.kappas, "Per-state planted concentrations")->delimiter(',')->group(synth);
  app.add_option("--traces", c.traces, "Planted traces")->group(synth)->capture_default_str();
  app.add_option("--trace-len", c.trace_len, "Records per planted trace")->group(synth)->capture_default_str();
  app.add_option("--self-transition", c.self_transition, "Planted diagonal transition mass")
      ->check(CLI::Range(0.0, 1.0))->group(synth)->capture_default_str();
  app.add_option("--location-spacing", c.location_spacing, "Planted state centre spacing (degrees)")
      ->group(synth)->capture_default_str();
  app.add_option("--location-sd", c.location_sd, "Planted location spread (degrees)")
      ->group(synth)->capture_default_str();
  app.add_option("--time-spacing", c.time_spacing, "Planted mean-time spacing (s)")
      ->group(synth)->capture_default_str();
  app.add_option("--time-sd", c.time_sd, "Planted time spread (s)")->group(synth)->capture_default_str();
}

}  // namespace shmm::cli
