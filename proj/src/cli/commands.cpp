#include "shmm/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <numeric>

#include <CLI11.hpp>

#include "shmm/errors.hpp"
#include "shmm/experiments.hpp"
#include "shmm/model_io.hpp"
#include "shmm/planted.hpp"
#include "shmm/text_embed.hpp"

namespace shmm::cli {

namespace {

using nlohmann::json;

void require_file(const std::filesystem::path& path, const char* what) {
  if (path.empty()) throw IoError(std::string("no ") + what + " given");
  if (!std::filesystem::is_regular_file(path)) throw IoError(std::string(what) + " not found: " + path.string());
}

std::filesystem::path prepare_output(const RunConfig& config, const std::string& name) {
  std::filesystem::create_directories(config.output_dir);
  return config.output_dir / name;
}

void write_report(const RunConfig& config, const std::string& name, const json& report) {
  write_text_file(prepare_output(config, name), report.dump(2) + "\n");
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string clock_time(double seconds) {
  const int s = static_cast<int>(seconds);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d:%02d", s / 3600, (s / 60) % 60);
  return buf;
}

// Train/test split shared by train and predict so both see the same halves.
std::pair<std::vector<Trace>, std::vector<Trace>> split_for_run(std::vector<Trace> corpus, const RunConfig& config) {
  if (config.train_frac >= 1.0) return {std::move(corpus), {}};
  return split_corpus(std::move(corpus), config.train_frac, config.seed);
}

}  // namespace

json cmd_preprocess(const RunConfig& config) {
  require_file(config.input, "input file");
  require_file(config.embeddings, "embedding file");
  KeywordTable table = load_keyword_vectors(config.embeddings);
  std::vector<RawRecord> raw = read_raw_records(config.input);

  if (!raw.empty()) {
    std::vector<std::vector<std::string>> documents;
    documents.reserve(raw.size());
    for (const auto& r : raw) documents.push_back(tokenize(r.text));
    table.set_idf(compute_idf(documents, table.vocabulary(), parse_idf_scheme(config.idf)));
  }

  IngestOptions opt;
  opt.delta_t = config.delta_t_hours * 3600.0;
  opt.min_len = config.min_len;
  opt.utc_offset_hours = config.utc_offset_hours;
  IngestReport counts;
  const auto traces = build_traces(std::move(raw), table, opt, counts);
  const auto corpus_path = prepare_output(config, "corpus.ndjson");
  write_corpus(traces, corpus_path);

  const json report = {
      {"command", "preprocess"},
      {"corpus", corpus_path.string()},
      {"input_records", counts.input_records},
      {"dropped_no_known_tokens", counts.no_known_tokens},
      {"dropped_short_trace_records", counts.short_trace_records},
      {"dropped_short_traces", counts.short_traces},
      {"users", counts.users},
      {"traces", counts.traces},
      {"records", counts.records},
      {"vocabulary", table.size()},
      {"embedding_dim", table.dim()},
      {"config", config.to_json()},
  };
  write_report(config, "preprocess_report.json", report);
  return report;
}

json cmd_train(const RunConfig& config) {
  require_file(config.corpus, "corpus");
  auto [train, test] = split_for_run(read_corpus(config.corpus), config);
  const auto result = baum_welch(train, config.train_options());

  save_model(result.model, prepare_output(config, "model.json"));
  std::string csv = "iteration,loglik,seconds\n";
  for (const auto& it : result.history) {
    char seconds[32];
    std::snprintf(seconds, sizeof seconds, "%.6f", it.seconds);
    csv += std::to_string(it.iteration) + ',' + format_double(it.log_likelihood) + ',' + seconds + '\n';
  }
  write_text_file(prepare_output(config, "loglik.csv"), csv);

  std::size_t records = 0;
  for (const auto& t : train) records += t.size();
  const json report = {
      {"command", "train"},
      {"train_traces", train.size()},
      {"held_out_traces", test.size()},
      {"train_records", records},
      {"n_states", result.model.n_states()},
      {"iterations", result.history.size() - 1},
      {"converged", result.converged},
      {"final_loglik", result.history.back().log_likelihood},
      {"reseeded_states", result.reseeded_states},
      {"em_seconds", result.history.back().seconds},
      {"config", config.to_json()},
  };
  write_report(config, "train_report.json", report);
  return report;
}

json cmd_summarize(const RunConfig& config) {
  require_file(config.model, "model");
  const ShmmModel model = load_model(config.model);
  std::optional<KeywordTable> table;
  if (!config.embeddings.empty()) {
    require_file(config.embeddings, "embedding file");
    table = load_keyword_vectors(config.embeddings);
    if (model.config.text != TextModel::None && static_cast<int>(table->dim()) != model.embedding_dim) {
      throw DimensionMismatch("keyword vectors have dimension " + std::to_string(table->dim()) + ", model has " +
                              std::to_string(model.embedding_dim));
    }
  }

  const int k = model.n_states();
  std::string csv = "state,lon,lat,time_of_day_s,time_of_day,kappa,keywords,transitions\n";
  for (int z = 0; z < k; ++z) {
    const auto& s = model.states[z];
    std::string kappa;
    std::vector<double> direction;
    if (model.config.text == TextModel::Vmf) {
      kappa = format_double(s.text.kappa);
      direction = s.text.mu;
    } else if (model.config.text == TextModel::DiagonalGaussian) {
      direction = s.text_gauss.mean;
    }
    std::string keywords;
    if (table && !direction.empty()) {
      const auto n = std::min(config.keywords, table->size());
      for (const auto& m : nearest_keywords(direction, *table, n)) keywords += (keywords.empty() ? "" : " ") + m.token;
    }
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return model.trans(z, a) > model.trans(z, b); });
    std::string transitions;
    for (std::size_t i = 0; i < std::min<std::size_t>(config.transitions, k); ++i) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s%d:%.6g", i ? " " : "", order[i], model.trans(z, order[i]));
      transitions += buf;
    }
    csv += std::to_string(z) + ',' + format_double(s.mu_l[0]) + ',' + format_double(s.mu_l[1]) + ',' +
           format_double(s.mu_t) + ',' + clock_time(s.mu_t) + ',' + kappa + ',' + csv_field(keywords) + ',' +
           transitions + '\n';
  }
  const auto path = prepare_output(config, "summary.csv");
  write_text_file(path, csv);
  return {{"command", "summarize"}, {"summary", path.string()}, {"states", k}};
}

json cmd_predict(const RunConfig& config) {
  require_file(config.model, "model");
  require_file(config.corpus, "corpus");
  const ShmmModel model = load_model(config.model);
  std::vector<Trace> corpus = read_corpus(config.corpus);
  std::vector<Trace> test;
  if (!config.test_corpus.empty()) {
    require_file(config.test_corpus, "test corpus");
    test = read_corpus(config.test_corpus);
    corpus.insert(corpus.end(), test.begin(), test.end());
  } else {
    if (config.train_frac >= 1.0) throw DomainError("train_frac = 1 leaves no test traces");
    test = split_for_run(corpus, config).second;
  }
  const std::size_t before = test.size();
  std::erase_if(test, [](const Trace& t) { return t.size() < 2; });

  const auto index = RecordIndex::from_traces(corpus);
  const auto pool_opt = config.pool_options();
  const auto pools = build_candidate_pools(test, index, pool_opt, config.seed, config.threads);
  const auto rows = evaluate_prediction(model, test, pools, config.k_list, config.threads);
  const auto path = prepare_output(config, "accuracy.csv");
  write_metrics_csv(path, config.dataset, rows, pool_opt.pool_size, config.seed);

  std::size_t insufficient = 0;
  for (const auto& p : pools) insufficient += p.insufficient;
  json acc = json::array();
  for (const auto& r : rows) acc.push_back({{"K", r.k}, {"accuracy", r.accuracy}, {"hits", r.hits}});
  const json report = {
      {"command", "predict"},
      {"n_test", test.size()},
      {"skipped_short_traces", before - test.size()},
      {"pool_size", pool_opt.pool_size},
      {"insufficient_pools", insufficient},
      {"accuracy", acc},
      {"config", config.to_json()},
  };
  write_report(config, "predict_report.json", report);
  return report;
}

json cmd_synth(const RunConfig& config) {
  const SynthExperiment experiment = parse_synth_experiment(config.experiment);
  SynthOptions opt;
  opt.p = config.dim;
  opt.kappa = config.kappa;
  opt.n = config.samples;
  opt.repeats = config.repeats;
  opt.seed = config.seed;
  opt.threads = config.threads;
  if (!config.grid.empty()) {
    switch (experiment) {
      case SynthExperiment::EstimationVsN:
        opt.n_grid.clear();
        for (double v : config.grid) opt.n_grid.push_back(static_cast<std::size_t>(v));
        break;
      case SynthExperiment::EstimationVsKappa: opt.kappa_grid = config.grid; break;
      case SynthExperiment::EstimationVsP:
        opt.p_grid.clear();
        for (double v : config.grid) opt.p_grid.push_back(static_cast<int>(v));
        break;
      case SynthExperiment::NewtonConvergence: throw DomainError("newton_convergence takes no grid");
    }
  }
  const auto rows = run_synth(experiment, opt);
  const auto path = prepare_output(config, "synth_" + std::string(to_string(experiment)) + ".csv");
  write_text_file(path, synth_csv(rows));
  return {{"command", "synth"}, {"experiment", to_string(experiment)}, {"output", path.string()}, {"rows", rows.size()}};
}

json cmd_generate(const RunConfig& config) {
  PlantedOptions opt;
  opt.n_states = config.n_states;
  opt.dim = config.dim;
  opt.kappa = config.kappa;
  opt.kappas = config.kappas;
  opt.self_transition = config.self_transition;
  opt.location_spacing = config.location_spacing;
  opt.location_sd = config.location_sd;
  opt.time_spacing = config.time_spacing;
  opt.time_sd = config.time_sd;
  opt.seed = config.seed;
  const ShmmModel truth = make_planted_model(opt);
  const auto corpus = sample_corpus(truth, config.traces, config.trace_len, config.seed + 1);
  save_model(truth, prepare_output(config, "truth_model.json"));
  const auto path = prepare_output(config, "corpus.ndjson");
  write_corpus(corpus.traces, path);
  return {{"command", "generate"},
          {"corpus", path.string()},
          {"traces", corpus.traces.size()},
          {"truth_loglik", corpus_log_likelihood(truth, corpus.traces, config.threads)}};
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Semantic trace hidden Markov models: preprocessing, training, summaries, prediction"};
  app.option_defaults()->always_capture_default();
  RunConfig config;
  add_run_options(app, config);
  app.require_subcommand(1);
  app.fallthrough();

  struct Command {
    const char* name;
    const char* help;
    json (*run)(const RunConfig&);
  };
  const Command commands[] = {
      {"preprocess", "Tokenise, embed and segment raw NDJSON records", cmd_preprocess},
      {"train", "Fit a model with Baum-Welch", cmd_train},
      {"summarize", "Per-state locations, times, keywords and transitions", cmd_summarize},
      {"predict", "Top-K next-record accuracy on held-out traces", cmd_predict},
      {"synth", "Concentration-estimation experiments on synthetic data", cmd_synth},
      {"generate", "Sample a planted corpus and its true model", cmd_generate},
  };
  for (const auto& c : commands) app.add_subcommand(c.name, c.help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    for (const auto& c : commands) {
      if (app.got_subcommand(c.name)) {
        std::cout << c.run(config).dump(2) << '\n';
        return 0;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace shmm::cli
