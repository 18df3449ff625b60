#include "shmm/planted.hpp"

#include <cmath>
#include <random>

#include "shmm/errors.hpp"
#include "shmm/random.hpp"

namespace shmm {

namespace {

std::vector<double> random_direction(std::mt19937_64& rng, int p) {
  std::normal_distribution<double> normal;
  std::vector<double> v(p);
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (double& x : v) {
      x = normal(rng);
      n2 += x * x;
    }
  } while (n2 == 0.0);
  const double inv = 1.0 / std::sqrt(n2);
  for (double& x : v) x *= inv;
  return v;
}

int draw_categorical(std::mt19937_64& rng, std::span<const double> probs) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

ShmmModel make_planted_model(const PlantedOptions& options) {
  const int k = options.n_states;
  if (k < 1) throw DomainError("planted model needs at least one state");
  if (options.dim < 2) throw DomainError("planted embedding dimension must be >= 2");
  if (!options.kappas.empty() && static_cast<int>(options.kappas.size()) != k) {
    throw DimensionMismatch("one kappa per planted state expected");
  }
  std::mt19937_64 rng(options.seed);

  ShmmModel model;
  model.config = presets::shmm();
  model.embedding_dim = options.dim;
  model.pi.assign(k, 1.0 / k);
  model.trans = RowMatrix(k, k);
  for (int i = 0; i < k; ++i) {
    if (k == 1) {
      model.trans(0, 0) = 1.0;
      break;
    }
    std::vector<double> w(k, 0.0);
    double total = 0.0;
    for (int j = 0; j < k; ++j) {
      if (j == i) continue;
      w[j] = 0.2 + uniform01(rng);
      total += w[j];
    }
    for (int j = 0; j < k; ++j) {
      model.trans(i, j) = j == i ? options.self_transition : (1.0 - options.self_transition) * w[j] / total;
    }
  }

  // State centres sit on a ring around the origin, mean times on a grid
  // centred at noon.
  constexpr double kPi = 3.14159265358979323846;
  for (int i = 0; i < k; ++i) {
    StateParams s;
    const double angle = 2.0 * kPi * i / k;
    s.mu_l = {options.origin[0] + options.location_spacing * std::cos(angle),
              options.origin[1] + options.location_spacing * std::sin(angle)};
    const double var = options.location_sd * options.location_sd;
    s.sigma_l = {var, 0.0, var};
    s.mu_t = 43200.0 + options.time_spacing * (i - 0.5 * (k - 1));
    s.sigma_t = options.time_sd;
    s.text = {random_direction(rng, options.dim), options.kappas.empty() ? options.kappa : options.kappas[i]};
    model.states.push_back(std::move(s));
  }
  model.validate();
  return model;
}

PlantedCorpus sample_corpus(const ShmmModel& truth, std::size_t n_traces, std::size_t trace_len,
                            std::uint64_t seed) {
  truth.validate();
  const int p = truth.embedding_dim;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;

  std::vector<VmfSampler> samplers;
  std::vector<std::array<double, 3>> chol;  // lower Cholesky factor (l00, l10, l11)
  for (const auto& s : truth.states) {
    if (p >= 2) samplers.emplace_back(s.text);
    const double l00 = std::sqrt(s.sigma_l.xx);
    const double l10 = s.sigma_l.xy / l00;
    chol.push_back({l00, l10, std::sqrt(s.sigma_l.yy - l10 * l10)});
  }

  PlantedCorpus corpus;
  const double epoch = 1.5e9;
  for (std::size_t n = 0; n < n_traces; ++n) {
    Trace trace;
    std::vector<int> path;
    int z = draw_categorical(rng, truth.pi);
    double t_abs = epoch + 86400.0 * 7.0 * n;
    for (std::size_t i = 0; i < trace_len; ++i) {
      if (i > 0) z = draw_categorical(rng, truth.trans.row(z));
      const StateParams& s = truth.states[z];
      SemanticRecord r;
      r.user_id = "u" + std::to_string(n);
      r.t_day = std::fmod(s.mu_t + s.sigma_t * normal(rng), kSecondsPerDay);
      if (r.t_day < 0.0) r.t_day += kSecondsPerDay;
      const double e0 = normal(rng);
      const double e1 = normal(rng);
      r.loc = {s.mu_l[0] + chol[z][0] * e0, s.mu_l[1] + chol[z][1] * e0 + chol[z][2] * e1};
      if (p >= 2) {
        r.embedding.resize(p);
        samplers[z].sample(rng, r.embedding);
      }
      t_abs += 600.0 + 3600.0 * uniform01(rng);
      r.t_abs = t_abs;
      trace.records.push_back(std::move(r));
      path.push_back(z);
    }
    corpus.traces.push_back(std::move(trace));
    corpus.states.push_back(std::move(path));
  }
  return corpus;
}

}  // namespace shmm
