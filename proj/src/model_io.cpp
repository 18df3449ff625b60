#include "shmm/model_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "shmm/errors.hpp"

namespace shmm {

namespace {

constexpr std::string_view kFormatName = "shmm-model";

void write_array(std::ostringstream& out, std::span<const double> values) {
  out << '[';
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out << ',';
    out << format_double(values[i]);
  }
  out << ']';
}

std::vector<double> read_doubles(const nlohmann::json& j, std::size_t expected, const char* what) {
  if (!j.is_array()) throw ParseError(std::string(what) + " must be an array");
  auto v = j.get<std::vector<double>>();
  if (v.size() != expected) throw ParseError(std::string(what) + " has the wrong length");
  return v;
}

}  // namespace

std::string format_double(double x) {
  if (!std::isfinite(x)) throw DomainError("cannot serialise a non-finite value");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string model_to_json(const ShmmModel& model) {
  model.validate();
  const int k = model.n_states();
  std::ostringstream out;
  out << "{\n  \"format\": \"" << kFormatName << "\",\n  \"version\": " << kModelFormatVersion << ",\n";
  out << "  \"n_states\": " << k << ",\n  \"embedding_dim\": " << model.embedding_dim << ",\n";
  out << "  \"config\": {\"use_time\": " << (model.config.use_time ? "true" : "false")
      << ", \"use_location\": " << (model.config.use_location ? "true" : "false") << ", \"text\": \""
      << to_string(model.config.text) << "\"},\n";
  out << "  \"pi\": ";
  write_array(out, model.pi);
  out << ",\n  \"trans\": ";
  write_array(out, model.trans.flat());
  out << ",\n  \"states\": [";
  for (int z = 0; z < k; ++z) {
    const auto& s = model.states[z];
    out << (z > 0 ? ",\n    {" : "\n    {");
    out << "\"mu_t\": " << format_double(s.mu_t) << ", \"sigma_t\": " << format_double(s.sigma_t);
    out << ", \"mu_l\": ";
    write_array(out, s.mu_l);
    const double cov[3] = {s.sigma_l.xx, s.sigma_l.xy, s.sigma_l.yy};
    out << ", \"sigma_l\": ";
    write_array(out, cov);
    if (model.config.text == TextModel::Vmf) {
      out << ", \"text\": {\"mu\": ";
      write_array(out, s.text.mu);
      out << ", \"kappa\": " << format_double(s.text.kappa) << '}';
    } else if (model.config.text == TextModel::DiagonalGaussian) {
      out << ", \"text\": {\"mean\": ";
      write_array(out, s.text_gauss.mean);
      out << ", \"var\": ";
      write_array(out, s.text_gauss.var);
      out << '}';
    }
    out << '}';
  }
  out << "\n  ]\n}\n";
  return out.str();
}

ShmmModel model_from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model JSON: ") + e.what());
  }
  try {
    if (doc.value("format", "") != kFormatName) throw ParseError("not a model document");
    if (doc.at("version").get<int>() != kModelFormatVersion) throw ParseError("unsupported model version");
    const int k = doc.at("n_states").get<int>();
    if (k < 1) throw ParseError("n_states must be >= 1");

    ShmmModel model;
    model.embedding_dim = doc.at("embedding_dim").get<int>();
    const auto& cfg = doc.at("config");
    model.config.use_time = cfg.at("use_time").get<bool>();
    model.config.use_location = cfg.at("use_location").get<bool>();
    model.config.text = parse_text_model(cfg.at("text").get<std::string>());
    model.pi = read_doubles(doc.at("pi"), k, "pi");
    const auto trans = read_doubles(doc.at("trans"), static_cast<std::size_t>(k) * k, "trans");
    model.trans = RowMatrix(k, k);
    std::copy(trans.begin(), trans.end(), model.trans.flat().begin());

    const auto& states = doc.at("states");
    if (!states.is_array() || states.size() != static_cast<std::size_t>(k)) {
      throw ParseError("states must hold n_states entries");
    }
    const std::size_t p = model.embedding_dim;
    for (const auto& js : states) {
      StateParams s;
      s.mu_t = js.at("mu_t").get<double>();
      s.sigma_t = js.at("sigma_t").get<double>();
      const auto mu_l = read_doubles(js.at("mu_l"), 2, "mu_l");
      s.mu_l = {mu_l[0], mu_l[1]};
      const auto cov = read_doubles(js.at("sigma_l"), 3, "sigma_l");
      s.sigma_l = {cov[0], cov[1], cov[2]};
      if (model.config.text == TextModel::Vmf) {
        s.text.mu = read_doubles(js.at("text").at("mu"), p, "text.mu");
        s.text.kappa = js.at("text").at("kappa").get<double>();
      } else if (model.config.text == TextModel::DiagonalGaussian) {
        s.text_gauss.mean = read_doubles(js.at("text").at("mean"), p, "text.mean");
        s.text_gauss.var = read_doubles(js.at("text").at("var"), p, "text.var");
      }
      model.states.push_back(std::move(s));
    }
    model.validate();
    for (const auto& s : model.states) PreparedEmission(s, model.config);  // parameter checks
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model JSON: ") + e.what());
  }
}

void save_model(const ShmmModel& model, const std::filesystem::path& path) {
  const std::string text = model_to_json(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

ShmmModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

}  // namespace shmm
