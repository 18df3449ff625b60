#include "shmm/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>

#include <zlib.h>

#include <json.hpp>

#include "shmm/errors.hpp"
#include "shmm/model_io.hpp"
#include "shmm/parallel.hpp"
#include "shmm/random.hpp"

namespace shmm {

namespace {

using nlohmann::json;

class GzLineReader {
 public:
  explicit GzLineReader(const std::filesystem::path& path) : file_(gzopen(path.c_str(), "rb")) {
    if (file_ == nullptr) throw IoError("cannot open " + path.string());
  }
  ~GzLineReader() { gzclose(file_); }
  GzLineReader(const GzLineReader&) = delete;
  GzLineReader& operator=(const GzLineReader&) = delete;

  bool next(std::string& line) {
    line.clear();
    char buf[8192];
    while (gzgets(file_, buf, sizeof buf) != nullptr) {
      line += buf;
      if (!line.empty() && line.back() == '\n') break;
    }
    int err = 0;
    gzerror(file_, &err);
    if (err != Z_OK && err != Z_STREAM_END) throw IoError("read error in compressed input");
    if (line.empty()) return false;
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
    return true;
  }

 private:
  gzFile file_;
};

bool ends_with(const std::filesystem::path& p, std::string_view suffix) {
  const std::string s = p.string();
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

int parse_int(std::string_view s, std::size_t pos, std::size_t len) {
  if (pos + len > s.size()) throw ParseError("truncated timestamp '" + std::string(s) + "'");
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
  if (ec != std::errc() || ptr != s.data() + pos + len) throw ParseError("bad timestamp '" + std::string(s) + "'");
  return v;
}

void check_char(std::string_view s, std::size_t pos, std::string_view allowed) {
  if (pos >= s.size() || allowed.find(s[pos]) == std::string_view::npos) {
    throw ParseError("bad timestamp '" + std::string(s) + "'");
  }
}

std::string user_id_of(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  if (j.is_number()) return j.dump();
  throw ParseError("user_id must be a string or number");
}

double number_of(const json& j, const char* what) {
  if (!j.is_number()) throw ParseError(std::string(what) + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ParseError(std::string(what) + " must be finite");
  return v;
}

double distance(const std::array<double, 2>& a, const std::array<double, 2>& b, bool geographic) {
  if (geographic) return haversine_m(a, b);
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

}  // namespace

double parse_timestamp(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (s.empty()) throw ParseError("empty timestamp");
  if (s.size() < 10 || s[4] != '-') {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
      throw ParseError("bad timestamp '" + std::string(s) + "'");
    }
    return v;
  }
  using namespace std::chrono;
  const int y = parse_int(s, 0, 4);
  check_char(s, 7, "-");
  const int mo = parse_int(s, 5, 2);
  const int d = parse_int(s, 8, 2);
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw ParseError("invalid date in '" + std::string(s) + "'");
  double secs = static_cast<double>(sys_days{ymd}.time_since_epoch().count()) * kSecondsPerDay;
  std::size_t pos = 10;
  if (pos == s.size()) return secs;
  check_char(s, pos, "T ");
  const int hh = parse_int(s, pos + 1, 2);
  check_char(s, pos + 3, ":");
  const int mm = parse_int(s, pos + 4, 2);
  check_char(s, pos + 6, ":");
  const int ss = parse_int(s, pos + 7, 2);
  if (hh > 23 || mm > 59 || ss > 60) throw ParseError("invalid time in '" + std::string(s) + "'");
  secs += hh * 3600.0 + mm * 60.0 + ss;
  pos += 9;
  if (pos < s.size() && s[pos] == '.') {
    std::size_t end = pos + 1;
    while (end < s.size() && std::isdigit(static_cast<unsigned char>(s[end]))) ++end;
    if (end == pos + 1) throw ParseError("bad fraction in '" + std::string(s) + "'");
    double frac = 0.0;
    std::from_chars(s.data() + pos, s.data() + end, frac);
    secs += frac;
    pos = end;
  }
  if (pos == s.size()) return secs;
  if (s[pos] == 'Z' && pos + 1 == s.size()) return secs;
  check_char(s, pos, "+-");
  const int sign = s[pos] == '+' ? 1 : -1;
  const int oh = parse_int(s, pos + 1, 2);
  std::size_t mpos = pos + 3;
  if (mpos < s.size() && s[mpos] == ':') ++mpos;
  const int om = parse_int(s, mpos, 2);
  if (mpos + 2 != s.size()) throw ParseError("trailing characters in '" + std::string(s) + "'");
  return secs - sign * (oh * 3600.0 + om * 60.0);
}

double time_of_day(double t_abs, double utc_offset_hours) {
  double t = std::fmod(t_abs + utc_offset_hours * 3600.0, kSecondsPerDay);
  if (t < 0.0) t += kSecondsPerDay;
  if (t >= kSecondsPerDay) t = 0.0;
  return t;
}

std::vector<RawRecord> read_raw_records(const std::filesystem::path& path) {
  GzLineReader reader(path);
  std::vector<RawRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (reader.next(line)) {
    ++line_no;
    if (is_blank(line)) continue;
    try {
      const json j = json::parse(line);
      RawRecord r;
      r.user_id = user_id_of(j.at("user_id"));
      const json& ts = j.at("timestamp");
      r.t_abs = ts.is_string() ? parse_timestamp(ts.get<std::string>()) : number_of(ts, "timestamp");
      r.lon = number_of(j.at("lon"), "lon");
      r.lat = number_of(j.at("lat"), "lat");
      r.text = j.value("text", "");
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

SegmentResult segment_history(std::span<const SemanticRecord> records, double delta_t, std::size_t min_len) {
  SegmentResult result;
  Trace current;
  auto flush = [&] {
    if (current.empty()) return;
    if (current.size() < min_len) {
      result.discarded_records += current.size();
      ++result.discarded_traces;
    } else {
      result.traces.push_back(std::move(current));
    }
    current = Trace{};
  };
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (i > 0) {
      const double gap = records[i].t_abs - records[i - 1].t_abs;
      if (gap < 0.0) throw DomainError("records are not sorted by time");
      if (gap > delta_t) flush();
    }
    current.records.push_back(records[i]);
  }
  flush();
  return result;
}

std::vector<Trace> build_traces(std::vector<RawRecord> raw, const KeywordTable& table, const IngestOptions& options,
                                IngestReport& report) {
  report = IngestReport{};
  report.input_records = raw.size();
  std::stable_sort(raw.begin(), raw.end(), [](const RawRecord& a, const RawRecord& b) {
    if (a.user_id != b.user_id) return a.user_id < b.user_id;
    return a.t_abs < b.t_abs;
  });
  std::vector<Trace> traces;
  std::vector<SemanticRecord> history;
  auto flush_user = [&] {
    if (history.empty()) return;
    auto seg = segment_history(history, options.delta_t, options.min_len);
    report.short_trace_records += seg.discarded_records;
    report.short_traces += seg.discarded_traces;
    for (auto& t : seg.traces) traces.push_back(std::move(t));
    history.clear();
  };
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (i == 0 || raw[i].user_id != raw[i - 1].user_id) {
      flush_user();
      ++report.users;
    }
    auto embedding = embed_message(tokenize(raw[i].text), table);
    if (!embedding) {
      ++report.no_known_tokens;
      continue;
    }
    SemanticRecord r;
    r.user_id = raw[i].user_id;
    r.t_abs = raw[i].t_abs;
    r.t_day = time_of_day(raw[i].t_abs, options.utc_offset_hours);
    r.loc = {raw[i].lon, raw[i].lat};
    r.embedding = std::move(*embedding);
    if (options.keep_text) r.raw_text = std::move(raw[i].text);
    history.push_back(std::move(r));
  }
  flush_user();
  report.traces = traces.size();
  for (const auto& t : traces) report.records += t.size();
  return traces;
}

void write_corpus(const std::vector<Trace>& corpus, const std::filesystem::path& path) {
  std::string text;
  for (const auto& trace : corpus) {
    std::string line = "{\"user_id\":" + json(trace.empty() ? "" : trace.records.front().user_id).dump() +
                       ",\"records\":[";
    for (std::size_t i = 0; i < trace.size(); ++i) {
      const auto& r = trace.records[i];
      if (i > 0) line += ',';
      line += "{\"t_abs\":" + format_double(r.t_abs) + ",\"t_day\":" + format_double(r.t_day) +
              ",\"lon\":" + format_double(r.loc[0]) + ",\"lat\":" + format_double(r.loc[1]) + ",\"embedding\":[";
      for (std::size_t d = 0; d < r.embedding.size(); ++d) {
        if (d > 0) line += ',';
        line += format_double(r.embedding[d]);
      }
      line += ']';
      if (r.raw_text) line += ",\"text\":" + json(*r.raw_text).dump();
      line += '}';
    }
    line += "]}\n";
    text += line;
  }
  if (ends_with(path, ".gz")) {
    gzFile f = gzopen(path.c_str(), "wb");
    if (f == nullptr) throw IoError("cannot open " + path.string() + " for writing");
    const int written = text.empty() ? 0 : gzwrite(f, text.data(), static_cast<unsigned>(text.size()));
    const int closed = gzclose(f);
    if (written != static_cast<int>(text.size()) || closed != Z_OK) throw IoError("failed writing " + path.string());
    return;
  }
  write_text_file(path, text);
}

std::vector<Trace> read_corpus(const std::filesystem::path& path) {
  GzLineReader reader(path);
  std::vector<Trace> corpus;
  std::string line;
  std::size_t line_no = 0;
  while (reader.next(line)) {
    ++line_no;
    if (is_blank(line)) continue;
    try {
      const json j = json::parse(line);
      const std::string user = j.at("user_id").get<std::string>();
      Trace trace;
      for (const auto& jr : j.at("records")) {
        SemanticRecord r;
        r.user_id = user;
        r.t_abs = jr.at("t_abs").get<double>();
        r.t_day = jr.at("t_day").get<double>();
        r.loc = {jr.at("lon").get<double>(), jr.at("lat").get<double>()};
        r.embedding = jr.at("embedding").get<std::vector<double>>();
        if (jr.contains("text")) r.raw_text = jr.at("text").get<std::string>();
        trace.records.push_back(std::move(r));
      }
      corpus.push_back(std::move(trace));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

std::pair<std::vector<Trace>, std::vector<Trace>> split_corpus(std::vector<Trace> traces, double train_frac,
                                                               std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw DomainError("train fraction must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  for (std::size_t i = traces.size(); i > 1; --i) std::swap(traces[i - 1], traces[uniform_index(rng, i)]);
  const auto n_train = static_cast<std::size_t>(std::floor(train_frac * traces.size()));
  std::vector<Trace> test(std::make_move_iterator(traces.begin() + n_train), std::make_move_iterator(traces.end()));
  traces.resize(n_train);
  return {std::move(traces), std::move(test)};
}

double haversine_m(const std::array<double, 2>& a, const std::array<double, 2>& b) {
  constexpr double kEarthRadius = 6371008.8;
  constexpr double kRad = 3.14159265358979323846 / 180.0;
  const double dlat = (b[1] - a[1]) * kRad;
  const double dlon = (b[0] - a[0]) * kRad;
  const double s = std::sin(0.5 * dlat);
  const double t = std::sin(0.5 * dlon);
  const double h = s * s + std::cos(a[1] * kRad) * std::cos(b[1] * kRad) * t * t;
  return 2.0 * kEarthRadius * std::asin(std::min(1.0, std::sqrt(h)));
}

double circular_time_diff(double a, double b) {
  const double d = std::fmod(std::abs(a - b), kSecondsPerDay);
  return std::min(d, kSecondsPerDay - d);
}

RecordIndex::RecordIndex(std::vector<SemanticRecord> records) : records_(std::move(records)) {
  std::stable_sort(records_.begin(), records_.end(),
                   [](const SemanticRecord& a, const SemanticRecord& b) { return a.t_day < b.t_day; });
}

RecordIndex RecordIndex::from_traces(const std::vector<Trace>& traces) {
  std::vector<SemanticRecord> all;
  for (const auto& t : traces) all.insert(all.end(), t.records.begin(), t.records.end());
  return RecordIndex(std::move(all));
}

std::vector<std::size_t> RecordIndex::eligible(const SemanticRecord& truth, const PoolOptions& options) const {
  std::vector<std::size_t> out;
  auto consider = [&](std::size_t i) {
    const auto& r = records_[i];
    if (r.user_id == truth.user_id && r.t_abs == truth.t_abs && r.loc == truth.loc) return;
    if (circular_time_diff(r.t_day, truth.t_day) > options.time_thresh) return;
    if (distance(r.loc, truth.loc, options.geographic) > options.dist_thresh) return;
    out.push_back(i);
  };
  auto lower = [&](double t) {
    return static_cast<std::size_t>(
        std::lower_bound(records_.begin(), records_.end(), t,
                         [](const SemanticRecord& r, double v) { return r.t_day < v; }) -
        records_.begin());
  };
  auto upper = [&](double t) {
    return static_cast<std::size_t>(
        std::upper_bound(records_.begin(), records_.end(), t,
                         [](double v, const SemanticRecord& r) { return v < r.t_day; }) -
        records_.begin());
  };
  if (options.time_thresh >= 0.5 * kSecondsPerDay) {
    for (std::size_t i = 0; i < records_.size(); ++i) consider(i);
    return out;
  }
  // Window [t - h, t + h] on the circle, as one or two sorted ranges; the
  // exact circular test in consider() settles boundary cases.
  const double lo = truth.t_day - options.time_thresh - 1e-9;
  const double hi = truth.t_day + options.time_thresh + 1e-9;
  if (lo < 0.0) {
    for (std::size_t i = 0, e = upper(hi); i < e; ++i) consider(i);
    for (std::size_t i = lower(lo + kSecondsPerDay); i < records_.size(); ++i) consider(i);
  } else if (hi >= kSecondsPerDay) {
    for (std::size_t i = 0, e = upper(hi - kSecondsPerDay); i < e; ++i) consider(i);
    for (std::size_t i = lower(lo); i < records_.size(); ++i) consider(i);
  } else {
    for (std::size_t i = lower(lo), e = upper(hi); i < e; ++i) consider(i);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

CandidatePool build_candidate_pool(const Trace& test_trace, const RecordIndex& index, const PoolOptions& options,
                                   std::uint64_t seed) {
  if (test_trace.size() < 2) throw DomainError("test trace needs at least two records");
  if (options.pool_size < 1) throw DomainError("pool size must be >= 1");
  const SemanticRecord& truth = test_trace.records.back();
  std::vector<std::size_t> eligible = index.eligible(truth, options);
  const std::size_t wanted = options.pool_size - 1;

  std::mt19937_64 rng(seed);
  const std::size_t take = std::min(wanted, eligible.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::swap(eligible[i], eligible[i + uniform_index(rng, eligible.size() - i)]);
  }
  CandidatePool pool;
  pool.insufficient = eligible.size() < wanted;
  for (std::size_t i = 0; i < take; ++i) pool.candidates.push_back(index.records()[eligible[i]]);
  pool.truth_index = uniform_index(rng, pool.candidates.size() + 1);
  pool.candidates.insert(pool.candidates.begin() + pool.truth_index, truth);
  return pool;
}

std::vector<CandidatePool> build_candidate_pools(const std::vector<Trace>& test, const RecordIndex& index,
                                                 const PoolOptions& options, std::uint64_t seed, int threads) {
  std::vector<CandidatePool> pools(test.size());
  parallel_for(test.size(), threads,
               [&](std::size_t i) { pools[i] = build_candidate_pool(test[i], index, options, seed ^ i); });
  return pools;
}

PoolRanker model_ranker(const ShmmModel& model) {
  return [&model](const Trace& prefix, const CandidatePool& pool) {
    const auto scored = score_next(model, prefix, pool.candidates);
    std::vector<std::size_t> order;
    order.reserve(scored.size());
    for (const auto& s : scored) order.push_back(s.index);
    return order;
  };
}

std::vector<AccuracyRow> evaluate_rankings(const std::vector<Trace>& test, const std::vector<CandidatePool>& pools,
                                           const std::vector<int>& k_list, const PoolRanker& ranker, int threads) {
  if (pools.size() != test.size()) throw DimensionMismatch("one candidate pool per test trace expected");
  std::vector<std::size_t> rank(test.size());
  parallel_for(test.size(), threads, [&](std::size_t i) {
    Trace prefix;
    prefix.records.assign(test[i].records.begin(), test[i].records.end() - 1);
    const auto order = ranker(prefix, pools[i]);
    rank[i] = std::find(order.begin(), order.end(), pools[i].truth_index) - order.begin();
  });
  std::vector<AccuracyRow> rows;
  for (int k : k_list) {
    if (k < 1) throw DomainError("K must be >= 1");
    AccuracyRow row;
    row.k = k;
    row.n_test = test.size();
    for (std::size_t r : rank) row.hits += r < static_cast<std::size_t>(k) ? 1 : 0;
    row.accuracy = test.empty() ? 0.0 : static_cast<double>(row.hits) / test.size();
    rows.push_back(row);
  }
  return rows;
}

std::vector<AccuracyRow> evaluate_prediction(const ShmmModel& model, const std::vector<Trace>& test,
                                             const std::vector<CandidatePool>& pools, const std::vector<int>& k_list,
                                             int threads) {
  return evaluate_rankings(test, pools, k_list, model_ranker(model), threads);
}

void write_metrics_csv(const std::filesystem::path& path, std::string_view dataset,
                       const std::vector<AccuracyRow>& rows, std::size_t pool_size, std::uint64_t seed) {
  std::string text = "dataset,K,accuracy,n_test,pool_size,seed\n";
  for (const auto& r : rows) {
    text += std::string(dataset) + ',' + std::to_string(r.k) + ',' + format_double(r.accuracy) + ',' +
            std::to_string(r.n_test) + ',' + std::to_string(pool_size) + ',' + std::to_string(seed) + '\n';
  }
  write_text_file(path, text);
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace shmm
