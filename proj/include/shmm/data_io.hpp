#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "shmm/hmm.hpp"
#include "shmm/record.hpp"
#include "shmm/text_embed.hpp"

namespace shmm {

inline constexpr double kDefaultSegmentGap = 6.0 * 3600.0;

// ---- ingestion ----------------------------------------------------------

/// One input line before embedding.
struct RawRecord {
  std::string user_id;
  double t_abs = 0.0;
  double lon = 0.0;
  double lat = 0.0;
  std::string text;
};

/// Epoch seconds from an ISO-8601 timestamp ("2014-03-01T17:05:09Z",
/// optional fraction and ±HH:MM offset, naive times read as UTC) or a
/// decimal number of seconds. Throws ParseError.
double parse_timestamp(std::string_view text);

/// Seconds since local midnight for a fixed UTC offset, in [0, 86400).
double time_of_day(double t_abs, double utc_offset_hours);

/// Reads newline-delimited JSON; gzip input is detected from the stream, so
/// ".gz" files work transparently. Blank lines are skipped; a malformed line
/// throws ParseError naming the line number.
std::vector<RawRecord> read_raw_records(const std::filesystem::path& path);

struct SegmentResult {
  std::vector<Trace> traces;
  std::size_t discarded_records = 0;
  std::size_t discarded_traces = 0;
};

/// Splits a user's time-sorted history wherever the gap exceeds `delta_t`
/// and drops pieces shorter than `min_len`. Throws DomainError if the input
/// is not sorted by t_abs.
SegmentResult segment_history(std::span<const SemanticRecord> records, double delta_t = kDefaultSegmentGap,
                              std::size_t min_len = 2);

struct IngestOptions {
  double delta_t = kDefaultSegmentGap;
  std::size_t min_len = 2;
  double utc_offset_hours = 0.0;
  bool keep_text = true;
};

struct IngestReport {
  std::size_t input_records = 0;
  std::size_t no_known_tokens = 0;   // dropped before segmentation
  std::size_t short_trace_records = 0;
  std::size_t short_traces = 0;
  std::size_t users = 0;
  std::size_t traces = 0;
  std::size_t records = 0;
};

/// Groups records by user, embeds their text, drops records without a known
/// keyword and segments each user's history.
std::vector<Trace> build_traces(std::vector<RawRecord> raw, const KeywordTable& table, const IngestOptions& options,
                                IngestReport& report);

// ---- corpus files -------------------------------------------------------

/// One trace per line: {"user_id", "records": [{t_abs, t_day, lon, lat,
/// embedding, text?}]}. Gzip-compressed when the path ends in ".gz".
void write_corpus(const std::vector<Trace>& corpus, const std::filesystem::path& path);
std::vector<Trace> read_corpus(const std::filesystem::path& path);

// ---- splits and candidate pools -----------------------------------------

/// Seeded shuffle, then the first floor(train_frac * n) traces train.
std::pair<std::vector<Trace>, std::vector<Trace>> split_corpus(std::vector<Trace> traces, double train_frac,
                                                               std::uint64_t seed);

/// Great-circle distance in metres between (lon, lat) points in degrees.
double haversine_m(const std::array<double, 2>& a, const std::array<double, 2>& b);

/// Absolute time-of-day difference on the 24 h circle, in [0, 43200].
double circular_time_diff(double a, double b);

struct PoolOptions {
  double dist_thresh = 3500.0;  // metres, or location units when !geographic
  double time_thresh = 300.0;   // seconds of time of day
  std::size_t pool_size = 10;
  bool geographic = true;       // haversine on (lon, lat); Euclidean otherwise
};

/// Records available as negatives, ordered by time of day for window queries.
class RecordIndex {
 public:
  explicit RecordIndex(std::vector<SemanticRecord> records);
  static RecordIndex from_traces(const std::vector<Trace>& traces);

  /// Positions (into records()) of every record other than `truth` that lies
  /// within both thresholds; closed intervals, ascending order.
  std::vector<std::size_t> eligible(const SemanticRecord& truth, const PoolOptions& options) const;
  const std::vector<SemanticRecord>& records() const { return records_; }

 private:
  std::vector<SemanticRecord> records_;  // sorted by t_day
};

struct CandidatePool {
  std::size_t truth_index = 0;
  std::vector<SemanticRecord> candidates;
  bool insufficient = false;  // fewer than pool_size - 1 negatives qualified
};

/// Pool for the last record of `test_trace` (length >= 2).
CandidatePool build_candidate_pool(const Trace& test_trace, const RecordIndex& index, const PoolOptions& options,
                                   std::uint64_t seed);

/// One pool per test trace, trace i seeded with seed ^ i.
std::vector<CandidatePool> build_candidate_pools(const std::vector<Trace>& test, const RecordIndex& index,
                                                 const PoolOptions& options, std::uint64_t seed, int threads = 1);

// ---- evaluation ---------------------------------------------------------

/// Returns candidate positions best first.
using PoolRanker = std::function<std::vector<std::size_t>(const Trace& prefix, const CandidatePool& pool)>;

/// score_next ranking of the pool given the trace minus its last record.
PoolRanker model_ranker(const ShmmModel& model);

struct AccuracyRow {
  int k = 0;
  double accuracy = 0.0;
  std::size_t n_test = 0;
  std::size_t hits = 0;
};

std::vector<AccuracyRow> evaluate_rankings(const std::vector<Trace>& test, const std::vector<CandidatePool>& pools,
                                           const std::vector<int>& k_list, const PoolRanker& ranker,
                                           int threads = 1);

std::vector<AccuracyRow> evaluate_prediction(const ShmmModel& model, const std::vector<Trace>& test,
                                             const std::vector<CandidatePool>& pools, const std::vector<int>& k_list,
                                             int threads = 1);

/// CSV with header dataset,K,accuracy,n_test,pool_size,seed.
void write_metrics_csv(const std::filesystem::path& path, std::string_view dataset,
                       const std::vector<AccuracyRow>& rows, std::size_t pool_size, std::uint64_t seed);

/// Writes `text` to `path`, throwing IoError on failure.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace shmm
