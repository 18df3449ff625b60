#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace shmm {

inline constexpr double kSecondsPerDay = 86400.0;

/// One (time, location, text) observation of a user.
struct SemanticRecord {
  std::string user_id;
  double t_abs = 0.0;              // seconds since the Unix epoch
  double t_day = 0.0;              // seconds since local midnight, [0, 86400)
  std::array<double, 2> loc{};     // (lon, lat) degrees, or projected metres
  std::vector<double> embedding;   // unit-norm message embedding
  std::optional<std::string> raw_text;
};

/// Time-ordered records of a single user with no gap above the segmentation
/// threshold.
struct Trace {
  std::vector<SemanticRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

}  // namespace shmm
