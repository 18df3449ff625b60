#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "shmm/matrix.hpp"

namespace shmm {

/// Lowercases, drops URLs and @-mentions, keeps hashtag bodies and splits on
/// ASCII characters that are not letters or digits. Bytes >= 0x80 count as
/// word characters, so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view text);

enum class IdfScheme {
  Smooth,   // ln((1 + D) / (1 + df)) + 1
  Uniform,  // every keyword weighs 1
};

IdfScheme parse_idf_scheme(std::string_view name);

/// Pretrained keyword vectors plus corpus idf weights.
class KeywordTable {
 public:
  KeywordTable() = default;
  /// Throws DomainError on duplicate tokens, a ragged matrix or p < 1.
  KeywordTable(std::vector<std::string> vocabulary, RowMatrix vectors);

  std::size_t size() const { return vocabulary_.size(); }
  std::size_t dim() const { return vectors_.cols(); }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  const RowMatrix& vectors() const { return vectors_; }
  const std::vector<double>& idf() const { return idf_; }
  std::optional<std::size_t> find(std::string_view token) const;

  /// Replaces the idf vector (one non-negative entry per keyword).
  void set_idf(std::vector<double> idf);

 private:
  std::vector<std::string> vocabulary_;
  RowMatrix vectors_;
  std::vector<double> idf_;  // defaults to all ones
  std::unordered_map<std::string, std::size_t> index_;
};

/// Text keyword-vector file: "token v1 ... vp" per line with an optional
/// "V p" header line.
KeywordTable read_keyword_vectors(std::istream& in);
KeywordTable load_keyword_vectors(const std::filesystem::path& path);

/// idf of every vocabulary token over `documents` (token lists, one per
/// message). Throws EmptyCorpus when there are no documents.
std::vector<double> compute_idf(const std::vector<std::vector<std::string>>& documents,
                                const std::vector<std::string>& vocabulary, IdfScheme scheme = IdfScheme::Smooth);

/// Unit-norm tf-idf weighted average of the known keyword vectors, or nullopt
/// when no token is known or the weighted sum has norm below 1e-12.
std::optional<std::vector<double>> embed_message(const std::vector<std::string>& tokens, const KeywordTable& table);

struct KeywordMatch {
  std::string token;
  double cosine;
};

/// The k keywords closest to `direction` by cosine similarity; ties are
/// broken by token order.
std::vector<KeywordMatch> nearest_keywords(std::span<const double> direction, const KeywordTable& table,
                                           std::size_t k);

}  // namespace shmm
