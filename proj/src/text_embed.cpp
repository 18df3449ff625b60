#include "shmm/text_embed.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "shmm/errors.hpp"
#include "shmm/simd/kernels.hpp"

namespace shmm {

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) != prefix[i]) return false;
  }
  return true;
}

bool is_url(std::string_view chunk) {
  return starts_with_ci(chunk, "http://") || starts_with_ci(chunk, "https://") || starts_with_ci(chunk, "www.");
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    std::size_t end = pos;
    while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end]))) ++end;
    std::string_view chunk = text.substr(pos, end - pos);
    pos = end;
    if (chunk.empty() || chunk.front() == '@' || is_url(chunk)) continue;

    std::string current;
    for (char ch : chunk) {
      const auto c = static_cast<unsigned char>(ch);
      if (is_word_byte(c)) {
        current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
      } else if (!current.empty()) {
        tokens.push_back(std::move(current));
        current.clear();
      }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
  }
  return tokens;
}

IdfScheme parse_idf_scheme(std::string_view name) {
  if (name == "smooth") return IdfScheme::Smooth;
  if (name == "uniform") return IdfScheme::Uniform;
  throw DomainError("unknown idf scheme '" + std::string(name) + "'");
}

KeywordTable::KeywordTable(std::vector<std::string> vocabulary, RowMatrix vectors)
    : vocabulary_(std::move(vocabulary)), vectors_(std::move(vectors)), idf_(vocabulary_.size(), 1.0) {
  if (vectors_.rows() != vocabulary_.size()) throw DimensionMismatch("one vector per keyword expected");
  if (!vocabulary_.empty() && vectors_.cols() < 1) throw DomainError("keyword vectors need at least one dimension");
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
    if (!index_.emplace(vocabulary_[i], i).second) throw DomainError("duplicate keyword '" + vocabulary_[i] + "'");
  }
}

std::optional<std::size_t> KeywordTable::find(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void KeywordTable::set_idf(std::vector<double> idf) {
  if (idf.size() != vocabulary_.size()) throw DimensionMismatch("one idf value per keyword expected");
  for (double v : idf) {
    if (!(v >= 0.0)) throw DomainError("idf values must be non-negative");
  }
  idf_ = std::move(idf);
}

KeywordTable read_keyword_vectors(std::istream& in) {
  std::vector<std::string> vocabulary;
  std::vector<double> values;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> row;
    std::string field;
    while (fields >> field) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw ParseError("keyword vectors line " + std::to_string(line_no) + ": bad number '" + field + "'");
      }
    }
    // "V p" header: two integers and nothing else on the first line
    if (line_no == 1 && row.size() == 1 && token.find_first_not_of("0123456789") == std::string::npos &&
        row[0] == std::floor(row[0])) {
      continue;
    }
    if (row.empty()) throw ParseError("keyword vectors line " + std::to_string(line_no) + ": no values");
    if (dim == 0) dim = row.size();
    if (row.size() != dim) {
      throw ParseError("keyword vectors line " + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                       " values");
    }
    vocabulary.push_back(std::move(token));
    values.insert(values.end(), row.begin(), row.end());
  }
  RowMatrix vectors(vocabulary.size(), dim);
  std::copy(values.begin(), values.end(), vectors.flat().begin());
  return KeywordTable(std::move(vocabulary), std::move(vectors));
}

KeywordTable load_keyword_vectors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open keyword vectors " + path.string());
  return read_keyword_vectors(in);
}

std::vector<double> compute_idf(const std::vector<std::vector<std::string>>& documents,
                                const std::vector<std::string>& vocabulary, IdfScheme scheme) {
  if (documents.empty()) throw EmptyCorpus("idf needs at least one document");
  if (scheme == IdfScheme::Uniform) return std::vector<double>(vocabulary.size(), 1.0);
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& w : vocabulary) df.emplace(w, 0);
  for (const auto& doc : documents) {
    std::unordered_set<std::string_view> seen(doc.begin(), doc.end());
    for (const auto& w : seen) {
      const auto it = df.find(std::string(w));
      if (it != df.end()) ++it->second;
    }
  }
  const double d = static_cast<double>(documents.size());
  std::vector<double> idf;
  idf.reserve(vocabulary.size());
  for (const auto& w : vocabulary) idf.push_back(std::log((1.0 + d) / (1.0 + df.at(w))) + 1.0);
  return idf;
}

std::optional<std::vector<double>> embed_message(const std::vector<std::string>& tokens, const KeywordTable& table) {
  // Sorted keys make the summation order independent of token order.
  std::map<std::size_t, double> tf;
  for (const auto& t : tokens) {
    if (const auto idx = table.find(t)) tf[*idx] += 1.0;
  }
  if (tf.empty()) return std::nullopt;
  std::vector<double> v(table.dim(), 0.0);
  for (const auto& [idx, count] : tf) simd::axpy(count * table.idf()[idx], table.vectors().row(idx), v);
  const double norm = std::sqrt(simd::dot(v, v));
  if (!(norm >= 1e-12)) return std::nullopt;
  for (double& x : v) x /= norm;
  return v;
}

std::vector<KeywordMatch> nearest_keywords(std::span<const double> direction, const KeywordTable& table,
                                           std::size_t k) {
  if (direction.size() != table.dim()) throw DimensionMismatch("direction and keyword vectors differ in dimension");
  if (k > table.size()) throw DomainError("more keywords requested than the vocabulary holds");
  const double dnorm = std::sqrt(simd::dot(direction, direction));
  std::vector<KeywordMatch> all;
  all.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto row = table.vectors().row(i);
    const double rnorm = std::sqrt(simd::dot(row, row));
    const double cos = rnorm > 0.0 && dnorm > 0.0 ? simd::dot(row, direction) / (rnorm * dnorm) : 0.0;
    all.push_back({table.vocabulary()[i], cos});
  }
  auto better = [](const KeywordMatch& a, const KeywordMatch& b) {
    if (a.cosine != b.cosine) return a.cosine > b.cosine;
    return a.token < b.token;
  };
  std::partial_sort(all.begin(), all.begin() + k, all.end(), better);
  all.resize(k);
  return all;
}

}  // namespace shmm
