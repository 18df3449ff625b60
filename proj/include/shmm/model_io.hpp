#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "shmm/hmm.hpp"

namespace shmm {

inline constexpr int kModelFormatVersion = 1;

/// Versioned JSON document; every double is written with 17 significant
/// digits so a save/load cycle is exact.
std::string model_to_json(const ShmmModel& model);

/// Throws ParseError on malformed or unsupported documents and DomainError if
/// the decoded model fails validation.
ShmmModel model_from_json(std::string_view text);

void save_model(const ShmmModel& model, const std::filesystem::path& path);
ShmmModel load_model(const std::filesystem::path& path);

/// `%.17g`; throws DomainError on non-finite input.
std::string format_double(double x);

}  // namespace shmm
