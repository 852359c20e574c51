#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"
#include "vsls/error.hpp"

namespace vsls {

// File helpers that report failures as Error(ErrorCode::Io).
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

// Malformed JSON is reported with `on_parse_error` (an input error).
nlohmann::json read_json_file(const std::filesystem::path& path,
                              ErrorCode on_parse_error = ErrorCode::InvalidQuery);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace vsls
