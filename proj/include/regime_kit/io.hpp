#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace regime_kit {

std::string_view trim(std::string_view s);

/// Splits one CSV record on commas and trims each field. No quoting support:
/// inputs are plain numeric tables with bare identifiers.
std::vector<std::string> split_csv_line(std::string_view line);

/// Strict full-field parse; nullopt on trailing garbage or empty input.
std::optional<double> parse_double(std::string_view field);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

std::string read_text_file(const std::filesystem::path& path);

/// Writes text verbatim (binary mode, no newline translation).
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Serialises with sorted keys and two-space indentation, trailing newline.
std::string dump_json(const nlohmann::json& value);

nlohmann::json read_json_file(const std::filesystem::path& path);

/// Lower-case hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

/// Splits "0.7,0.8,0.9" into numbers.
std::vector<double> parse_number_list(std::string_view text);

}  // namespace regime_kit
