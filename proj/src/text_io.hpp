#pragma once

// Internal helpers shared by the readers and writers.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace zigamma::detail {

std::string read_file(const std::filesystem::path& path);
/// Write atomically enough for our purposes: whole buffer, binary mode.
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double v);

/// Split one CSV line. Handles double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(std::string_view line);

/// Split text into lines, dropping a trailing '\r' on each.
std::vector<std::string_view> split_lines(std::string_view text);

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);

/// Strict numeric parse of the whole field.
bool parse_double(std::string_view s, double& out);
bool parse_int(std::string_view s, long long& out);

}  // namespace zigamma::detail
