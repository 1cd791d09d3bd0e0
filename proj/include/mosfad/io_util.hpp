#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mosfad {

std::string read_file(const std::filesystem::path& path);
// Writes atomically enough for our purposes: truncate + write + check.
void write_file(const std::filesystem::path& path, std::string_view content);

// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);
// Strict parse of a whole field; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view text);

std::vector<std::string_view> split_view(std::string_view text, char sep);

}  // namespace mosfad
