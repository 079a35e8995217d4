#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace disco {

// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);

// Strict decimal parse of the whole string; nullopt on trailing garbage.
std::optional<double> parse_double(std::string_view text);

// Comma-separated list of numbers, e.g. "0.05,0.1,1".
std::vector<double> parse_double_list(std::string_view text);

// Single CSV line from already-formatted fields (fields are not quoted).
std::string csv_line(const std::vector<std::string>& fields);

}  // namespace disco
