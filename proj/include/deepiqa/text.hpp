#pragma once

// Small text helpers shared by the CSV/JSON writers and parsers.

#include <string>
#include <string_view>
#include <vector>

namespace deepiqa::text {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

/// Strict parse of a whole token; throws deepiqa::Error on trailing junk.
double parse_double(std::string_view token);
long long parse_integer(std::string_view token);

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view line, char delimiter);
std::vector<std::string> split_whitespace(std::string_view line);
std::string to_lower(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace deepiqa::text
