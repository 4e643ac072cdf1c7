#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace railpad::text {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);
/// Fixed-precision rendering for human-facing tables.
std::string format_fixed(double value, int decimals);

/// Strict parse; throws DataError on trailing garbage or empty input.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

}  // namespace railpad::text
