#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace backheat {

/// Scientific notation with 17 significant digits; `inf`, `-inf`, `nan`
/// for non-finite values.
std::string format_double(double x);

/// Splits one CSV line on commas and trims surrounding whitespace.
std::vector<std::string> split_csv_line(std::string_view line);

/// Parses a full-string double; throws InputError naming `what` otherwise.
double parse_double(std::string_view text, std::string_view what);

}  // namespace backheat
