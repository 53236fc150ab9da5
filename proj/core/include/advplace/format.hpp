#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace advplace {

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);

/// Parses a full token as a double. Accepts "nan"/"inf" spellings so callers
/// can reject them with a precise diagnostic. Returns false on garbage.
bool parse_double(std::string_view token, double& out);

/// Splits one CSV line on commas. Surrounding blanks and a trailing '\r' are trimmed.
std::vector<std::string_view> split_csv_line(std::string_view line);

}  // namespace advplace
