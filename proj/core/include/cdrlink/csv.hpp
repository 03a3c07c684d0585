#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cdrlink::csv {

/// Splits one line on `sep`. No quoting: identifiers in the supported
/// formats never contain the separator.
std::vector<std::string_view> split(std::string_view line, char sep = ',');

/// Drops a trailing '\r' and a leading UTF-8 byte-order mark.
std::string_view clean_line(std::string_view line);

std::optional<std::int64_t> parse_int(std::string_view text);
std::optional<double> parse_double(std::string_view text);

/// Shortest representation that round-trips exactly.
std::string format_double(double value);

}  // namespace cdrlink::csv
