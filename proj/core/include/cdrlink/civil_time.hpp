#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace cdrlink {

/// Seconds since 1970-01-01T00:00:00Z for a UTC calendar date.
std::int64_t civil_to_epoch(int year, unsigned month, unsigned day);

/// Floor-divided day number (days since the epoch) of a timestamp.
std::int64_t epoch_day(std::int64_t timestamp);

/// ISO weekday of a day number: 1 = Monday ... 7 = Sunday.
unsigned iso_weekday_of_day(std::int64_t day);

/// Hour of day [0, 24) of a timestamp.
int hour_of_day(std::int64_t timestamp);

/// Parses `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM:SS[Z]` (UTC) or plain epoch seconds.
/// Throws std::invalid_argument on anything else.
std::int64_t parse_time_point(std::string_view text);

/// `YYYY-MM-DDTHH:MM:SSZ`
std::string format_utc(std::int64_t timestamp);

}  // namespace cdrlink
