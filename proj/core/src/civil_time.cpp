#include "cdrlink/civil_time.hpp"

#include <charconv>
#include <chrono>
#include <stdexcept>

#include <fmt/format.h>

namespace cdrlink {

namespace {

constexpr std::int64_t kSecondsPerDay = 86400;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

bool parse_uint(std::string_view text, unsigned& out) {
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

}  // namespace

std::int64_t civil_to_epoch(int year, unsigned month, unsigned day) {
  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok()) {
    throw std::invalid_argument(fmt::format("invalid calendar date {}-{}-{}", year, month, day));
  }
  return static_cast<std::int64_t>(sys_days{ymd}.time_since_epoch().count()) * kSecondsPerDay;
}

std::int64_t epoch_day(std::int64_t timestamp) { return floor_div(timestamp, kSecondsPerDay); }

unsigned iso_weekday_of_day(std::int64_t day) {
  using namespace std::chrono;
  const sys_days d{days{day}};
  return weekday{d}.iso_encoding();
}

int hour_of_day(std::int64_t timestamp) {
  const std::int64_t secs = timestamp - epoch_day(timestamp) * kSecondsPerDay;
  return static_cast<int>(secs / 3600);
}

std::int64_t parse_time_point(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("empty time value");

  const bool looks_numeric =
      text.find('-', 1) == std::string_view::npos && text.find('T') == std::string_view::npos;
  if (looks_numeric) {
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
      throw std::invalid_argument(fmt::format("cannot parse time '{}'", text));
    }
    return value;
  }

  if (text.size() < 10 || text[4] != '-' || text[7] != '-') {
    throw std::invalid_argument(fmt::format("cannot parse time '{}'", text));
  }
  unsigned y = 0, m = 0, d = 0;
  if (!parse_uint(text.substr(0, 4), y) || !parse_uint(text.substr(5, 2), m) ||
      !parse_uint(text.substr(8, 2), d)) {
    throw std::invalid_argument(fmt::format("cannot parse date '{}'", text));
  }
  std::int64_t result = civil_to_epoch(static_cast<int>(y), m, d);
  if (text.size() == 10) return result;

  std::string_view rest = text.substr(10);
  if (rest.back() == 'Z') rest.remove_suffix(1);
  if (rest.size() != 9 || rest[0] != 'T' || rest[3] != ':' || rest[6] != ':') {
    throw std::invalid_argument(fmt::format("cannot parse time of day in '{}'", text));
  }
  unsigned hh = 0, mm = 0, ss = 0;
  if (!parse_uint(rest.substr(1, 2), hh) || !parse_uint(rest.substr(4, 2), mm) ||
      !parse_uint(rest.substr(7, 2), ss) || hh > 23 || mm > 59 || ss > 59) {
    throw std::invalid_argument(fmt::format("cannot parse time of day in '{}'", text));
  }
  return result + hh * 3600 + mm * 60 + ss;
}

std::string format_utc(std::int64_t timestamp) {
  using namespace std::chrono;
  const std::int64_t day = epoch_day(timestamp);
  const year_month_day ymd{sys_days{days{day}}};
  const std::int64_t secs = timestamp - day * kSecondsPerDay;
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                     secs / 3600, (secs / 60) % 60, secs % 60);
}

}  // namespace cdrlink
