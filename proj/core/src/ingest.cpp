#include "cdrlink/ingest.hpp"

#include <algorithm>
#include <chrono>
#include <istream>
#include <ostream>
#include <set>
#include <string_view>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cdrlink/civil_time.hpp"
#include "cdrlink/csv.hpp"

namespace cdrlink {

namespace {

constexpr std::int64_t kSecondsPerDay = 86400;

bool valid_id(std::string_view id) {
  if (id.empty()) return false;
  return std::none_of(id.begin(), id.end(), [](char c) { return c == ' ' || c == '\t' || c == '"'; });
}

/// Reads the header line and throws unless it matches `expected`.
void expect_header(std::istream& in, std::string_view expected, std::string_view what) {
  if (!in) throw IngestError(fmt::format("{}: stream is not readable", what));
  std::string line;
  if (!std::getline(in, line)) throw IngestError(fmt::format("{}: missing header", what));
  const std::string_view header = csv::clean_line(line);
  if (header != expected) {
    throw IngestError(fmt::format("{}: header mismatch, expected '{}' got '{}'", what, expected, header));
  }
}

}  // namespace

ObservationWindow::ObservationWindow(std::int64_t start, std::int64_t end) : start_(start), end_(end) {
  if (start >= end) {
    throw std::invalid_argument(
        fmt::format("observation window start {} must precede end {}", start, end));
  }
  using namespace std::chrono;
  month_starts_.push_back(start);
  const year_month_day first{sys_days{days{epoch_day(start)}}};
  for (year_month cursor = first.year() / first.month() + months{1};; cursor += months{1}) {
    const std::int64_t next =
        static_cast<std::int64_t>(sys_days{cursor / 1}.time_since_epoch().count()) * kSecondsPerDay;
    if (next >= end) break;
    month_starts_.push_back(next);
  }
}

ObservationWindow ObservationWindow::calendar_months(int year, unsigned month, unsigned count) {
  if (count == 0) throw std::invalid_argument("calendar window needs at least one month");
  const std::int64_t start = civil_to_epoch(year, month, 1);
  const unsigned total = (month - 1) + count;
  const std::int64_t end = civil_to_epoch(year + static_cast<int>(total / 12), total % 12 + 1, 1);
  return {start, end};
}

ObservationWindow ObservationWindow::default_window() { return calendar_months(2007, 1, 7); }

std::optional<std::size_t> ObservationWindow::month_index(std::int64_t timestamp) const {
  if (!contains(timestamp)) return std::nullopt;
  const auto it = std::upper_bound(month_starts_.begin(), month_starts_.end(), timestamp);
  return static_cast<std::size_t>(std::distance(month_starts_.begin(), it) - 1);
}

std::string Diagnostic::to_json_line() const {
  return nlohmann::json{{"line", line}, {"reason", reason}}.dump();
}

const char* to_string(EventKind kind) { return kind == EventKind::call ? "call" : "text"; }
const char* to_string(Gender gender) { return gender == Gender::female ? "F" : "M"; }

EventParseResult parse_events(std::istream& in, const ObservationWindow& window) {
  expect_header(in, kEventsHeader, "events");

  EventParseResult result;
  std::string raw;
  std::size_t line_no = 1;
  auto reject = [&](std::string reason) { result.diagnostics.push_back({line_no, std::move(reason)}); };

  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = csv::clean_line(raw);
    if (line.empty()) continue;

    const auto fields = csv::split(line);
    if (fields.size() != 5) {
      reject(fmt::format("expected 5 fields, found {}", fields.size()));
      continue;
    }
    if (!valid_id(fields[0]) || !valid_id(fields[1])) {
      reject("invalid user id");
      continue;
    }
    if (fields[0] == fields[1]) {
      reject("self-loop");
      continue;
    }
    const auto timestamp = csv::parse_int(fields[2]);
    if (!timestamp) {
      reject("bad timestamp");
      continue;
    }
    if (!window.contains(*timestamp)) {
      reject("out of window");
      continue;
    }

    EventKind kind;
    if (fields[3] == "call") {
      kind = EventKind::call;
    } else if (fields[3] == "text") {
      kind = EventKind::text;
    } else {
      reject("unknown kind");
      continue;
    }

    std::optional<std::int64_t> duration;
    if (fields[4].empty()) {
      if (kind == EventKind::text) {
        reject("text without duration");
        continue;
      }
    } else {
      duration = csv::parse_int(fields[4]);
      if (!duration) {
        reject("bad duration");
        continue;
      }
      if (*duration < 0) {
        reject("negative duration");
        continue;
      }
      if (kind == EventKind::text && *duration != 0) {
        reject("text with nonzero duration");
        continue;
      }
    }

    result.events.push_back(
        CdrEvent{std::string(fields[0]), std::string(fields[1]), *timestamp, kind, duration});
  }
  if (in.bad()) throw IngestError("events: read error");
  return result;
}

SubscriberParseResult parse_subscribers(std::istream& in) {
  expect_header(in, kSubscribersHeader, "subscribers");

  SubscriberParseResult result;
  std::string raw;
  std::size_t line_no = 1;
  auto reject = [&](std::string reason) { result.diagnostics.push_back({line_no, std::move(reason)}); };

  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = csv::clean_line(raw);
    if (line.empty()) continue;

    const auto fields = csv::split(line);
    if (fields.size() != 4) {
      reject(fmt::format("expected 4 fields, found {}", fields.size()));
      continue;
    }
    if (!valid_id(fields[0])) {
      reject("invalid user id");
      continue;
    }
    const auto age = csv::parse_int(fields[1]);
    if (!age) {
      reject("bad age");
      continue;
    }
    if (*age < 0 || *age > 120) {
      reject("age out of range");
      continue;
    }
    Gender gender;
    if (fields[2] == "F") {
      gender = Gender::female;
    } else if (fields[2] == "M") {
      gender = Gender::male;
    } else {
      reject("bad gender");
      continue;
    }
    if (result.subscribers.contains(fields[0])) {
      reject("duplicate user id");
      continue;
    }
    SubscriberRecord record{std::string(fields[0]), static_cast<int>(*age), gender, std::nullopt};
    if (!fields[3].empty()) record.postcode = std::string(fields[3]);
    result.subscribers.emplace(record.user_id, std::move(record));
  }
  if (in.bad()) throw IngestError("subscribers: read error");
  return result;
}

void write_events(std::ostream& out, std::span<const CdrEvent> events) {
  out << kEventsHeader << '\n';
  for (const CdrEvent& e : events) {
    out << e.caller_id << ',' << e.callee_id << ',' << e.timestamp << ',' << to_string(e.kind) << ',';
    if (e.duration) out << *e.duration;
    out << '\n';
  }
}

void write_subscribers(std::ostream& out, const SubscriberTable& subscribers) {
  out << kSubscribersHeader << '\n';
  for (const auto& [id, rec] : subscribers) {
    out << id << ',' << rec.age << ',' << to_string(rec.gender) << ',' << rec.postcode.value_or("")
        << '\n';
  }
}

ValidationReport validate_dataset(std::span<const CdrEvent> events,
                                  const SubscriberTable& subscribers,
                                  const ObservationWindow& window) {
  if (events.empty()) throw IngestError("dataset has no events");

  ValidationReport report;
  report.n_events = events.size();
  report.events_per_month.assign(window.month_count(), 0);

  std::set<std::string_view> users;
  for (const CdrEvent& e : events) {
    users.insert(e.caller_id);
    users.insert(e.callee_id);
    if (e.kind == EventKind::call) {
      ++report.n_calls;
      if (!e.duration) ++report.n_unknown_duration;
    } else {
      ++report.n_texts;
    }
    if (const auto month = window.month_index(e.timestamp)) ++report.events_per_month[*month];
  }

  report.n_users = users.size();
  for (std::string_view user : users) {
    if (subscribers.contains(user)) {
      ++report.n_subscribers;
    } else {
      ++report.n_nonsubscribers;
    }
  }

  for (std::size_t m = 0; m < report.events_per_month.size(); ++m) {
    if (report.events_per_month[m] == 0) {
      report.warnings.push_back(
          fmt::format("month {} (starting {}) has no events", m + 1, format_utc(window.month_starts()[m])));
    }
  }
  return report;
}

}  // namespace cdrlink
