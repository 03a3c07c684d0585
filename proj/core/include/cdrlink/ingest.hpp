#pragma once

// Canonical data model for call-detail records plus the CSV readers and
// writers that feed it.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cdrlink {

enum class EventKind : std::uint8_t { call, text };

/// One call or text between two users. `duration` is empty when the
/// operator did not record it (calls placed by non-subscribers).
struct CdrEvent {
  std::string caller_id;
  std::string callee_id;
  std::int64_t timestamp = 0;
  EventKind kind = EventKind::call;
  std::optional<std::int64_t> duration;

  bool operator==(const CdrEvent&) const = default;
};

enum class Gender : std::uint8_t { female, male };

struct SubscriberRecord {
  std::string user_id;
  int age = 0;
  Gender gender = Gender::female;
  std::optional<std::string> postcode;

  bool operator==(const SubscriberRecord&) const = default;
};

using SubscriberTable = std::map<std::string, SubscriberRecord, std::less<>>;

/// Half-open UTC interval [start, end) split at calendar-month boundaries.
class ObservationWindow {
 public:
  ObservationWindow(std::int64_t start, std::int64_t end);

  /// `count` whole calendar months starting at year/month.
  static ObservationWindow calendar_months(int year, unsigned month, unsigned count);
  /// January through July 2007.
  static ObservationWindow default_window();

  std::int64_t start() const { return start_; }
  std::int64_t end() const { return end_; }
  std::int64_t length_seconds() const { return end_ - start_; }
  bool contains(std::int64_t timestamp) const { return timestamp >= start_ && timestamp < end_; }

  /// Start of every month segment; the first entry is `start()`, which need
  /// not fall on the first of a month.
  const std::vector<std::int64_t>& month_starts() const { return month_starts_; }
  std::size_t month_count() const { return month_starts_.size(); }
  /// Index of the month segment holding `timestamp`, or nullopt outside the window.
  std::optional<std::size_t> month_index(std::int64_t timestamp) const;

  bool operator==(const ObservationWindow&) const = default;

 private:
  std::int64_t start_;
  std::int64_t end_;
  std::vector<std::int64_t> month_starts_;
};

/// Unrecoverable input problem (unreadable stream, wrong header, empty data).
class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Diagnostic {
  std::size_t line = 0;
  std::string reason;

  /// `{"line": n, "reason": "..."}`
  std::string to_json_line() const;
  bool operator==(const Diagnostic&) const = default;
};

struct EventParseResult {
  std::vector<CdrEvent> events;
  std::vector<Diagnostic> diagnostics;
};

struct SubscriberParseResult {
  SubscriberTable subscribers;
  std::vector<Diagnostic> diagnostics;
};

inline constexpr const char* kEventsHeader = "caller_id,callee_id,timestamp,kind,duration";
inline constexpr const char* kSubscribersHeader = "user_id,age,gender,postcode";

/// Reads the events CSV. Malformed rows are dropped and diagnosed; file
/// order is preserved for accepted rows.
EventParseResult parse_events(std::istream& in, const ObservationWindow& window);

/// Reads the subscribers CSV; the first occurrence of a duplicated id wins.
SubscriberParseResult parse_subscribers(std::istream& in);

void write_events(std::ostream& out, std::span<const CdrEvent> events);
void write_subscribers(std::ostream& out, const SubscriberTable& subscribers);

struct ValidationReport {
  std::size_t n_events = 0;
  std::size_t n_calls = 0;
  std::size_t n_texts = 0;
  std::size_t n_users = 0;
  std::size_t n_subscribers = 0;     // users seen in events that have metadata
  std::size_t n_nonsubscribers = 0;  // users seen in events without metadata
  std::size_t n_unknown_duration = 0;
  std::vector<std::size_t> events_per_month;
  std::vector<std::string> warnings;

  /// True when something looks wrong with the input (e.g. an empty month).
  bool suspicious() const { return !warnings.empty(); }
};

/// Summarises parsed inputs. Throws IngestError on an empty event set.
ValidationReport validate_dataset(std::span<const CdrEvent> events,
                                  const SubscriberTable& subscribers,
                                  const ObservationWindow& window);

const char* to_string(EventKind kind);
const char* to_string(Gender gender);

}  // namespace cdrlink
