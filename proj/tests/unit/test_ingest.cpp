#include <sstream>

#include <gtest/gtest.h>

#include "cdrlink/civil_time.hpp"
#include "cdrlink/ingest.hpp"

using namespace cdrlink;

namespace {

const ObservationWindow kWindow = ObservationWindow::default_window();

EventParseResult parse(const std::string& body) {
  std::istringstream in(std::string(kEventsHeader) + "\n" + body);
  return parse_events(in, kWindow);
}

}  // namespace

TEST(Window, DefaultIsSevenCalendarMonths) {
  EXPECT_EQ(kWindow.start(), civil_to_epoch(2007, 1, 1));
  EXPECT_EQ(kWindow.end(), civil_to_epoch(2007, 8, 1));
  ASSERT_EQ(kWindow.month_count(), 7u);
  EXPECT_EQ(kWindow.month_starts()[1], civil_to_epoch(2007, 2, 1));
  EXPECT_EQ(kWindow.month_index(civil_to_epoch(2007, 3, 1) - 1), 1u);
  EXPECT_EQ(kWindow.month_index(civil_to_epoch(2007, 3, 1)), 2u);
  EXPECT_FALSE(kWindow.month_index(kWindow.end()));
  EXPECT_FALSE(kWindow.month_index(kWindow.start() - 1));
}

TEST(Window, MidMonthStartAndYearWrap) {
  const ObservationWindow w(civil_to_epoch(2006, 12, 15), civil_to_epoch(2007, 2, 10));
  ASSERT_EQ(w.month_count(), 3u);
  EXPECT_EQ(w.month_starts()[0], civil_to_epoch(2006, 12, 15));
  EXPECT_EQ(w.month_starts()[1], civil_to_epoch(2007, 1, 1));
  EXPECT_THROW(ObservationWindow(10, 10), std::invalid_argument);
  EXPECT_EQ(ObservationWindow::calendar_months(2006, 11, 3).end(), civil_to_epoch(2007, 2, 1));
}

TEST(ParseEvents, AcceptsWellFormedRows) {
  const auto r = parse("a,b,1167609700,call,30\nb,a,1167609800,text,0\nc,a,1167609900,call,\n");
  EXPECT_TRUE(r.diagnostics.empty());
  ASSERT_EQ(r.events.size(), 3u);
  EXPECT_EQ(r.events[0].duration, 30);
  EXPECT_EQ(r.events[1].kind, EventKind::text);
  EXPECT_FALSE(r.events[2].duration);
}

TEST(ParseEvents, RejectsWithLineNumbers) {
  const auto r = parse(
      "a,b,1167609700,call\n"      // 2 fields count
      "a,a,1167609700,call,3\n"    // 3 self loop
      "a,b,xx,call,3\n"            // 4
      "a,b,1,call,3\n"             // 5 out of window
      "a,b,1167609700,fax,3\n"     // 6
      "a,b,1167609700,text,\n"     // 7
      "a,b,1167609700,call,-4\n"   // 8
      "a,b,1167609700,text,5\n"    // 9
      "a,b,1167609700,call,ok\n"   // 10
      "a,b,1167609700,call,7\r\n"  // 11 accepted (CRLF)
  );
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.events[0].duration, 7);
  ASSERT_EQ(r.diagnostics.size(), 9u);
  EXPECT_EQ(r.diagnostics[0].line, 2u);
  EXPECT_EQ(r.diagnostics[1].reason, "self-loop");
  EXPECT_EQ(r.diagnostics[3].reason, "out of window");
  EXPECT_EQ(r.diagnostics[5].reason, "text without duration");
  EXPECT_EQ(r.diagnostics[6].reason, "negative duration");
  EXPECT_EQ(r.diagnostics[7].reason, "text with nonzero duration");
  EXPECT_EQ(r.diagnostics[8].line, 10u);
  EXPECT_EQ(r.diagnostics[0].to_json_line(), R"({"line":2,"reason":"expected 5 fields, found 4"})");
}

TEST(ParseEvents, WindowEndIsExclusive) {
  const auto r = parse("a,b," + std::to_string(kWindow.end()) + ",call,1\na,b," +
                       std::to_string(kWindow.end() - 1) + ",call,1\n");
  EXPECT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.diagnostics.size(), 1u);
}

TEST(ParseEvents, HeaderIsChecked) {
  std::istringstream bad("caller,callee,ts,kind,duration\n");
  EXPECT_THROW(parse_events(bad, kWindow), IngestError);
  std::istringstream empty("");
  EXPECT_THROW(parse_events(empty, kWindow), IngestError);
}

TEST(ParseSubscribers, ValidatesAndKeepsFirstDuplicate) {
  std::istringstream in(std::string(kSubscribersHeader) +
                        "\nu1,30,F,1000\nu2,200,M,\nu3,40,X,\nu1,50,M,\nu4,22,M,\n");
  const auto r = parse_subscribers(in);
  ASSERT_EQ(r.subscribers.size(), 2u);
  EXPECT_EQ(r.subscribers.at("u1").age, 30);
  EXPECT_EQ(r.subscribers.at("u1").postcode, "1000");
  EXPECT_FALSE(r.subscribers.at("u4").postcode);
  ASSERT_EQ(r.diagnostics.size(), 3u);
  EXPECT_EQ(r.diagnostics[0].reason, "age out of range");
  EXPECT_EQ(r.diagnostics[1].reason, "bad gender");
  EXPECT_EQ(r.diagnostics[2].reason, "duplicate user id");
}

TEST(WriteRead, EventsRoundTrip) {
  const auto r = parse("a,b,1167609700,call,30\nb,a,1167609800,text,0\nc,a,1167609900,call,\n");
  std::ostringstream out;
  write_events(out, r.events);
  std::istringstream in(out.str());
  EXPECT_EQ(parse_events(in, kWindow).events, r.events);
}

TEST(WriteRead, SubscribersRoundTrip) {
  std::istringstream in(std::string(kSubscribersHeader) + "\nu1,30,F,1000\nu2,20,M,\n");
  const auto r = parse_subscribers(in);
  std::ostringstream out;
  write_subscribers(out, r.subscribers);
  std::istringstream again(out.str());
  EXPECT_EQ(parse_subscribers(again).subscribers, r.subscribers);
}

TEST(Validate, CountsAndEmptyMonthWarning) {
  const auto r = parse("a,b,1167609700,call,30\nb,a,1167609800,text,0\nc,a,1167609900,call,\n");
  std::istringstream in(std::string(kSubscribersHeader) + "\na,30,F,\nb,31,M,\n");
  const auto subs = parse_subscribers(in).subscribers;
  const auto report = validate_dataset(r.events, subs, kWindow);
  EXPECT_EQ(report.n_events, 3u);
  EXPECT_EQ(report.n_calls, 2u);
  EXPECT_EQ(report.n_texts, 1u);
  EXPECT_EQ(report.n_users, 3u);
  EXPECT_EQ(report.n_subscribers, 2u);
  EXPECT_EQ(report.n_nonsubscribers, 1u);
  EXPECT_EQ(report.n_unknown_duration, 1u);
  EXPECT_EQ(report.events_per_month[0], 3u);
  EXPECT_TRUE(report.suspicious());
  EXPECT_THROW(validate_dataset({}, subs, kWindow), IngestError);
}
