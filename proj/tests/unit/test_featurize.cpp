#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "cdrlink/civil_time.hpp"
#include "cdrlink/csv.hpp"
#include "cdrlink/featurize.hpp"

using namespace cdrlink;

namespace {

const std::int64_t kMonday = civil_to_epoch(2007, 1, 1);  // a Monday
const ObservationWindow kWindow = ObservationWindow::default_window();

PairEvent call(std::int64_t ts, std::optional<std::int64_t> dur = 60, bool from_first = true) {
  return {ts, EventKind::call, dur, from_first};
}
PairEvent text(std::int64_t ts, bool from_first = true) { return {ts, EventKind::text, 0, from_first}; }

std::size_t index_of(const std::string& name) {
  const auto names = feature_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::out_of_range(name);
  return static_cast<std::size_t>(it - names.begin());
}

}  // namespace

TEST(Segment, Boundaries) {
  auto at = [](int day, int h, int m = 0, int s = 0) { return kMonday + day * 86400 + h * 3600 + m * 60 + s; };
  EXPECT_EQ(segment_of(at(0, 6, 59, 59)).daypart, DayPart::late_night);
  EXPECT_EQ(segment_of(at(0, 7)).daypart, DayPart::daytime);
  EXPECT_EQ(segment_of(at(0, 16, 59, 59)).daypart, DayPart::daytime);
  EXPECT_EQ(segment_of(at(0, 17)).daypart, DayPart::evening);
  EXPECT_EQ(segment_of(at(0, 22, 59, 59)).daypart, DayPart::evening);
  EXPECT_EQ(segment_of(at(0, 23)).daypart, DayPart::late_night);
  EXPECT_EQ(segment_of(at(3, 12)).weekpart, WeekPart::weekday);  // Thursday
  EXPECT_EQ(segment_of(at(4, 12)).weekpart, WeekPart::weekend);  // Friday
  EXPECT_EQ(segment_of(at(6, 23, 59, 59)).weekpart, WeekPart::weekend);
  EXPECT_EQ(segment_of(at(7, 0)).weekpart, WeekPart::weekday);
  // Thursday 23:30 UTC is Friday 01:30 at +2h.
  const auto s = segment_of(at(3, 23, 30), 7200);
  EXPECT_EQ(s.weekpart, WeekPart::weekend);
  EXPECT_EQ(s.daypart, DayPart::late_night);
  for (std::size_t i = 0; i < kSegmentCount; ++i) EXPECT_EQ(TimeSegment::from_index(i).index(), i);
  EXPECT_THROW(TimeSegment::from_index(6), std::out_of_range);
}

TEST(GroupPairEvents, OrientsAndFilters) {
  const std::vector<CdrEvent> events{{"b", "a", 10, EventKind::call, 5},
                                     {"a", "b", 11, EventKind::text, 0},
                                     {"a", "c", 12, EventKind::call, 1}};
  const std::vector<PairKey> pairs{PairKey::make("a", "b"), PairKey::make("x", "y")};
  const auto g = group_pair_events(events, pairs);
  ASSERT_EQ(g.size(), 2u);
  const auto& ab = g.at(pairs[0]);
  ASSERT_EQ(ab.size(), 2u);
  EXPECT_FALSE(ab[0].from_first);
  EXPECT_TRUE(ab[1].from_first);
  EXPECT_TRUE(g.at(pairs[1]).empty());
}

TEST(WeeklySeries, MondayAlignedFullWeeks) {
  const std::vector<PairEvent> ev{call(kMonday + 8 * 3600, 100), call(kMonday + 7 * 86400 + 8 * 3600, 50),
                                  text(kMonday + 5 * 86400 + 20 * 3600)};
  const auto ws = weekly_series(ev, kWindow);
  // 2007-01-01 .. 2007-07-30 holds 30 full weeks (the last Monday, 07-30, is cut off).
  EXPECT_EQ(ws.week_count(), 30u);
  EXPECT_EQ(ws.week_starts.front(), kMonday);
  const auto calls = ws.series(Quantity::calls, 0);
  EXPECT_EQ(calls[0], 1.0);
  EXPECT_EQ(calls[1], 1.0);
  EXPECT_EQ(ws.series(Quantity::duration, 0)[0], 100.0);
  EXPECT_EQ(ws.series(Quantity::texts, 4)[0], 1.0);  // weekend evening
  EXPECT_EQ(std::accumulate(calls.begin(), calls.end(), 0.0), 2.0);
}

TEST(WeeklySeries, PartialWeekAtStartIsDropped) {
  const ObservationWindow w(civil_to_epoch(2007, 1, 3), civil_to_epoch(2007, 1, 20));
  const std::vector<PairEvent> ev{call(civil_to_epoch(2007, 1, 4) + 3600)};
  const auto ws = weekly_series(ev, w);
  ASSERT_EQ(ws.week_count(), 1u);
  EXPECT_EQ(ws.week_starts[0], civil_to_epoch(2007, 1, 8));
  EXPECT_EQ(ws.series(Quantity::calls, 2)[0], 0.0);
  EXPECT_THROW(weekly_series(ev, ObservationWindow(kMonday + 1, kMonday + 8 * 86400)), std::invalid_argument);
}

TEST(DistStats, Fixture123) {
  const std::vector<double> v{1, 2, 3};
  const auto s = dist_stats(v);
  EXPECT_DOUBLE_EQ(s.mean, 2.0);
  EXPECT_DOUBLE_EQ(s.median, 2.0);
  EXPECT_NEAR(s.std, std::sqrt(2.0 / 3.0), 1e-15);
  EXPECT_NEAR(s.skewness, 0.0, 1e-15);
  EXPECT_NEAR(s.kurtosis, -1.5, 1e-12);
}

TEST(DistStats, ConstantAndEmpty) {
  const std::vector<double> c{4, 4, 4, 4};
  const auto s = dist_stats(c);
  EXPECT_EQ(s.std, 0.0);
  EXPECT_EQ(s.skewness, 0.0);
  EXPECT_EQ(s.kurtosis, 0.0);
  EXPECT_EQ(s.mean, 4.0);
  EXPECT_THROW(dist_stats({}), std::invalid_argument);
  const std::vector<double> one{7};
  EXPECT_EQ(dist_stats(one).median, 7.0);
}

TEST(DistStats, PropertiesUnderAffineMaps) {
  std::mt19937_64 rng(3);
  std::exponential_distribution<double> e(0.3);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> v(5 + rng() % 40);
    for (double& x : v) x = e(rng);
    const auto s = dist_stats(v);
    std::vector<double> w;
    for (double x : v) w.push_back(3.0 * x + 7.0);
    const auto sw = dist_stats(w);
    EXPECT_NEAR(sw.mean, 3.0 * s.mean + 7.0, 1e-9);
    EXPECT_NEAR(sw.std, 3.0 * s.std, 1e-9);
    EXPECT_NEAR(sw.skewness, s.skewness, 1e-9);
    EXPECT_NEAR(sw.kurtosis, s.kurtosis, 1e-8);
    EXPECT_GE(s.kurtosis, -2.0 - 1e-12);
    EXPECT_LE(s.min, s.median);
    EXPECT_LE(s.median, s.max);
    std::shuffle(v.begin(), v.end(), rng);
    EXPECT_NEAR(dist_stats(v).mean, s.mean, 1e-12);
  }
}

TEST(Fractions, OrderAndLogOnLateNight) {
  SegmentTotals t{};
  t[0] = {2, 100, 1};  // weekday daytime
  t[1] = {1, 0, 3};
  t[2] = {1, 100, 0};
  const auto f = fraction_features(t);
  // weekday calls: daytime, evening, late night
  EXPECT_DOUBLE_EQ(f[0], 0.5);
  EXPECT_DOUBLE_EQ(f[1], 0.25);
  EXPECT_DOUBLE_EQ(f[2], std::log1p(0.25));
  // weekday duration
  EXPECT_DOUBLE_EQ(f[3], 0.5);
  EXPECT_DOUBLE_EQ(f[5], std::log1p(0.5));
  // weekday texts, no log on late night
  EXPECT_DOUBLE_EQ(f[6], 0.25);
  EXPECT_DOUBLE_EQ(f[7], 0.75);
  EXPECT_DOUBLE_EQ(f[8], 0.0);
  // empty weekend: all zero
  for (std::size_t i = 9; i < 18; ++i) EXPECT_EQ(f[i], 0.0);
}

TEST(ActiveDays, DistinctLocalDays) {
  const std::vector<PairEvent> ev{call(kMonday + 8 * 3600), call(kMonday + 9 * 3600), call(kMonday + 86400 + 8 * 3600),
                                  text(kMonday + 8 * 3600)};
  const auto d = active_days_features(ev);
  EXPECT_DOUBLE_EQ(d[0], std::log1p(2.0));
  EXPECT_DOUBLE_EQ(d[6], std::log1p(1.0));
  EXPECT_EQ(d[1], 0.0);
}

TEST(Reciprocity, Definition) {
  EXPECT_EQ(reciprocity(0, 0), 0.0);
  EXPECT_EQ(reciprocity(5, 5), 0.0);
  EXPECT_EQ(reciprocity(0, 3), 1.0);
  EXPECT_DOUBLE_EQ(reciprocity(1, 3), 0.5);
  EXPECT_EQ(reciprocity(1, 3), reciprocity(3, 1));
  EXPECT_THROW(reciprocity(-1, 2), std::invalid_argument);
}

TEST(Interevent, SentinelAndTransforms) {
  const auto none = interevent_stats({}, 1000);
  EXPECT_DOUBLE_EQ(none[0], std::log1p(1000.0));
  EXPECT_EQ(none[5], 0.0);
  const auto one = interevent_stats({5}, 1000);
  EXPECT_DOUBLE_EQ(one[4], std::log1p(1000.0));
  const auto s = interevent_stats({30, 0, 10}, 1000);  // gaps 10, 20
  EXPECT_DOUBLE_EQ(s[0], std::log1p(15.0));
  EXPECT_DOUBLE_EQ(s[2], std::log1p(5.0));
  EXPECT_DOUBLE_EQ(s[3], std::log1p(10.0));
  EXPECT_DOUBLE_EQ(s[6], signed_log1p(-2.0));
  EXPECT_DOUBLE_EQ(signed_log1p(-2.0), -std::log1p(2.0));
}

TEST(Manifest, CardinalityAndGroups) {
  EXPECT_EQ(feature_manifest().size(), kFeatureCount);
  const auto counts = manifest_group_counts();
  EXPECT_EQ(counts, (std::array<std::size_t, 6>{126, 18, 12, 3, 14, 2}));
  const auto names = feature_names();
  EXPECT_EQ(std::set<std::string>(names.begin(), names.end()).size(), kFeatureCount);
  EXPECT_EQ(names.front(), "weekly_calls_weekday_daytime_mean");
  EXPECT_EQ(names.back(), "common_all");
  EXPECT_EQ(manifest_hash().size(), 64u);
  EXPECT_NE(manifest_markdown().find("common_top5"), std::string::npos);
}

TEST(Assemble, ReciprocityOrientationAndCommon) {
  const std::vector<PairEvent> ev{call(kMonday + 3600, 10, true), call(kMonday + 7200, 30, false),
                                  call(kMonday + 9000, std::nullopt, false)};
  const auto v = assemble_feature_vector(ev, CommonContacts{2, 5}, kWindow);
  EXPECT_EQ(v.size(), kFeatureCount);
  EXPECT_DOUBLE_EQ(v[index_of("recip_calls")], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(v[index_of("recip_duration")], 0.5);
  EXPECT_EQ(v[index_of("recip_texts")], 0.0);
  EXPECT_EQ(v[index_of("common_top5")], 2.0);
  EXPECT_EQ(v[index_of("common_all")], 5.0);
  for (double x : v) EXPECT_TRUE(std::isfinite(x));
}

TEST(Assemble, InvariantToEventOrder) {
  std::mt19937_64 rng(9);
  std::vector<PairEvent> ev;
  for (int i = 0; i < 300; ++i) {
    const std::int64_t ts = kWindow.start() + static_cast<std::int64_t>(rng() % kWindow.length_seconds());
    ev.push_back(rng() % 2 ? call(ts, rng() % 500, rng() % 2) : text(ts, rng() % 2));
  }
  const auto a = assemble_feature_vector(ev, CommonContacts{}, kWindow);
  std::shuffle(ev.begin(), ev.end(), rng);
  EXPECT_EQ(assemble_feature_vector(ev, CommonContacts{}, kWindow), a);
}

TEST(Golden, MatchesIndependentOracle) {
  const ObservationWindow window(civil_to_epoch(2007, 1, 1), civil_to_epoch(2007, 3, 1));
  std::ifstream ein(std::string(CDRLINK_TEST_DATA) + "/golden_events.csv");
  ASSERT_TRUE(ein);
  const auto parsed = parse_events(ein, window);
  ASSERT_TRUE(parsed.diagnostics.empty());
  const LinkGraph graph = build_links(parsed.events, window);

  std::ifstream fin(std::string(CDRLINK_TEST_DATA) + "/golden_features.csv");
  ASSERT_TRUE(fin);
  std::vector<PairKey> keys;
  std::vector<std::vector<double>> expected;
  std::string line;
  while (std::getline(fin, line)) {
    const auto f = csv::split(line);
    ASSERT_EQ(f.size(), kFeatureCount + 2);
    keys.push_back(PairKey::make(f[0], f[1]));
    std::vector<double> row;
    for (std::size_t i = 2; i < f.size(); ++i) row.push_back(*csv::parse_double(f[i]));
    expected.push_back(row);
  }
  ASSERT_EQ(keys.size(), 5u);

  const FeatureTable table = compute_features(parsed.events, keys, graph, window, FeatureConfig{7200});
  const auto names = feature_names();
  for (std::size_t r = 0; r < keys.size(); ++r) {
    EXPECT_EQ(table.keys[r], keys[r]);
    for (std::size_t c = 0; c < kFeatureCount; ++c) {
      const double want = expected[r][c];
      EXPECT_NEAR(table.values(r, c), want, 1e-9 * std::max(1.0, std::abs(want)))
          << keys[r].row_id() << " " << names[c];
    }
  }
}

TEST(Scaler, StandardizesAndRejectsConstants) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(3.0, 2.0);
  FeatureMatrix x(200, 4);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = n(rng) * (j + 1);
  const auto p = fit_scaler(x);
  const FeatureMatrix z = apply_scaler(x, p);
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    EXPECT_NEAR(z.col(j).mean(), 0.0, 1e-12);
    EXPECT_NEAR(std::sqrt((z.col(j).array() - z.col(j).mean()).square().mean()), 1.0, 1e-12);
  }
  x.col(2).setConstant(5.0);
  const std::vector<std::string> names{"a", "b", "c", "d"};
  try {
    fit_scaler(x, names);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("'c'"), std::string::npos);
  }
  FeatureMatrix wrong(2, 3);
  EXPECT_THROW(apply_scaler(wrong, p), std::invalid_argument);
}

TEST(Scaler, JsonRoundTrip) {
  ScalerParams p;
  p.mean = Eigen::VectorXd::LinSpaced(kFeatureCount, -1.0, 1.0);
  p.std = Eigen::VectorXd::Constant(kFeatureCount, 0.1 / 3.0);
  const auto q = scaler_from_json(scaler_to_json(p));
  EXPECT_EQ(q.mean, p.mean);
  EXPECT_EQ(q.std, p.std);
}

TEST(FeatureTable, CsvRoundTripIsExact) {
  FeatureTable t;
  t.keys = {PairKey::make("a", "b"), PairKey::make("c", "d")};
  t.values = FeatureMatrix::Random(2, kFeatureCount) * 1e3;
  std::ostringstream out;
  write_features(out, t);
  std::istringstream in(out.str());
  const auto back = read_features(in);
  EXPECT_EQ(back.keys, t.keys);
  EXPECT_EQ(back.values, t.values);
  std::istringstream bad("first,second,x\n");
  EXPECT_THROW(read_features(bad), IngestError);
}
