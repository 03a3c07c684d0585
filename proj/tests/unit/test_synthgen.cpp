#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "cdrlink/civil_time.hpp"
#include "cdrlink/synthgen.hpp"

using namespace cdrlink;

namespace {

GeneratorConfig small_config(std::size_t n_pairs, std::uint64_t seed) {
  auto c = preset_config("table3-like");
  c.n_pairs = n_pairs;
  c.seed = seed;
  return c;
}

const SyntheticDataset& shared_dataset() {
  static const SyntheticDataset data = generate(small_config(150, 21));
  return data;
}

}  // namespace

TEST(Archetypes, CountsByLargestRemainder) {
  const auto a = table3_like_archetypes();
  double total = 0;
  for (const auto& x : a) total += x.prevalence;
  EXPECT_NEAR(total, 1.0, 1e-12);
  for (std::size_t n : {100u, 777u, 10000u}) {
    const auto counts = archetype_counts(a, n);
    EXPECT_EQ(std::accumulate(counts.begin(), counts.end(), std::size_t{0}), n);
    for (std::size_t i = 0; i < a.size(); ++i)
      EXPECT_LE(std::abs(static_cast<double>(counts[i]) - a[i].prevalence * static_cast<double>(n)), 1.0);
  }
  EXPECT_THROW(archetype_counts(a, 3), std::invalid_argument);
}

TEST(Config, ValidateRejectsBadValues) {
  auto c = small_config(10, 1);
  EXPECT_NO_THROW(c.validate());
  auto bad = c;
  bad.archetypes[0].prevalence += 0.1;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = c;
  bad.archetypes[0].direction_skew = 1.5;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = c;
  bad.archetypes[0].code = "nonsense";
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = c;
  bad.n_pairs = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  EXPECT_THROW(preset_config("nope"), std::invalid_argument);
}

TEST(Config, TextRoundTrip) {
  auto c = small_config(123, 99);
  c.utc_offset = 3600;
  c.heterogeneity = 0.25;
  c.archetypes[1].duration_log_mean = 5.25;
  const auto text = generator_config_text(c);
  const auto back = parse_generator_config_text(text);
  EXPECT_EQ(back.n_pairs, 123u);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.utc_offset, 3600);
  EXPECT_EQ(back.archetypes[1].duration_log_mean, 5.25);
  EXPECT_EQ(generator_config_text(back), text);
  EXPECT_THROW(parse_generator_config_text("bogus = 1\n"), std::invalid_argument);
  EXPECT_THROW(parse_generator_config_text("n_pairs = -3\n"), std::invalid_argument);
  const auto overridden = parse_generator_config_text("# comment\nn_pairs = 40\narchetype.-Y_peers.call_rate = 1,1,1,1,1,1\n");
  EXPECT_EQ(overridden.n_pairs, 40u);
  EXPECT_EQ(overridden.archetypes[0].call_rate[5], 1.0);
}

TEST(Generate, DeterministicInSeed) {
  const auto& a = shared_dataset();
  const auto b = generate(small_config(150, 21));
  EXPECT_EQ(a.events, b.events);
  EXPECT_EQ(a.truth, b.truth);
  const auto c = generate(small_config(150, 22));
  EXPECT_NE(a.events, c.events);
}

TEST(Generate, TruthMatchesSubscriberLabels) {
  const auto& d = shared_dataset();
  EXPECT_EQ(d.truth.size(), 150u);
  const auto counts = archetype_counts(table3_like_archetypes(), 150);
  std::map<std::string, std::size_t> seen;
  for (const auto& t : d.truth) {
    ++seen[t.archetype_code];
    const auto label = label_relationship(d.subscribers, t.key);
    EXPECT_EQ(label.code, t.archetype_code) << t.key.row_id();
    EXPECT_EQ(d.subscribers.at(t.key.first).age, t.age_first);
    EXPECT_EQ(d.subscribers.at(t.key.second).gender, t.gender_second);
  }
  const auto arch = table3_like_archetypes();
  for (std::size_t i = 0; i < arch.size(); ++i) EXPECT_EQ(seen[arch[i].code], counts[i]) << arch[i].code;
}

TEST(Generate, EventsWellFormed) {
  const auto& d = shared_dataset();
  const auto window = ObservationWindow::default_window();
  EXPECT_TRUE(std::is_sorted(d.events.begin(), d.events.end(), [](const CdrEvent& a, const CdrEvent& b) {
    return a.timestamp < b.timestamp;
  }));
  std::size_t unknown = 0;
  for (const auto& e : d.events) {
    ASSERT_TRUE(window.contains(e.timestamp));
    ASSERT_NE(e.caller_id, e.callee_id);
    if (e.kind == EventKind::text) {
      EXPECT_EQ(e.duration, 0);
    } else if (!e.duration) {
      ++unknown;
      EXPECT_FALSE(d.subscribers.contains(e.caller_id)) << "unknown duration on a subscriber's call";
    } else {
      EXPECT_GE(*e.duration, 1);
    }
  }
  EXPECT_GT(unknown, 0u);
}

TEST(Generate, WeekendTrafficSpansFridayToSunday) {
  const auto& d = shared_dataset();
  std::array<std::size_t, 8> per_weekday{};
  for (const auto& e : d.events) ++per_weekday[iso_weekday_of_day(epoch_day(e.timestamp))];
  for (unsigned w = 1; w <= 7; ++w) EXPECT_GT(per_weekday[w], 0u) << w;
}

TEST(Generate, PlantedPairsRecovered) {
  const auto& d = shared_dataset();
  const auto r = verify_planted(d.events, d.truth, ObservationWindow::default_window());
  EXPECT_EQ(r.n_planted, 150u);
  EXPECT_TRUE(r.passed) << r.fraction;
  EXPECT_GE(r.fraction, 0.99);
}

TEST(Truth, CsvRoundTrip) {
  const auto& d = shared_dataset();
  std::ostringstream out;
  write_truth(out, d.truth);
  std::istringstream in(out.str());
  EXPECT_EQ(read_truth(in), d.truth);
  std::istringstream bad("a,b\n");
  EXPECT_THROW(read_truth(bad), IngestError);
}

TEST(PlantedFactors, MembershipAndShape) {
  EXPECT_EQ(planted_factor_of("weekly_calls_weekday_daytime_mean"), 0);
  EXPECT_EQ(planted_factor_of("weekly_duration_weekend_evening_max"), 1);
  EXPECT_EQ(planted_factor_of("frac_weekday_calls_latenight"), 2);
  EXPECT_EQ(planted_factor_of("days_texts_weekend_daytime"), 3);
  EXPECT_EQ(planted_factor_of("iet_calls_mean"), 4);
  EXPECT_EQ(planted_factor_of("common_all"), -1);
  EXPECT_EQ(planted_factor_names().size(), kPlantedFactorCount);

  const auto data = generate_planted_factors({400, 2});
  EXPECT_EQ(data.table.values.rows(), 400);
  EXPECT_EQ(data.table.values.cols(), static_cast<Eigen::Index>(kFeatureCount));
  EXPECT_EQ(data.membership.size(), kFeatureCount);
  std::array<int, kPlantedFactorCount> per{};
  for (int m : data.membership)
    if (m >= 0) ++per[static_cast<std::size_t>(m)];
  for (int c : per) EXPECT_GT(c, 0);
  EXPECT_EQ(generate_planted_factors({400, 2}).table.values, data.table.values);
}

TEST(PlantedFactors, RecoveryScore) {
  const std::vector<int> truth{0, 0, 1, 1, -1};
  EXPECT_DOUBLE_EQ(planted_recovery(truth, std::vector<int>{1, 1, 0, 0, 1}), 1.0);
  EXPECT_DOUBLE_EQ(planted_recovery(truth, std::vector<int>{1, 1, 0, -1, -1}), 0.75);
}
