#include "cdrlink/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "cdrlink/civil_time.hpp"
#include "cdrlink/csv.hpp"
#include "cdrlink/random.hpp"

namespace cdrlink {

namespace {

constexpr std::int64_t kDay = 86400;
constexpr std::int64_t kHour = 3600;

ArchetypeConfig archetype(std::string code, double percent, SegmentRates calls, SegmentRates texts,
                          double log_mean, double skew) {
  ArchetypeConfig a;
  a.code = std::move(code);
  a.prevalence = percent;
  a.call_rate = calls;
  a.text_rate = texts;
  a.duration_log_mean = log_mean;
  a.duration_log_std = 1.0;
  a.direction_skew = skew;
  const auto parsed = parse_relationship_code(a.code);
  if (!parsed) throw std::invalid_argument(fmt::format("bad archetype code '{}'", a.code));
  switch (parsed->younger_bracket) {
    case AgeBracket::teen: a.younger_age_min = 12; a.younger_age_max = 17; break;
    case AgeBracket::young: a.younger_age_min = 18; a.younger_age_max = 28; break;
    case AgeBracket::middle: a.younger_age_min = 29; a.younger_age_max = 45; break;
    case AgeBracket::late: a.younger_age_min = 46; a.younger_age_max = 55; break;
    case AgeBracket::old: a.younger_age_min = 56; a.younger_age_max = 79; break;
    case AgeBracket::very_old: a.younger_age_min = 80; a.younger_age_max = 90; break;
  }
  switch (parsed->age_gap) {
    case AgeGapCategory::peer:
      a.gap_min = 0;
      a.gap_max = 19;
      a.gender = parsed->gender_composition == GenderComposition::opposite ? GenderRule::opposite : GenderRule::same;
      break;
    case AgeGapCategory::parent_child:
      a.gap_min = 20;
      a.gap_max = 39;
      a.gender = GenderRule::any;
      break;
    case AgeGapCategory::grandparent_child:
      a.gap_min = 40;
      a.gap_max = 60;
      a.gender = GenderRule::any;
      break;
  }
  return a;
}

std::string code_key(std::string_view code) {
  std::string out(code);
  std::replace(out.begin(), out.end(), ' ', '_');
  return out;
}

double parse_number(std::string_view key, std::string_view value) {
  const auto v = csv::parse_double(value);
  if (!v) throw std::invalid_argument(fmt::format("config key '{}': bad number '{}'", key, value));
  return *v;
}

SegmentRates parse_rates(std::string_view key, std::string_view value) {
  const auto parts = csv::split(value, ',');
  if (parts.size() != kSegmentCount) {
    throw std::invalid_argument(fmt::format("config key '{}': expected {} rates", key, kSegmentCount));
  }
  SegmentRates r{};
  for (std::size_t i = 0; i < kSegmentCount; ++i) r[i] = parse_number(key, parts[i]);
  return r;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string rates_text(const SegmentRates& r) {
  std::string out;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (i) out += ',';
    out += csv::format_double(r[i]);
  }
  return out;
}

std::string subscriber_id(std::size_t index) { return fmt::format("s{:06d}", index); }
std::string outsider_id(std::size_t index) { return fmt::format("n{:07d}", index); }

struct DaypartSpan {
  std::int64_t first_hour;
  std::int64_t hours;
};

// Seconds from local midnight for a uniform draw within a daypart.
std::int64_t daypart_offset(DayPart part, Rng& rng) {
  switch (part) {
    case DayPart::daytime: return 7 * kHour + std::uniform_int_distribution<std::int64_t>(0, 10 * kHour - 1)(rng);
    case DayPart::evening: return 17 * kHour + std::uniform_int_distribution<std::int64_t>(0, 6 * kHour - 1)(rng);
    case DayPart::late_night: {
      const auto u = std::uniform_int_distribution<std::int64_t>(0, 8 * kHour - 1)(rng);
      return u < 7 * kHour ? u : 16 * kHour + u;
    }
  }
  return 0;
}

/// Poisson event times for one channel of one link over the window.
template <typename Emit>
void draw_events(const SegmentRates& weekly, double multiplier, const GeneratorConfig& config, Rng& rng, Emit emit) {
  const std::int64_t offset = config.utc_offset;
  const std::int64_t first_day = epoch_day(config.window.start() + offset);
  const std::int64_t last_day = epoch_day(config.window.end() - 1 + offset);
  for (std::int64_t day = first_day; day <= last_day; ++day) {
    const bool weekend = iso_weekday_of_day(day) >= 5;  // Friday to Sunday
    const double days_in_part = weekend ? 3.0 : 4.0;
    for (std::size_t dp = 0; dp < 3; ++dp) {
      const TimeSegment seg{weekend ? WeekPart::weekend : WeekPart::weekday, static_cast<DayPart>(dp)};
      const double mean = weekly[seg.index()] * multiplier / days_in_part;
      if (!(mean > 0.0)) continue;
      const int count = std::poisson_distribution<int>(mean)(rng);
      for (int c = 0; c < count; ++c) {
        const std::int64_t local = day * kDay + daypart_offset(seg.daypart, rng);
        const std::int64_t ts = local - offset;
        if (config.window.contains(ts)) emit(ts);
      }
    }
  }
}

std::int64_t draw_duration(const ArchetypeConfig& a, Rng& rng) {
  const double d = std::lognormal_distribution<double>(a.duration_log_mean, a.duration_log_std)(rng);
  return std::max<std::int64_t>(1, std::llround(d));
}

}  // namespace

// ---------------------------------------------------------------------------

void GeneratorConfig::validate() const {
  if (n_pairs == 0) throw std::invalid_argument("n_pairs must be positive");
  if (archetypes.empty()) throw std::invalid_argument("no archetypes configured");
  if (!(heterogeneity >= 0.0)) throw std::invalid_argument("heterogeneity must be non-negative");
  double total = 0.0;
  for (const auto& a : archetypes) {
    if (!parse_relationship_code(a.code)) throw std::invalid_argument(fmt::format("bad archetype code '{}'", a.code));
    if (!(a.prevalence >= 0.0)) throw std::invalid_argument(fmt::format("{}: negative prevalence", a.code));
    for (std::size_t i = 0; i < kSegmentCount; ++i) {
      if (!(a.call_rate[i] >= 0.0) || !(a.text_rate[i] >= 0.0)) {
        throw std::invalid_argument(fmt::format("{}: rates must be non-negative", a.code));
      }
    }
    if (!(a.direction_skew >= 0.0 && a.direction_skew <= 1.0)) {
      throw std::invalid_argument(fmt::format("{}: direction skew outside [0,1]", a.code));
    }
    if (!(a.duration_log_std >= 0.0)) throw std::invalid_argument(fmt::format("{}: negative duration log-std", a.code));
    if (a.younger_age_min > a.younger_age_max || a.gap_min > a.gap_max || a.gap_min < 0 ||
        a.younger_age_min + a.gap_min > 120) {
      throw std::invalid_argument(fmt::format("{}: empty age range", a.code));
    }
    total += a.prevalence;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument(fmt::format("prevalences sum to {}, not 1", total));
  if (!(background.rate_multiplier >= 0.0)) throw std::invalid_argument("side multiplier must be non-negative");
  if (!(background.shared_fraction >= 0.0 && background.shared_fraction <= 1.0)) {
    throw std::invalid_argument("shared_fraction outside [0,1]");
  }
  if (!(background.unknown_duration_fraction >= 0.0 && background.unknown_duration_fraction <= 1.0)) {
    throw std::invalid_argument("unknown_duration_fraction outside [0,1]");
  }
}

std::vector<ArchetypeConfig> table3_like_archetypes() {
  // Rates per week, segments ordered weekday day/evening/late, weekend day/evening/late.
  std::vector<ArchetypeConfig> out{
      archetype("-Y peers", 13.8, {3, 4, 2.5, 1.5, 2, 1.5}, {2.5, 4, 3.5, 1.2, 2, 1.5}, 4.7, 0.5),
      archetype("+Y peers", 4.3, {2.5, 3.5, 1.8, 1.2, 1.8, 1.2}, {2.5, 3.5, 2.5, 1.2, 1.8, 1.2}, 4.5, 0.5),
      archetype("-M peers", 36.4, {4, 3, 0.8, 1.5, 1.5, 0.4}, {2, 2, 0.6, 0.8, 0.8, 0.3}, 4.9, 0.5),
      archetype("+M peers", 10.6, {3.5, 2.2, 0.5, 1.2, 1.1, 0.25}, {1.8, 1.5, 0.4, 0.7, 0.6, 0.2}, 4.7, 0.5),
      archetype("-L peers", 7.1, {3, 1.6, 0.25, 1, 0.8, 0.1}, {0.6, 0.4, 0.05, 0.2, 0.15, 0.02}, 4.8, 0.5),
      archetype("+L peers", 3.2, {3, 1.4, 0.2, 1, 0.7, 0.1}, {0.6, 0.35, 0.05, 0.2, 0.12, 0.02}, 4.8, 0.5),
      archetype("-O peers", 3.3, {3, 1, 0.1, 1, 0.5, 0.05}, {0.2, 0.1, 0.01, 0.05, 0.03, 0}, 4.8, 0.5),
      archetype("+O peers", 1.8, {3, 0.9, 0.1, 1, 0.45, 0.05}, {0.2, 0.1, 0.01, 0.05, 0.03, 0}, 4.8, 0.5),
      archetype("Y child", 6.3, {2.5, 1.8, 0.3, 1, 1, 0.2}, {0.8, 0.8, 0.2, 0.3, 0.3, 0.1}, 4.4, 0.35),
      archetype("M child", 9.6, {3, 1.2, 0.1, 1.2, 0.6, 0.05}, {0.3, 0.2, 0.02, 0.1, 0.1, 0.01}, 4.4, 0.35),
      archetype("L child", 1.3, {3, 1, 0.05, 1.2, 0.5, 0.03}, {0.1, 0.05, 0, 0.03, 0.02, 0}, 4.4, 0.35),
  };
  const double total = std::accumulate(out.begin(), out.end(), 0.0,
                                       [](double s, const ArchetypeConfig& a) { return s + a.prevalence; });
  for (auto& a : out) a.prevalence /= total;
  return out;
}

GeneratorConfig preset_config(std::string_view preset) {
  if (preset != "table3-like") throw std::invalid_argument(fmt::format("unknown event preset '{}'", preset));
  GeneratorConfig config;
  config.preset = std::string(preset);
  config.archetypes = table3_like_archetypes();
  return config;
}

GeneratorConfig parse_generator_config_text(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) throw std::invalid_argument(fmt::format("config line {}: expected key = value", line_no));
    entries.emplace_back(trim(std::string_view(stripped).substr(0, eq)), trim(std::string_view(stripped).substr(eq + 1)));
  }

  std::string preset = "table3-like";
  for (const auto& [k, v] : entries) {
    if (k == "preset") preset = v;
  }
  GeneratorConfig config = preset_config(preset);
  std::optional<std::int64_t> start, end;
  for (const auto& [key, value] : entries) {
    if (key == "preset") continue;
    if (key == "n_pairs") {
      const auto v = csv::parse_int(value);
      if (!v || *v <= 0) throw std::invalid_argument("n_pairs must be a positive integer");
      config.n_pairs = static_cast<std::size_t>(*v);
    } else if (key == "seed") {
      const auto v = csv::parse_int(value);
      if (!v || *v < 0) throw std::invalid_argument("seed must be a non-negative integer");
      config.seed = static_cast<std::uint64_t>(*v);
    } else if (key == "window_start") {
      start = parse_time_point(value);
    } else if (key == "window_end") {
      end = parse_time_point(value);
    } else if (key == "utc_offset") {
      const auto v = csv::parse_int(value);
      if (!v) throw std::invalid_argument("utc_offset must be an integer number of seconds");
      config.utc_offset = *v;
    } else if (key == "heterogeneity") {
      config.heterogeneity = parse_number(key, value);
    } else if (key == "side_links") {
      const auto v = csv::parse_int(value);
      if (!v || *v < 0) throw std::invalid_argument("side_links must be a non-negative integer");
      config.background.side_links_per_user = static_cast<std::size_t>(*v);
    } else if (key == "side_multiplier") {
      config.background.rate_multiplier = parse_number(key, value);
    } else if (key == "shared_fraction") {
      config.background.shared_fraction = parse_number(key, value);
    } else if (key == "unknown_duration_fraction") {
      config.background.unknown_duration_fraction = parse_number(key, value);
    } else if (key.rfind("archetype.", 0) == 0) {
      const auto dot = key.rfind('.');
      const std::string code = key.substr(10, dot - 10);
      const std::string field = key.substr(dot + 1);
      auto it = std::find_if(config.archetypes.begin(), config.archetypes.end(),
                             [&](const ArchetypeConfig& a) { return code_key(a.code) == code; });
      if (it == config.archetypes.end()) {
        std::string real = code;
        std::replace(real.begin(), real.end(), '_', ' ');
        config.archetypes.push_back(archetype(real, 0.0, {}, {}, 4.5, 0.5));
        it = config.archetypes.end() - 1;
      }
      if (field == "prevalence") it->prevalence = parse_number(key, value);
      else if (field == "call_rate") it->call_rate = parse_rates(key, value);
      else if (field == "text_rate") it->text_rate = parse_rates(key, value);
      else if (field == "duration_log_mean") it->duration_log_mean = parse_number(key, value);
      else if (field == "duration_log_std") it->duration_log_std = parse_number(key, value);
      else if (field == "direction_skew") it->direction_skew = parse_number(key, value);
      else throw std::invalid_argument(fmt::format("unknown config key '{}'", key));
    } else {
      throw std::invalid_argument(fmt::format("unknown config key '{}'", key));
    }
  }
  if (start || end) config.window = ObservationWindow(start.value_or(config.window.start()), end.value_or(config.window.end()));
  config.validate();
  return config;
}

GeneratorConfig parse_generator_config(std::istream& in) {
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_generator_config_text(buffer.str());
}

std::string generator_config_text(const GeneratorConfig& config) {
  std::ostringstream out;
  out << "preset = " << config.preset << '\n'
      << "n_pairs = " << config.n_pairs << '\n'
      << "seed = " << config.seed << '\n'
      << "window_start = " << format_utc(config.window.start()) << '\n'
      << "window_end = " << format_utc(config.window.end()) << '\n'
      << "utc_offset = " << config.utc_offset << '\n'
      << "heterogeneity = " << csv::format_double(config.heterogeneity) << '\n'
      << "side_links = " << config.background.side_links_per_user << '\n'
      << "side_multiplier = " << csv::format_double(config.background.rate_multiplier) << '\n'
      << "shared_fraction = " << csv::format_double(config.background.shared_fraction) << '\n'
      << "unknown_duration_fraction = " << csv::format_double(config.background.unknown_duration_fraction) << '\n';
  for (const auto& a : config.archetypes) {
    const std::string p = "archetype." + code_key(a.code) + ".";
    out << p << "prevalence = " << csv::format_double(a.prevalence) << '\n'
        << p << "call_rate = " << rates_text(a.call_rate) << '\n'
        << p << "text_rate = " << rates_text(a.text_rate) << '\n'
        << p << "duration_log_mean = " << csv::format_double(a.duration_log_mean) << '\n'
        << p << "duration_log_std = " << csv::format_double(a.duration_log_std) << '\n'
        << p << "direction_skew = " << csv::format_double(a.direction_skew) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> archetype_counts(const std::vector<ArchetypeConfig>& archetypes, std::size_t n_pairs) {
  std::vector<std::size_t> counts(archetypes.size(), 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < archetypes.size(); ++i) {
    const double exact = archetypes[i].prevalence * static_cast<double>(n_pairs);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < n_pairs && r < remainders.size(); ++r, ++assigned) ++counts[remainders[r].second];
  for (std::size_t i = 0; i < archetypes.size(); ++i) {
    if (archetypes[i].prevalence > 0.0 && counts[i] == 0) {
      throw std::invalid_argument(fmt::format("infeasible prevalence rounding: archetype '{}' gets no pairs with n_pairs = {}",
                                              archetypes[i].code, n_pairs));
    }
  }
  return counts;
}

SyntheticDataset generate(const GeneratorConfig& config) {
  config.validate();
  const auto counts = archetype_counts(config.archetypes, config.n_pairs);
  std::vector<std::size_t> assignment;
  for (std::size_t a = 0; a < counts.size(); ++a) assignment.insert(assignment.end(), counts[a], a);
  Rng shuffle_rng(derive_seed(config.seed, 1));
  std::shuffle(assignment.begin(), assignment.end(), shuffle_rng);

  const auto& bg = config.background;
  SyntheticDataset data;
  for (std::size_t p = 0; p < config.n_pairs; ++p) {
    const ArchetypeConfig& arch = config.archetypes[assignment[p]];
    Rng rng(derive_seed(config.seed, 0x10000 + p));

    // Ages and genders.
    const int younger_age = std::uniform_int_distribution<int>(arch.younger_age_min, arch.younger_age_max)(rng);
    const int gap_cap = std::min(arch.gap_max, 120 - younger_age);
    const int gap = std::uniform_int_distribution<int>(arch.gap_min, std::max(arch.gap_min, gap_cap))(rng);
    const Gender younger_gender = std::bernoulli_distribution(0.5)(rng) ? Gender::male : Gender::female;
    Gender older_gender = younger_gender;
    switch (arch.gender) {
      case GenderRule::opposite:
        older_gender = younger_gender == Gender::male ? Gender::female : Gender::male;
        break;
      case GenderRule::same: break;
      case GenderRule::any: older_gender = std::bernoulli_distribution(0.5)(rng) ? Gender::male : Gender::female; break;
    }
    const bool younger_is_even = std::bernoulli_distribution(0.5)(rng);
    const std::string younger = subscriber_id(2 * p + (younger_is_even ? 0 : 1));
    const std::string older = subscriber_id(2 * p + (younger_is_even ? 1 : 0));
    data.subscribers.emplace(younger, SubscriberRecord{younger, younger_age, younger_gender, std::nullopt});
    data.subscribers.emplace(older, SubscriberRecord{older, younger_age + gap, older_gender, std::nullopt});

    const PairKey key = PairKey::make(younger, older);
    const bool younger_first = key.first == younger;
    TruthRow truth;
    truth.key = key;
    truth.archetype_code = arch.code;
    truth.age_first = younger_first ? younger_age : younger_age + gap;
    truth.gender_first = younger_first ? younger_gender : older_gender;
    truth.age_second = younger_first ? younger_age + gap : younger_age;
    truth.gender_second = younger_first ? older_gender : younger_gender;
    data.truth.push_back(truth);

    double call_mult = 1.0, text_mult = 1.0;
    if (config.heterogeneity > 0.0) {
      std::normal_distribution<double> normal(0.0, config.heterogeneity);
      call_mult = std::exp(normal(rng));
      text_mult = std::exp(normal(rng));
    }

    // Planted pair.
    std::bernoulli_distribution younger_starts(arch.direction_skew);
    draw_events(arch.call_rate, call_mult, config, rng, [&](std::int64_t ts) {
      const bool y = younger_starts(rng);
      data.events.push_back({y ? younger : older, y ? older : younger, ts, EventKind::call, draw_duration(arch, rng)});
    });
    draw_events(arch.text_rate, text_mult, config, rng, [&](std::int64_t ts) {
      const bool y = younger_starts(rng);
      data.events.push_back({y ? younger : older, y ? older : younger, ts, EventKind::text, std::int64_t{0}});
    });

    // Side links to non-subscribers; ids are allocated per pair block.
    if (bg.side_links_per_user == 0 || bg.rate_multiplier == 0.0) continue;
    std::vector<std::string> younger_contacts;
    std::size_t next_outsider = p * 2 * bg.side_links_per_user;
    std::bernoulli_distribution coin(0.5);
    std::bernoulli_distribution shared(bg.shared_fraction);
    std::bernoulli_distribution unknown(bg.unknown_duration_fraction);
    for (int member = 0; member < 2; ++member) {
      const std::string& user = member == 0 ? younger : older;
      for (std::size_t s = 0; s < bg.side_links_per_user; ++s) {
        std::string contact;
        if (member == 1 && !younger_contacts.empty() && shared(rng)) {
          contact = younger_contacts[std::uniform_int_distribution<std::size_t>(0, younger_contacts.size() - 1)(rng)];
        } else {
          contact = outsider_id(next_outsider++);
          if (member == 0) younger_contacts.push_back(contact);
        }
        draw_events(arch.call_rate, call_mult * bg.rate_multiplier, config, rng, [&](std::int64_t ts) {
          const bool outgoing = coin(rng);
          std::optional<std::int64_t> duration = draw_duration(arch, rng);
          if (!outgoing && unknown(rng)) duration.reset();
          data.events.push_back({outgoing ? user : contact, outgoing ? contact : user, ts, EventKind::call, duration});
        });
        draw_events(arch.text_rate, text_mult * bg.rate_multiplier, config, rng, [&](std::int64_t ts) {
          const bool outgoing = coin(rng);
          data.events.push_back({outgoing ? user : contact, outgoing ? contact : user, ts, EventKind::text,
                                 std::int64_t{0}});
        });
      }
    }
  }

  std::sort(data.events.begin(), data.events.end(), [](const CdrEvent& a, const CdrEvent& b) {
    return std::tie(a.timestamp, a.caller_id, a.callee_id, a.kind, a.duration) <
           std::tie(b.timestamp, b.caller_id, b.callee_id, b.kind, b.duration);
  });
  std::sort(data.truth.begin(), data.truth.end(), [](const TruthRow& a, const TruthRow& b) { return a.key < b.key; });
  return data;
}

void write_truth(std::ostream& out, std::span<const TruthRow> truth) {
  out << kTruthHeader << '\n';
  for (const auto& t : truth) {
    out << t.key.first << ',' << t.key.second << ',' << t.archetype_code << ',' << t.age_first << ','
        << to_string(t.gender_first) << ',' << t.age_second << ',' << to_string(t.gender_second) << '\n';
  }
}

std::vector<TruthRow> read_truth(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || csv::clean_line(line) != kTruthHeader) throw IngestError("truth.csv: bad header");
  auto gender = [](std::string_view g) {
    if (g == "F") return Gender::female;
    if (g == "M") return Gender::male;
    throw IngestError(fmt::format("truth.csv: bad gender '{}'", g));
  };
  std::vector<TruthRow> out;
  while (std::getline(in, line)) {
    const std::string cleaned(csv::clean_line(line));
    if (cleaned.empty()) continue;
    const auto f = csv::split(cleaned, ',');
    if (f.size() != 7) throw IngestError("truth.csv: expected 7 fields");
    const auto a1 = csv::parse_int(f[3]);
    const auto a2 = csv::parse_int(f[5]);
    if (!a1 || !a2) throw IngestError("truth.csv: bad age");
    out.push_back({PairKey::make(f[0], f[1]), std::string(f[2]), static_cast<int>(*a1), gender(f[4]),
                   static_cast<int>(*a2), gender(f[6])});
  }
  return out;
}

PlantedRecovery verify_planted(std::span<const CdrEvent> events, std::span<const TruthRow> truth,
                               const ObservationWindow& window, std::size_t min_months) {
  const LinkGraph graph = build_links(events, window);
  const LinkGraph filtered = apply_regularity_filter(graph, window, min_months);
  const auto pairs = mutual_top_rank_pairs(filtered);
  PlantedRecovery report;
  report.n_planted = truth.size();
  for (const auto& t : truth) {
    if (std::binary_search(pairs.begin(), pairs.end(), t.key)) {
      ++report.n_recovered;
    } else {
      report.missing.push_back(t.key);
    }
  }
  report.fraction = truth.empty() ? 1.0 : static_cast<double>(report.n_recovered) / static_cast<double>(truth.size());
  report.passed = report.fraction >= 0.99;
  return report;
}

}  // namespace cdrlink
