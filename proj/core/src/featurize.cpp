#include "cdrlink/featurize.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <tuple>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cdrlink/civil_time.hpp"
#include "cdrlink/csv.hpp"
#include "cdrlink/parallel.hpp"

namespace cdrlink {

namespace {

constexpr std::int64_t kSecondsPerDay = 86400;

DayPart daypart_of_hour(int hour) {
  if (hour >= 7 && hour <= 16) return DayPart::daytime;
  if (hour >= 17 && hour <= 22) return DayPart::evening;
  return DayPart::late_night;
}

WeekPart weekpart_of_day(std::int64_t local_day) {
  return iso_weekday_of_day(local_day) <= 4 ? WeekPart::weekday : WeekPart::weekend;
}

void add_event(SegmentCell& cell, const PairEvent& e) {
  if (e.kind == EventKind::call) {
    cell.n_calls += 1.0;
    if (e.duration) cell.duration += static_cast<double>(*e.duration);
  } else {
    cell.n_texts += 1.0;
  }
}

/// Mean/median/std/min/max as log1p, skewness/kurtosis untouched.
void append_weekly_stats(std::vector<double>& out, const DistStats& s) {
  out.push_back(std::log1p(s.mean));
  out.push_back(std::log1p(s.median));
  out.push_back(std::log1p(s.std));
  out.push_back(std::log1p(s.min));
  out.push_back(std::log1p(s.max));
  out.push_back(s.skewness);
  out.push_back(s.kurtosis);
}

}  // namespace

TimeSegment TimeSegment::from_index(std::size_t index) {
  if (index >= kSegmentCount) throw std::out_of_range("segment index");
  return {static_cast<WeekPart>(index / 3), static_cast<DayPart>(index % 3)};
}

TimeSegment segment_of(std::int64_t timestamp, std::int64_t utc_offset) {
  const std::int64_t local = timestamp + utc_offset;
  return {weekpart_of_day(epoch_day(local)), daypart_of_hour(hour_of_day(local))};
}

std::map<PairKey, std::vector<PairEvent>> group_pair_events(std::span<const CdrEvent> events,
                                                            std::span<const PairKey> pairs) {
  std::map<PairKey, std::vector<PairEvent>> grouped;
  std::unordered_map<std::string, std::vector<PairEvent>*> index;
  for (const PairKey& key : pairs) {
    auto& slot = grouped[key];
    index.emplace(key.first + '\x1f' + key.second, &slot);
  }
  std::string lookup;
  for (const CdrEvent& e : events) {
    const bool caller_first = e.caller_id < e.callee_id;
    const std::string& first = caller_first ? e.caller_id : e.callee_id;
    const std::string& second = caller_first ? e.callee_id : e.caller_id;
    lookup.assign(first).append(1, '\x1f').append(second);
    const auto it = index.find(lookup);
    if (it == index.end()) continue;
    it->second->push_back(PairEvent{e.timestamp, e.kind, e.duration, caller_first});
  }
  return grouped;
}

double SegmentCell::get(Quantity q) const {
  switch (q) {
    case Quantity::calls: return n_calls;
    case Quantity::duration: return duration;
    case Quantity::texts: return n_texts;
  }
  return 0.0;
}

std::vector<double> WeeklySeries::series(Quantity q, std::size_t segment) const {
  std::vector<double> out;
  out.reserve(weeks.size());
  for (const auto& week : weeks) out.push_back(week.at(segment).get(q));
  return out;
}

WeeklySeries weekly_series(std::span<const PairEvent> events, const ObservationWindow& window,
                           std::int64_t utc_offset) {
  const std::int64_t local_start = window.start() + utc_offset;
  const std::int64_t local_end = window.end() + utc_offset;

  // First local midnight at or after the window start, then the next Monday.
  std::int64_t first_day = epoch_day(local_start);
  if (first_day * kSecondsPerDay < local_start) ++first_day;
  while (iso_weekday_of_day(first_day) != 1) ++first_day;

  WeeklySeries ws;
  for (std::int64_t day = first_day; (day + 7) * kSecondsPerDay <= local_end; day += 7) {
    ws.week_starts.push_back(day * kSecondsPerDay - utc_offset);
  }
  if (ws.week_starts.empty()) {
    throw std::invalid_argument("observation window contains no full Monday-aligned week");
  }
  ws.weeks.assign(ws.week_starts.size(), {});

  for (const PairEvent& e : events) {
    const std::int64_t local_day = epoch_day(e.timestamp + utc_offset);
    if (local_day < first_day) continue;
    const auto week = static_cast<std::size_t>((local_day - first_day) / 7);
    if (week >= ws.weeks.size()) continue;
    add_event(ws.weeks[week][segment_of(e.timestamp, utc_offset).index()], e);
  }
  return ws;
}

DistStats dist_stats(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("dist_stats of an empty series");

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double count = static_cast<double>(n);

  DistStats s;
  s.min = sorted.front();
  s.max = sorted.back();
  s.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / count;
  if (s.min == s.max) {
    s.mean = s.min;
    return s;  // std, skewness and kurtosis stay 0
  }

  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - s.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= count;
  m3 /= count;
  m4 /= count;
  s.std = std::sqrt(m2);
  if (m2 > 0.0) {
    s.skewness = m3 / (m2 * s.std);
    s.kurtosis = m4 / (m2 * m2) - 3.0;
  }
  return s;
}

SegmentTotals segment_totals(std::span<const PairEvent> events, std::int64_t utc_offset) {
  SegmentTotals totals{};
  for (const PairEvent& e : events) add_event(totals[segment_of(e.timestamp, utc_offset).index()], e);
  return totals;
}

std::array<double, 18> fraction_features(const SegmentTotals& totals) {
  std::array<double, 18> out{};
  std::size_t k = 0;
  for (std::size_t wp = 0; wp < 2; ++wp) {
    for (Quantity q : {Quantity::calls, Quantity::duration, Quantity::texts}) {
      double sum = 0.0;
      for (std::size_t dp = 0; dp < 3; ++dp) sum += totals[wp * 3 + dp].get(q);
      for (std::size_t dp = 0; dp < 3; ++dp) {
        double fraction = sum > 0.0 ? totals[wp * 3 + dp].get(q) / sum : 0.0;
        const bool late_night = dp == static_cast<std::size_t>(DayPart::late_night);
        if (late_night && q != Quantity::texts) fraction = std::log1p(fraction);
        out[k++] = fraction;
      }
    }
  }
  return out;
}

std::array<double, 12> active_days_features(std::span<const PairEvent> events, std::int64_t utc_offset) {
  std::array<std::set<std::int64_t>, 12> days;
  for (const PairEvent& e : events) {
    const std::size_t channel = e.kind == EventKind::call ? 0 : 1;
    days[channel * kSegmentCount + segment_of(e.timestamp, utc_offset).index()].insert(
        epoch_day(e.timestamp + utc_offset));
  }
  std::array<double, 12> out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log1p(static_cast<double>(days[i].size()));
  return out;
}

double reciprocity(double in_qty, double out_qty) {
  if (in_qty < 0.0 || out_qty < 0.0) throw std::invalid_argument("reciprocity of a negative quantity");
  const double total = in_qty + out_qty;
  return total > 0.0 ? std::abs(in_qty - out_qty) / total : 0.0;
}

double signed_log1p(double x) { return std::copysign(std::log1p(std::abs(x)), x); }

std::array<double, 7> interevent_stats(std::vector<std::int64_t> timestamps, std::int64_t window_seconds) {
  if (timestamps.size() < 2) {
    const double sentinel = std::log1p(static_cast<double>(window_seconds));
    return {sentinel, sentinel, sentinel, sentinel, sentinel, 0.0, 0.0};
  }
  std::sort(timestamps.begin(), timestamps.end());
  std::vector<double> gaps;
  gaps.reserve(timestamps.size() - 1);
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    gaps.push_back(static_cast<double>(timestamps[i] - timestamps[i - 1]));
  }
  const DistStats s = dist_stats(gaps);
  return {std::log1p(s.mean), std::log1p(s.median), std::log1p(s.std), std::log1p(s.min),
          std::log1p(s.max),  signed_log1p(s.skewness), signed_log1p(s.kurtosis)};
}

FeatureVector assemble_feature_vector(std::span<const PairEvent> events, const CommonContacts& common,
                                      const ObservationWindow& window, const FeatureConfig& config) {
  std::vector<double> out;
  out.reserve(kFeatureCount);

  // Sorting makes every downstream sum independent of input order.
  std::vector<PairEvent> sorted(events.begin(), events.end());
  std::sort(sorted.begin(), sorted.end(), [](const PairEvent& a, const PairEvent& b) {
    return std::tie(a.timestamp, a.kind, a.from_first, a.duration) <
           std::tie(b.timestamp, b.kind, b.from_first, b.duration);
  });

  const WeeklySeries weekly = weekly_series(sorted, window, config.utc_offset);
  for (Quantity q : {Quantity::calls, Quantity::duration, Quantity::texts}) {
    for (std::size_t seg = 0; seg < kSegmentCount; ++seg) {
      append_weekly_stats(out, dist_stats(weekly.series(q, seg)));
    }
  }

  for (double v : fraction_features(segment_totals(sorted, config.utc_offset))) out.push_back(v);
  for (double v : active_days_features(sorted, config.utc_offset)) out.push_back(v);

  double calls_first = 0, calls_second = 0, dur_first = 0, dur_second = 0, texts_first = 0, texts_second = 0;
  std::vector<std::int64_t> call_times, text_times;
  for (const PairEvent& e : sorted) {
    if (e.kind == EventKind::call) {
      call_times.push_back(e.timestamp);
      (e.from_first ? calls_first : calls_second) += 1.0;
      if (e.duration) (e.from_first ? dur_first : dur_second) += static_cast<double>(*e.duration);
    } else {
      text_times.push_back(e.timestamp);
      (e.from_first ? texts_first : texts_second) += 1.0;
    }
  }
  out.push_back(reciprocity(calls_second, calls_first));
  out.push_back(reciprocity(dur_second, dur_first));
  out.push_back(reciprocity(texts_second, texts_first));

  for (double v : interevent_stats(std::move(call_times), window.length_seconds())) out.push_back(v);
  for (double v : interevent_stats(std::move(text_times), window.length_seconds())) out.push_back(v);

  out.push_back(static_cast<double>(common.top5_common));
  out.push_back(static_cast<double>(common.all_common));

  if (out.size() != kFeatureCount) {
    throw std::logic_error(fmt::format("feature vector has {} values, expected {}", out.size(), kFeatureCount));
  }
  FeatureVector vec{};
  std::copy(out.begin(), out.end(), vec.begin());
  return vec;
}

FeatureVector assemble_feature_vector(std::span<const PairEvent> events, const LinkGraph& graph,
                                      const PairKey& pair, const ObservationWindow& window,
                                      const FeatureConfig& config) {
  return assemble_feature_vector(events, common_contacts(graph, pair), window, config);
}

// ---------------------------------------------------------------------------

void write_features(std::ostream& out, const FeatureTable& table) {
  if (static_cast<std::size_t>(table.values.rows()) != table.keys.size() ||
      table.values.cols() != static_cast<Eigen::Index>(kFeatureCount)) {
    throw std::invalid_argument("feature table shape does not match its keys/manifest");
  }
  out << "first,second";
  for (const FeatureSpec& spec : feature_manifest()) out << ',' << spec.name;
  out << '\n';
  for (std::size_t r = 0; r < table.keys.size(); ++r) {
    out << table.keys[r].first << ',' << table.keys[r].second;
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
      out << ',' << csv::format_double(table.values(static_cast<Eigen::Index>(r), c));
    }
    out << '\n';
  }
}

FeatureTable read_features(std::istream& in) {
  std::string raw;
  if (!in || !std::getline(in, raw)) throw IngestError("features: missing header");
  {
    const auto header = csv::split(csv::clean_line(raw));
    const auto& manifest = feature_manifest();
    bool ok = header.size() == manifest.size() + 2 && header[0] == "first" && header[1] == "second";
    for (std::size_t i = 0; ok && i < manifest.size(); ++i) ok = header[i + 2] == manifest[i].name;
    if (!ok) throw IngestError("features: header does not match the feature manifest");
  }

  FeatureTable table;
  std::vector<double> flat;
  std::size_t line_no = 1;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = csv::clean_line(raw);
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != kFeatureCount + 2) {
      throw IngestError(fmt::format("features: line {}: expected {} fields", line_no, kFeatureCount + 2));
    }
    table.keys.push_back(PairKey{std::string(f[0]), std::string(f[1])});
    for (std::size_t i = 2; i < f.size(); ++i) {
      const auto v = csv::parse_double(f[i]);
      if (!v) throw IngestError(fmt::format("features: line {}: bad value in column {}", line_no, i + 1));
      flat.push_back(*v);
    }
  }
  table.values = Eigen::Map<FeatureMatrix>(flat.data(), static_cast<Eigen::Index>(table.keys.size()),
                                           static_cast<Eigen::Index>(kFeatureCount));
  return table;
}

ScalerParams fit_scaler(const FeatureMatrix& x, std::span<const std::string> names) {
  if (x.rows() < 1) throw std::invalid_argument("cannot fit a scaler on zero rows");
  ScalerParams p;
  p.mean = x.colwise().mean().transpose();
  p.std.resize(x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double var = (x.col(c).array() - p.mean(c)).square().mean();
    p.std(c) = std::sqrt(var);
    if (!(p.std(c) > 1e-12 * std::max(1.0, std::abs(p.mean(c))))) {
      const std::string name = static_cast<std::size_t>(c) < names.size()
                                   ? names[static_cast<std::size_t>(c)]
                                   : fmt::format("column {}", c);
      throw std::invalid_argument(fmt::format("constant feature '{}' cannot be standardized", name));
    }
  }
  return p;
}

FeatureMatrix apply_scaler(const FeatureMatrix& x, const ScalerParams& params) {
  if (x.cols() != params.mean.size()) throw std::invalid_argument("scaler dimension mismatch");
  FeatureMatrix out = x;
  out.rowwise() -= params.mean.transpose();
  out.array().rowwise() /= params.std.transpose().array();
  return out;
}

std::string scaler_to_json(const ScalerParams& params) {
  nlohmann::json j;
  j["mean"] = std::vector<double>(params.mean.data(), params.mean.data() + params.mean.size());
  j["std"] = std::vector<double>(params.std.data(), params.std.data() + params.std.size());
  j["manifest_hash"] = manifest_hash();
  return j.dump(2);
}

ScalerParams scaler_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto std = j.at("std").get<std::vector<double>>();
  if (mean.size() != std.size()) throw std::invalid_argument("scaler.json: mean/std length mismatch");
  if (mean.size() == kFeatureCount && j.value("manifest_hash", "") != manifest_hash()) {
    throw std::invalid_argument("scaler.json: manifest hash mismatch");
  }
  ScalerParams p;
  p.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  p.std = Eigen::Map<const Eigen::VectorXd>(std.data(), static_cast<Eigen::Index>(std.size()));
  return p;
}

FeatureTable compute_features(std::span<const CdrEvent> events, std::span<const PairKey> pairs,
                              const LinkGraph& graph, const ObservationWindow& window, const FeatureConfig& config,
                              std::size_t jobs) {
  const auto grouped = group_pair_events(events, pairs);
  FeatureTable table;
  table.keys.assign(pairs.begin(), pairs.end());
  table.values.resize(static_cast<Eigen::Index>(pairs.size()), static_cast<Eigen::Index>(kFeatureCount));
  parallel_for(pairs.size(), jobs, [&](std::size_t i) {
    const auto it = grouped.find(pairs[i]);
    const std::span<const PairEvent> pair_events =
        it == grouped.end() ? std::span<const PairEvent>{} : std::span<const PairEvent>(it->second);
    const FeatureVector v = assemble_feature_vector(pair_events, graph, pairs[i], window, config);
    for (std::size_t j = 0; j < kFeatureCount; ++j) table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
  });
  return table;
}

}  // namespace cdrlink
