#include <fmt/format.h>

#include "cdrlink/featurize.hpp"
#include "cdrlink/hashing.hpp"

namespace cdrlink {

namespace {

constexpr const char* kQuantityTag[] = {"calls", "duration", "texts"};
constexpr const char* kQuantityText[] = {"number of calls", "call duration (s)", "number of texts"};
constexpr const char* kWeekpartTag[] = {"weekday", "weekend"};
constexpr const char* kWeekpartText[] = {"weekdays (Mon-Thu)", "weekends (Fri-Sun)"};
constexpr const char* kDaypartTag[] = {"daytime", "evening", "latenight"};
constexpr const char* kDaypartText[] = {"daytime (07-17h)", "evening (17-23h)", "late-night (23-07h)"};
constexpr const char* kStatTag[] = {"mean", "median", "std", "min", "max", "skew", "kurt"};
constexpr const char* kStatText[] = {"mean", "median", "standard deviation", "minimum", "maximum",
                                     "skewness", "excess kurtosis"};

std::vector<FeatureSpec> build_manifest() {
  std::vector<FeatureSpec> m;
  m.reserve(kFeatureCount);

  for (int q = 0; q < 3; ++q) {
    for (int wp = 0; wp < 2; ++wp) {
      for (int dp = 0; dp < 3; ++dp) {
        for (int s = 0; s < 7; ++s) {
          m.push_back({fmt::format("weekly_{}_{}_{}_{}", kQuantityTag[q], kWeekpartTag[wp], kDaypartTag[dp],
                                   kStatTag[s]),
                       FeatureGroup::weekly, s < 5 ? Transform::log1p : Transform::none,
                       fmt::format("{} of the weekly {} in {} on {}", kStatText[s], kQuantityText[q],
                                   kDaypartText[dp], kWeekpartText[wp])});
        }
      }
    }
  }

  for (int wp = 0; wp < 2; ++wp) {
    for (int q = 0; q < 3; ++q) {
      for (int dp = 0; dp < 3; ++dp) {
        const bool logged = dp == 2 && q != 2;
        m.push_back({fmt::format("frac_{}_{}_{}", kWeekpartTag[wp], kQuantityTag[q], kDaypartTag[dp]),
                     FeatureGroup::fraction, logged ? Transform::log1p : Transform::none,
                     fmt::format("fraction of {} {} falling in {}", kWeekpartText[wp], kQuantityText[q],
                                 kDaypartText[dp])});
      }
    }
  }

  constexpr const char* kChannelTag[] = {"calls", "texts"};
  constexpr const char* kChannelText[] = {"a call", "a text"};
  for (int ch = 0; ch < 2; ++ch) {
    for (int wp = 0; wp < 2; ++wp) {
      for (int dp = 0; dp < 3; ++dp) {
        m.push_back({fmt::format("days_{}_{}_{}", kChannelTag[ch], kWeekpartTag[wp], kDaypartTag[dp]),
                     FeatureGroup::active_days, Transform::log1p,
                     fmt::format("days with at least {} in {} on {}", kChannelText[ch], kDaypartText[dp],
                                 kWeekpartText[wp])});
      }
    }
  }

  for (int q = 0; q < 3; ++q) {
    m.push_back({fmt::format("recip_{}", kQuantityTag[q]), FeatureGroup::reciprocity, Transform::none,
                 fmt::format("|in - out| / (in + out) of the {}", kQuantityText[q])});
  }

  for (int ch = 0; ch < 2; ++ch) {
    for (int s = 0; s < 7; ++s) {
      m.push_back({fmt::format("iet_{}_{}", kChannelTag[ch], kStatTag[s]), FeatureGroup::interevent,
                   s < 5 ? Transform::log1p : Transform::signed_log1p,
                   fmt::format("{} of the inter-event time (s) between {}", kStatText[s],
                               ch == 0 ? "calls" : "texts")});
    }
  }

  m.push_back({"common_top5", FeatureGroup::common_contacts, Transform::none,
               "common contacts within both users' top 5 most called alters"});
  m.push_back({"common_all", FeatureGroup::common_contacts, Transform::none,
               "common contacts among all alters"});
  return m;
}

}  // namespace

const std::vector<FeatureSpec>& feature_manifest() {
  static const std::vector<FeatureSpec> manifest = build_manifest();
  return manifest;
}

std::vector<std::string> feature_names() {
  std::vector<std::string> names;
  for (const FeatureSpec& spec : feature_manifest()) names.push_back(spec.name);
  return names;
}

std::array<std::size_t, 6> manifest_group_counts() {
  std::array<std::size_t, 6> counts{};
  for (const FeatureSpec& spec : feature_manifest()) ++counts[static_cast<std::size_t>(spec.group)];
  return counts;
}

const std::string& manifest_hash() {
  static const std::string hash = [] {
    std::string canonical;
    for (const FeatureSpec& spec : feature_manifest()) {
      canonical += spec.name;
      canonical += ':';
      canonical += to_string(spec.transform);
      canonical += '\n';
    }
    return sha256_hex(canonical);
  }();
  return hash;
}

const char* to_string(FeatureGroup group) {
  switch (group) {
    case FeatureGroup::weekly: return "weekly";
    case FeatureGroup::fraction: return "fraction";
    case FeatureGroup::active_days: return "active_days";
    case FeatureGroup::reciprocity: return "reciprocity";
    case FeatureGroup::interevent: return "interevent";
    case FeatureGroup::common_contacts: return "common_contacts";
  }
  return "?";
}

const char* to_string(Transform transform) {
  switch (transform) {
    case Transform::none: return "none";
    case Transform::log1p: return "log1p";
    case Transform::signed_log1p: return "signed_log1p";
  }
  return "?";
}

std::string manifest_markdown() {
  std::string md;
  md += "# Feature manifest\n\n";
  md += "Generated by `cdrlink manifest`. Column order of `features.csv` (after `first,second`).\n\n";
  md += fmt::format("Manifest hash: `{}`\n\n", manifest_hash());
  md += "Transforms: `log1p` = ln(1 + x); `signed_log1p` = sgn(x) ln(1 + |x|).\n";
  md += "Weekly series cover Monday-aligned local weeks fully inside the window (zero weeks included).\n";
  md += "Inter-event statistics of a channel with fewer than two events use ln(1 + window seconds) for\n";
  md += "the scale statistics and 0 for skewness/kurtosis.\n\n";
  md += "| # | name | group | transform | description |\n|---|---|---|---|---|\n";
  const auto& manifest = feature_manifest();
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    md += fmt::format("| {} | `{}` | {} | {} | {} |\n", i, manifest[i].name, to_string(manifest[i].group),
                      to_string(manifest[i].transform), manifest[i].description);
  }
  return md;
}

}  // namespace cdrlink
