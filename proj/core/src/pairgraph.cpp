#include "cdrlink/pairgraph.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>

#include "cdrlink/csv.hpp"

namespace cdrlink {

namespace {

/// Strict ordering used for alter ranking.
bool ranks_before(const RankedAlter& a, const RankedAlter& b) {
  if (a.calls_total != b.calls_total) return a.calls_total > b.calls_total;
  if (a.duration_total != b.duration_total) return a.duration_total > b.duration_total;
  return a.alter < b.alter;
}

RankedAlter as_ranked(const PairLink& link, std::string_view ego) {
  return {std::string(link.key.other(ego)), link.calls_total, link.duration_total};
}

/// First `limit` alters of `ego` (partial sort of the incident links).
std::vector<std::string_view> top_alters(const LinkGraph& graph, std::string_view ego, std::size_t limit) {
  const auto incident = graph.incident(ego);
  std::vector<const PairLink*> order(incident.begin(), incident.end());
  auto before = [ego](const PairLink* a, const PairLink* b) {
    if (a->calls_total != b->calls_total) return a->calls_total > b->calls_total;
    if (a->duration_total != b->duration_total) return a->duration_total > b->duration_total;
    return a->key.other(ego) < b->key.other(ego);
  };
  const std::size_t n = std::min(limit, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(), before);
  std::vector<std::string_view> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(order[i]->key.other(ego));
  return out;
}

std::int64_t count_common(std::vector<std::string_view> a, std::vector<std::string_view> b,
                          const PairKey& pair) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<std::string_view> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
  return static_cast<std::int64_t>(
      std::count_if(both.begin(), both.end(), [&](std::string_view u) { return !pair.contains(u); }));
}

}  // namespace

PairKey PairKey::make(std::string_view a, std::string_view b) {
  if (a == b) throw std::invalid_argument(fmt::format("pair of identical users '{}'", a));
  if (a < b) return {std::string(a), std::string(b)};
  return {std::string(b), std::string(a)};
}

std::size_t PairLink::active_months() const {
  return static_cast<std::size_t>(
      std::count_if(months_active.begin(), months_active.end(), [](std::int64_t c) { return c > 0; }));
}

LinkGraph::LinkGraph() : data_(std::make_shared<Data>()) {}

LinkGraph::LinkGraph(std::map<PairKey, PairLink> links) {
  auto data = std::make_shared<Data>();
  data->links = std::move(links);
  for (const auto& [key, link] : data->links) {
    data->adjacency[key.first].push_back(&link);
    data->adjacency[key.second].push_back(&link);
  }
  data_ = std::move(data);
}

const PairLink* LinkGraph::find(const PairKey& key) const {
  const auto it = data_->links.find(key);
  return it == data_->links.end() ? nullptr : &it->second;
}

std::span<const PairLink* const> LinkGraph::incident(std::string_view user) const {
  const auto it = data_->adjacency.find(user);
  if (it == data_->adjacency.end()) return {};
  return it->second;
}

std::vector<std::string_view> LinkGraph::users() const {
  std::vector<std::string_view> out;
  out.reserve(data_->adjacency.size());
  for (const auto& [user, links] : data_->adjacency) out.push_back(user);
  return out;
}

LinkGraph build_links(std::span<const CdrEvent> events, const ObservationWindow& window) {
  std::unordered_map<std::string, PairLink> by_key;
  std::string lookup;
  for (const CdrEvent& e : events) {
    const auto month = window.month_index(e.timestamp);
    if (!month) {
      throw std::invalid_argument(fmt::format("event at {} lies outside the window", e.timestamp));
    }
    const bool caller_first = e.caller_id < e.callee_id;
    const std::string& first = caller_first ? e.caller_id : e.callee_id;
    const std::string& second = caller_first ? e.callee_id : e.caller_id;
    lookup.assign(first).append(1, '\x1f').append(second);

    auto [it, inserted] = by_key.try_emplace(lookup);
    PairLink& link = it->second;
    if (inserted) {
      link.key = PairKey::make(first, second);
      link.months_active.assign(window.month_count(), 0);
    }

    if (e.kind == EventKind::call) {
      ++link.calls_total;
      ++(caller_first ? link.calls_from_first : link.calls_from_second);
      ++link.months_active[*month];
      if (e.duration) {
        link.duration_total += *e.duration;
        (caller_first ? link.duration_from_first : link.duration_from_second) += *e.duration;
      }
    } else {
      ++link.texts_total;
      ++(caller_first ? link.texts_from_first : link.texts_from_second);
    }
  }

  std::map<PairKey, PairLink> links;
  for (auto& [_, link] : by_key) {
    PairKey key = link.key;
    links.emplace(std::move(key), std::move(link));
  }
  return LinkGraph(std::move(links));
}

std::vector<RankedAlter> rank_alters(const LinkGraph& graph, std::string_view ego) {
  std::vector<RankedAlter> ranked;
  for (const PairLink* link : graph.incident(ego)) ranked.push_back(as_ranked(*link, ego));
  std::sort(ranked.begin(), ranked.end(), ranks_before);
  return ranked;
}

LinkGraph apply_regularity_filter(const LinkGraph& graph, const ObservationWindow& window,
                                  std::size_t min_months) {
  if (min_months > window.month_count()) {
    throw std::invalid_argument(fmt::format("min_months {} exceeds the {} months in the window",
                                            min_months, window.month_count()));
  }
  std::map<PairKey, PairLink> kept;
  for (const auto& [key, link] : graph.links()) {
    if (link.active_months() >= min_months) kept.emplace(key, link);
  }
  return LinkGraph(std::move(kept));
}

std::vector<PairKey> mutual_top_rank_pairs(const LinkGraph& filtered) {
  std::map<std::string_view, std::string_view> top;
  for (std::string_view user : filtered.users()) {
    const auto best = top_alters(filtered, user, 1);
    if (!best.empty()) top.emplace(user, best.front());
  }
  std::vector<PairKey> pairs;
  for (const auto& [key, link] : filtered.links()) {
    const auto a = top.find(key.first);
    const auto b = top.find(key.second);
    if (a != top.end() && b != top.end() && a->second == key.second && b->second == key.first) {
      pairs.push_back(key);
    }
  }
  return pairs;  // std::map iteration is already key-sorted
}

CommonContacts common_contacts(const LinkGraph& graph, const PairKey& pair) {
  if (graph.find(pair) == nullptr) throw std::out_of_range("unknown pair");

  auto all_of = [&](std::string_view user) {
    std::vector<std::string_view> out;
    for (const PairLink* link : graph.incident(user)) out.push_back(link->key.other(user));
    return out;
  };
  CommonContacts result;
  result.all_common = count_common(all_of(pair.first), all_of(pair.second), pair);
  result.top5_common =
      count_common(top_alters(graph, pair.first, 5), top_alters(graph, pair.second, 5), pair);
  return result;
}

AgeBracket age_bracket(int age) {
  if (age < 18) return AgeBracket::teen;
  if (age <= 28) return AgeBracket::young;
  if (age <= 45) return AgeBracket::middle;
  if (age <= 55) return AgeBracket::late;
  if (age <= 79) return AgeBracket::old;
  return AgeBracket::very_old;
}

char bracket_letter(AgeBracket bracket) {
  switch (bracket) {
    case AgeBracket::teen: return 'T';
    case AgeBracket::young: return 'Y';
    case AgeBracket::middle: return 'M';
    case AgeBracket::late: return 'L';
    case AgeBracket::old: return 'O';
    case AgeBracket::very_old: return 'V';
  }
  return '?';
}

std::optional<AgeBracket> bracket_from_letter(char letter) {
  switch (letter) {
    case 'T': return AgeBracket::teen;
    case 'Y': return AgeBracket::young;
    case 'M': return AgeBracket::middle;
    case 'L': return AgeBracket::late;
    case 'O': return AgeBracket::old;
    case 'V': return AgeBracket::very_old;
    default: return std::nullopt;
  }
}

std::string relationship_code(AgeGapCategory gap, GenderComposition composition, AgeBracket bracket) {
  const char letter = bracket_letter(bracket);
  switch (gap) {
    case AgeGapCategory::peer:
      return fmt::format("{}{} peers", composition == GenderComposition::opposite ? '-' : '+', letter);
    case AgeGapCategory::parent_child:
      return fmt::format("{} child", letter);
    case AgeGapCategory::grandparent_child:
      return fmt::format("{} grandchild", letter);
  }
  return {};
}

std::optional<ParsedRelationshipCode> parse_relationship_code(std::string_view code) {
  if (code.size() == 8 && code.substr(2) == " peers" && (code[0] == '-' || code[0] == '+')) {
    const auto bracket = bracket_from_letter(code[1]);
    if (!bracket) return std::nullopt;
    return ParsedRelationshipCode{
        AgeGapCategory::peer,
        code[0] == '-' ? GenderComposition::opposite : GenderComposition::same, *bracket};
  }
  if (code.size() < 3 || code[1] != ' ') return std::nullopt;
  const auto bracket = bracket_from_letter(code[0]);
  if (!bracket) return std::nullopt;
  const std::string_view rest = code.substr(2);
  if (rest == "child") return ParsedRelationshipCode{AgeGapCategory::parent_child, std::nullopt, *bracket};
  if (rest == "grandchild") {
    return ParsedRelationshipCode{AgeGapCategory::grandparent_child, std::nullopt, *bracket};
  }
  return std::nullopt;
}

RelationshipLabel label_relationship(const SubscriberRecord& a, const SubscriberRecord& b) {
  RelationshipLabel label;
  const int gap = a.age > b.age ? a.age - b.age : b.age - a.age;
  label.age_gap = gap < 20   ? AgeGapCategory::peer
                  : gap < 40 ? AgeGapCategory::parent_child
                             : AgeGapCategory::grandparent_child;
  label.gender_composition = a.gender == b.gender ? GenderComposition::same : GenderComposition::opposite;
  label.younger_age = std::min(a.age, b.age);
  label.younger_bracket = age_bracket(label.younger_age);
  label.code = relationship_code(label.age_gap, label.gender_composition, label.younger_bracket);
  return label;
}

RelationshipLabel label_relationship(const SubscriberTable& subscribers, const PairKey& pair) {
  const auto a = subscribers.find(pair.first);
  const auto b = subscribers.find(pair.second);
  if (a == subscribers.end() || b == subscribers.end()) throw std::out_of_range("unlabeled pair");
  return label_relationship(a->second, b->second);
}

std::vector<PairRow> make_pair_rows(const LinkGraph& graph, std::span<const PairKey> pairs,
                                    const SubscriberTable& subscribers) {
  std::vector<PairRow> rows;
  rows.reserve(pairs.size());
  for (const PairKey& key : pairs) {
    const PairLink* link = graph.find(key);
    if (link == nullptr) throw std::out_of_range("unknown pair");
    PairRow row{key, link->calls_total, link->texts_total, link->duration_total,
                link->active_months(), std::nullopt, std::nullopt};
    if (subscribers.contains(key.first) && subscribers.contains(key.second)) {
      const RelationshipLabel label = label_relationship(subscribers, key);
      row.label_code = label.code;
      row.younger_age = label.younger_age;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_pairs(std::ostream& out, std::span<const PairRow> rows) {
  out << kPairsHeader << '\n';
  for (const PairRow& r : rows) {
    out << r.key.first << ',' << r.key.second << ',' << r.calls_total << ',' << r.texts_total << ','
        << r.duration_total << ',' << r.months_active << ',' << r.label_code.value_or("") << ',';
    if (r.younger_age) out << *r.younger_age;
    out << '\n';
  }
}

std::vector<PairRow> read_pairs(std::istream& in) {
  std::string raw;
  if (!in || !std::getline(in, raw)) throw IngestError("pairs: missing header");
  if (csv::clean_line(raw) != kPairsHeader) throw IngestError("pairs: header mismatch");

  std::vector<PairRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = csv::clean_line(raw);
    if (line.empty()) continue;
    const auto f = csv::split(line);
    auto fail = [&](std::string_view what) {
      return IngestError(fmt::format("pairs: line {}: {}", line_no, what));
    };
    if (f.size() != 8) throw fail("expected 8 fields");
    const auto calls = csv::parse_int(f[2]);
    const auto texts = csv::parse_int(f[3]);
    const auto duration = csv::parse_int(f[4]);
    const auto months = csv::parse_int(f[5]);
    if (!calls || !texts || !duration || !months || *months < 0) throw fail("bad counter");
    if (f[0].empty() || f[1].empty() || f[0] >= f[1]) throw fail("pair not in canonical order");

    PairRow row{PairKey{std::string(f[0]), std::string(f[1])}, *calls, *texts, *duration,
                static_cast<std::size_t>(*months), std::nullopt, std::nullopt};
    if (!f[6].empty()) {
      if (!parse_relationship_code(f[6])) throw fail("bad label code");
      row.label_code = std::string(f[6]);
      const auto age = csv::parse_int(f[7]);
      if (!age) throw fail("labelled row without younger_age");
      row.younger_age = static_cast<int>(*age);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace cdrlink
