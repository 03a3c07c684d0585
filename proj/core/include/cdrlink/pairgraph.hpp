#pragma once

// Ego-alter link graph: per-pair aggregates, alter ranking, the regularity
// filter, mutual top-rank extraction, common contacts and relationship labels.

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdrlink/ingest.hpp"

namespace cdrlink {

/// Unordered user pair stored in canonical order (first < second).
struct PairKey {
  std::string first;
  std::string second;

  /// Canonicalises the order; throws std::invalid_argument when a == b.
  static PairKey make(std::string_view a, std::string_view b);

  bool contains(std::string_view user) const { return first == user || second == user; }
  std::string_view other(std::string_view user) const { return first == user ? second : first; }
  /// `first|second`, used as a row identifier in datasets.
  std::string row_id() const { return first + '|' + second; }

  auto operator<=>(const PairKey&) const = default;
  bool operator==(const PairKey&) const = default;
};

struct PairLink {
  PairKey key;
  std::int64_t calls_total = 0;
  std::int64_t texts_total = 0;
  std::int64_t duration_total = 0;  // known durations only
  std::int64_t calls_from_first = 0;
  std::int64_t calls_from_second = 0;
  std::int64_t texts_from_first = 0;
  std::int64_t texts_from_second = 0;
  std::int64_t duration_from_first = 0;
  std::int64_t duration_from_second = 0;
  std::vector<std::int64_t> months_active;  // calls per window month

  /// Number of months with at least one call.
  std::size_t active_months() const;
  bool operator==(const PairLink&) const = default;
};

/// Immutable link graph with a per-user adjacency index. Copies share state.
class LinkGraph {
 public:
  LinkGraph();
  explicit LinkGraph(std::map<PairKey, PairLink> links);

  const std::map<PairKey, PairLink>& links() const { return data_->links; }
  std::size_t size() const { return data_->links.size(); }
  const PairLink* find(const PairKey& key) const;
  /// Links incident to `user`; empty for unknown users.
  std::span<const PairLink* const> incident(std::string_view user) const;
  /// Every user with at least one link, sorted.
  std::vector<std::string_view> users() const;

 private:
  struct Data {
    std::map<PairKey, PairLink> links;
    std::map<std::string, std::vector<const PairLink*>, std::less<>> adjacency;
  };
  std::shared_ptr<const Data> data_;
};

/// Aggregates events into one link per unordered pair.
LinkGraph build_links(std::span<const CdrEvent> events, const ObservationWindow& window);

struct RankedAlter {
  std::string alter;
  std::int64_t calls_total = 0;
  std::int64_t duration_total = 0;

  bool operator==(const RankedAlter&) const = default;
};

/// Alters of `ego` by call count (desc), then known duration (desc), then id (asc).
std::vector<RankedAlter> rank_alters(const LinkGraph& graph, std::string_view ego);

/// Keeps links with calls in at least `min_months` distinct window months.
/// Throws std::invalid_argument when min_months exceeds the window's months.
LinkGraph apply_regularity_filter(const LinkGraph& graph, const ObservationWindow& window,
                                  std::size_t min_months = 5);

/// Pairs whose members are each other's rank-1 alter, sorted by key.
std::vector<PairKey> mutual_top_rank_pairs(const LinkGraph& filtered);

struct CommonContacts {
  std::int64_t top5_common = 0;
  std::int64_t all_common = 0;

  bool operator==(const CommonContacts&) const = default;
};

/// Shared neighbours of the pair's members (the members themselves excluded).
/// Throws std::out_of_range("unknown pair") when the pair has no link.
CommonContacts common_contacts(const LinkGraph& graph, const PairKey& pair);

enum class AgeGapCategory : std::uint8_t { peer, parent_child, grandparent_child };
enum class GenderComposition : std::uint8_t { same, opposite };
/// <18, 18-28, 29-45, 46-55, 56-79, >=80
enum class AgeBracket : std::uint8_t { teen, young, middle, late, old, very_old };

AgeBracket age_bracket(int age);
/// Single-letter tag: T, Y, M, L, O, V.
char bracket_letter(AgeBracket bracket);
std::optional<AgeBracket> bracket_from_letter(char letter);

struct RelationshipLabel {
  AgeGapCategory age_gap = AgeGapCategory::peer;
  GenderComposition gender_composition = GenderComposition::same;
  int younger_age = 0;
  AgeBracket younger_bracket = AgeBracket::young;
  /// "-Y peers", "+M peers", "M child", "Y grandchild", ...
  std::string code;

  bool operator==(const RelationshipLabel&) const = default;
};

RelationshipLabel label_relationship(const SubscriberRecord& a, const SubscriberRecord& b);

/// Throws std::out_of_range("unlabeled pair") if either member lacks metadata.
RelationshipLabel label_relationship(const SubscriberTable& subscribers, const PairKey& pair);

std::string relationship_code(AgeGapCategory gap, GenderComposition composition, AgeBracket bracket);

/// Inverse of relationship_code for the fields a code carries.
struct ParsedRelationshipCode {
  AgeGapCategory age_gap;
  std::optional<GenderComposition> gender_composition;  // set for peers only
  AgeBracket younger_bracket;
};
std::optional<ParsedRelationshipCode> parse_relationship_code(std::string_view code);

/// One row of pairs.csv.
struct PairRow {
  PairKey key;
  std::int64_t calls_total = 0;
  std::int64_t texts_total = 0;
  std::int64_t duration_total = 0;
  std::size_t months_active = 0;
  std::optional<std::string> label_code;
  std::optional<int> younger_age;

  bool operator==(const PairRow&) const = default;
};

inline constexpr const char* kPairsHeader =
    "first,second,calls_total,texts_total,duration_total,months_active,label_code,younger_age";

/// Builds the rows for `pairs`, labelling those with metadata on both sides.
std::vector<PairRow> make_pair_rows(const LinkGraph& graph, std::span<const PairKey> pairs,
                                    const SubscriberTable& subscribers);
void write_pairs(std::ostream& out, std::span<const PairRow> rows);
/// Throws IngestError on a bad header or malformed row.
std::vector<PairRow> read_pairs(std::istream& in);

}  // namespace cdrlink
