#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace astoria {

// Autonomous-system number. Zero is reserved and never a valid AS.
struct AsId {
  std::uint32_t value = 0;

  constexpr AsId() = default;
  constexpr explicit AsId(std::uint32_t v) : value(v) {}

  friend constexpr auto operator<=>(AsId, AsId) = default;
};

std::ostream& operator<<(std::ostream& os, AsId as);

enum class RelKind : std::int8_t {
  ProviderCustomer = -1,  // first AS is provider of the second
  PeerPeer = 0,
};

struct Edge {
  AsId first;
  AsId second;
  RelKind kind = RelKind::PeerPeer;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// What `neighbor` is to the AS being queried.
enum class Neighbor : std::uint8_t { Customer, Peer, Provider };

// Immutable AS-level graph. Nodes are addressed by dense indices in
// ascending AsId order; adjacency lists are sorted by AsId.
class AsGraph {
 public:
  using Index = std::uint32_t;

  // Validates: no self loops, no AS 0, one relationship per unordered pair.
  // Identical duplicate edges are collapsed. Throws std::invalid_argument.
  static AsGraph from_edges(std::span<const Edge> edges);

  std::size_t node_count() const noexcept { return ids_.size(); }
  std::size_t edge_count() const noexcept { return edge_count_; }

  bool contains(AsId as) const { return index_.contains(as.value); }
  std::optional<Index> index_of(AsId as) const;
  Index require_index(AsId as) const;  // throws std::out_of_range
  AsId id_at(Index i) const { return ids_[i]; }
  std::span<const AsId> nodes() const noexcept { return ids_; }

  std::span<const Index> customers(Index i) const { return customers_[i]; }
  std::span<const Index> providers(Index i) const { return providers_[i]; }
  std::span<const Index> peers(Index i) const { return peers_[i]; }

  // Relationship of `b` as seen from `a`, if adjacent.
  std::optional<Neighbor> relation(AsId a, AsId b) const;

  // Canonical edge list: providers first in ProviderCustomer edges, the
  // smaller AS first in PeerPeer edges; sorted.
  std::vector<Edge> edges() const;

 private:
  std::vector<AsId> ids_;
  std::unordered_map<std::uint32_t, Index> index_;
  std::vector<std::vector<Index>> customers_;
  std::vector<std::vector<Index>> providers_;
  std::vector<std::vector<Index>> peers_;
  std::unordered_map<std::uint64_t, Edge> by_pair_;
  std::size_t edge_count_ = 0;
};

// `<asn>|<asn>|<rel>` per line with rel in {-1, 0}; `#` comments ignored.
// A fourth `|`-separated field (CAIDA serial-2 source tag) is accepted and
// ignored. Throws ParseError.
AsGraph load_topology(std::istream& in, std::string_view source = "<topology>");
void write_topology(std::ostream& out, const AsGraph& graph);

// AS -> organization. Unmapped ASes form a singleton organization named by
// their own number.
class OrgMap {
 public:
  // Throws std::invalid_argument on a conflicting assignment.
  void assign(AsId as, std::string org);

  std::string org_of(AsId as) const;
  std::optional<std::uint32_t> org_index(AsId as) const;
  const std::string& org_name(std::uint32_t index) const { return names_[index]; }
  std::size_t size() const noexcept { return org_of_.size(); }

 private:
  std::unordered_map<std::uint32_t, std::uint32_t> org_of_;
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::vector<std::string> names_;
};

OrgMap load_siblings(std::istream& in, std::string_view source = "<siblings>");

// AS -> ISO 3166-1 alpha-2 code. Unmapped lookups return "ZZ".
class CountryMap {
 public:
  static constexpr std::string_view kUnknown = "ZZ";

  static bool valid_code(std::string_view code);

  // Throws std::invalid_argument on an invalid code or conflicting assignment.
  void assign(AsId as, std::string_view code);
  std::string country_of(AsId as) const;
  std::size_t size() const noexcept { return country_of_.size(); }

 private:
  std::unordered_map<std::uint32_t, std::uint16_t> country_of_;
};

CountryMap load_countries(std::istream& in, std::string_view source = "<countries>");

enum class AdversaryMode : std::uint8_t { SingleAs, Sibling, State };

std::string_view to_string(AdversaryMode mode);
std::optional<AdversaryMode> parse_adversary_mode(std::string_view s);

// Identity of a colluding adversary. Two ASes collude under a mode iff their
// keys compare equal. ASes with no known country get a per-AS key under State
// mode, so an unknown country never groups unrelated ASes together.
class ColluderKey {
 public:
  enum class Kind : std::uint8_t { As, Org, Country, UnknownCountry };

  constexpr ColluderKey() = default;
  constexpr ColluderKey(Kind kind, std::uint64_t value) : kind_(kind), value_(value) {}

  Kind kind() const noexcept { return kind_; }
  std::uint64_t value() const noexcept { return value_; }

  friend auto operator<=>(const ColluderKey&, const ColluderKey&) = default;

 private:
  Kind kind_ = Kind::As;
  std::uint64_t value_ = 0;
};

ColluderKey colluder_class(AsId as, AdversaryMode mode, const OrgMap& orgs,
                           const CountryMap& countries);

// Human-readable class label: "3352", "telef", "US", or "ZZ:999".
std::string colluder_label(ColluderKey key, const OrgMap& orgs);

// Graph plus the metadata needed to map ASes onto colluder classes.
struct TopologyBundle {
  AsGraph graph;
  OrgMap orgs;
  CountryMap countries;
};

}  // namespace astoria

template <>
struct std::hash<astoria::AsId> {
  std::size_t operator()(astoria::AsId as) const noexcept {
    return std::hash<std::uint32_t>{}(as.value);
  }
};
