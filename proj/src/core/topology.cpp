#include "astoria/topology.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "astoria/error.hpp"
#include "astoria/text.hpp"

namespace astoria {

namespace {

std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (std::uint64_t{a} << 32) | b;
}

Edge canonical(Edge e) {
  if (e.kind == RelKind::PeerPeer && e.second < e.first) std::swap(e.first, e.second);
  return e;
}

std::optional<AsId> parse_asn(std::string_view field) {
  const auto v = text::parse_uint(field);
  if (!v || *v == 0 || *v > UINT32_MAX) return std::nullopt;
  return AsId(static_cast<std::uint32_t>(*v));
}

std::uint16_t pack_code(std::string_view code) {
  return static_cast<std::uint16_t>((static_cast<unsigned char>(code[0]) << 8) |
                                    static_cast<unsigned char>(code[1]));
}

std::string unpack_code(std::uint64_t packed) {
  return {static_cast<char>((packed >> 8) & 0xff), static_cast<char>(packed & 0xff)};
}

}  // namespace

std::ostream& operator<<(std::ostream& os, AsId as) { return os << as.value; }

AsGraph AsGraph::from_edges(std::span<const Edge> edges) {
  AsGraph g;
  std::set<std::uint32_t> ids;
  for (const Edge& raw : edges) {
    if (raw.first.value == 0 || raw.second.value == 0)
      throw std::invalid_argument("AS number 0 is reserved");
    if (raw.first == raw.second)
      throw std::invalid_argument("self-loop on AS " + std::to_string(raw.first.value));
    const Edge e = canonical(raw);
    const auto key = pair_key(e.first.value, e.second.value);
    if (auto it = g.by_pair_.find(key); it != g.by_pair_.end()) {
      if (it->second != e)
        throw std::invalid_argument("contradictory relationship for AS pair " +
                                    std::to_string(e.first.value) + "|" +
                                    std::to_string(e.second.value));
      continue;
    }
    g.by_pair_.emplace(key, e);
    ids.insert(e.first.value);
    ids.insert(e.second.value);
  }

  g.ids_.reserve(ids.size());
  for (auto v : ids) {
    g.index_.emplace(v, static_cast<Index>(g.ids_.size()));
    g.ids_.emplace_back(v);
  }
  const auto n = g.ids_.size();
  g.customers_.resize(n);
  g.providers_.resize(n);
  g.peers_.resize(n);
  for (const auto& [key, e] : g.by_pair_) {
    const Index a = g.index_.at(e.first.value);
    const Index b = g.index_.at(e.second.value);
    if (e.kind == RelKind::ProviderCustomer) {
      g.customers_[a].push_back(b);
      g.providers_[b].push_back(a);
    } else {
      g.peers_[a].push_back(b);
      g.peers_[b].push_back(a);
    }
  }
  // Indices follow AsId order, so sorting indices sorts by AsId.
  for (std::size_t i = 0; i < n; ++i) {
    std::sort(g.customers_[i].begin(), g.customers_[i].end());
    std::sort(g.providers_[i].begin(), g.providers_[i].end());
    std::sort(g.peers_[i].begin(), g.peers_[i].end());
  }
  g.edge_count_ = g.by_pair_.size();
  return g;
}

std::optional<AsGraph::Index> AsGraph::index_of(AsId as) const {
  if (auto it = index_.find(as.value); it != index_.end()) return it->second;
  return std::nullopt;
}

AsGraph::Index AsGraph::require_index(AsId as) const {
  if (auto it = index_.find(as.value); it != index_.end()) return it->second;
  throw std::out_of_range("AS " + std::to_string(as.value) + " is not in the topology");
}

std::optional<Neighbor> AsGraph::relation(AsId a, AsId b) const {
  auto it = by_pair_.find(pair_key(a.value, b.value));
  if (it == by_pair_.end() || a == b) return std::nullopt;
  const Edge& e = it->second;
  if (e.kind == RelKind::PeerPeer) return Neighbor::Peer;
  return e.first == a ? Neighbor::Customer : Neighbor::Provider;
}

std::vector<Edge> AsGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(by_pair_.size());
  for (const auto& [key, e] : by_pair_) out.push_back(e);
  std::sort(out.begin(), out.end());
  return out;
}

AsGraph load_topology(std::istream& in, std::string_view source) {
  std::vector<Edge> edges;
  std::unordered_map<std::uint64_t, std::pair<Edge, std::size_t>> seen;
  const std::string src(source);
  text::for_each_record(in, [&](std::size_t line, std::string_view record) {
    const auto fields = text::split(record, '|');
    if (fields.size() != 3 && fields.size() != 4)
      throw ParseError(src, line, "expected <asn>|<asn>|<rel>");
    const auto a = parse_asn(fields[0]);
    const auto b = parse_asn(fields[1]);
    const auto rel = text::parse_int(fields[2]);
    if (!a || !b) throw ParseError(src, line, "invalid AS number");
    if (!rel || (*rel != -1 && *rel != 0))
      throw ParseError(src, line, "relationship must be -1 or 0");
    if (*a == *b) throw ParseError(src, line, "self-loop on AS " + std::to_string(a->value));
    const Edge e = canonical(Edge{*a, *b, static_cast<RelKind>(*rel)});
    const auto key = pair_key(a->value, b->value);
    if (auto it = seen.find(key); it != seen.end()) {
      if (it->second.first != e)
        throw ParseError(src, line,
                         "contradictory relationship (first given on line " +
                             std::to_string(it->second.second) + ")");
      return;
    }
    seen.emplace(key, std::pair{e, line});
    edges.push_back(e);
  });
  return AsGraph::from_edges(edges);
}

void write_topology(std::ostream& out, const AsGraph& graph) {
  for (const Edge& e : graph.edges())
    out << e.first.value << '|' << e.second.value << '|'
        << static_cast<int>(e.kind) << '\n';
}

void OrgMap::assign(AsId as, std::string org) {
  if (org.empty()) throw std::invalid_argument("empty organization name");
  auto [id_it, fresh] = ids_.try_emplace(org, static_cast<std::uint32_t>(names_.size()));
  if (fresh) names_.push_back(org);
  const auto id = id_it->second;
  auto [it, inserted] = org_of_.try_emplace(as.value, id);
  if (!inserted && it->second != id)
    throw std::invalid_argument("AS " + std::to_string(as.value) +
                                " assigned to both '" + names_[it->second] + "' and '" +
                                org + "'");
}

std::string OrgMap::org_of(AsId as) const {
  if (auto idx = org_index(as)) return names_[*idx];
  return std::to_string(as.value);
}

std::optional<std::uint32_t> OrgMap::org_index(AsId as) const {
  if (auto it = org_of_.find(as.value); it != org_of_.end()) return it->second;
  return std::nullopt;
}

OrgMap load_siblings(std::istream& in, std::string_view source) {
  OrgMap map;
  const std::string src(source);
  text::for_each_record(in, [&](std::size_t line, std::string_view record) {
    const auto fields = text::split(record, '|');
    if (fields.size() != 2) throw ParseError(src, line, "expected <org>|<asn>");
    const auto org = text::trim(fields[0]);
    const auto as = parse_asn(fields[1]);
    if (org.empty()) throw ParseError(src, line, "empty organization name");
    if (!as) throw ParseError(src, line, "invalid AS number");
    try {
      map.assign(*as, std::string(org));
    } catch (const std::invalid_argument& e) {
      throw ParseError(src, line, std::string("conflicting assignment: ") + e.what());
    }
  });
  return map;
}

bool CountryMap::valid_code(std::string_view code) {
  return code.size() == 2 && code[0] >= 'A' && code[0] <= 'Z' && code[1] >= 'A' &&
         code[1] <= 'Z';
}

void CountryMap::assign(AsId as, std::string_view code) {
  if (!valid_code(code))
    throw std::invalid_argument("invalid country code '" + std::string(code) + "'");
  const auto packed = pack_code(code);
  auto [it, inserted] = country_of_.try_emplace(as.value, packed);
  if (!inserted && it->second != packed)
    throw std::invalid_argument("AS " + std::to_string(as.value) +
                                " assigned to two countries");
}

std::string CountryMap::country_of(AsId as) const {
  if (auto it = country_of_.find(as.value); it != country_of_.end())
    return unpack_code(it->second);
  return std::string(kUnknown);
}

CountryMap load_countries(std::istream& in, std::string_view source) {
  CountryMap map;
  const std::string src(source);
  text::for_each_record(in, [&](std::size_t line, std::string_view record) {
    const auto fields = text::split(record, '|');
    if (fields.size() != 2) throw ParseError(src, line, "expected <asn>|<CC>");
    const auto as = parse_asn(fields[0]);
    if (!as) throw ParseError(src, line, "invalid AS number");
    try {
      map.assign(*as, text::trim(fields[1]));
    } catch (const std::invalid_argument& e) {
      throw ParseError(src, line, e.what());
    }
  });
  return map;
}

std::string_view to_string(AdversaryMode mode) {
  switch (mode) {
    case AdversaryMode::SingleAs: return "single-as";
    case AdversaryMode::Sibling: return "sibling";
    case AdversaryMode::State: return "state";
  }
  return "?";
}

std::optional<AdversaryMode> parse_adversary_mode(std::string_view s) {
  if (s == "single-as" || s == "single_as" || s == "as") return AdversaryMode::SingleAs;
  if (s == "sibling" || s == "siblings") return AdversaryMode::Sibling;
  if (s == "state") return AdversaryMode::State;
  return std::nullopt;
}

ColluderKey colluder_class(AsId as, AdversaryMode mode, const OrgMap& orgs,
                           const CountryMap& countries) {
  using Kind = ColluderKey::Kind;
  switch (mode) {
    case AdversaryMode::SingleAs:
      return {Kind::As, as.value};
    case AdversaryMode::Sibling:
      if (auto org = orgs.org_index(as)) return {Kind::Org, *org};
      return {Kind::As, as.value};
    case AdversaryMode::State: {
      const auto cc = countries.country_of(as);
      if (cc == CountryMap::kUnknown) return {Kind::UnknownCountry, as.value};
      return {Kind::Country, pack_code(cc)};
    }
  }
  return {Kind::As, as.value};
}

std::string colluder_label(ColluderKey key, const OrgMap& orgs) {
  using Kind = ColluderKey::Kind;
  switch (key.kind()) {
    case Kind::As: return std::to_string(key.value());
    case Kind::Org: return orgs.org_name(static_cast<std::uint32_t>(key.value()));
    case Kind::Country: return unpack_code(key.value());
    case Kind::UnknownCountry: return "ZZ:" + std::to_string(key.value());
  }
  return "?";
}

}  // namespace astoria
