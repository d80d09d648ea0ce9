#include "astoria/threat.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace astoria {

namespace {

constexpr std::size_t kMaxCachedLegs = std::size_t{1} << 20;

std::uint64_t unordered_key(AsId a, AsId b) {
  if (b < a) std::swap(a, b);
  return (std::uint64_t{a.value} << 32) | b.value;
}

// Concrete paths of one leg, both directions, deduplicated by AS set.
std::vector<std::vector<AsId>> leg_paths(RoutingCache& cache, AsId a, AsId b,
                                         std::size_t cap, bool& truncated) {
  if (a == b) return {{a}};
  std::set<std::vector<AsId>> unique;
  for (auto [from, to] : {std::pair{a, b}, std::pair{b, a}}) {
    auto e = enumerate_paths(*cache.tree(to), from, cap);
    truncated = truncated || e.truncated;
    for (auto& p : e.paths) {
      std::sort(p.begin(), p.end());
      unique.insert(std::move(p));
    }
  }
  return {unique.begin(), unique.end()};
}

}  // namespace

ClassSet intersect(const ClassSet& a, const ClassSet& b) {
  ClassSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

bool intersects(const ClassSet& a, const ClassSet& b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      return true;
    }
  }
  return false;
}

ThreatModel::ThreatModel(const TopologyBundle& topo, RoutingCache& cache,
                         ThreatOptions options)
    : topo_(&topo), cache_(&cache), options_(std::move(options)) {
  if (options_.state_country) {
    if (!CountryMap::valid_code(*options_.state_country))
      throw std::invalid_argument("invalid country code '" + *options_.state_country + "'");
    // Key of any AS mapped to that country; computed through a scratch map.
    CountryMap probe;
    probe.assign(AsId(1), *options_.state_country);
    state_filter_ = colluder_class(AsId(1), AdversaryMode::State, OrgMap{}, probe);
  }
}

PathSet ThreatModel::leg(AsId a, AsId b) const {
  const auto key = unordered_key(a, b);
  {
    std::lock_guard lock(mutex_);
    if (auto it = legs_.find(key); it != legs_.end()) return it->second;
  }
  PathSet set = bidirectional_path_set(*cache_, a, b);
  std::lock_guard lock(mutex_);
  if (legs_.size() >= kMaxCachedLegs) legs_.clear();
  legs_.emplace(key, set);
  return set;
}

ClassSet ThreatModel::classes_of(std::span<const AsId> ases, AsId endpoint,
                                 AdversaryMode mode) const {
  ClassSet out;
  out.reserve(ases.size());
  for (AsId as : ases) {
    if (options_.exclude_endpoints && as == endpoint) continue;
    const auto key = colluder_class(as, mode, topo_->orgs, topo_->countries);
    if (mode == AdversaryMode::State && state_filter_ && key != *state_filter_) continue;
    out.push_back(key);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::optional<ClassSet> ThreatModel::leg_classes(AsId a, AsId b, AsId endpoint,
                                                 AdversaryMode mode) const {
  const PathSet set = leg(a, b);
  if (set.empty()) return std::nullopt;
  return classes_of(set.ases(), endpoint, mode);
}

ThreatAssessment ThreatModel::assess(const CircuitSpec& c, AdversaryMode mode) const {
  ThreatAssessment out;
  const auto entry_leg = leg_classes(c.src, c.entry, c.src, mode);
  const auto exit_leg = leg_classes(c.exit, c.dst, c.dst, mode);
  if (!entry_leg || !exit_leg) return out;
  out.assessable = true;
  out.attackers = intersect(*entry_leg, *exit_leg);
  out.vulnerable = !out.attackers.empty();
  return out;
}

PairGrid ThreatModel::attacker_free_fraction(AsId src, AsId dst,
                                             std::span<const AsId> entries,
                                             std::span<const AsId> exits,
                                             AdversaryMode mode) const {
  if (entries.empty() || exits.empty())
    throw std::invalid_argument("entry and exit lists must be nonempty");
  std::unordered_map<std::uint32_t, std::optional<ClassSet>> entry_legs;
  std::unordered_map<std::uint32_t, std::optional<ClassSet>> exit_legs;
  for (AsId e : entries)
    if (!entry_legs.contains(e.value)) entry_legs[e.value] = leg_classes(src, e, src, mode);
  for (AsId x : exits)
    if (!exit_legs.contains(x.value)) exit_legs[x.value] = leg_classes(x, dst, dst, mode);

  PairGrid grid;
  grid.rows = entries.size();
  grid.cols = exits.size();
  grid.states.reserve(grid.rows * grid.cols);
  for (AsId e : entries) {
    const auto& el = entry_legs.at(e.value);
    for (AsId x : exits) {
      const auto& xl = exit_legs.at(x.value);
      if (!el || !xl) {
        grid.states.push_back(PairState::Unassessable);
        continue;
      }
      ++grid.assessable;
      if (intersects(*el, *xl)) {
        grid.states.push_back(PairState::Vulnerable);
      } else {
        ++grid.safe;
        grid.states.push_back(PairState::Safe);
      }
    }
  }
  if (grid.assessable > 0)
    grid.fraction = static_cast<double>(grid.safe) / static_cast<double>(grid.assessable);
  return grid;
}

PathFraction ThreatModel::vulnerable_path_fraction(const CircuitSpec& c, AdversaryMode mode,
                                                   std::size_t cap) const {
  if (!assess(c, mode).vulnerable)
    throw std::invalid_argument("vulnerable_path_fraction requires a vulnerable circuit");
  PathFraction out;
  const auto entry_paths = leg_paths(*cache_, c.src, c.entry, cap, out.truncated);
  const auto exit_paths = leg_paths(*cache_, c.exit, c.dst, cap, out.truncated);
  std::vector<ClassSet> exit_classes;
  exit_classes.reserve(exit_paths.size());
  for (const auto& p : exit_paths) exit_classes.push_back(classes_of(p, c.dst, mode));
  for (const auto& p : entry_paths) {
    const auto entry_classes = classes_of(p, c.src, mode);
    for (const auto& xc : exit_classes) {
      ++out.total_pairs;
      if (intersects(entry_classes, xc)) ++out.vulnerable_pairs;
    }
  }
  out.fraction = static_cast<double>(out.vulnerable_pairs) /
                 static_cast<double>(out.total_pairs);
  return out;
}

std::string ThreatModel::label(ColluderKey key) const { return colluder_label(key, topo_->orgs); }

}  // namespace astoria
