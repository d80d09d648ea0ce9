#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "astoria/routing.hpp"
#include "astoria/topology.hpp"

namespace astoria {

struct CircuitSpec {
  AsId src;    // client AS
  AsId entry;  // entry-relay AS
  AsId exit;   // exit-relay AS
  AsId dst;    // destination AS
};

struct ThreatAssessment {
  bool assessable = false;
  bool vulnerable = false;
  std::vector<ColluderKey> attackers;  // sorted, classes present on both legs
};

struct ThreatOptions {
  // Drop the client and destination ASes from their legs before intersecting.
  bool exclude_endpoints = false;
  // Under State mode, only this country counts as an adversary.
  std::optional<std::string> state_country;
};

// Sorted colluder classes observed on one leg.
using ClassSet = std::vector<ColluderKey>;

enum class PairState : std::uint8_t { Safe, Vulnerable, Unassessable };

struct PairGrid {
  std::size_t rows = 0;  // entries
  std::size_t cols = 0;  // exits
  std::vector<PairState> states;  // row-major
  std::size_t safe = 0;
  std::size_t assessable = 0;
  std::optional<double> fraction;  // safe / assessable; empty when nothing assessable

  PairState at(std::size_t entry, std::size_t exit) const { return states[entry * cols + exit]; }
};

struct PathFraction {
  double fraction = 0.0;
  std::size_t vulnerable_pairs = 0;
  std::size_t total_pairs = 0;
  bool truncated = false;
};

// Circuit vulnerability under asymmetric correlation adversaries. Holds
// read-only references to the topology bundle and a shared routing cache;
// memoizes bidirectional path sets. Safe for concurrent use.
class ThreatModel {
 public:
  ThreatModel(const TopologyBundle& topo, RoutingCache& cache, ThreatOptions options = {});

  const TopologyBundle& topology() const noexcept { return *topo_; }
  const ThreatOptions& options() const noexcept { return options_; }
  RoutingCache& routing() const noexcept { return *cache_; }

  // Memoized bidirectional path set; empty when the pair is disconnected.
  PathSet leg(AsId a, AsId b) const;

  // Colluder classes on the leg between `a` and `b`, with `endpoint` removed
  // first when endpoints are excluded. Empty optional when disconnected.
  std::optional<ClassSet> leg_classes(AsId a, AsId b, AsId endpoint,
                                      AdversaryMode mode) const;

  ClassSet classes_of(std::span<const AsId> ases, AsId endpoint, AdversaryMode mode) const;

  ThreatAssessment assess(const CircuitSpec& circuit, AdversaryMode mode) const;

  // Assesses the full entries x exits grid for one (src, dst).
  PairGrid attacker_free_fraction(AsId src, AsId dst, std::span<const AsId> entries,
                                  std::span<const AsId> exits, AdversaryMode mode) const;

  // Fraction of concrete (entry-leg path, exit-leg path) combinations that
  // share a colluder class. Throws std::invalid_argument when the circuit is
  // not vulnerable.
  PathFraction vulnerable_path_fraction(const CircuitSpec& circuit, AdversaryMode mode,
                                        std::size_t cap = kDefaultEnumerateCap) const;

  std::string label(ColluderKey key) const;

 private:
  const TopologyBundle* topo_;
  RoutingCache* cache_;
  ThreatOptions options_;
  std::optional<ColluderKey> state_filter_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::uint64_t, PathSet> legs_;
};

// Sorted-range intersection of two class sets.
ClassSet intersect(const ClassSet& a, const ClassSet& b);
bool intersects(const ClassSet& a, const ClassSet& b);

}  // namespace astoria
