#pragma once

#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "astoria/topology.hpp"

namespace astoria {

// Local preference of a route, ordered so that a larger value is preferred.
enum class PrefClass : std::uint8_t { Provider = 0, Peer = 1, Customer = 2 };

std::string_view to_string(PrefClass c);

// Multipath Gao-Rexford routes toward one destination. For every AS that can
// reach the destination it records the best (class, length) under local
// preference then shortest path, and every neighbor achieving it. The
// destination itself has class Customer, length 0 and no next hops.
class RoutingTree {
 public:
  using Index = AsGraph::Index;
  static constexpr std::uint32_t kUnreachable = UINT32_MAX;

  RoutingTree(const AsGraph& graph, Index dest);

  const AsGraph& graph() const noexcept { return *graph_; }
  AsId dest() const { return graph_->id_at(dest_); }
  Index dest_index() const noexcept { return dest_; }

  bool reachable(Index i) const { return length_[i] != kUnreachable; }
  bool reachable(AsId as) const;
  PrefClass pref_class(Index i) const { return class_[i]; }
  std::uint32_t length(Index i) const { return length_[i]; }
  std::span<const Index> next_hops(Index i) const { return next_hops_[i]; }

 private:
  friend RoutingTree compute_routing_tree(const AsGraph&, AsId);
  friend RoutingTree apply_tie_break(const RoutingTree&, std::uint64_t);

  const AsGraph* graph_;
  Index dest_;
  std::vector<PrefClass> class_;
  std::vector<std::uint32_t> length_;
  std::vector<std::vector<Index>> next_hops_;
};

// Three-phase propagation (customer routes, then peer routes, then provider
// routes) honoring the valley-free export policy. Linear in |V| + |E|.
// Throws std::out_of_range when `dest` is not in the graph.
RoutingTree compute_routing_tree(const AsGraph& graph, AsId dest);

// Single-path variant: every AS keeps only the tied next hop with the lowest
// seeded hash of (AS, next hop).
RoutingTree apply_tie_break(const RoutingTree& tree, std::uint64_t seed);

// Set of ASes on any best path between two ASes, endpoints included, sorted.
// Empty means the endpoints are not connected.
class PathSet {
 public:
  PathSet() = default;
  explicit PathSet(std::vector<AsId> ases);

  bool empty() const noexcept { return ases_.empty(); }
  std::size_t size() const noexcept { return ases_.size(); }
  bool contains(AsId as) const;
  std::span<const AsId> ases() const noexcept { return ases_; }

  PathSet merged(const PathSet& other) const;

  friend bool operator==(const PathSet&, const PathSet&) = default;

 private:
  std::vector<AsId> ases_;
};

// Union of ASes over all tree paths from `src` to the destination.
PathSet path_set(const RoutingTree& tree, AsId src);

// Bounded LRU of routing trees keyed by destination. Safe for concurrent use.
class RoutingCache {
 public:
  static constexpr std::size_t kDefaultCapacity = 4096;

  explicit RoutingCache(const AsGraph& graph, std::size_t capacity = kDefaultCapacity);

  const AsGraph& graph() const noexcept { return *graph_; }
  std::shared_ptr<const RoutingTree> tree(AsId dest);

  std::size_t size() const;
  std::size_t capacity() const noexcept { return capacity_; }
  std::uint64_t misses() const;

 private:
  using Entry = std::pair<std::uint32_t, std::shared_ptr<const RoutingTree>>;

  const AsGraph* graph_;
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::list<Entry> lru_;
  std::unordered_map<std::uint32_t, std::list<Entry>::iterator> entries_;
  std::uint64_t misses_ = 0;
};

// path_set(a -> b) united with path_set(b -> a). Empty when neither
// direction connects.
PathSet bidirectional_path_set(RoutingCache& cache, AsId a, AsId b);

struct PathEnumeration {
  std::vector<std::vector<AsId>> paths;
  bool truncated = false;
};

inline constexpr std::size_t kDefaultEnumerateCap = 10000;

// Depth-first enumeration of tree paths from `src` in ascending next-hop
// order. Stops after `cap` paths and sets `truncated`. Unreachable sources
// produce no paths.
PathEnumeration enumerate_paths(const RoutingTree& tree, AsId src,
                                std::size_t cap = kDefaultEnumerateCap);

}  // namespace astoria
