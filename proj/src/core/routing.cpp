#include "astoria/routing.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>

#include "astoria/rng.hpp"

namespace astoria {

std::string_view to_string(PrefClass c) {
  switch (c) {
    case PrefClass::Customer: return "customer";
    case PrefClass::Peer: return "peer";
    case PrefClass::Provider: return "provider";
  }
  return "?";
}

RoutingTree::RoutingTree(const AsGraph& graph, Index dest)
    : graph_(&graph),
      dest_(dest),
      class_(graph.node_count(), PrefClass::Provider),
      length_(graph.node_count(), kUnreachable),
      next_hops_(graph.node_count()) {}

bool RoutingTree::reachable(AsId as) const {
  const auto i = graph_->index_of(as);
  return i && reachable(*i);
}

RoutingTree compute_routing_tree(const AsGraph& graph, AsId dest_as) {
  using Index = RoutingTree::Index;
  constexpr auto kNone = RoutingTree::kUnreachable;
  const Index dest = graph.require_index(dest_as);
  RoutingTree tree(graph, dest);
  auto& len = tree.length_;
  auto& cls = tree.class_;
  auto& hops = tree.next_hops_;
  const auto n = graph.node_count();

  // Phase 1: customer routes climb from the destination to its providers.
  len[dest] = 0;
  cls[dest] = PrefClass::Customer;
  std::deque<Index> queue{dest};
  while (!queue.empty()) {
    const Index u = queue.front();
    queue.pop_front();
    for (Index p : graph.providers(u)) {
      if (len[p] == kNone) {
        len[p] = len[u] + 1;
        cls[p] = PrefClass::Customer;
        hops[p].push_back(u);
        queue.push_back(p);
      } else if (cls[p] == PrefClass::Customer && len[p] == len[u] + 1) {
        hops[p].push_back(u);
      }
    }
  }

  // Phase 2: peers export only customer routes (or their own prefix).
  for (Index v = 0; v < n; ++v) {
    if (len[v] != kNone) continue;
    std::uint32_t best = kNone;
    for (Index u : graph.peers(v)) {
      if (len[u] == kNone || cls[u] != PrefClass::Customer) continue;
      const auto cand = len[u] + 1;
      if (cand < best) {
        best = cand;
        hops[v].clear();
      }
      if (cand == best) hops[v].push_back(u);
    }
    if (best != kNone) {
      len[v] = best;
      cls[v] = PrefClass::Peer;
    }
  }

  // Phase 3: providers export everything to customers; process in order of
  // increasing length so the first assignment is the shortest.
  std::vector<std::vector<Index>> buckets;
  for (Index v = 0; v < n; ++v) {
    if (len[v] == kNone) continue;
    if (len[v] >= buckets.size()) buckets.resize(len[v] + 1);
    buckets[len[v]].push_back(v);
  }
  for (std::size_t level = 0; level < buckets.size(); ++level) {
    for (std::size_t k = 0; k < buckets[level].size(); ++k) {
      const Index u = buckets[level][k];
      for (Index c : graph.customers(u)) {
        if (len[c] == kNone) {
          len[c] = static_cast<std::uint32_t>(level + 1);
          cls[c] = PrefClass::Provider;
          hops[c].push_back(u);
          if (level + 1 >= buckets.size()) buckets.resize(level + 2);
          buckets[level + 1].push_back(c);
        } else if (cls[c] == PrefClass::Provider && len[c] == level + 1) {
          hops[c].push_back(u);
        }
      }
    }
  }

  for (auto& h : hops) std::sort(h.begin(), h.end());
  return tree;
}

RoutingTree apply_tie_break(const RoutingTree& tree, std::uint64_t seed) {
  RoutingTree out = tree;
  const auto& graph = tree.graph();
  for (RoutingTree::Index u = 0; u < out.next_hops_.size(); ++u) {
    auto& h = out.next_hops_[u];
    if (h.size() < 2) continue;
    const auto hash = [&](RoutingTree::Index v) {
      const std::uint64_t pair =
          (std::uint64_t{graph.id_at(u).value} << 32) | graph.id_at(v).value;
      return splitmix64(seed ^ splitmix64(pair));
    };
    const auto best = *std::min_element(h.begin(), h.end(), [&](auto a, auto b) {
      return hash(a) < hash(b);
    });
    h.assign(1, best);
  }
  return out;
}

PathSet::PathSet(std::vector<AsId> ases) : ases_(std::move(ases)) {
  std::sort(ases_.begin(), ases_.end());
  ases_.erase(std::unique(ases_.begin(), ases_.end()), ases_.end());
}

bool PathSet::contains(AsId as) const {
  return std::binary_search(ases_.begin(), ases_.end(), as);
}

PathSet PathSet::merged(const PathSet& other) const {
  std::vector<AsId> out;
  out.reserve(ases_.size() + other.ases_.size());
  std::set_union(ases_.begin(), ases_.end(), other.ases_.begin(), other.ases_.end(),
                 std::back_inserter(out));
  PathSet result;
  result.ases_ = std::move(out);
  return result;
}

PathSet path_set(const RoutingTree& tree, AsId src) {
  const auto& graph = tree.graph();
  const auto start = graph.index_of(src);
  if (!start || !tree.reachable(*start)) return {};
  // Every node reachable through next hops lies on some path to the
  // destination, so the union is the DAG-reachable set.
  std::vector<char> seen(graph.node_count(), 0);
  std::vector<RoutingTree::Index> stack{*start};
  std::vector<RoutingTree::Index> found;
  seen[*start] = 1;
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    found.push_back(u);
    for (auto v : tree.next_hops(u)) {
      if (!seen[v]) {
        seen[v] = 1;
        stack.push_back(v);
      }
    }
  }
  std::vector<AsId> ases;
  ases.reserve(found.size());
  for (auto i : found) ases.push_back(graph.id_at(i));
  return PathSet(std::move(ases));
}

RoutingCache::RoutingCache(const AsGraph& graph, std::size_t capacity)
    : graph_(&graph), capacity_(std::max<std::size_t>(capacity, 1)) {}

std::shared_ptr<const RoutingTree> RoutingCache::tree(AsId dest) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = entries_.find(dest.value); it != entries_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->second;
    }
  }
  auto fresh = std::make_shared<const RoutingTree>(compute_routing_tree(*graph_, dest));
  std::lock_guard lock(mutex_);
  ++misses_;
  if (auto it = entries_.find(dest.value); it != entries_.end()) return it->second->second;
  lru_.emplace_front(dest.value, fresh);
  entries_[dest.value] = lru_.begin();
  while (lru_.size() > capacity_) {
    entries_.erase(lru_.back().first);
    lru_.pop_back();
  }
  return fresh;
}

std::size_t RoutingCache::size() const {
  std::lock_guard lock(mutex_);
  return lru_.size();
}

std::uint64_t RoutingCache::misses() const {
  std::lock_guard lock(mutex_);
  return misses_;
}

PathSet bidirectional_path_set(RoutingCache& cache, AsId a, AsId b) {
  const auto& graph = cache.graph();
  graph.require_index(a);
  graph.require_index(b);
  if (a == b) return PathSet({a});
  const auto to_b = cache.tree(b);
  const auto to_a = cache.tree(a);
  return path_set(*to_b, a).merged(path_set(*to_a, b));
}

PathEnumeration enumerate_paths(const RoutingTree& tree, AsId src, std::size_t cap) {
  PathEnumeration out;
  const auto& graph = tree.graph();
  const auto start = graph.index_of(src);
  if (!start || !tree.reachable(*start) || cap == 0) {
    out.truncated = cap == 0 && start && tree.reachable(*start);
    return out;
  }
  struct Frame {
    RoutingTree::Index node;
    std::size_t next = 0;
  };
  std::vector<Frame> stack{{*start}};
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.node == tree.dest_index()) {
      if (out.paths.size() == cap) {
        out.truncated = true;
        return out;
      }
      std::vector<AsId> path;
      path.reserve(stack.size());
      for (const auto& f : stack) path.push_back(graph.id_at(f.node));
      out.paths.push_back(std::move(path));
      stack.pop_back();
      continue;
    }
    const auto hops = tree.next_hops(top.node);
    if (top.next == hops.size()) {
      stack.pop_back();
      continue;
    }
    const auto v = hops[top.next++];
    stack.push_back({v});
  }
  return out;
}

}  // namespace astoria
