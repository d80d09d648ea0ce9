#include "astoria/selection.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "astoria/error.hpp"
#include "astoria/text.hpp"

namespace astoria {

namespace {

std::vector<double> bandwidths(const Consensus& c, std::span<const std::size_t> indices) {
  std::vector<double> w;
  w.reserve(indices.size());
  for (auto i : indices) w.push_back(c.relay(i).bandwidth);
  return w;
}

std::size_t pick(std::span<const std::size_t> indices, std::span<const double> weights,
                 Rng& rng, const char* role) {
  const auto k = sample_weighted(weights, rng);
  if (k == weights.size())
    throw SelectionError(std::string("no ") + role + " candidate with positive weight");
  return indices[k];
}

bool compatible(const Consensus& c, const RelayTriple& t) {
  return !relays_conflict(c.relay(t.entry), c.relay(t.middle)) &&
         !relays_conflict(c.relay(t.entry), c.relay(t.exit)) &&
         !relays_conflict(c.relay(t.middle), c.relay(t.exit));
}

std::uint8_t parse_flags(std::string_view field, const std::string& src, std::size_t line) {
  std::uint8_t flags = 0;
  for (auto tok : text::split(field, ';')) {
    tok = text::trim(tok);
    if (tok.empty()) continue;
    if (tok == "Guard") flags |= kFlagGuard;
    else if (tok == "Exit") flags |= kFlagExit;
    else if (tok == "Fast") flags |= kFlagFast;
    else if (tok == "Stable") flags |= kFlagStable;
    else throw ParseError(src, line, "unknown relay flag '" + std::string(tok) + "'");
  }
  return flags;
}

std::optional<std::uint16_t> parse_net16(std::string_view field) {
  const auto parts = text::split(text::trim(field), '.');
  if (parts.size() != 2) return std::nullopt;
  const auto hi = text::parse_uint(parts[0]);
  const auto lo = text::parse_uint(parts[1]);
  if (!hi || !lo || *hi > 255 || *lo > 255) return std::nullopt;
  return static_cast<std::uint16_t>((*hi << 8) | *lo);
}

}  // namespace

bool relays_conflict(const Relay& a, const Relay& b) {
  if (a.fingerprint == b.fingerprint) return true;
  if (a.net16 == b.net16) return true;
  return !a.family.empty() && a.family == b.family;
}

std::string format_net16(std::uint16_t net16) {
  return std::to_string(net16 >> 8) + "." + std::to_string(net16 & 0xff);
}

Consensus::Consensus(std::vector<Relay> relays, std::string timestamp)
    : relays_(std::move(relays)), timestamp_(std::move(timestamp)) {
  if (relays_.empty()) throw std::invalid_argument("consensus has no relays");
  for (std::size_t i = 0; i < relays_.size(); ++i) {
    const Relay& r = relays_[i];
    if (r.fingerprint.empty()) throw std::invalid_argument("relay with empty fingerprint");
    if (!(r.bandwidth >= 0.0) || !std::isfinite(r.bandwidth))
      throw std::invalid_argument("relay " + r.fingerprint + " has invalid bandwidth");
    if (r.asn.value == 0) throw std::invalid_argument("relay " + r.fingerprint + " has AS 0");
    if (!by_fingerprint_.emplace(r.fingerprint, i).second)
      throw std::invalid_argument("duplicate fingerprint " + r.fingerprint);
    if (r.has(kFlagGuard)) guards_.push_back(i);
    if (r.has(kFlagExit)) exits_.push_back(i);
  }
}

std::optional<std::size_t> Consensus::find(std::string_view fingerprint) const {
  if (auto it = by_fingerprint_.find(std::string(fingerprint)); it != by_fingerprint_.end())
    return it->second;
  return std::nullopt;
}

Consensus load_consensus(std::istream& in, std::string_view source) {
  const std::string src(source);
  std::vector<Relay> relays;
  std::string timestamp;
  std::string line;
  std::size_t number = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++number;
    const auto t = text::trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      constexpr std::string_view kTag = "# timestamp:";
      if (t.substr(0, kTag.size()) == kTag) timestamp = text::trim(t.substr(kTag.size()));
      continue;
    }
    const auto fields = text::split(t, ',');
    if (!header) {
      const std::vector<std::string_view> expected{"fingerprint", "asn",   "bandwidth",
                                                   "flags",       "net16", "family"};
      if (fields.size() != expected.size() ||
          !std::equal(fields.begin(), fields.end(), expected.begin(),
                      [](auto a, auto b) { return text::trim(a) == b; }))
        throw ParseError(src, number,
                         "expected header fingerprint,asn,bandwidth,flags,net16,family");
      header = true;
      continue;
    }
    if (fields.size() != 6) throw ParseError(src, number, "expected 6 comma-separated fields");
    Relay r;
    r.fingerprint = std::string(text::trim(fields[0]));
    if (r.fingerprint.empty()) throw ParseError(src, number, "empty fingerprint");
    const auto asn = text::parse_uint(fields[1]);
    if (!asn || *asn == 0 || *asn > UINT32_MAX) throw ParseError(src, number, "invalid AS number");
    r.asn = AsId(static_cast<std::uint32_t>(*asn));
    const auto bw = text::parse_double(fields[2]);
    if (!bw || !(*bw >= 0.0) || !std::isfinite(*bw))
      throw ParseError(src, number, "bandwidth must be a nonnegative number");
    r.bandwidth = *bw;
    r.flags = parse_flags(fields[3], src, number);
    const auto net = parse_net16(fields[4]);
    if (!net) throw ParseError(src, number, "net16 must be a dotted two-octet prefix");
    r.net16 = *net;
    r.family = std::string(text::trim(fields[5]));
    relays.push_back(std::move(r));
  }
  if (!header) throw ParseError(src, number, "missing header line");
  try {
    return Consensus(std::move(relays), std::move(timestamp));
  } catch (const std::invalid_argument& e) {
    throw ParseError(src, number, e.what());
  }
}

GuardSet choose_guards(const Consensus& consensus, std::size_t k, Rng& rng) {
  if (k < 1 || k > 3) throw std::invalid_argument("guard set size must be 1, 2 or 3");
  GuardSet set;
  const auto& pool = consensus.guards();
  std::vector<double> weights;
  while (set.guards.size() < k) {
    weights.assign(pool.size(), 0.0);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const Relay& cand = consensus.relay(pool[i]);
      const bool clash = std::any_of(set.guards.begin(), set.guards.end(), [&](auto g) {
        return relays_conflict(cand, consensus.relay(g));
      });
      if (!clash) weights[i] = cand.bandwidth;
    }
    const auto pick_at = sample_weighted(weights, rng);
    if (pick_at == weights.size())
      throw SelectionError("only " + std::to_string(set.guards.size()) +
                           " compatible guards available, " + std::to_string(k) + " requested");
    set.guards.push_back(pool[pick_at]);
  }
  return set;
}

RelayTriple vanilla_select(const Consensus& consensus, const GuardSet& guards, Rng& rng) {
  if (guards.guards.empty()) throw SelectionError("empty guard set");
  if (consensus.exits().empty()) throw SelectionError("consensus has no exit relays");
  std::vector<std::size_t> all(consensus.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto entry_w = bandwidths(consensus, guards.guards);
  const auto exit_w = bandwidths(consensus, consensus.exits());
  const auto middle_w = bandwidths(consensus, all);
  for (int attempt = 0; attempt < kMaxSelectionAttempts; ++attempt) {
    RelayTriple t;
    t.entry = pick(guards.guards, entry_w, rng, "entry");
    t.exit = pick(consensus.exits(), exit_w, rng, "exit");
    t.middle = pick(all, middle_w, rng, "middle");
    if (compatible(consensus, t)) return t;
  }
  throw SelectionError("no compatible relay triple after " +
                       std::to_string(kMaxSelectionAttempts) + " attempts");
}

RelayTriple uniform_select(const Consensus& consensus, Rng& rng) {
  if (consensus.guards().empty()) throw SelectionError("consensus has no guard relays");
  if (consensus.exits().empty()) throw SelectionError("consensus has no exit relays");
  const auto uniform_index = [&](std::size_t n) {
    return std::min(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)), n - 1);
  };
  for (int attempt = 0; attempt < kMaxSelectionAttempts; ++attempt) {
    RelayTriple t;
    t.entry = consensus.guards()[uniform_index(consensus.guards().size())];
    t.exit = consensus.exits()[uniform_index(consensus.exits().size())];
    t.middle = uniform_index(consensus.size());
    if (compatible(consensus, t)) return t;
  }
  throw SelectionError("no compatible relay triple after " +
                       std::to_string(kMaxSelectionAttempts) + " attempts");
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::Bandwidth: return "D_bw";
    case Provenance::LinearProgram: return "D_lp";
    case Provenance::Vanilla: return "vanilla";
    case Provenance::Uniform: return "uniform";
  }
  return "?";
}

AstoriaPlan plan_astoria(const Consensus& consensus, const GuardSet& guards, AsId src, AsId dst,
                         const ThreatModel& threat, const AstoriaConfig& cfg) {
  if (guards.guards.empty()) throw SelectionError("empty guard set");
  if (!(cfg.safe_threshold >= 0.0 && cfg.safe_threshold <= 1.0))
    throw std::invalid_argument("safe threshold must lie in [0, 1]");

  std::unordered_map<std::uint32_t, std::optional<ClassSet>> entry_legs;
  std::unordered_map<std::uint32_t, std::optional<ClassSet>> exit_legs;
  const auto entry_leg = [&](AsId as) -> const std::optional<ClassSet>& {
    auto it = entry_legs.find(as.value);
    if (it == entry_legs.end())
      it = entry_legs.emplace(as.value, threat.leg_classes(src, as, src, cfg.mode)).first;
    return it->second;
  };
  const auto exit_leg = [&](AsId as) -> const std::optional<ClassSet>& {
    auto it = exit_legs.find(as.value);
    if (it == exit_legs.end())
      it = exit_legs.emplace(as.value, threat.leg_classes(as, dst, dst, cfg.mode)).first;
    return it->second;
  };

  AstoriaPlan plan;
  std::vector<AstoriaPlan::Pair> safe;
  std::vector<AstoriaPlan::Pair> unsafe;
  std::vector<ClassSet> unsafe_attackers;
  for (auto e : guards.guards) {
    const Relay& entry = consensus.relay(e);
    for (auto x : consensus.exits()) {
      const Relay& exit = consensus.relay(x);
      if (relays_conflict(entry, exit)) continue;
      ++plan.candidate_pairs;
      const auto& el = entry_leg(entry.asn);
      const auto& xl = exit_leg(exit.asn);
      if (!el || !xl) continue;
      ++plan.assessable_pairs;
      auto attackers = intersect(*el, *xl);
      if (attackers.empty()) {
        safe.push_back({e, x});
      } else {
        unsafe.push_back({e, x});
        unsafe_attackers.push_back(std::move(attackers));
      }
    }
  }
  plan.safe_pairs = safe.size();
  if (plan.assessable_pairs == 0)
    throw SelectionError("no assessable (entry, exit) pair toward AS " +
                         std::to_string(dst.value));

  const double safe_ratio =
      static_cast<double>(safe.size()) / static_cast<double>(plan.assessable_pairs);
  if (!safe.empty() && safe_ratio >= cfg.safe_threshold) {
    plan.provenance = Provenance::Bandwidth;
    plan.pairs = std::move(safe);
    double total = 0.0;
    for (const auto& p : plan.pairs) {
      const double w = consensus.relay(p.entry).bandwidth * consensus.relay(p.exit).bandwidth;
      plan.weights.push_back(w);
      total += w;
    }
    if (total > 0.0) {
      for (double& w : plan.weights) w /= total;
    } else {
      plan.weights.assign(plan.pairs.size(), 1.0 / static_cast<double>(plan.pairs.size()));
    }
    return plan;
  }

  // No usable safe pair: minimax LP over the vulnerable pairs.
  std::set<ColluderKey> keys;
  for (const auto& a : unsafe_attackers) keys.insert(a.begin(), a.end());
  std::vector<ColluderKey> ordered(keys.begin(), keys.end());
  std::vector<std::string> labels;
  std::vector<std::vector<std::uint8_t>> incidence(ordered.size(),
                                                   std::vector<std::uint8_t>(unsafe.size(), 0));
  for (const auto& k : ordered) labels.push_back(threat.label(k));
  for (std::size_t j = 0; j < unsafe.size(); ++j) {
    for (const auto& k : unsafe_attackers[j]) {
      const auto row = std::lower_bound(ordered.begin(), ordered.end(), k) - ordered.begin();
      incidence[static_cast<std::size_t>(row)][j] = 1;
    }
  }
  SelectionProblem problem(unsafe.size(), std::move(labels), std::move(incidence));
  const auto dist = solve_minimax(problem);
  plan.provenance = Provenance::LinearProgram;
  plan.pairs = std::move(unsafe);
  plan.weights = dist.probs;
  plan.lp_objective = dist.objective;
  plan.problem = std::move(problem);
  return plan;
}

std::size_t choose_middle(const Consensus& consensus, std::size_t entry, std::size_t exit,
                          Rng& rng) {
  std::vector<std::size_t> all(consensus.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto w = bandwidths(consensus, all);
  for (int attempt = 0; attempt < kMaxSelectionAttempts; ++attempt) {
    const auto m = pick(all, w, rng, "middle");
    if (!relays_conflict(consensus.relay(m), consensus.relay(entry)) &&
        !relays_conflict(consensus.relay(m), consensus.relay(exit)))
      return m;
  }
  throw SelectionError("no compatible middle relay after " +
                       std::to_string(kMaxSelectionAttempts) + " attempts");
}

AstoriaSelection sample_plan(const Consensus& consensus, const AstoriaPlan& plan, Rng& rng) {
  const auto k = sample_weighted(plan.weights, rng);
  if (k == plan.weights.size()) throw SelectionError("empty selection distribution");
  AstoriaSelection out;
  out.relays.entry = plan.pairs[k].entry;
  out.relays.exit = plan.pairs[k].exit;
  out.relays.middle = choose_middle(consensus, out.relays.entry, out.relays.exit, rng);
  out.provenance = plan.provenance;
  out.safe_pairs = plan.safe_pairs;
  out.assessable_pairs = plan.assessable_pairs;
  out.lp_objective = plan.lp_objective;
  return out;
}

namespace {

void verify_choice(const Consensus& consensus, const AstoriaSelection& s, AsId src, AsId dst,
                   const ThreatModel& threat, const AstoriaConfig& cfg) {
  if (!cfg.verify_safety || s.provenance != Provenance::Bandwidth) return;
  const CircuitSpec spec{src, consensus.relay(s.relays.entry).asn,
                         consensus.relay(s.relays.exit).asn, dst};
  if (threat.assess(spec, cfg.mode).vulnerable)
    throw std::logic_error("D_bw selection produced a vulnerable circuit");
}

}  // namespace

AstoriaSelection astoria_select(const Consensus& consensus, const GuardSet& guards, AsId src,
                                AsId dst, const ThreatModel& threat, Rng& rng,
                                const AstoriaConfig& cfg) {
  const auto plan = plan_astoria(consensus, guards, src, dst, threat, cfg);
  auto s = sample_plan(consensus, plan, rng);
  verify_choice(consensus, s, src, dst, threat, cfg);
  return s;
}

std::vector<double> perfect_balance_distribution(const Consensus& consensus) {
  double total = 0.0;
  for (const auto& r : consensus.relays()) total += r.bandwidth;
  if (!(total > 0.0)) throw std::invalid_argument("consensus has zero total bandwidth");
  std::vector<double> share;
  share.reserve(consensus.size());
  for (const auto& r : consensus.relays()) share.push_back(r.bandwidth / total);
  return share;
}

BuiltCircuit VanillaSelector::build(AsId, Rng& rng) {
  BuiltCircuit c;
  c.relays = vanilla_select(*consensus_, guards_, rng);
  c.provenance = Provenance::Vanilla;
  return c;
}

BuiltCircuit UniformSelector::build(AsId, Rng& rng) {
  BuiltCircuit c;
  c.relays = uniform_select(*consensus_, rng);
  c.provenance = Provenance::Uniform;
  return c;
}

const AstoriaPlan& AstoriaSelector::plan(AsId dst) {
  auto it = plans_.find(dst.value);
  if (it == plans_.end())
    it = plans_.emplace(dst.value, plan_astoria(*consensus_, guards_, src_, dst, *threat_, cfg_))
             .first;
  return it->second;
}

BuiltCircuit AstoriaSelector::build(AsId dst, Rng& rng) {
  const auto s = sample_plan(*consensus_, plan(dst), rng);
  verify_choice(*consensus_, s, src_, dst, *threat_, cfg_);
  BuiltCircuit c;
  c.relays = s.relays;
  c.provenance = s.provenance;
  c.safe_pairs = s.safe_pairs;
  c.assessable_pairs = s.assessable_pairs;
  c.lp_objective = s.lp_objective;
  return c;
}

std::size_t CircuitPool::insert(Circuit circuit) {
  const auto& t = circuit.relays;
  if (t.entry >= consensus_->size() || t.middle >= consensus_->size() ||
      t.exit >= consensus_->size())
    throw std::logic_error("circuit references an unknown relay");
  if (!compatible(*consensus_, t))
    throw std::logic_error("circuit relays share a fingerprint, /16 or family");
  circuits_.push_back(std::move(circuit));
  return circuits_.size() - 1;
}

bool CircuitPool::live(std::size_t i, std::size_t event) const {
  if (cfg_.max_age_events == 0) return true;
  return event - circuits_[i].created_at < cfg_.max_age_events;
}

PoolResult get_or_build_circuit(CircuitPool& pool, Selector& selector, AsId dst,
                                std::size_t event, Rng& rng) {
  const auto policy = selector.policy();
  const auto& circuits = pool.circuits();
  for (std::size_t k = circuits.size(); k-- > 0;) {
    if (!pool.live(k, event)) continue;
    const Circuit& c = circuits[k];
    const bool usable = policy == PoolPolicy::PerDestination
                            ? c.dst == dst
                            : c.requests_served < pool.config().max_requests_per_circuit;
    if (usable) {
      ++pool.at(k).requests_served;
      return {k, false};
    }
  }
  Circuit c;
  c.origin = selector.build(dst, rng);
  c.relays = c.origin.relays;
  if (policy == PoolPolicy::PerDestination) c.dst = dst;
  c.requests_served = 1;
  c.created_at = event;
  return {pool.insert(std::move(c)), true};
}

}  // namespace astoria
