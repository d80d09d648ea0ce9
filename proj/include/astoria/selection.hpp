#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "astoria/lp.hpp"
#include "astoria/rng.hpp"
#include "astoria/threat.hpp"
#include "astoria/topology.hpp"

namespace astoria {

enum RelayFlag : std::uint8_t {
  kFlagGuard = 1 << 0,
  kFlagExit = 1 << 1,
  kFlagFast = 1 << 2,
  kFlagStable = 1 << 3,
};

struct Relay {
  std::string fingerprint;
  AsId asn;
  double bandwidth = 0.0;
  std::uint8_t flags = 0;
  std::uint16_t net16 = 0;
  std::string family;  // empty when the relay declares no family

  bool has(RelayFlag f) const { return (flags & f) != 0; }
};

// Relays that may not share a circuit: same fingerprint, same /16, or same
// declared family.
bool relays_conflict(const Relay& a, const Relay& b);

std::string format_net16(std::uint16_t net16);

class Consensus {
 public:
  // Throws std::invalid_argument on an empty list, duplicate fingerprints or
  // negative bandwidth.
  explicit Consensus(std::vector<Relay> relays, std::string timestamp = {});

  std::span<const Relay> relays() const noexcept { return relays_; }
  const Relay& relay(std::size_t i) const { return relays_[i]; }
  std::size_t size() const noexcept { return relays_.size(); }
  const std::string& timestamp() const noexcept { return timestamp_; }
  std::optional<std::size_t> find(std::string_view fingerprint) const;

  const std::vector<std::size_t>& guards() const noexcept { return guards_; }
  const std::vector<std::size_t>& exits() const noexcept { return exits_; }

 private:
  std::vector<Relay> relays_;
  std::string timestamp_;
  std::unordered_map<std::string, std::size_t> by_fingerprint_;
  std::vector<std::size_t> guards_;
  std::vector<std::size_t> exits_;
};

// CSV with header `fingerprint,asn,bandwidth,flags,net16,family`. A comment
// line `# timestamp: <label>` sets the consensus label. Throws ParseError.
Consensus load_consensus(std::istream& in, std::string_view source = "<consensus>");

// Relay indices into a consensus; 1 to 3 mutually compatible guards.
struct GuardSet {
  std::vector<std::size_t> guards;
};

GuardSet choose_guards(const Consensus& consensus, std::size_t k, Rng& rng);

struct RelayTriple {
  std::size_t entry = 0;
  std::size_t middle = 0;
  std::size_t exit = 0;

  friend bool operator==(const RelayTriple&, const RelayTriple&) = default;
};

inline constexpr int kMaxSelectionAttempts = 100;

RelayTriple vanilla_select(const Consensus& consensus, const GuardSet& guards, Rng& rng);
RelayTriple uniform_select(const Consensus& consensus, Rng& rng);

enum class Provenance : std::uint8_t { Bandwidth, LinearProgram, Vanilla, Uniform };
std::string_view to_string(Provenance p);

struct AstoriaConfig {
  AdversaryMode mode = AdversaryMode::SingleAs;
  // Safe pairs are used only when safe/assessable reaches this ratio.
  double safe_threshold = 0.0;
  // Re-assess every D_bw choice and throw std::logic_error if it is unsafe.
  bool verify_safety = false;
};

// The distribution Astoria samples (entry, exit) pairs from for one (src, dst).
struct AstoriaPlan {
  struct Pair {
    std::size_t entry;
    std::size_t exit;
  };
  std::vector<Pair> pairs;
  std::vector<double> weights;  // same length as pairs; normalized
  Provenance provenance = Provenance::Bandwidth;
  std::size_t candidate_pairs = 0;
  std::size_t assessable_pairs = 0;
  std::size_t safe_pairs = 0;
  std::optional<double> lp_objective;
  std::optional<SelectionProblem> problem;  // set for D_lp plans
};

AstoriaPlan plan_astoria(const Consensus& consensus, const GuardSet& guards, AsId src, AsId dst,
                         const ThreatModel& threat, const AstoriaConfig& cfg);

struct AstoriaSelection {
  RelayTriple relays;
  Provenance provenance = Provenance::Bandwidth;
  std::size_t safe_pairs = 0;
  std::size_t assessable_pairs = 0;
  std::optional<double> lp_objective;
};

// Samples a triple from a plan: the (entry, exit) pair from the plan's
// weights, the middle relay bandwidth-weighted among compatible relays.
AstoriaSelection sample_plan(const Consensus& consensus, const AstoriaPlan& plan, Rng& rng);

AstoriaSelection astoria_select(const Consensus& consensus, const GuardSet& guards, AsId src,
                                AsId dst, const ThreatModel& threat, Rng& rng,
                                const AstoriaConfig& cfg);

// Bandwidth-weighted middle relay compatible with `entry` and `exit`.
std::size_t choose_middle(const Consensus& consensus, std::size_t entry, std::size_t exit,
                          Rng& rng);

// Expected share of traffic per relay under perfect load balancing.
std::vector<double> perfect_balance_distribution(const Consensus& consensus);

// ---- circuit pooling -------------------------------------------------------

enum class PoolPolicy : std::uint8_t { PerDestination, RequestCap };

struct BuiltCircuit {
  RelayTriple relays;
  Provenance provenance = Provenance::Vanilla;
  std::size_t safe_pairs = 0;
  std::size_t assessable_pairs = 0;
  std::optional<double> lp_objective;
};

class Selector {
 public:
  virtual ~Selector() = default;
  virtual BuiltCircuit build(AsId dst, Rng& rng) = 0;
  virtual PoolPolicy policy() const = 0;
  virtual std::string_view name() const = 0;
};

class VanillaSelector final : public Selector {
 public:
  VanillaSelector(const Consensus& consensus, GuardSet guards)
      : consensus_(&consensus), guards_(std::move(guards)) {}
  BuiltCircuit build(AsId dst, Rng& rng) override;
  PoolPolicy policy() const override { return PoolPolicy::RequestCap; }
  std::string_view name() const override { return "vanilla"; }

 private:
  const Consensus* consensus_;
  GuardSet guards_;
};

class UniformSelector final : public Selector {
 public:
  explicit UniformSelector(const Consensus& consensus) : consensus_(&consensus) {}
  BuiltCircuit build(AsId dst, Rng& rng) override;
  PoolPolicy policy() const override { return PoolPolicy::RequestCap; }
  std::string_view name() const override { return "uniform"; }

 private:
  const Consensus* consensus_;
};

// Plans are memoized per destination; the pair is sampled fresh per build.
class AstoriaSelector final : public Selector {
 public:
  AstoriaSelector(const Consensus& consensus, GuardSet guards, AsId src,
                  const ThreatModel& threat, AstoriaConfig cfg)
      : consensus_(&consensus), guards_(std::move(guards)), src_(src), threat_(&threat),
        cfg_(cfg) {}
  BuiltCircuit build(AsId dst, Rng& rng) override;
  PoolPolicy policy() const override { return PoolPolicy::PerDestination; }
  std::string_view name() const override { return "astoria"; }
  const AstoriaPlan& plan(AsId dst);

 private:
  const Consensus* consensus_;
  GuardSet guards_;
  AsId src_;
  const ThreatModel* threat_;
  AstoriaConfig cfg_;
  std::map<std::uint32_t, AstoriaPlan> plans_;
};

struct Circuit {
  RelayTriple relays;
  std::optional<AsId> dst;  // set for per-destination circuits
  std::size_t requests_served = 0;
  std::size_t created_at = 0;
  BuiltCircuit origin;
};

struct PoolConfig {
  std::size_t max_requests_per_circuit = 50;
  // A circuit created at event e is usable while event - e < max_age_events;
  // 0 means circuits never expire.
  std::size_t max_age_events = 0;
};

class CircuitPool {
 public:
  CircuitPool(const Consensus& consensus, PoolConfig cfg = {})
      : consensus_(&consensus), cfg_(cfg) {}

  // Throws std::logic_error if the circuit's relays are not pairwise compatible.
  std::size_t insert(Circuit circuit);

  const std::vector<Circuit>& circuits() const noexcept { return circuits_; }
  Circuit& at(std::size_t i) { return circuits_[i]; }
  const PoolConfig& config() const noexcept { return cfg_; }
  bool live(std::size_t i, std::size_t event) const;

 private:
  const Consensus* consensus_;
  PoolConfig cfg_;
  std::vector<Circuit> circuits_;
};

struct PoolResult {
  std::size_t circuit = 0;
  bool built = false;
};

// Reuses a live circuit when the selector's policy allows it, otherwise
// builds one. The returned circuit's request count includes this request.
PoolResult get_or_build_circuit(CircuitPool& pool, Selector& selector, AsId dst,
                                std::size_t event, Rng& rng);

}  // namespace astoria
