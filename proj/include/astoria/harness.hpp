#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "astoria/selection.hpp"
#include "astoria/threat.hpp"
#include "astoria/topology.hpp"

namespace astoria {

// ---- inputs ------------------------------------------------------------

struct TraceRequest {
  std::string site;
  AsId dst;
  bool is_main = false;
  std::size_t line = 0;  // source line, for diagnostics
};

// CSV `site,dst_asn,is_main` with that header. Every site must have exactly
// one main request. Throws ParseError.
std::vector<TraceRequest> load_traces(std::istream& in, std::string_view source = "<traces>");

struct ClientAs {
  std::string label;
  AsId asn;
  std::size_t line = 0;
};

// `label,asn` per line; an optional `label,asn` header is skipped.
std::vector<ClientAs> load_clients(std::istream& in, std::string_view source = "<clients>");

// ---- configuration -----------------------------------------------------

enum class ExperimentKind : std::uint8_t { E1, E2, E3, E4, E5 };
enum class SelectorKind : std::uint8_t { Vanilla, Uniform, Astoria };

std::string_view to_string(ExperimentKind k);
std::string_view to_string(SelectorKind k);
std::optional<ExperimentKind> parse_experiment_kind(std::string_view s);
std::optional<SelectorKind> parse_selector_kind(std::string_view s);

bool is_live_style(ExperimentKind k);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::E1;
  SelectorKind selector = SelectorKind::Vanilla;
  AdversaryMode mode = AdversaryMode::SingleAs;
  std::size_t guard_size = 3;
  std::vector<std::size_t> guard_sizes{1, 2, 3};
  std::size_t guard_sets = 20;
  std::uint64_t seed = 42;
  std::size_t workers = 0;  // 0: hardware concurrency
  std::size_t enumerate_cap = kDefaultEnumerateCap;
  std::size_t max_requests_per_circuit = 50;
  std::size_t max_circuit_age = 0;
  double safe_threshold = 0.0;
  bool tightness = true;
  bool verify_safety = false;
  ThreatOptions threat;
  std::optional<std::uint64_t> population;  // |X| for the middle-relay analysis
  std::optional<double> p_mid;              // default: largest bandwidth share
};

// Throws ConfigError when fields contradict each other.
void validate(const ExperimentConfig& cfg);

// ---- statistics --------------------------------------------------------

struct ConfidenceInterval {
  double mean = 0.0;
  double half_width = 0.0;
  double low = 0.0;
  double high = 0.0;
};

// mean +/- z * s / sqrt(n), s with n - 1 denominator. Supported levels:
// 0.90, 0.95, 0.99. Throws std::invalid_argument for fewer than 2 samples.
ConfidenceInterval confidence_interval(std::span<const double> samples, double level = 0.99);

struct MiddleRelayRisk {
  double expected_linkable = 0.0;  // E[S_en,ex]
  double observations = 0.0;       // n
  std::uint64_t observations_floor = 0;
  double probability = 0.0;        // p_mid ^ floor(n)
};

// Throws std::invalid_argument when a precondition fails, including
// E[S] <= 1 where the formula degenerates.
MiddleRelayRisk middle_relay_risk(std::uint64_t x_count, std::uint64_t d_count, double mu_low,
                                  double p_mid);

struct CdfPoint {
  double value = 0.0;
  double cumulative = 0.0;
};

// One point per distinct value: fraction of samples <= value.
std::vector<CdfPoint> empirical_cdf(std::vector<double> values);

// ---- live-style runs (E1, E3, E4) ---------------------------------------

struct LiveCounts {
  std::size_t requests = 0;
  std::size_t circuits_built = 0;
  std::size_t lp_circuits = 0;
  std::size_t units = 0;  // distinct (circuit, destination) usages
  std::size_t units_assessable = 0;
  std::size_t units_vulnerable = 0;
  std::size_t sites = 0;
  std::size_t sites_main_assessable = 0;
  std::size_t sites_main_vulnerable = 0;
  std::size_t sites_any_assessable = 0;
  std::size_t sites_any_vulnerable = 0;

  void merge(const LiveCounts& other);
  std::optional<double> websites_main_vulnerable() const;
  std::optional<double> websites_any_vulnerable() const;
  std::optional<double> circuits_vulnerable() const;
};

struct CircuitLogRow {
  AsId client;
  std::string site;
  AsId dst;
  std::size_t circuit = 0;  // per-client circuit id
  bool built = false;
  std::size_t entry = 0;  // relay indices
  std::size_t middle = 0;
  std::size_t exit = 0;
  Provenance provenance = Provenance::Vanilla;
  std::optional<bool> vulnerable;  // empty when unassessable
  std::vector<std::string> attackers;
};

struct ClientLiveResult {
  ClientAs client;
  std::uint64_t seed = 0;
  std::vector<std::size_t> guards;
  LiveCounts counts;
  std::vector<CircuitLogRow> log;
};

struct LoadBalanceReport {
  std::size_t selections = 0;
  std::vector<double> empirical;  // per relay
  std::vector<double> perfect;    // per relay
  std::vector<double> decile_empirical;  // relays ranked by bandwidth, 10 groups
  std::vector<double> decile_perfect;
  double total_variation = 0.0;
};

// Counts each relay once per role it fills in every built circuit.
LoadBalanceReport load_balance_report(std::span<const CircuitLogRow> log,
                                      const Consensus& consensus);

struct TightnessReport {
  std::vector<double> fractions;  // one per distinct vulnerable circuit
  std::vector<CdfPoint> cdf;
  std::size_t truncated = 0;
};

TightnessReport estimate_tightness(std::span<const CircuitLogRow> log,
                                   const Consensus& consensus, const ThreatModel& threat,
                                   AdversaryMode mode, std::size_t cap);

struct LiveMetrics {
  std::vector<ClientLiveResult> clients;
  std::map<std::string, LiveCounts> by_label;
  LiveCounts overall;
  std::optional<LoadBalanceReport> load;
  std::optional<TightnessReport> tightness;
};

// Throws ConfigError when a client or trace AS is absent from the topology.
LiveMetrics run_live_style(const ExperimentConfig& cfg, const ThreatModel& threat,
                           const Consensus& consensus, std::span<const TraceRequest> traces,
                           std::span<const ClientAs> clients);

// ---- enumeration-style runs (E2, E5) ------------------------------------

struct PairFraction {
  std::size_t client = 0;  // index into the clients list
  AsId dst;
  std::size_t guard_size = 0;  // E5 only
  std::size_t guard_set = 0;   // E5 only
  std::optional<double> fraction;
  std::size_t safe = 0;
  std::size_t assessable = 0;
};

struct FractionSummary {
  std::size_t pairs = 0;
  std::size_t defined = 0;
  std::optional<double> mean;
  std::optional<double> below_five_percent;  // share of defined pairs with fraction < 0.05
  std::optional<double> no_safe_option;      // share of defined pairs with fraction == 0
  std::vector<CdfPoint> cdf;
};

FractionSummary summarize(std::span<const PairFraction> rows);

struct MuEstimate {
  std::size_t clients = 0;
  std::optional<double> mean;  // mean over clients of share of destinations > 50% safe
  std::optional<ConfidenceInterval> ci99;
};

struct EnumerationMetrics {
  std::vector<PairFraction> rows;
  FractionSummary overall;
  std::map<std::string, FractionSummary> by_label;
  std::map<std::string, MuEstimate> mu_by_label;
  MuEstimate mu;
  std::size_t destinations = 0;
  std::optional<MiddleRelayRisk> middle_relay;
  std::optional<std::string> middle_relay_note;
  // E5: summary per guard-set size.
  std::map<std::size_t, FractionSummary> by_guard_size;
  std::vector<std::uint64_t> client_seeds;
};

EnumerationMetrics run_enumeration_style(const ExperimentConfig& cfg, const ThreatModel& threat,
                                         const Consensus& consensus,
                                         std::span<const TraceRequest> traces,
                                         std::span<const ClientAs> clients);

// Distinct destination ASes in first-appearance order.
std::vector<AsId> distinct_destinations(std::span<const TraceRequest> traces);

// Per-client stream seeds derived from the master seed.
std::uint64_t client_seed(std::uint64_t master, std::size_t client_index);
std::uint64_t guard_set_seed(std::uint64_t master, std::size_t client_index,
                             std::size_t guard_size, std::size_t set_index);

}  // namespace astoria
