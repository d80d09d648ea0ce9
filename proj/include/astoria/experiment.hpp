#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "astoria/harness.hpp"
#include "astoria/routing.hpp"
#include "astoria/selection.hpp"
#include "astoria/threat.hpp"
#include "astoria/topology.hpp"

namespace astoria {

// Raw key=value settings. Each value remembers where it came from
// ("run.cfg:4" or "--seed") so diagnostics can point at it.
struct Setting {
  std::string value;
  std::string origin;
};

class Settings {
 public:
  // Later assignments override earlier ones.
  void set(std::string key, std::string value, std::string origin);
  // `key = value` lines; blank lines and `#` comments skipped. Throws ParseError.
  void read(std::istream& in, std::string_view source);

  const std::map<std::string, Setting, std::less<>>& entries() const noexcept { return entries_; }
  const Setting* find(std::string_view key) const;

 private:
  std::map<std::string, Setting, std::less<>> entries_;
};

// Every key the config layer understands.
std::vector<std::string_view> known_setting_keys();

struct RunConfig {
  ExperimentConfig experiment;
  bool selector_given = false;
  std::string topology;
  std::string siblings;
  std::string countries;
  std::string consensus;
  std::string traces;
  std::string clients;
  std::string output = ".";
  std::size_t cache_capacity = RoutingCache::kDefaultCapacity;
};

// Throws ConfigError naming the offending key and its origin. With
// `check_experiment` false the experiment/mode pairing is not enforced, for
// ad-hoc queries that never run an experiment.
RunConfig parse_run_config(const Settings& settings, bool check_experiment = true);

// Files referenced by a config, loaded and cross-checked.
struct Inputs {
  TopologyBundle bundle;
  std::optional<Consensus> consensus;
  std::vector<TraceRequest> traces;
  std::vector<ClientAs> clients;
};

struct InputNeeds {
  bool consensus = false;
  bool traces = false;
  bool clients = false;
};

// Throws ConfigError for missing or unreadable files and ParseError for
// malformed ones.
Inputs load_inputs(const RunConfig& cfg, InputNeeds needs);

struct RunOutput {
  std::string report_json;
  std::string circuits_csv;
  std::vector<std::string> warnings;
};

RunOutput run_experiment(const RunConfig& cfg);

// Writes report.json and circuits.csv under `dir`, creating it if needed.
void write_run_output(const RunOutput& out, const std::filesystem::path& dir);

inline constexpr std::string_view kCircuitCsvHeader =
    "client_asn,site,dst_asn,entry_fp,middle_fp,exit_fp,provenance,vulnerable,attackers";

// JSON for one circuit assessment.
std::string assess_json(const ThreatModel& threat, const CircuitSpec& circuit,
                        AdversaryMode mode);

// JSON with the bidirectional path set between a and b and, when
// `enumerate` is set, the concrete paths in both directions.
std::string paths_json(RoutingCache& cache, AsId a, AsId b, bool enumerate, std::size_t cap);

// The LP Astoria would solve for (src, dst) with guards drawn from the
// config seed, in plain text, followed by the solver trace and solution.
std::string lp_dump(const RunConfig& cfg, AsId src, AsId dst);

// Same text for an incidence listing (`label: 0 1 1` per adversary).
std::string lp_dump_incidence(std::istream& in, std::string_view source);

}  // namespace astoria
