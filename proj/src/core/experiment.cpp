#include "astoria/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "astoria/error.hpp"
#include "astoria/text.hpp"

namespace astoria {

using Json = nlohmann::ordered_json;

// ---- settings ----------------------------------------------------------

namespace {

constexpr std::string_view kKeys[] = {
    "experiment", "selector",     "mode",           "topology",      "siblings",
    "countries",  "consensus",    "traces",         "clients",       "guards",
    "guard_sizes", "guard_sets",  "seed",           "workers",       "cap",
    "max_requests", "max_circuit_age", "safe_threshold", "exclude_endpoints",
    "state_country", "tightness", "verify_safety",  "population",    "p_mid",
    "output",     "cache_capacity",
};

bool known_key(std::string_view key) {
  return std::find(std::begin(kKeys), std::end(kKeys), key) != std::end(kKeys);
}

}  // namespace

std::vector<std::string_view> known_setting_keys() {
  return {std::begin(kKeys), std::end(kKeys)};
}

void Settings::set(std::string key, std::string value, std::string origin) {
  entries_[std::move(key)] = Setting{std::move(value), std::move(origin)};
}

void Settings::read(std::istream& in, std::string_view source) {
  const std::string src(source);
  text::for_each_record(in, [&](std::size_t line, std::string_view record) {
    const auto eq = record.find('=');
    if (eq == std::string_view::npos) throw ParseError(src, line, "expected key = value");
    const auto key = text::trim(record.substr(0, eq));
    const auto value = text::trim(record.substr(eq + 1));
    if (key.empty()) throw ParseError(src, line, "empty key");
    if (!known_key(key)) throw ParseError(src, line, "unknown key '" + std::string(key) + "'");
    set(std::string(key), std::string(value), src + ":" + std::to_string(line));
  });
}

const Setting* Settings::find(std::string_view key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

namespace {

[[noreturn]] void bad(const std::string& key, const Setting& s, const std::string& why) {
  throw ConfigError(s.origin + ": invalid " + key + " '" + s.value + "': " + why);
}

std::uint64_t as_uint(const std::string& key, const Setting& s) {
  const auto v = text::parse_uint(s.value);
  if (!v) bad(key, s, "expected a nonnegative integer");
  return *v;
}

double as_double(const std::string& key, const Setting& s) {
  const auto v = text::parse_double(s.value);
  if (!v || !std::isfinite(*v)) bad(key, s, "expected a number");
  return *v;
}

bool as_bool(const std::string& key, const Setting& s) {
  if (s.value == "1" || s.value == "true" || s.value == "yes" || s.value == "on") return true;
  if (s.value == "0" || s.value == "false" || s.value == "no" || s.value == "off") return false;
  bad(key, s, "expected true or false");
}

}  // namespace

RunConfig parse_run_config(const Settings& settings, bool check_experiment) {
  RunConfig cfg;
  ExperimentConfig& e = cfg.experiment;
  for (const auto& [key, s] : settings.entries()) {
    if (!known_key(key)) throw ConfigError(s.origin + ": unknown key '" + key + "'");
    if (key == "experiment") {
      const auto k = parse_experiment_kind(s.value);
      if (!k) bad(key, s, "expected e1..e5");
      e.kind = *k;
    } else if (key == "selector") {
      const auto k = parse_selector_kind(s.value);
      if (!k) bad(key, s, "expected vanilla, uniform or astoria");
      e.selector = *k;
      cfg.selector_given = true;
    } else if (key == "mode") {
      const auto m = parse_adversary_mode(s.value);
      if (!m) bad(key, s, "expected single-as, sibling or state");
      e.mode = *m;
    } else if (key == "topology") {
      cfg.topology = s.value;
    } else if (key == "siblings") {
      cfg.siblings = s.value;
    } else if (key == "countries") {
      cfg.countries = s.value;
    } else if (key == "consensus") {
      cfg.consensus = s.value;
    } else if (key == "traces") {
      cfg.traces = s.value;
    } else if (key == "clients") {
      cfg.clients = s.value;
    } else if (key == "output") {
      cfg.output = s.value;
    } else if (key == "guards") {
      e.guard_size = as_uint(key, s);
    } else if (key == "guard_sizes") {
      e.guard_sizes.clear();
      for (auto part : text::split(s.value, ',')) {
        const auto v = text::parse_uint(part);
        if (!v) bad(key, s, "expected a comma-separated list of integers");
        e.guard_sizes.push_back(*v);
      }
    } else if (key == "guard_sets") {
      e.guard_sets = as_uint(key, s);
    } else if (key == "seed") {
      e.seed = as_uint(key, s);
    } else if (key == "workers") {
      e.workers = as_uint(key, s);
    } else if (key == "cap") {
      e.enumerate_cap = as_uint(key, s);
    } else if (key == "max_requests") {
      e.max_requests_per_circuit = as_uint(key, s);
    } else if (key == "max_circuit_age") {
      e.max_circuit_age = as_uint(key, s);
    } else if (key == "safe_threshold") {
      e.safe_threshold = as_double(key, s);
    } else if (key == "exclude_endpoints") {
      e.threat.exclude_endpoints = as_bool(key, s);
    } else if (key == "state_country") {
      if (!s.value.empty()) e.threat.state_country = s.value;
    } else if (key == "tightness") {
      e.tightness = as_bool(key, s);
    } else if (key == "verify_safety") {
      e.verify_safety = as_bool(key, s);
    } else if (key == "population") {
      e.population = as_uint(key, s);
    } else if (key == "p_mid") {
      e.p_mid = as_double(key, s);
    } else if (key == "cache_capacity") {
      cfg.cache_capacity = as_uint(key, s);
      if (cfg.cache_capacity == 0) bad(key, s, "must be positive");
    }
  }
  if (check_experiment) validate(e);
  return cfg;
}

// ---- inputs ------------------------------------------------------------

namespace {

template <class Loader>
auto load_file(const std::string& path, std::string_view what, Loader loader) {
  if (path.empty()) throw ConfigError(std::string("no ") + std::string(what) + " file given");
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + std::string(what) + " file '" + path + "'");
  return loader(in, path);
}

}  // namespace

Inputs load_inputs(const RunConfig& cfg, InputNeeds needs) {
  Inputs in;
  in.bundle.graph = load_file(cfg.topology, "topology",
                              [](std::istream& s, const std::string& p) {
                                return load_topology(s, p);
                              });
  if (!cfg.siblings.empty())
    in.bundle.orgs = load_file(cfg.siblings, "siblings", [](std::istream& s, const std::string& p) {
      return load_siblings(s, p);
    });
  if (!cfg.countries.empty())
    in.bundle.countries =
        load_file(cfg.countries, "countries",
                  [](std::istream& s, const std::string& p) { return load_countries(s, p); });
  if (needs.consensus)
    in.consensus = load_file(cfg.consensus, "consensus",
                             [](std::istream& s, const std::string& p) {
                               return load_consensus(s, p);
                             });
  if (needs.traces)
    in.traces = load_file(cfg.traces, "traces", [](std::istream& s, const std::string& p) {
      return load_traces(s, p);
    });
  if (needs.clients) {
    in.clients = load_file(cfg.clients, "clients", [](std::istream& s, const std::string& p) {
      return load_clients(s, p);
    });
    if (in.clients.empty()) throw ConfigError("clients file '" + cfg.clients + "' lists no clients");
  }
  const AsGraph& g = in.bundle.graph;
  for (const auto& c : in.clients)
    if (!g.contains(c.asn))
      throw ConfigError(cfg.clients + ":" + std::to_string(c.line) + ": client AS " +
                        std::to_string(c.asn.value) + " is not in the topology");
  for (const auto& t : in.traces)
    if (!g.contains(t.dst))
      throw ConfigError(cfg.traces + ":" + std::to_string(t.line) + ": destination AS " +
                        std::to_string(t.dst.value) + " is not in the topology");
  if (in.consensus)
    for (const auto& r : in.consensus->relays())
      if (!g.contains(r.asn))
        throw ConfigError(cfg.consensus + ": relay " + r.fingerprint + " is in AS " +
                          std::to_string(r.asn.value) + ", which is not in the topology");
  return in;
}

// ---- JSON helpers ------------------------------------------------------

namespace {

template <class T>
Json opt(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

Json cdf_json(const std::vector<CdfPoint>& cdf) {
  Json out = Json::array();
  for (const auto& p : cdf) out.push_back(Json::array({p.value, p.cumulative}));
  return out;
}

Json ci_json(const std::optional<ConfidenceInterval>& ci) {
  if (!ci) return nullptr;
  return Json{{"mean", ci->mean}, {"half_width", ci->half_width}, {"low", ci->low},
              {"high", ci->high}};
}

Json counts_json(const LiveCounts& c) {
  return Json{
      {"requests", c.requests},
      {"circuits_built", c.circuits_built},
      {"lp_circuits", c.lp_circuits},
      {"circuit_destinations", c.units},
      {"circuit_destinations_assessable", c.units_assessable},
      {"circuit_destinations_vulnerable", c.units_vulnerable},
      {"sites", c.sites},
      {"sites_main_assessable", c.sites_main_assessable},
      {"sites_any_assessable", c.sites_any_assessable},
      {"websites_main_vulnerable", opt(c.websites_main_vulnerable())},
      {"websites_any_vulnerable", opt(c.websites_any_vulnerable())},
      {"circuits_vulnerable", opt(c.circuits_vulnerable())},
  };
}

Json summary_json(const FractionSummary& s) {
  return Json{{"pairs", s.pairs},
              {"defined", s.defined},
              {"mean", opt(s.mean)},
              {"below_five_percent", opt(s.below_five_percent)},
              {"no_safe_option", opt(s.no_safe_option)},
              {"cdf", cdf_json(s.cdf)}};
}

Json mu_json(const MuEstimate& m) {
  return Json{{"clients", m.clients}, {"mean", opt(m.mean)}, {"ci99", ci_json(m.ci99)}};
}

Json config_json(const RunConfig& cfg) {
  const ExperimentConfig& e = cfg.experiment;
  return Json{
      {"experiment", to_string(e.kind)},
      {"selector", to_string(e.selector)},
      {"mode", to_string(e.mode)},
      {"guards", e.guard_size},
      {"guard_sizes", e.guard_sizes},
      {"guard_sets", e.guard_sets},
      {"seed", e.seed},
      {"cap", e.enumerate_cap},
      {"max_requests", e.max_requests_per_circuit},
      {"max_circuit_age", e.max_circuit_age},
      {"safe_threshold", e.safe_threshold},
      {"exclude_endpoints", e.threat.exclude_endpoints},
      {"state_country", opt(e.threat.state_country)},
      {"tightness", e.tightness},
      {"verify_safety", e.verify_safety},
      {"population", opt(e.population)},
      {"p_mid", opt(e.p_mid)},
      {"cache_capacity", cfg.cache_capacity},
      {"topology", cfg.topology},
      {"siblings", cfg.siblings},
      {"countries", cfg.countries},
      {"consensus", cfg.consensus},
      {"traces", cfg.traces},
      {"clients", cfg.clients},
  };
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

Json live_json(const LiveMetrics& m, const Consensus& consensus, std::string& csv) {
  Json clients = Json::array();
  for (const auto& c : m.clients) {
    Json guards = Json::array();
    for (auto g : c.guards) guards.push_back(consensus.relay(g).fingerprint);
    clients.push_back(Json{{"label", c.client.label},
                           {"asn", c.client.asn.value},
                           {"seed", c.seed},
                           {"guards", guards},
                           {"counts", counts_json(c.counts)}});
    for (const auto& row : c.log) {
      csv += std::to_string(row.client.value);
      csv += ',' + csv_field(row.site);
      csv += ',' + std::to_string(row.dst.value);
      csv += ',' + csv_field(consensus.relay(row.entry).fingerprint);
      csv += ',' + csv_field(consensus.relay(row.middle).fingerprint);
      csv += ',' + csv_field(consensus.relay(row.exit).fingerprint);
      csv += ',' + std::string(to_string(row.provenance));
      csv += ',';
      if (row.vulnerable) csv += *row.vulnerable ? "1" : "0";
      csv += ',';
      std::string attackers;
      for (const auto& a : row.attackers) {
        if (!attackers.empty()) attackers += ';';
        attackers += a;
      }
      csv += csv_field(attackers);
      csv += '\n';
    }
  }
  Json by_label = Json::object();
  for (const auto& [label, counts] : m.by_label) by_label[label] = counts_json(counts);

  Json out{{"overall", counts_json(m.overall)}, {"by_label", by_label}, {"clients", clients}};
  if (m.load) {
    Json relays = Json::array();
    for (std::size_t i = 0; i < consensus.size(); ++i)
      relays.push_back(Json{{"fingerprint", consensus.relay(i).fingerprint},
                            {"bandwidth", consensus.relay(i).bandwidth},
                            {"empirical", m.load->empirical[i]},
                            {"perfect", m.load->perfect[i]}});
    out["load_balance"] = Json{{"selections", m.load->selections},
                               {"total_variation", m.load->total_variation},
                               {"decile_empirical", m.load->decile_empirical},
                               {"decile_perfect", m.load->decile_perfect},
                               {"relays", relays}};
  } else {
    out["load_balance"] = nullptr;
  }
  if (m.tightness) {
    const auto& t = *m.tightness;
    std::optional<double> mean;
    std::optional<double> all_paths;
    if (!t.fractions.empty()) {
      double sum = 0.0;
      std::size_t ones = 0;
      for (double f : t.fractions) {
        sum += f;
        if (f >= 1.0) ++ones;
      }
      mean = sum / static_cast<double>(t.fractions.size());
      all_paths = static_cast<double>(ones) / static_cast<double>(t.fractions.size());
    }
    out["tightness"] = Json{{"circuits", t.fractions.size()},
                            {"truncated", t.truncated},
                            {"mean", opt(mean)},
                            {"all_paths_vulnerable", opt(all_paths)},
                            {"cdf", cdf_json(t.cdf)}};
  } else {
    out["tightness"] = nullptr;
  }
  return out;
}

Json enumeration_json(const EnumerationMetrics& m, const RunConfig& cfg) {
  Json by_label = Json::object();
  for (const auto& [label, s] : m.by_label) by_label[label] = summary_json(s);
  Json out{{"destinations", m.destinations},
           {"overall", summary_json(m.overall)},
           {"by_label", by_label}};
  if (cfg.experiment.kind == ExperimentKind::E5) {
    Json sizes = Json::object();
    for (const auto& [k, s] : m.by_guard_size) sizes[std::to_string(k)] = summary_json(s);
    out["by_guard_size"] = sizes;
    return out;
  }
  Json mu_by_label = Json::object();
  for (const auto& [label, mu] : m.mu_by_label) mu_by_label[label] = mu_json(mu);
  out["mu"] = mu_json(m.mu);
  out["mu_by_label"] = mu_by_label;
  if (m.middle_relay) {
    out["middle_relay"] = Json{{"population", *cfg.experiment.population},
                               {"destinations", m.destinations},
                               {"expected_linkable", m.middle_relay->expected_linkable},
                               {"observations", m.middle_relay->observations},
                               {"observations_floor", m.middle_relay->observations_floor},
                               {"probability", m.middle_relay->probability}};
  } else {
    out["middle_relay"] = nullptr;
  }
  if (m.middle_relay_note) out["middle_relay_note"] = *m.middle_relay_note;
  return out;
}

}  // namespace

RunOutput run_experiment(const RunConfig& cfg) {
  const ExperimentConfig& e = cfg.experiment;
  validate(e);
  RunOutput out;
  if (!is_live_style(e.kind) && cfg.selector_given)
    out.warnings.push_back("selector is ignored for " + std::string(to_string(e.kind)));
  if (e.mode == AdversaryMode::Sibling && cfg.siblings.empty())
    out.warnings.push_back("sibling mode without a siblings file: every AS is its own organization");
  if (e.mode == AdversaryMode::State && cfg.countries.empty())
    out.warnings.push_back("state mode without a countries file: every AS has unknown country");
  if (e.threat.state_country && e.mode != AdversaryMode::State)
    out.warnings.push_back("state_country only applies in state mode");

  const Inputs in = load_inputs(cfg, {true, true, true});
  const Consensus& consensus = *in.consensus;
  RoutingCache cache(in.bundle.graph, cfg.cache_capacity);
  ThreatModel threat(in.bundle, cache, e.threat);

  Json seeds_clients = Json::array();
  for (std::size_t i = 0; i < in.clients.size(); ++i)
    seeds_clients.push_back(Json{{"label", in.clients[i].label},
                                 {"asn", in.clients[i].asn.value},
                                 {"seed", client_seed(e.seed, i)}});

  std::set<std::string> sites;
  for (const auto& t : in.traces) sites.insert(t.site);
  Json inputs{{"ases", in.bundle.graph.node_count()},
              {"edges", in.bundle.graph.edge_count()},
              {"relays", consensus.size()},
              {"guards", consensus.guards().size()},
              {"exits", consensus.exits().size()},
              {"consensus_timestamp", consensus.timestamp()},
              {"clients", in.clients.size()},
              {"requests", in.traces.size()},
              {"sites", sites.size()},
              {"destinations", distinct_destinations(in.traces).size()}};

  std::string csv(kCircuitCsvHeader);
  csv += '\n';
  Json metrics;
  if (is_live_style(e.kind)) {
    const auto m = run_live_style(e, threat, consensus, in.traces, in.clients);
    metrics = live_json(m, consensus, csv);
  } else {
    const auto m = run_enumeration_style(e, threat, consensus, in.traces, in.clients);
    metrics = enumeration_json(m, cfg);
  }

  Json report{{"tool", "astoria"},
              {"config", config_json(cfg)},
              {"seeds", Json{{"master", e.seed}, {"clients", seeds_clients}}},
              {"warnings", out.warnings},
              {"inputs", inputs},
              {"metrics", metrics}};
  out.report_json = report.dump(2) + "\n";
  out.circuits_csv = std::move(csv);
  return out;
}

void write_run_output(const RunOutput& out, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "'");
  const auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + (dir / name).string() + "'");
    f << body;
    if (!f) throw std::runtime_error("write failed for '" + (dir / name).string() + "'");
  };
  write("report.json", out.report_json);
  write("circuits.csv", out.circuits_csv);
}

// ---- ad-hoc queries ----------------------------------------------------

std::string assess_json(const ThreatModel& threat, const CircuitSpec& c, AdversaryMode mode) {
  const AsGraph& g = threat.topology().graph;
  for (AsId as : {c.src, c.entry, c.exit, c.dst})
    if (!g.contains(as))
      throw ConfigError("AS " + std::to_string(as.value) + " is not in the topology");
  const auto a = threat.assess(c, mode);
  Json attackers = Json::array();
  for (const auto& k : a.attackers) attackers.push_back(threat.label(k));
  const auto leg_json = [&](AsId x, AsId y) {
    Json ases = Json::array();
    const auto leg = threat.leg(x, y);
    for (AsId as : leg.ases()) ases.push_back(as.value);
    return ases;
  };
  Json out{{"src", c.src.value},
           {"entry", c.entry.value},
           {"exit", c.exit.value},
           {"dst", c.dst.value},
           {"mode", to_string(mode)},
           {"assessable", a.assessable},
           {"vulnerable", a.assessable ? Json(a.vulnerable) : Json(nullptr)},
           {"attackers", attackers},
           {"entry_leg", leg_json(c.src, c.entry)},
           {"exit_leg", leg_json(c.exit, c.dst)}};
  return out.dump(2) + "\n";
}

std::string paths_json(RoutingCache& cache, AsId a, AsId b, bool enumerate, std::size_t cap) {
  const AsGraph& g = cache.graph();
  for (AsId as : {a, b})
    if (!g.contains(as))
      throw ConfigError("AS " + std::to_string(as.value) + " is not in the topology");
  Json set = Json::array();
  const auto both = bidirectional_path_set(cache, a, b);
  for (AsId as : both.ases()) set.push_back(as.value);
  Json out{{"a", a.value}, {"b", b.value}, {"path_set", set}};
  if (enumerate) {
    const auto direction = [&](AsId from, AsId to) {
      const auto tree = cache.tree(to);
      const auto i = g.require_index(from);
      Json d{{"from", from.value}, {"to", to.value}};
      if (tree->length(i) == RoutingTree::kUnreachable) {
        d["reachable"] = false;
        d["paths"] = Json::array();
        d["truncated"] = false;
        return d;
      }
      const auto e = enumerate_paths(*tree, from, cap);
      Json paths = Json::array();
      for (const auto& p : e.paths) {
        Json path = Json::array();
        for (AsId as : p) path.push_back(as.value);
        paths.push_back(path);
      }
      d["reachable"] = true;
      d["class"] = to_string(tree->pref_class(i));
      d["length"] = tree->length(i);
      d["paths"] = paths;
      d["truncated"] = e.truncated;
      return d;
    };
    out["forward"] = direction(a, b);
    out["reverse"] = direction(b, a);
  }
  return out.dump(2) + "\n";
}

namespace {

std::string render_lp(const SelectionProblem& problem, const std::vector<std::string>& pair_names) {
  std::ostringstream os;
  dump_problem(os, problem);
  const auto dist = solve_minimax(problem, &os);
  os << "# solution\n";
  os << "z* = " << dist.objective << "\n";
  os << "pivots = " << dist.pivots << "\n";
  for (std::size_t j = 0; j < dist.probs.size(); ++j) {
    os << "P[" << j << "]";
    if (!pair_names.empty()) os << " " << pair_names[j];
    os << " = " << dist.probs[j] << "\n";
  }
  for (std::size_t a = 0; a < problem.adversary_count(); ++a)
    os << "exposure " << problem.adversary(a) << " = " << exposure(dist, problem, a) << "\n";
  return os.str();
}

}  // namespace

std::string lp_dump(const RunConfig& cfg, AsId src, AsId dst) {
  const Inputs in = load_inputs(cfg, {true, false, false});
  const AsGraph& g = in.bundle.graph;
  for (AsId as : {src, dst})
    if (!g.contains(as))
      throw ConfigError("AS " + std::to_string(as.value) + " is not in the topology");
  RoutingCache cache(g, cfg.cache_capacity);
  ThreatModel threat(in.bundle, cache, cfg.experiment.threat);
  const Consensus& consensus = *in.consensus;
  Rng rng(client_seed(cfg.experiment.seed, 0));
  const auto guards = choose_guards(consensus, cfg.experiment.guard_size, rng);

  // Threshold 1 sends every destination with a vulnerable pair to the LP.
  AstoriaConfig acfg;
  acfg.mode = cfg.experiment.mode;
  acfg.safe_threshold = 1.0;
  const auto plan = plan_astoria(consensus, guards, src, dst, threat, acfg);
  std::ostringstream head;
  head << "# src " << src.value << " dst " << dst.value << " mode "
       << to_string(cfg.experiment.mode) << "\n";
  head << "# guards";
  for (auto gi : guards.guards) head << " " << consensus.relay(gi).fingerprint;
  head << "\n# candidate pairs " << plan.candidate_pairs << ", assessable "
       << plan.assessable_pairs << ", safe " << plan.safe_pairs << "\n";
  if (!plan.problem) {
    head << "# every assessable pair is safe; no LP is needed\n";
    return head.str();
  }
  std::vector<std::string> names;
  for (const auto& p : plan.pairs)
    names.push_back(consensus.relay(p.entry).fingerprint + "->" +
                    consensus.relay(p.exit).fingerprint);
  return head.str() + render_lp(*plan.problem, names);
}

std::string lp_dump_incidence(std::istream& in, std::string_view source) {
  return render_lp(parse_incidence(in, source), {});
}

}  // namespace astoria
