#include "astoria/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <memory>
#include <set>
#include <stdexcept>
#include <thread>
#include <tuple>
#include <unordered_map>

#include "astoria/error.hpp"
#include "astoria/text.hpp"

namespace astoria {

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads. Rethrows the
// exception of the lowest failing index.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  std::vector<std::exception_ptr> errors(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void require_known(const AsGraph& graph, std::span<const TraceRequest> traces,
                   std::span<const ClientAs> clients, const Consensus& consensus) {
  for (const auto& c : clients)
    if (!graph.contains(c.asn))
      throw ConfigError("client AS " + std::to_string(c.asn.value) + " (line " +
                        std::to_string(c.line) + ") is not in the topology");
  for (const auto& t : traces)
    if (!graph.contains(t.dst))
      throw ConfigError("destination AS " + std::to_string(t.dst.value) + " (line " +
                        std::to_string(t.line) + ") is not in the topology");
  for (const auto& r : consensus.relays())
    if (!graph.contains(r.asn))
      throw ConfigError("relay " + r.fingerprint + " is in AS " + std::to_string(r.asn.value) +
                        ", which is not in the topology");
}

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

// ---- inputs ------------------------------------------------------------

std::vector<TraceRequest> load_traces(std::istream& in, std::string_view source) {
  const std::string src(source);
  std::vector<TraceRequest> out;
  bool header = false;
  std::map<std::string, std::size_t> mains;
  std::map<std::string, std::size_t> first_line;
  text::for_each_record(in, [&](std::size_t line, std::string_view record) {
    const auto fields = text::split(record, ',');
    if (!header) {
      if (fields.size() != 3 || text::trim(fields[0]) != "site" ||
          text::trim(fields[1]) != "dst_asn" || text::trim(fields[2]) != "is_main")
        throw ParseError(src, line, "expected header site,dst_asn,is_main");
      header = true;
      return;
    }
    if (fields.size() != 3) throw ParseError(src, line, "expected site,dst_asn,is_main");
    TraceRequest r;
    r.site = std::string(text::trim(fields[0]));
    if (r.site.empty()) throw ParseError(src, line, "empty site label");
    const auto asn = text::parse_uint(fields[1]);
    if (!asn || *asn == 0 || *asn > UINT32_MAX) throw ParseError(src, line, "invalid AS number");
    r.dst = AsId(static_cast<std::uint32_t>(*asn));
    const auto main = text::trim(fields[2]);
    if (main != "0" && main != "1") throw ParseError(src, line, "is_main must be 0 or 1");
    r.is_main = main == "1";
    r.line = line;
    first_line.try_emplace(r.site, line);
    if (r.is_main && ++mains[r.site] > 1)
      throw ParseError(src, line, "site '" + r.site + "' has more than one main request");
    out.push_back(std::move(r));
  });
  for (const auto& [site, line] : first_line)
    if (!mains.contains(site))
      throw ParseError(src, line, "site '" + site + "' has no main request");
  return out;
}

std::vector<ClientAs> load_clients(std::istream& in, std::string_view source) {
  const std::string src(source);
  std::vector<ClientAs> out;
  bool first = true;
  text::for_each_record(in, [&](std::size_t line, std::string_view record) {
    const auto fields = text::split(record, ',');
    if (first) {
      first = false;
      if (fields.size() == 2 && text::trim(fields[0]) == "label" &&
          text::trim(fields[1]) == "asn")
        return;
    }
    if (fields.size() != 2) throw ParseError(src, line, "expected label,asn");
    ClientAs c;
    c.label = std::string(text::trim(fields[0]));
    if (c.label.empty()) throw ParseError(src, line, "empty label");
    const auto asn = text::parse_uint(fields[1]);
    if (!asn || *asn == 0 || *asn > UINT32_MAX) throw ParseError(src, line, "invalid AS number");
    c.asn = AsId(static_cast<std::uint32_t>(*asn));
    c.line = line;
    out.push_back(std::move(c));
  });
  return out;
}

// ---- configuration -----------------------------------------------------

std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::E1: return "e1";
    case ExperimentKind::E2: return "e2";
    case ExperimentKind::E3: return "e3";
    case ExperimentKind::E4: return "e4";
    case ExperimentKind::E5: return "e5";
  }
  return "?";
}

std::string_view to_string(SelectorKind k) {
  switch (k) {
    case SelectorKind::Vanilla: return "vanilla";
    case SelectorKind::Uniform: return "uniform";
    case SelectorKind::Astoria: return "astoria";
  }
  return "?";
}

std::optional<ExperimentKind> parse_experiment_kind(std::string_view s) {
  if (s == "e1" || s == "E1") return ExperimentKind::E1;
  if (s == "e2" || s == "E2") return ExperimentKind::E2;
  if (s == "e3" || s == "E3") return ExperimentKind::E3;
  if (s == "e4" || s == "E4") return ExperimentKind::E4;
  if (s == "e5" || s == "E5") return ExperimentKind::E5;
  return std::nullopt;
}

std::optional<SelectorKind> parse_selector_kind(std::string_view s) {
  if (s == "vanilla") return SelectorKind::Vanilla;
  if (s == "uniform") return SelectorKind::Uniform;
  if (s == "astoria") return SelectorKind::Astoria;
  return std::nullopt;
}

bool is_live_style(ExperimentKind k) {
  return k == ExperimentKind::E1 || k == ExperimentKind::E3 || k == ExperimentKind::E4;
}

void validate(const ExperimentConfig& cfg) {
  const auto need_mode = [&](AdversaryMode m) {
    if (cfg.mode != m)
      throw ConfigError(std::string(to_string(cfg.kind)) + " measures " +
                        std::string(to_string(m)) + " adversaries, not " +
                        std::string(to_string(cfg.mode)));
  };
  switch (cfg.kind) {
    case ExperimentKind::E1: need_mode(AdversaryMode::SingleAs); break;
    case ExperimentKind::E3: need_mode(AdversaryMode::Sibling); break;
    case ExperimentKind::E4: need_mode(AdversaryMode::State); break;
    default: break;
  }
  if (cfg.guard_size < 1 || cfg.guard_size > 3) throw ConfigError("guards must be 1, 2 or 3");
  if (cfg.guard_sizes.empty()) throw ConfigError("guard_sizes must not be empty");
  for (auto k : cfg.guard_sizes)
    if (k < 1 || k > 3) throw ConfigError("guard_sizes entries must be 1, 2 or 3");
  if (cfg.guard_sets == 0) throw ConfigError("guard_sets must be positive");
  if (cfg.enumerate_cap == 0) throw ConfigError("cap must be positive");
  if (cfg.max_requests_per_circuit == 0) throw ConfigError("max_requests must be positive");
  if (!(cfg.safe_threshold >= 0.0 && cfg.safe_threshold <= 1.0))
    throw ConfigError("safe_threshold must lie in [0, 1]");
  if (cfg.p_mid && !(*cfg.p_mid > 0.0 && *cfg.p_mid < 1.0))
    throw ConfigError("p_mid must lie in (0, 1)");
  if (cfg.population && *cfg.population < 2) throw ConfigError("population must exceed 1");
  if (cfg.threat.state_country && !CountryMap::valid_code(*cfg.threat.state_country))
    throw ConfigError("state_country must be a two-letter uppercase code");
}

// ---- statistics --------------------------------------------------------

ConfidenceInterval confidence_interval(std::span<const double> samples, double level) {
  if (samples.size() < 2)
    throw std::invalid_argument("confidence interval needs at least 2 samples");
  double z = 0.0;
  if (std::abs(level - 0.99) < 1e-12) {
    z = 2.576;
  } else if (std::abs(level - 0.95) < 1e-12) {
    z = 1.960;
  } else if (std::abs(level - 0.90) < 1e-12) {
    z = 1.645;
  } else {
    throw std::invalid_argument("unsupported confidence level");
  }
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= n;
  double ss = 0.0;
  for (double s : samples) ss += (s - mean) * (s - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  ConfidenceInterval ci;
  ci.mean = mean;
  ci.half_width = z * sd / std::sqrt(n);
  ci.low = mean - ci.half_width;
  ci.high = mean + ci.half_width;
  return ci;
}

MiddleRelayRisk middle_relay_risk(std::uint64_t x_count, std::uint64_t d_count, double mu_low,
                                  double p_mid) {
  if (x_count < 2 || d_count < 2) throw std::invalid_argument("|X| and |D| must exceed 1");
  if (!(mu_low > 0.0 && mu_low < 1.0)) throw std::invalid_argument("mu must lie in (0, 1)");
  if (!(p_mid > 0.0 && p_mid < 1.0)) throw std::invalid_argument("p_mid must lie in (0, 1)");
  const double pairs = static_cast<double>(x_count) * static_cast<double>(d_count);
  MiddleRelayRisk r;
  r.expected_linkable = 0.5 * mu_low * pairs;
  if (!(r.expected_linkable > 1.0))
    throw std::invalid_argument("E[S] <= 1: too few linkable pairs for the estimate");
  r.observations = -std::log(pairs) / (std::log(r.expected_linkable) - std::log(pairs));
  r.observations_floor = static_cast<std::uint64_t>(std::floor(r.observations));
  r.probability = std::pow(p_mid, static_cast<double>(r.observations_floor));
  return r;
}

std::vector<CdfPoint> empirical_cdf(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::vector<CdfPoint> out;
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    out.push_back({values[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

// ---- live-style --------------------------------------------------------

void LiveCounts::merge(const LiveCounts& o) {
  requests += o.requests;
  circuits_built += o.circuits_built;
  lp_circuits += o.lp_circuits;
  units += o.units;
  units_assessable += o.units_assessable;
  units_vulnerable += o.units_vulnerable;
  sites += o.sites;
  sites_main_assessable += o.sites_main_assessable;
  sites_main_vulnerable += o.sites_main_vulnerable;
  sites_any_assessable += o.sites_any_assessable;
  sites_any_vulnerable += o.sites_any_vulnerable;
}

std::optional<double> LiveCounts::websites_main_vulnerable() const {
  return ratio(sites_main_vulnerable, sites_main_assessable);
}
std::optional<double> LiveCounts::websites_any_vulnerable() const {
  return ratio(sites_any_vulnerable, sites_any_assessable);
}
std::optional<double> LiveCounts::circuits_vulnerable() const {
  return ratio(units_vulnerable, units_assessable);
}

LoadBalanceReport load_balance_report(std::span<const CircuitLogRow> log,
                                      const Consensus& consensus) {
  LoadBalanceReport r;
  r.empirical.assign(consensus.size(), 0.0);
  for (const auto& row : log) {
    if (!row.built) continue;
    for (auto i : {row.entry, row.middle, row.exit}) {
      if (i >= consensus.size()) throw std::out_of_range("log references an unknown relay");
      r.empirical[i] += 1.0;
      ++r.selections;
    }
  }
  if (r.selections == 0) throw std::invalid_argument("circuit log has no built circuits");
  for (double& e : r.empirical) e /= static_cast<double>(r.selections);
  r.perfect = perfect_balance_distribution(consensus);

  std::vector<std::size_t> order(consensus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return consensus.relay(a).bandwidth < consensus.relay(b).bandwidth;
  });
  r.decile_empirical.assign(10, 0.0);
  r.decile_perfect.assign(10, 0.0);
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const auto d = rank * 10 / order.size();
    r.decile_empirical[d] += r.empirical[order[rank]];
    r.decile_perfect[d] += r.perfect[order[rank]];
  }
  for (std::size_t i = 0; i < consensus.size(); ++i)
    r.total_variation += 0.5 * std::abs(r.empirical[i] - r.perfect[i]);
  return r;
}

TightnessReport estimate_tightness(std::span<const CircuitLogRow> log,
                                   const Consensus& consensus, const ThreatModel& threat,
                                   AdversaryMode mode, std::size_t cap) {
  std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t, std::uint32_t>> circuits;
  for (const auto& row : log) {
    if (!row.vulnerable.value_or(false)) continue;
    circuits.emplace(row.client.value, consensus.relay(row.entry).asn.value,
                     consensus.relay(row.exit).asn.value, row.dst.value);
  }
  TightnessReport r;
  for (const auto& [src, entry, exit, dst] : circuits) {
    const auto f = threat.vulnerable_path_fraction(
        CircuitSpec{AsId(src), AsId(entry), AsId(exit), AsId(dst)}, mode, cap);
    r.fractions.push_back(f.fraction);
    if (f.truncated) ++r.truncated;
  }
  r.cdf = empirical_cdf(r.fractions);
  return r;
}

std::uint64_t client_seed(std::uint64_t master, std::size_t client_index) {
  return derive_seed(master, {1, client_index});
}

std::uint64_t guard_set_seed(std::uint64_t master, std::size_t client_index,
                             std::size_t guard_size, std::size_t set_index) {
  return derive_seed(master, {2, client_index, guard_size, set_index});
}

namespace {

struct SiteState {
  bool main_assessable = false;
  bool main_vulnerable = false;
  bool any_assessable = false;
  bool any_vulnerable = false;
};

ClientLiveResult run_client(const ExperimentConfig& cfg, const ThreatModel& threat,
                            const Consensus& consensus, std::span<const TraceRequest> traces,
                            const ClientAs& client, std::size_t index) {
  ClientLiveResult out;
  out.client = client;
  out.seed = client_seed(cfg.seed, index);
  Rng rng(out.seed);
  // Every selector draws guards first so runs with the same seed share guards.
  GuardSet guards = choose_guards(consensus, cfg.guard_size, rng);
  out.guards = guards.guards;

  std::unique_ptr<Selector> selector;
  switch (cfg.selector) {
    case SelectorKind::Vanilla:
      selector = std::make_unique<VanillaSelector>(consensus, guards);
      break;
    case SelectorKind::Uniform:
      selector = std::make_unique<UniformSelector>(consensus);
      break;
    case SelectorKind::Astoria: {
      AstoriaConfig acfg;
      acfg.mode = cfg.mode;
      acfg.safe_threshold = cfg.safe_threshold;
      acfg.verify_safety = cfg.verify_safety;
      selector = std::make_unique<AstoriaSelector>(consensus, guards, client.asn, threat, acfg);
      break;
    }
  }
  CircuitPool pool(consensus, PoolConfig{cfg.max_requests_per_circuit, cfg.max_circuit_age});

  struct Unit {
    std::optional<bool> vulnerable;
    std::vector<std::string> attackers;
  };
  std::map<std::pair<std::size_t, std::uint32_t>, Unit> units;
  std::vector<std::string> site_order;
  std::unordered_map<std::string, SiteState> sites;

  for (std::size_t event = 0; event < traces.size(); ++event) {
    const TraceRequest& req = traces[event];
    const auto res = get_or_build_circuit(pool, *selector, req.dst, event, rng);
    const Circuit& circuit = pool.circuits()[res.circuit];
    ++out.counts.requests;
    if (res.built) {
      ++out.counts.circuits_built;
      if (circuit.origin.provenance == Provenance::LinearProgram) ++out.counts.lp_circuits;
    }
    auto [it, fresh] = units.try_emplace({res.circuit, req.dst.value});
    if (fresh) {
      ++out.counts.units;
      const CircuitSpec spec{client.asn, consensus.relay(circuit.relays.entry).asn,
                             consensus.relay(circuit.relays.exit).asn, req.dst};
      const auto a = threat.assess(spec, cfg.mode);
      if (a.assessable) {
        ++out.counts.units_assessable;
        it->second.vulnerable = a.vulnerable;
        if (a.vulnerable) ++out.counts.units_vulnerable;
        for (const auto& k : a.attackers) it->second.attackers.push_back(threat.label(k));
      }
    }
    const Unit& unit = it->second;

    auto [sit, new_site] = sites.try_emplace(req.site);
    if (new_site) site_order.push_back(req.site);
    SiteState& s = sit->second;
    if (unit.vulnerable) {
      s.any_assessable = true;
      s.any_vulnerable = s.any_vulnerable || *unit.vulnerable;
      if (req.is_main) {
        s.main_assessable = true;
        s.main_vulnerable = *unit.vulnerable;
      }
    }

    CircuitLogRow row;
    row.client = client.asn;
    row.site = req.site;
    row.dst = req.dst;
    row.circuit = res.circuit;
    row.built = res.built;
    row.entry = circuit.relays.entry;
    row.middle = circuit.relays.middle;
    row.exit = circuit.relays.exit;
    row.provenance = circuit.origin.provenance;
    row.vulnerable = unit.vulnerable;
    row.attackers = unit.attackers;
    out.log.push_back(std::move(row));
  }

  for (const auto& name : site_order) {
    const SiteState& s = sites.at(name);
    ++out.counts.sites;
    if (s.main_assessable) ++out.counts.sites_main_assessable;
    if (s.main_assessable && s.main_vulnerable) ++out.counts.sites_main_vulnerable;
    if (s.any_assessable) ++out.counts.sites_any_assessable;
    if (s.any_vulnerable) ++out.counts.sites_any_vulnerable;
  }
  return out;
}

}  // namespace

LiveMetrics run_live_style(const ExperimentConfig& cfg, const ThreatModel& threat,
                           const Consensus& consensus, std::span<const TraceRequest> traces,
                           std::span<const ClientAs> clients) {
  validate(cfg);
  if (!is_live_style(cfg.kind)) throw ConfigError("run_live_style needs e1, e3 or e4");
  require_known(threat.topology().graph, traces, clients, consensus);

  LiveMetrics m;
  m.clients.resize(clients.size());
  parallel_for(clients.size(), cfg.workers, [&](std::size_t i) {
    m.clients[i] = run_client(cfg, threat, consensus, traces, clients[i], i);
  });
  std::vector<CircuitLogRow> all_rows;
  for (const auto& c : m.clients) {
    m.overall.merge(c.counts);
    m.by_label[c.client.label].merge(c.counts);
    all_rows.insert(all_rows.end(), c.log.begin(), c.log.end());
  }
  if (m.overall.circuits_built > 0) m.load = load_balance_report(all_rows, consensus);
  if (cfg.tightness)
    m.tightness = estimate_tightness(all_rows, consensus, threat, cfg.mode, cfg.enumerate_cap);
  return m;
}

// ---- enumeration-style -------------------------------------------------

std::vector<AsId> distinct_destinations(std::span<const TraceRequest> traces) {
  std::vector<AsId> out;
  std::set<std::uint32_t> seen;
  for (const auto& t : traces)
    if (seen.insert(t.dst.value).second) out.push_back(t.dst);
  return out;
}

FractionSummary summarize(std::span<const PairFraction> rows) {
  FractionSummary s;
  s.pairs = rows.size();
  std::vector<double> values;
  for (const auto& r : rows)
    if (r.fraction) values.push_back(*r.fraction);
  s.defined = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  std::size_t below = 0;
  std::size_t none = 0;
  for (double v : values) {
    sum += v;
    if (v < 0.05) ++below;
    if (v == 0.0) ++none;
  }
  const double n = static_cast<double>(values.size());
  s.mean = sum / n;
  s.below_five_percent = static_cast<double>(below) / n;
  s.no_safe_option = static_cast<double>(none) / n;
  s.cdf = empirical_cdf(std::move(values));
  return s;
}

namespace {

MuEstimate estimate_mu(const std::vector<double>& per_client) {
  MuEstimate mu;
  mu.clients = per_client.size();
  if (per_client.empty()) return mu;
  double sum = 0.0;
  for (double v : per_client) sum += v;
  mu.mean = sum / static_cast<double>(per_client.size());
  if (per_client.size() >= 2) mu.ci99 = confidence_interval(per_client, 0.99);
  return mu;
}

}  // namespace

EnumerationMetrics run_enumeration_style(const ExperimentConfig& cfg, const ThreatModel& threat,
                                         const Consensus& consensus,
                                         std::span<const TraceRequest> traces,
                                         std::span<const ClientAs> clients) {
  validate(cfg);
  if (cfg.kind != ExperimentKind::E2 && cfg.kind != ExperimentKind::E5)
    throw ConfigError("run_enumeration_style needs e2 or e5");
  require_known(threat.topology().graph, traces, clients, consensus);
  if (consensus.guards().empty()) throw ConfigError("consensus has no Guard relays");
  if (consensus.exits().empty()) throw ConfigError("consensus has no Exit relays");

  const auto dsts = distinct_destinations(traces);
  std::vector<AsId> exit_ases;
  for (auto i : consensus.exits()) exit_ases.push_back(consensus.relay(i).asn);
  std::vector<AsId> guard_ases;
  for (auto i : consensus.guards()) guard_ases.push_back(consensus.relay(i).asn);

  EnumerationMetrics m;
  m.destinations = dsts.size();
  std::vector<std::vector<PairFraction>> per_client(clients.size());
  m.client_seeds.resize(clients.size());
  for (std::size_t i = 0; i < clients.size(); ++i) m.client_seeds[i] = client_seed(cfg.seed, i);

  parallel_for(clients.size(), cfg.workers, [&](std::size_t i) {
    auto& rows = per_client[i];
    const AsId src = clients[i].asn;
    const auto add = [&](AsId dst, std::span<const AsId> entries, std::size_t k, std::size_t g) {
      const auto grid = threat.attacker_free_fraction(src, dst, entries, exit_ases, cfg.mode);
      rows.push_back({i, dst, k, g, grid.fraction, grid.safe, grid.assessable});
    };
    if (cfg.kind == ExperimentKind::E2) {
      for (AsId dst : dsts) add(dst, guard_ases, 0, 0);
      return;
    }
    for (auto k : cfg.guard_sizes) {
      for (std::size_t g = 0; g < cfg.guard_sets; ++g) {
        Rng rng(guard_set_seed(cfg.seed, i, k, g));
        const auto set = choose_guards(consensus, k, rng);
        std::vector<AsId> entries;
        for (auto r : set.guards) entries.push_back(consensus.relay(r).asn);
        for (AsId dst : dsts) add(dst, entries, k, g);
      }
    }
  });

  for (auto& rows : per_client) m.rows.insert(m.rows.end(), rows.begin(), rows.end());
  m.overall = summarize(m.rows);

  std::map<std::string, std::vector<PairFraction>> label_rows;
  for (const auto& r : m.rows) label_rows[clients[r.client].label].push_back(r);
  for (const auto& [label, rows] : label_rows) m.by_label[label] = summarize(rows);

  if (cfg.kind == ExperimentKind::E5) {
    std::map<std::size_t, std::vector<PairFraction>> by_size;
    for (const auto& r : m.rows) by_size[r.guard_size].push_back(r);
    for (const auto& [k, rows] : by_size) m.by_guard_size[k] = summarize(rows);
    return m;
  }

  // Share of destinations with more than half of their options safe, per client.
  std::vector<double> all_mu;
  std::map<std::string, std::vector<double>> label_mu;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    std::size_t defined = 0;
    std::size_t above = 0;
    for (const auto& r : per_client[i]) {
      if (!r.fraction) continue;
      ++defined;
      if (*r.fraction > 0.5) ++above;
    }
    if (defined == 0) continue;
    const double v = static_cast<double>(above) / static_cast<double>(defined);
    all_mu.push_back(v);
    label_mu[clients[i].label].push_back(v);
  }
  m.mu = estimate_mu(all_mu);
  for (const auto& [label, v] : label_mu) m.mu_by_label[label] = estimate_mu(v);

  if (cfg.population) {
    double p_mid = 0.0;
    if (cfg.p_mid) {
      p_mid = *cfg.p_mid;
    } else {
      const auto share = perfect_balance_distribution(consensus);
      p_mid = *std::max_element(share.begin(), share.end());
    }
    if (!m.mu.ci99) {
      m.middle_relay_note = "needs at least 2 clients for the confidence interval";
    } else {
      try {
        m.middle_relay = middle_relay_risk(*cfg.population, dsts.size(), m.mu.ci99->low, p_mid);
      } catch (const std::invalid_argument& e) {
        m.middle_relay_note = e.what();
      }
    }
  }
  return m;
}

}  // namespace astoria
