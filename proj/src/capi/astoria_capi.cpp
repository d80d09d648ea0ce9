#include "astoria/astoria.h"

#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "json.hpp"

#include "astoria/error.hpp"
#include "astoria/experiment.hpp"
#include "astoria/lp.hpp"

struct astoria_config {
  astoria::Settings settings;
};

struct astoria_world {
  astoria::RunConfig cfg;
  astoria::TopologyBundle bundle;
  std::unique_ptr<astoria::RoutingCache> cache;
  std::unique_ptr<astoria::ThreatModel> threat;
};

namespace {

thread_local std::string g_error;

astoria_status fail(astoria_status status, std::string message) {
  g_error = std::move(message);
  return status;
}

template <class Fn>
astoria_status guarded(Fn&& fn) {
  try {
    fn();
    g_error.clear();
    return ASTORIA_OK;
  } catch (const astoria::ParseError& e) {
    return fail(ASTORIA_E_PARSE, e.what());
  } catch (const astoria::ConfigError& e) {
    return fail(ASTORIA_E_PARSE, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(ASTORIA_E_PARSE, e.what());
  } catch (const std::exception& e) {
    return fail(ASTORIA_E_RUNTIME, e.what());
  } catch (...) {
    return fail(ASTORIA_E_RUNTIME, "unknown error");
  }
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

astoria::AsId asn(std::uint32_t v) {
  if (v == 0) throw std::invalid_argument("AS number 0 is not valid");
  return astoria::AsId(v);
}

astoria::AdversaryMode mode_of(const char* mode, const astoria_world& world) {
  if (!mode) return world.cfg.experiment.mode;
  const auto m = astoria::parse_adversary_mode(mode);
  if (!m) throw std::invalid_argument(std::string("unknown adversary mode '") + mode + "'");
  return *m;
}

std::string warnings_json(const std::vector<std::string>& w) {
  return nlohmann::json(w).dump();
}

}  // namespace

extern "C" {

const char* astoria_version(void) { return "0.1.0"; }

const char* astoria_last_error(void) { return g_error.c_str(); }

void astoria_string_free(char* s) { std::free(s); }

astoria_config* astoria_config_new(void) { return new (std::nothrow) astoria_config(); }

void astoria_config_free(astoria_config* cfg) { delete cfg; }

astoria_status astoria_config_load_file(astoria_config* cfg, const char* path) {
  if (!cfg || !path) return fail(ASTORIA_E_ARGUMENT, "null argument");
  return guarded([&] {
    std::ifstream in(path);
    if (!in) throw astoria::ConfigError(std::string("cannot open config file '") + path + "'");
    cfg->settings.read(in, path);
  });
}

astoria_status astoria_config_set(astoria_config* cfg, const char* key, const char* value,
                                  const char* origin) {
  if (!cfg || !key || !value) return fail(ASTORIA_E_ARGUMENT, "null argument");
  return guarded([&] {
    const auto keys = astoria::known_setting_keys();
    if (std::find(keys.begin(), keys.end(), std::string_view(key)) == keys.end())
      throw astoria::ConfigError(std::string("unknown key '") + key + "'");
    cfg->settings.set(key, value, origin ? origin : key);
  });
}

astoria_status astoria_config_check(const astoria_config* cfg) {
  if (!cfg) return fail(ASTORIA_E_ARGUMENT, "null config");
  return guarded([&] { astoria::parse_run_config(cfg->settings); });
}

astoria_status astoria_run(const astoria_config* cfg, char** out_warnings) {
  if (!cfg) return fail(ASTORIA_E_ARGUMENT, "null config");
  return guarded([&] {
    const auto rc = astoria::parse_run_config(cfg->settings);
    const auto out = astoria::run_experiment(rc);
    astoria::write_run_output(out, rc.output);
    if (out_warnings) *out_warnings = dup(warnings_json(out.warnings));
  });
}

astoria_status astoria_run_capture(const astoria_config* cfg, char** out_report,
                                   char** out_circuits, char** out_warnings) {
  if (!cfg || !out_report) return fail(ASTORIA_E_ARGUMENT, "null argument");
  return guarded([&] {
    const auto out = astoria::run_experiment(astoria::parse_run_config(cfg->settings));
    *out_report = dup(out.report_json);
    if (out_circuits) *out_circuits = dup(out.circuits_csv);
    if (out_warnings) *out_warnings = dup(warnings_json(out.warnings));
  });
}

astoria_status astoria_lp_dump(const astoria_config* cfg, uint32_t src, uint32_t dst,
                               char** out_text) {
  if (!cfg || !out_text) return fail(ASTORIA_E_ARGUMENT, "null argument");
  return guarded([&] {
    const auto rc = astoria::parse_run_config(cfg->settings, false);
    *out_text = dup(astoria::lp_dump(rc, asn(src), asn(dst)));
  });
}

astoria_status astoria_lp_dump_incidence(const char* incidence_text, char** out_text) {
  if (!incidence_text || !out_text) return fail(ASTORIA_E_ARGUMENT, "null argument");
  return guarded([&] {
    std::istringstream in(incidence_text);
    *out_text = dup(astoria::lp_dump_incidence(in, "<incidence>"));
  });
}

astoria_status astoria_world_open(const astoria_config* cfg, astoria_world** out) {
  if (!cfg || !out) return fail(ASTORIA_E_ARGUMENT, "null argument");
  return guarded([&] {
    auto w = std::make_unique<astoria_world>();
    w->cfg = astoria::parse_run_config(cfg->settings, false);
    w->bundle = astoria::load_inputs(w->cfg, {}).bundle;
    w->cache = std::make_unique<astoria::RoutingCache>(w->bundle.graph, w->cfg.cache_capacity);
    w->threat =
        std::make_unique<astoria::ThreatModel>(w->bundle, *w->cache, w->cfg.experiment.threat);
    *out = w.release();
  });
}

void astoria_world_close(astoria_world* world) { delete world; }

astoria_status astoria_world_counts(const astoria_world* world, size_t* ases, size_t* edges) {
  if (!world) return fail(ASTORIA_E_ARGUMENT, "null world");
  if (ases) *ases = world->bundle.graph.node_count();
  if (edges) *edges = world->bundle.graph.edge_count();
  return ASTORIA_OK;
}

astoria_status astoria_assess(astoria_world* world, uint32_t src, uint32_t entry, uint32_t exit,
                              uint32_t dst, const char* mode, int* out_assessable,
                              int* out_vulnerable) {
  if (!world) return fail(ASTORIA_E_ARGUMENT, "null world");
  return guarded([&] {
    const astoria::CircuitSpec spec{asn(src), asn(entry), asn(exit), asn(dst)};
    for (auto as : {spec.src, spec.entry, spec.exit, spec.dst})
      if (!world->bundle.graph.contains(as))
        throw astoria::ConfigError("AS " + std::to_string(as.value) + " is not in the topology");
    const auto a = world->threat->assess(spec, mode_of(mode, *world));
    if (out_assessable) *out_assessable = a.assessable ? 1 : 0;
    if (out_vulnerable) *out_vulnerable = a.vulnerable ? 1 : 0;
  });
}

astoria_status astoria_assess_json(astoria_world* world, uint32_t src, uint32_t entry,
                                   uint32_t exit, uint32_t dst, const char* mode,
                                   char** out_json) {
  if (!world || !out_json) return fail(ASTORIA_E_ARGUMENT, "null argument");
  return guarded([&] {
    const astoria::CircuitSpec spec{asn(src), asn(entry), asn(exit), asn(dst)};
    *out_json = dup(astoria::assess_json(*world->threat, spec, mode_of(mode, *world)));
  });
}

astoria_status astoria_paths_json(astoria_world* world, uint32_t a, uint32_t b, int enumerate,
                                  size_t cap, char** out_json) {
  if (!world || !out_json) return fail(ASTORIA_E_ARGUMENT, "null argument");
  return guarded([&] {
    *out_json = dup(astoria::paths_json(*world->cache, asn(a), asn(b), enumerate != 0,
                                            cap ? cap : world->cfg.experiment.enumerate_cap));
  });
}

astoria_status astoria_lp_solve(size_t pairs, size_t adversaries, const uint8_t* incidence,
                                double* out_probs, double* out_objective) {
  if (pairs == 0 || !out_probs || (adversaries > 0 && !incidence))
    return fail(ASTORIA_E_ARGUMENT, "invalid LP arguments");
  return guarded([&] {
    std::vector<std::string> labels;
    std::vector<std::vector<std::uint8_t>> rows;
    for (size_t a = 0; a < adversaries; ++a) {
      labels.push_back("A" + std::to_string(a));
      rows.emplace_back(incidence + a * pairs, incidence + (a + 1) * pairs);
    }
    const astoria::SelectionProblem problem(pairs, std::move(labels), std::move(rows));
    const auto dist = astoria::solve_minimax(problem);
    std::copy(dist.probs.begin(), dist.probs.end(), out_probs);
    if (out_objective) *out_objective = dist.objective;
  });
}

astoria_status astoria_middle_relay_risk(uint64_t population, uint64_t destinations,
                                         double mu_low, double p_mid, double* out_expected,
                                         double* out_observations, double* out_probability) {
  return guarded([&] {
    const auto r = astoria::middle_relay_risk(population, destinations, mu_low, p_mid);
    if (out_expected) *out_expected = r.expected_linkable;
    if (out_observations) *out_observations = r.observations;
    if (out_probability) *out_probability = r.probability;
  });
}

}  // extern "C"
