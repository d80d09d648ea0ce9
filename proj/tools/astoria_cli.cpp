// astoria command-line front end. Talks to the simulator only through the C API.
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "astoria/astoria.h"

namespace {

constexpr const char* kSettingKeys[] = {
    "experiment", "selector",  "mode",        "topology",     "siblings",
    "countries",  "consensus", "traces",      "clients",      "guards",
    "guard_sizes", "guard_sets", "seed",      "workers",      "cap",
    "max_requests", "max_circuit_age", "safe_threshold", "exclude_endpoints",
    "state_country", "tightness", "verify_safety", "population", "p_mid",
    "output",     "cache_capacity",
};

constexpr const char* kBoolKeys[] = {"exclude_endpoints", "tightness", "verify_safety"};

std::string flag_name(std::string key) {
  for (char& c : key)
    if (c == '_') c = '-';
  return "--" + key;
}

bool is_bool_key(const std::string& key) {
  for (const char* k : kBoolKeys)
    if (key == k) return true;
  return false;
}

struct SettingFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
};

void add_setting_flags(CLI::App* cmd, SettingFlags& flags) {
  cmd->add_option("--config", flags.config_file, "key=value file; flags override it");
  for (const char* key : kSettingKeys) {
    auto* opt = cmd->add_option(flag_name(key), flags.values[key]);
    if (is_bool_key(key)) opt->expected(0, 1);
    flags.options[key] = opt;
  }
}

int exit_code(astoria_status s) {
  switch (s) {
    case ASTORIA_OK: return 0;
    case ASTORIA_E_PARSE:
    case ASTORIA_E_ARGUMENT: return 1;
    default: return 2;
  }
}

int report(astoria_status s) {
  if (s != ASTORIA_OK) std::cerr << "astoria: " << astoria_last_error() << "\n";
  return exit_code(s);
}

struct ConfigHandle {
  astoria_config* cfg = astoria_config_new();
  ~ConfigHandle() { astoria_config_free(cfg); }
};

astoria_status build_config(const SettingFlags& flags, astoria_config* cfg) {
  if (!flags.config_file.empty()) {
    const auto s = astoria_config_load_file(cfg, flags.config_file.c_str());
    if (s != ASTORIA_OK) return s;
  }
  for (const auto& [key, opt] : flags.options) {
    if (opt->count() == 0) continue;
    std::string value = flags.values.at(key);
    if (is_bool_key(key) && value.empty()) value = "true";
    const auto origin = flag_name(key);
    const auto s = astoria_config_set(cfg, key.c_str(), value.c_str(), origin.c_str());
    if (s != ASTORIA_OK) return s;
  }
  return ASTORIA_OK;
}

void print_warnings(const char* json) {
  if (!json) return;
  for (const auto& w : nlohmann::json::parse(json))
    std::cerr << "warning: " << w.get<std::string>() << "\n";
}

void emit(char* text) {
  std::cout << text;
  astoria_string_free(text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AS-aware relay selection simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", astoria_version());

  SettingFlags run_flags;
  auto* run = app.add_subcommand("run", "run an experiment and write report.json and circuits.csv");
  add_setting_flags(run, run_flags);

  SettingFlags assess_flags;
  std::uint32_t src = 0, entry = 0, exit_as = 0, dst = 0;
  auto* assess = app.add_subcommand("assess", "assess one (src, entry, exit, dst) circuit");
  add_setting_flags(assess, assess_flags);
  assess->add_option("--src", src)->required();
  assess->add_option("--entry", entry)->required();
  assess->add_option("--exit", exit_as)->required();
  assess->add_option("--dst", dst)->required();

  SettingFlags paths_flags;
  std::uint32_t a = 0, b = 0;
  bool enumerate = false;
  auto* paths = app.add_subcommand("paths", "path set between two ASes");
  add_setting_flags(paths, paths_flags);
  paths->add_option("a", a)->required();
  paths->add_option("b", b)->required();
  paths->add_flag("--enumerate", enumerate, "list the concrete paths in both directions");

  SettingFlags lp_flags;
  std::string incidence;
  std::uint32_t lp_src = 0, lp_dst = 0;
  auto* lp = app.add_subcommand("lp-dump", "print the minimax LP and its solver trace");
  add_setting_flags(lp, lp_flags);
  lp->add_option("--incidence", incidence, "adversary incidence listing, `label: 0 1 1` rows");
  lp->add_option("--src", lp_src);
  lp->add_option("--dst", lp_dst);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  ConfigHandle handle;
  if (!handle.cfg) {
    std::cerr << "astoria: out of memory\n";
    return 2;
  }

  if (run->parsed()) {
    if (const auto s = build_config(run_flags, handle.cfg); s != ASTORIA_OK) return report(s);
    char* warnings = nullptr;
    const auto s = astoria_run(handle.cfg, &warnings);
    if (s != ASTORIA_OK) return report(s);
    print_warnings(warnings);
    astoria_string_free(warnings);
    return 0;
  }

  if (assess->parsed() || paths->parsed()) {
    const SettingFlags& flags = assess->parsed() ? assess_flags : paths_flags;
    if (const auto s = build_config(flags, handle.cfg); s != ASTORIA_OK) return report(s);
    astoria_world* world = nullptr;
    if (const auto s = astoria_world_open(handle.cfg, &world); s != ASTORIA_OK) return report(s);
    char* out = nullptr;
    const auto s = assess->parsed()
                       ? astoria_assess_json(world, src, entry, exit_as, dst, nullptr, &out)
                       : astoria_paths_json(world, a, b, enumerate ? 1 : 0, 0, &out);
    astoria_world_close(world);
    if (s != ASTORIA_OK) return report(s);
    emit(out);
    return 0;
  }

  // lp-dump
  char* out = nullptr;
  if (!incidence.empty()) {
    std::ifstream in(incidence);
    if (!in) {
      std::cerr << "astoria: cannot open incidence file '" << incidence << "'\n";
      return 1;
    }
    std::ostringstream text;
    text << in.rdbuf();
    const auto s = astoria_lp_dump_incidence(text.str().c_str(), &out);
    if (s != ASTORIA_OK) return report(s);
    emit(out);
    return 0;
  }
  if (lp_src == 0 || lp_dst == 0) {
    std::cerr << "astoria: lp-dump needs --incidence or both --src and --dst\n";
    return 1;
  }
  if (const auto s = build_config(lp_flags, handle.cfg); s != ASTORIA_OK) return report(s);
  const auto s = astoria_lp_dump(handle.cfg, lp_src, lp_dst, &out);
  if (s != ASTORIA_OK) return report(s);
  emit(out);
  return 0;
}
