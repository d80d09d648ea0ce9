#include <gtest/gtest.h>

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <string>

#include "astoria/astoria.h"
#include "fixtures.hpp"

namespace {

struct Config {
  astoria_config* p = astoria_config_new();
  ~Config() { astoria_config_free(p); }
};

struct World {
  astoria_world* p = nullptr;
  ~World() { astoria_world_close(p); }
};

std::string take(char* s) {
  std::string out = s ? s : "";
  astoria_string_free(s);
  return out;
}

void point_at(astoria_config* cfg, const std::filesystem::path& dir) {
  const auto set = [&](const char* key, const char* file) {
    ASSERT_EQ(astoria_config_set(cfg, key, (dir / file).c_str(), nullptr), ASTORIA_OK);
  };
  set("topology", "topology.txt");
  set("siblings", "siblings.txt");
  set("countries", "countries.txt");
  set("consensus", "consensus.csv");
  set("traces", "traces.csv");
  set("clients", "clients.csv");
}

}  // namespace

TEST(CApi, VersionAndNullHandles) {
  EXPECT_STRNE(astoria_version(), "");
  EXPECT_EQ(astoria_config_set(nullptr, "seed", "1", nullptr), ASTORIA_E_ARGUMENT);
  EXPECT_EQ(astoria_config_check(nullptr), ASTORIA_E_ARGUMENT);
  EXPECT_NE(std::strlen(astoria_last_error()), 0u);
  astoria_world* w = nullptr;
  EXPECT_EQ(astoria_world_open(nullptr, &w), ASTORIA_E_ARGUMENT);
  astoria_config_free(nullptr);
  astoria_world_close(nullptr);
  astoria_string_free(nullptr);
}

TEST(CApi, ConfigErrorsAreParseErrors) {
  Config c;
  ASSERT_EQ(astoria_config_set(c.p, "seed", "abc", "--seed"), ASTORIA_OK);
  EXPECT_EQ(astoria_config_check(c.p), ASTORIA_E_PARSE);
  EXPECT_NE(std::string(astoria_last_error()).find("--seed"), std::string::npos);
  EXPECT_EQ(astoria_config_load_file(c.p, "/nonexistent/run.cfg"), ASTORIA_E_PARSE);
}

TEST(CApi, RunCaptureIsDeterministic) {
  const auto dir = fixtures::temp_dir("capi");
  fixtures::write_scenario(fixtures::thirty_as(), dir);
  Config c;
  point_at(c.p, dir);
  ASSERT_EQ(astoria_config_set(c.p, "selector", "astoria", nullptr), ASTORIA_OK);
  ASSERT_EQ(astoria_config_check(c.p), ASTORIA_OK);
  char *r1, *c1, *w1, *r2, *c2;
  ASSERT_EQ(astoria_run_capture(c.p, &r1, &c1, &w1), ASTORIA_OK) << astoria_last_error();
  ASSERT_EQ(astoria_run_capture(c.p, &r2, &c2, nullptr), ASTORIA_OK);
  const auto report = take(r1);
  EXPECT_EQ(report, take(r2));
  EXPECT_EQ(take(c1), take(c2));
  EXPECT_EQ(take(w1), "[]");
  EXPECT_NE(report.find("\"tool\": \"astoria\""), std::string::npos);

  ASSERT_EQ(astoria_config_set(c.p, "output", (dir / "out").c_str(), nullptr), ASTORIA_OK);
  ASSERT_EQ(astoria_run(c.p, nullptr), ASTORIA_OK);
  std::ifstream f(dir / "out" / "report.json");
  std::stringstream ss;
  ss << f.rdbuf();
  EXPECT_EQ(ss.str(), report);
}

TEST(CApi, MissingTopologyIsParseError) {
  Config c;
  ASSERT_EQ(astoria_config_set(c.p, "topology", "/nonexistent/t.txt", nullptr), ASTORIA_OK);
  char* w = nullptr;
  EXPECT_EQ(astoria_run(c.p, &w), ASTORIA_E_PARSE);
  World world;
  EXPECT_EQ(astoria_world_open(c.p, &world.p), ASTORIA_E_PARSE);
}

TEST(CApi, WorldQueries) {
  const auto dir = fixtures::temp_dir("capi-world");
  fixtures::write_scenario(fixtures::thirty_as(), dir);
  Config c;
  point_at(c.p, dir);
  World w;
  ASSERT_EQ(astoria_world_open(c.p, &w.p), ASTORIA_OK) << astoria_last_error();
  size_t ases = 0, edges = 0;
  ASSERT_EQ(astoria_world_counts(w.p, &ases, &edges), ASTORIA_OK);
  EXPECT_EQ(ases, 30u);

  int assessable = -1, vulnerable = -1;
  // Client 100 and entry 202 both route via 11 -> 1 -> 12; exit 303 sits under 12 next to 401.
  ASSERT_EQ(astoria_assess(w.p, 100, 202, 303, 401, nullptr, &assessable, &vulnerable),
            ASTORIA_OK);
  EXPECT_EQ(assessable, 1);
  EXPECT_EQ(vulnerable, 1);
  EXPECT_EQ(astoria_assess(w.p, 100, 202, 303, 4242, nullptr, &assessable, &vulnerable),
            ASTORIA_E_PARSE);
  EXPECT_EQ(astoria_assess(w.p, 100, 202, 303, 401, "galaxy", &assessable, &vulnerable),
            ASTORIA_E_PARSE);

  char* text = nullptr;
  ASSERT_EQ(astoria_assess_json(w.p, 100, 202, 303, 401, "sibling", &text), ASTORIA_OK);
  EXPECT_NE(take(text).find("\"mode\": \"sibling\""), std::string::npos);
  ASSERT_EQ(astoria_paths_json(w.p, 100, 401, 1, 0, &text), ASTORIA_OK);
  EXPECT_NE(take(text).find("\"forward\""), std::string::npos);
}

TEST(CApi, LpEntryPoints) {
  const uint8_t incidence[] = {1, 1, 0, 0, 0, 1};
  double probs[3];
  double z = 0;
  ASSERT_EQ(astoria_lp_solve(3, 2, incidence, probs, &z), ASTORIA_OK);
  EXPECT_NEAR(z, 0.5, 1e-9);
  EXPECT_NEAR(probs[2], 0.5, 1e-9);
  const uint8_t empty_row[] = {0, 0};
  EXPECT_EQ(astoria_lp_solve(2, 1, empty_row, probs, &z), ASTORIA_E_PARSE);
  EXPECT_EQ(astoria_lp_solve(2, 1, nullptr, probs, &z), ASTORIA_E_ARGUMENT);

  char* text = nullptr;
  ASSERT_EQ(astoria_lp_dump_incidence("A: 1 0\nB: 0 1\n", &text), ASTORIA_OK);
  EXPECT_NE(take(text).find("z* = 0.5"), std::string::npos);
  EXPECT_EQ(astoria_lp_dump_incidence("A 1 0\n", &text), ASTORIA_E_PARSE);
}

TEST(CApi, MiddleRelayRisk) {
  double es = 0, n = 0, p = 0;
  ASSERT_EQ(astoria_middle_relay_risk(1227, 131, 0.43818, 0.007, &es, &n, &p), ASTORIA_OK);
  EXPECT_NEAR(es, 35216, 0.03 * 35216);
  EXPECT_NEAR(n, 7.8, 0.15);
  EXPECT_EQ(astoria_middle_relay_risk(2, 2, 0.1, 0.1, &es, &n, &p), ASTORIA_E_PARSE);
}
