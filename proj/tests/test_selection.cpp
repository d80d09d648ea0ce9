#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "astoria/error.hpp"
#include "astoria/selection.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace astoria;
using fixtures::relay;

namespace {

constexpr std::uint8_t kG = kFlagGuard;
constexpr std::uint8_t kX = kFlagExit;

GuardSet all_guards(const Consensus& c) { return GuardSet{c.guards()}; }

}  // namespace

TEST(Consensus, ParsesRelaysAndTimestamp) {
  std::istringstream in(
      "# timestamp: 2016-01-01 00:00\n"
      "fingerprint,asn,bandwidth,flags,net16,family\n"
      "AAA,10,100,Guard;Fast;Stable,1.2,fam\n"
      "BBB,20,50.5,Exit,1.3,\n"
      "CCC,30,0,,1.4,\n");
  const auto c = load_consensus(in);
  EXPECT_EQ(c.size(), 3u);
  EXPECT_EQ(c.timestamp(), "2016-01-01 00:00");
  EXPECT_EQ(c.guards(), std::vector<std::size_t>{0});
  EXPECT_EQ(c.exits(), std::vector<std::size_t>{1});
  EXPECT_EQ(c.relay(0).family, "fam");
  EXPECT_EQ(c.relay(0).net16, (1 << 8) | 2);
  EXPECT_DOUBLE_EQ(c.relay(1).bandwidth, 50.5);
  EXPECT_EQ(format_net16(c.relay(2).net16), "1.4");
  EXPECT_EQ(c.find("CCC"), 2u);
  EXPECT_FALSE(c.find("DDD").has_value());
}

TEST(Consensus, RejectsBadRows) {
  const std::string header = "fingerprint,asn,bandwidth,flags,net16,family\n";
  const auto line_of = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      load_consensus(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of("A,1,1,Guard,1.1,\n"), 1u);
  EXPECT_EQ(line_of(header + "A,1,-1,Guard,1.1,\n"), 2u);
  EXPECT_EQ(line_of(header + "A,1,1,Bogus,1.1,\n"), 2u);
  EXPECT_EQ(line_of(header + "A,1,1,Guard,1.1.1,\n"), 2u);
  EXPECT_EQ(line_of(header + "A,0,1,Guard,1.1,\n"), 2u);
  EXPECT_EQ(line_of(header + "A,1,1,Guard,1.1\n"), 2u);
  EXPECT_NE(line_of(header + "A,1,1,Guard,1.1,\nA,2,1,Exit,1.2,\n"), 0u);
  EXPECT_NE(line_of(header), 0u);
}

TEST(Relays, ConflictRules) {
  const auto a = relay("A", 1, 1, kG, 0x0101, "f");
  EXPECT_TRUE(relays_conflict(a, relay("A", 2, 1, kX, 0x0202)));
  EXPECT_TRUE(relays_conflict(a, relay("B", 2, 1, kX, 0x0101)));
  EXPECT_TRUE(relays_conflict(a, relay("B", 2, 1, kX, 0x0202, "f")));
  EXPECT_FALSE(relays_conflict(a, relay("B", 1, 1, kX, 0x0202)));
  EXPECT_FALSE(relays_conflict(relay("A", 1, 1, kG, 1), relay("B", 1, 1, kG, 2)));
}

TEST(Guards, ChosenCompatibleAndBandwidthWeighted) {
  const Consensus c({relay("G1", 1, 60, kG, 1), relay("G2", 2, 30, kG, 1),
                     relay("G3", 3, 10, kG, 3), relay("X", 4, 1, kX, 4)});
  Rng rng(1);
  std::map<std::size_t, int> first;
  for (int i = 0; i < 20000; ++i) {
    const auto g = choose_guards(c, 2, rng);
    ASSERT_EQ(g.guards.size(), 2u);
    ASSERT_FALSE(relays_conflict(c.relay(g.guards[0]), c.relay(g.guards[1])));
    ++first[g.guards[0]];
  }
  EXPECT_NEAR(first[0] / 20000.0, 0.6, 0.02);
  EXPECT_NEAR(first[2] / 20000.0, 0.1, 0.02);
  EXPECT_THROW(choose_guards(c, 3, rng), SelectionError);
  EXPECT_THROW(choose_guards(c, 0, rng), std::invalid_argument);
  EXPECT_THROW(choose_guards(c, 4, rng), std::invalid_argument);
}

TEST(Vanilla, MatchesExactPairDistribution) {
  const auto s = fixtures::thirty_as();
  const auto& c = s.consensus;
  const auto guards = all_guards(c);
  const auto exact = oracle::vanilla_pairs(c, guards.guards);
  Rng rng(2);
  std::map<std::pair<std::size_t, std::size_t>, int> seen;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto t = vanilla_select(c, guards, rng);
    ASSERT_FALSE(relays_conflict(c.relay(t.entry), c.relay(t.middle)));
    ASSERT_FALSE(relays_conflict(c.relay(t.middle), c.relay(t.exit)));
    ASSERT_FALSE(relays_conflict(c.relay(t.entry), c.relay(t.exit)));
    ++seen[{t.entry, t.exit}];
  }
  for (const auto& [pair, p] : exact) EXPECT_NEAR(seen[pair] / double(n), p, 0.01);
}

TEST(Uniform, IgnoresBandwidth) {
  const Consensus c({relay("G1", 1, 1000, kG, 1), relay("G2", 2, 1, kG, 2),
                     relay("X1", 3, 1000, kX, 3), relay("X2", 4, 1, kX, 4),
                     relay("M", 5, 1, 0, 5)});
  Rng rng(3);
  int g1 = 0;
  for (int i = 0; i < 20000; ++i) g1 += uniform_select(c, rng).entry == 0;
  EXPECT_NEAR(g1 / 20000.0, 0.5, 0.02);
}

TEST(Selection, UnsatisfiableConflictsThrow) {
  const Consensus c({relay("G", 1, 1, kG | kX, 1)});
  Rng rng(4);
  EXPECT_THROW(vanilla_select(c, all_guards(c), rng), SelectionError);
  EXPECT_THROW(uniform_select(c, rng), SelectionError);
}

class AstoriaPlanTest : public ::testing::Test {
 protected:
  fixtures::Scenario s = fixtures::thirty_as();
  RoutingCache cache{s.bundle.graph};
  ThreatModel threat{s.bundle, cache};
};

TEST_F(AstoriaPlanTest, BandwidthPlanMatchesClosedForm) {
  const auto& c = s.consensus;
  const auto guards = all_guards(c);
  for (std::uint32_t d = 401; d <= 412; ++d) {
    const AsId dst(d);
    const auto plan = plan_astoria(c, guards, AsId(100), dst, threat, {});
    ASSERT_EQ(plan.provenance, Provenance::Bandwidth);
    std::map<std::pair<std::size_t, std::size_t>, double> want;
    double total = 0.0;
    for (auto e : guards.guards)
      for (auto x : c.exits()) {
        if (relays_conflict(c.relay(e), c.relay(x))) continue;
        const auto v = oracle::assess(s.bundle, AsId(100), c.relay(e).asn, c.relay(x).asn, dst,
                                      AdversaryMode::SingleAs);
        if (!v.assessable || v.vulnerable) continue;
        want[{e, x}] = c.relay(e).bandwidth * c.relay(x).bandwidth;
        total += want[{e, x}];
      }
    ASSERT_EQ(plan.pairs.size(), want.size()) << "dst " << d;
    for (std::size_t k = 0; k < plan.pairs.size(); ++k) {
      const auto key = std::pair{plan.pairs[k].entry, plan.pairs[k].exit};
      ASSERT_TRUE(want.contains(key));
      EXPECT_NEAR(plan.weights[k], want[key] / total, 1e-12);
    }
  }
}

TEST_F(AstoriaPlanTest, SampledPairsAreSafeAndFollowWeights) {
  const auto& c = s.consensus;
  const auto guards = all_guards(c);
  const AsId dst(405);
  const auto plan = plan_astoria(c, guards, AsId(101), dst, threat, {});
  Rng rng(5);
  std::vector<int> hits(plan.pairs.size(), 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto sel = sample_plan(c, plan, rng);
    std::size_t k = 0;
    while (plan.pairs[k].entry != sel.relays.entry || plan.pairs[k].exit != sel.relays.exit) ++k;
    ++hits[k];
  }
  for (std::size_t k = 0; k < plan.pairs.size(); ++k)
    EXPECT_NEAR(hits[k] / double(n), plan.weights[k], 0.02);
  AstoriaConfig verify;
  verify.verify_safety = true;
  for (int i = 0; i < 200; ++i)
    EXPECT_NO_THROW(astoria_select(c, guards, AsId(101), dst, threat, rng, verify));
}

TEST_F(AstoriaPlanTest, ThresholdForcesLinearProgram) {
  const auto& c = s.consensus;
  AstoriaConfig cfg;
  cfg.safe_threshold = 1.0;
  // First destination with at least one vulnerable pair.
  std::uint32_t d = 401;
  while (d <= 412 && plan_astoria(c, all_guards(c), AsId(100), AsId(d), threat, {}).safe_pairs ==
                         plan_astoria(c, all_guards(c), AsId(100), AsId(d), threat, {})
                             .assessable_pairs)
    ++d;
  ASSERT_LE(d, 412u);
  const auto plan = plan_astoria(c, all_guards(c), AsId(100), AsId(d), threat, cfg);
  EXPECT_EQ(plan.provenance, Provenance::LinearProgram);
  EXPECT_EQ(plan.pairs.size(), plan.assessable_pairs - plan.safe_pairs);
  ASSERT_TRUE(plan.lp_objective.has_value());
  ASSERT_TRUE(plan.problem.has_value());
  EXPECT_NEAR(*plan.lp_objective, solve_minimax(*plan.problem).objective, 1e-12);
  cfg.safe_threshold = 1.5;
  EXPECT_THROW(plan_astoria(c, all_guards(c), AsId(100), AsId(401), threat, cfg),
               std::invalid_argument);
}

TEST(AstoriaLp, NoSafePairUsesMinimaxDistribution) {
  // Client 1 reaches guards in 11 and 12 through provider 21 and the guard in
  // 13 through provider 22. The exit leg 30<->40 crosses the 21-22 peering,
  // so every pair is vulnerable: 21 sees two entries, 22 sees one.
  TopologyBundle b;
  b.graph = fixtures::graph_of({{21, 1, -1}, {22, 1, -1}, {21, 11, -1}, {21, 12, -1},
                                {22, 13, -1}, {21, 22, 0}, {21, 30, -1}, {22, 40, -1}});
  const Consensus c({relay("E1", 11, 10, kG, 1), relay("E2", 12, 10, kG, 2),
                     relay("E3", 13, 10, kG, 3), relay("X", 30, 10, kX, 4),
                     relay("M", 30, 10, 0, 5)});
  RoutingCache cache(b.graph);
  ThreatModel threat(b, cache);
  const auto plan = plan_astoria(c, all_guards(c), AsId(1), AsId(40), threat, {});
  ASSERT_EQ(plan.provenance, Provenance::LinearProgram);
  ASSERT_EQ(plan.safe_pairs, 0u);
  ASSERT_EQ(plan.pairs.size(), 3u);
  const auto& p = *plan.problem;
  EXPECT_NEAR(*plan.lp_objective, 0.5, 1e-9);
  EXPECT_NEAR(plan.weights[2], 0.5, 1e-9);
  EXPECT_NEAR(exposure(SelectionDistribution{plan.weights, 0, 0}, p, "21"), 0.5, 1e-9);

  Rng rng(6);
  const int n = 100000;
  std::vector<int> seen(p.adversary_count(), 0);
  for (int i = 0; i < n; ++i) {
    const auto sel = sample_plan(c, plan, rng);
    ASSERT_EQ(sel.provenance, Provenance::LinearProgram);
    std::size_t k = 0;
    while (plan.pairs[k].entry != sel.relays.entry) ++k;
    for (std::size_t a = 0; a < p.adversary_count(); ++a) seen[a] += p.covers(a, k);
  }
  for (std::size_t a = 0; a < p.adversary_count(); ++a)
    EXPECT_LE(seen[a] / double(n), *plan.lp_objective + 0.02) << p.adversary(a);
}

TEST(AstoriaLp, UnassessableEverywhereThrows) {
  TopologyBundle b;
  b.graph = fixtures::graph_of({{1, 2, 0}, {2, 3, 0}, {3, 4, -1}});
  const Consensus c({relay("E", 3, 1, kG, 1), relay("X", 4, 1, kX, 2)});
  RoutingCache cache(b.graph);
  ThreatModel threat(b, cache);
  EXPECT_THROW(plan_astoria(c, all_guards(c), AsId(1), AsId(4), threat, {}), SelectionError);
}

TEST(AstoriaPlan, ZeroBandwidthSafePairsFallBackToUniform) {
  const auto b = fixtures::half_vulnerable();
  const Consensus c({relay("E", 20, 0, kG, 1), relay("X1", 40, 0, kX, 2),
                     relay("X2", 60, 0, kX, 3), relay("M", 10, 1, 0, 4)});
  RoutingCache cache(b.graph);
  ThreatModel threat(b, cache);
  const auto plan = plan_astoria(c, all_guards(c), AsId(10), AsId(70), threat, {});
  ASSERT_EQ(plan.provenance, Provenance::Bandwidth);
  for (double w : plan.weights) EXPECT_DOUBLE_EQ(w, 1.0 / static_cast<double>(plan.pairs.size()));
}

TEST(Balance, PerfectShareIsBandwidthShare) {
  const Consensus c({relay("A", 1, 30, kG, 1), relay("B", 2, 10, kX, 2)});
  EXPECT_EQ(perfect_balance_distribution(c), (std::vector<double>{0.75, 0.25}));
  const Consensus z({relay("A", 1, 0, kG, 1)});
  EXPECT_THROW(perfect_balance_distribution(z), std::invalid_argument);
}

namespace {

// Deterministic selector that hands out relays from a fixed list.
class ScriptedSelector : public Selector {
 public:
  ScriptedSelector(PoolPolicy policy) : policy_(policy) {}
  BuiltCircuit build(AsId, Rng&) override {
    ++builds;
    BuiltCircuit c;
    c.relays = {0, 2, 1};
    return c;
  }
  PoolPolicy policy() const override { return policy_; }
  std::string_view name() const override { return "scripted"; }
  int builds = 0;

 private:
  PoolPolicy policy_;
};

Consensus pool_consensus() {
  return Consensus({relay("E", 1, 1, kG, 1), relay("X", 2, 1, kX, 2), relay("M", 3, 1, 0, 3)});
}

}  // namespace

TEST(Pool, RequestCapReusesUntilFull) {
  const auto c = pool_consensus();
  CircuitPool pool(c, {.max_requests_per_circuit = 3, .max_age_events = 0});
  ScriptedSelector sel(PoolPolicy::RequestCap);
  Rng rng(0);
  std::vector<std::size_t> ids;
  for (std::size_t e = 0; e < 7; ++e)
    ids.push_back(get_or_build_circuit(pool, sel, AsId(e % 2 ? 5 : 6), e, rng).circuit);
  EXPECT_EQ(ids, (std::vector<std::size_t>{0, 0, 0, 1, 1, 1, 2}));
  EXPECT_EQ(sel.builds, 3);
}

TEST(Pool, PerDestinationReusesOnlyForSameDestination) {
  const auto c = pool_consensus();
  CircuitPool pool(c);
  ScriptedSelector sel(PoolPolicy::PerDestination);
  Rng rng(0);
  const auto a = get_or_build_circuit(pool, sel, AsId(5), 0, rng);
  const auto b = get_or_build_circuit(pool, sel, AsId(6), 1, rng);
  const auto a2 = get_or_build_circuit(pool, sel, AsId(5), 2, rng);
  EXPECT_TRUE(a.built);
  EXPECT_TRUE(b.built);
  EXPECT_FALSE(a2.built);
  EXPECT_EQ(a.circuit, a2.circuit);
  EXPECT_NE(a.circuit, b.circuit);
  EXPECT_EQ(pool.circuits()[a.circuit].requests_served, 2u);
  EXPECT_EQ(pool.circuits()[a.circuit].dst, AsId(5));
}

TEST(Pool, AgeExpiresCircuits) {
  const auto c = pool_consensus();
  CircuitPool pool(c, {.max_requests_per_circuit = 100, .max_age_events = 2});
  ScriptedSelector sel(PoolPolicy::PerDestination);
  Rng rng(0);
  EXPECT_TRUE(get_or_build_circuit(pool, sel, AsId(5), 0, rng).built);
  EXPECT_FALSE(get_or_build_circuit(pool, sel, AsId(5), 1, rng).built);
  EXPECT_TRUE(get_or_build_circuit(pool, sel, AsId(5), 2, rng).built);
  EXPECT_FALSE(pool.live(0, 2));
  EXPECT_TRUE(pool.live(1, 3));
}

TEST(Pool, RejectsIncompatibleRelays) {
  const auto c = pool_consensus();
  CircuitPool pool(c);
  Circuit bad;
  bad.relays = {0, 0, 1};
  EXPECT_THROW(pool.insert(bad), std::logic_error);
  bad.relays = {0, 2, 9};
  EXPECT_THROW(pool.insert(bad), std::logic_error);
}

TEST(Selectors, AstoriaMemoizesPlanPerDestination) {
  auto s = fixtures::thirty_as();
  RoutingCache cache(s.bundle.graph);
  ThreatModel threat(s.bundle, cache);
  AstoriaSelector sel(s.consensus, all_guards(s.consensus), AsId(100), threat, {});
  const auto* first = &sel.plan(AsId(401));
  EXPECT_EQ(first, &sel.plan(AsId(401)));
  EXPECT_EQ(sel.policy(), PoolPolicy::PerDestination);
  Rng rng(1);
  const auto built = sel.build(AsId(401), rng);
  EXPECT_EQ(built.provenance, Provenance::Bandwidth);
  EXPECT_EQ(to_string(Provenance::LinearProgram), "D_lp");
}
