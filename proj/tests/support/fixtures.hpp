#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <tuple>
#include <vector>

#include "astoria/harness.hpp"
#include "astoria/rng.hpp"
#include "astoria/selection.hpp"
#include "astoria/topology.hpp"

namespace fixtures {

using astoria::AsGraph;
using astoria::AsId;

// (first, second, rel): rel -1 means first is provider of second, 0 peers.
using EdgeSpec = std::tuple<std::uint32_t, std::uint32_t, int>;

AsGraph graph_of(std::initializer_list<EdgeSpec> edges);
AsGraph graph_of(const std::vector<EdgeSpec>& edges);

astoria::Relay relay(std::string fp, std::uint32_t asn, double bw, std::uint8_t flags,
                     std::uint16_t net16, std::string family = {});

// S(50) has providers A(30) and B(40), both customers of P(20); D(10) is a
// customer of P. Two equal-length provider routes from S to D.
astoria::TopologyBundle diamond();

// The diamond extended with X(60) and T(70), both customers of A. The leg
// S<->D has two concrete paths; the leg X<->T is X-A-T. Exactly one of the
// two combinations shares an AS.
astoria::TopologyBundle half_vulnerable();

// Organizations: 30 and 40 are siblings ("org-ab"); 60 and 70 are in
// country "BR", everything else "US" except 10 which is unmapped.
astoria::TopologyBundle labelled_diamond();

// Provider edges follow a random rank order (acyclic); peers are random.
// Nodes are numbered 1..n; isolated nodes are dropped by construction.
AsGraph random_graph(astoria::Rng& rng, std::size_t n, double p_provider = 0.3,
                     double p_peer = 0.15);

// Random orgs and countries over the nodes of `graph`.
astoria::TopologyBundle random_bundle(astoria::Rng& rng, AsGraph graph);

// 30 ASes, two clients, three guard ASes, five exit ASes, destinations
// chosen so that every (client, destination) has a safe pair while a
// bandwidth-weighted vanilla client often picks vulnerable ones.
struct Scenario {
  astoria::TopologyBundle bundle;
  astoria::Consensus consensus;
  std::vector<astoria::ClientAs> clients;
  std::vector<astoria::TraceRequest> traces;
  // Raw assignments behind bundle.orgs and bundle.countries.
  std::vector<std::pair<std::uint32_t, std::string>> orgs;
  std::vector<std::pair<std::uint32_t, std::string>> countries;
};

Scenario thirty_as();

// Traces cycling over `dsts`, one main request per site.
std::vector<astoria::TraceRequest> cycle_traces(const std::vector<AsId>& dsts,
                                                std::size_t requests);

// One client, one destination, a heavy guard whose leg crosses every exit
// leg and several light guards that are always safe.
Scenario guard_diversity();

// Writes topology.txt, siblings.txt, countries.txt, consensus.csv,
// traces.csv and clients.csv for `s` into `dir`.
void write_scenario(const Scenario& s, const std::filesystem::path& dir);

// Fresh empty directory under the system temp directory.
std::filesystem::path temp_dir(const std::string& tag);

}  // namespace fixtures
