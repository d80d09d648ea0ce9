#include "fixtures.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <unistd.h>

namespace fixtures {

using namespace astoria;

AsGraph graph_of(const std::vector<EdgeSpec>& edges) {
  std::vector<Edge> out;
  for (const auto& [a, b, rel] : edges)
    out.push_back(Edge{AsId(a), AsId(b), rel < 0 ? RelKind::ProviderCustomer : RelKind::PeerPeer});
  return AsGraph::from_edges(out);
}

AsGraph graph_of(std::initializer_list<EdgeSpec> edges) {
  return graph_of(std::vector<EdgeSpec>(edges));
}

Relay relay(std::string fp, std::uint32_t asn, double bw, std::uint8_t flags,
            std::uint16_t net16, std::string family) {
  Relay r;
  r.fingerprint = std::move(fp);
  r.asn = AsId(asn);
  r.bandwidth = bw;
  r.flags = flags;
  r.net16 = net16;
  r.family = std::move(family);
  return r;
}

TopologyBundle diamond() {
  TopologyBundle b;
  b.graph = graph_of({{20, 10, -1}, {20, 30, -1}, {20, 40, -1}, {30, 50, -1}, {40, 50, -1}});
  return b;
}

TopologyBundle half_vulnerable() {
  TopologyBundle b;
  b.graph = graph_of({{20, 10, -1},
                      {20, 30, -1},
                      {20, 40, -1},
                      {30, 50, -1},
                      {40, 50, -1},
                      {30, 60, -1},
                      {30, 70, -1}});
  return b;
}

TopologyBundle labelled_diamond() {
  TopologyBundle b = half_vulnerable();
  b.orgs.assign(AsId(30), "org-ab");
  b.orgs.assign(AsId(40), "org-ab");
  for (std::uint32_t as : {20, 30, 40, 50}) b.countries.assign(AsId(as), "US");
  b.countries.assign(AsId(60), "BR");
  b.countries.assign(AsId(70), "BR");
  return b;
}

AsGraph random_graph(Rng& rng, std::size_t n, double p_provider, double p_peer) {
  // rank[k] is the position of node k+1 in the provider hierarchy.
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 1u);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(order[i - 1], order[std::min(j, i - 1)]);
  }
  std::vector<EdgeSpec> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double u = uniform01(rng);
      if (u < p_provider) {
        edges.emplace_back(order[i], order[j], -1);
      } else if (u < p_provider + p_peer) {
        edges.emplace_back(order[i], order[j], 0);
      }
    }
  }
  if (edges.empty()) edges.emplace_back(order[0], order[1 % n], -1);
  return graph_of(edges);
}

TopologyBundle random_bundle(Rng& rng, AsGraph graph) {
  TopologyBundle b;
  b.graph = std::move(graph);
  const char* countries[] = {"US", "BR", "CN"};
  for (AsId as : b.graph.nodes()) {
    const double u = uniform01(rng);
    if (u < 0.5) b.orgs.assign(as, "org" + std::to_string(static_cast<int>(uniform01(rng) * 4)));
    const double v = uniform01(rng);
    if (v < 0.8) b.countries.assign(as, countries[static_cast<int>(uniform01(rng) * 3) % 3]);
  }
  return b;
}

std::vector<TraceRequest> cycle_traces(const std::vector<AsId>& dsts, std::size_t requests) {
  std::vector<TraceRequest> out;
  for (std::size_t i = 0; i < requests; ++i) {
    TraceRequest r;
    r.site = "site" + std::to_string(i);
    r.dst = dsts[i % dsts.size()];
    r.is_main = true;
    r.line = i + 2;
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

constexpr std::uint8_t kGuard = kFlagGuard | kFlagFast | kFlagStable;
constexpr std::uint8_t kExit = kFlagExit | kFlagFast;
constexpr std::uint8_t kMiddle = kFlagFast;

Scenario finish(AsGraph graph, std::vector<Relay> relays, std::vector<ClientAs> clients,
                std::vector<TraceRequest> traces,
                std::vector<std::pair<std::uint32_t, std::string>> orgs,
                std::vector<std::pair<std::uint32_t, std::string>> countries) {
  TopologyBundle b;
  b.graph = std::move(graph);
  for (const auto& [as, org] : orgs) b.orgs.assign(AsId(as), org);
  for (const auto& [as, cc] : countries) b.countries.assign(AsId(as), cc);
  return Scenario{std::move(b), Consensus(std::move(relays), "fixture"), std::move(clients),
                  std::move(traces), std::move(orgs), std::move(countries)};
}

}  // namespace

Scenario thirty_as() {
  auto graph = graph_of({
      {1, 2, 0},                                          // tier 1
      {1, 11, -1},  {1, 12, -1},  {1, 13, -1},            // tier 2 under 1
      {2, 14, -1},  {2, 15, -1},  {2, 16, -1},            // tier 2 under 2
      {12, 15, 0},                                        //
      {11, 100, -1}, {14, 101, -1},                       // clients
      {11, 201, -1}, {14, 201, -1}, {12, 202, -1}, {15, 203, -1},  // guards
      {13, 301, -1}, {16, 302, -1}, {12, 303, -1}, {15, 304, -1},  // exits
      {13, 305, -1}, {16, 305, -1},                       //
      {12, 401, -1}, {13, 402, -1}, {15, 403, -1}, {16, 404, -1},  // destinations
      {12, 405, -1}, {13, 405, -1}, {15, 406, -1}, {16, 406, -1},  //
      {13, 407, -1}, {16, 408, -1}, {12, 409, -1}, {15, 410, -1},  //
      {13, 411, -1}, {15, 411, -1}, {16, 412, -1},                 //
  });
  std::vector<Relay> relays{
      relay("G201", 201, 36, kGuard, 0x0a01),
      relay("G202", 202, 32, kGuard, 0x0a02),
      relay("G203", 203, 32, kGuard, 0x0a03),
      relay("X301", 301, 30, kExit, 0x1401, "fam-a"),
      relay("X302", 302, 20, kExit, 0x1402),
      relay("X303", 303, 20, kExit, 0x1403),
      relay("X304", 304, 15, kExit, 0x1404),
      relay("X305", 305, 15, kExit, 0x1405),
      relay("M11", 11, 30, kMiddle, 0x1e01),
      relay("M2", 2, 30, kMiddle, 0x1e02),
      relay("M13", 13, 20, kMiddle, 0x1e03, "fam-a"),
      relay("M16", 16, 20, kMiddle, 0x1e04),
  };
  std::vector<ClientAs> clients{{"north", AsId(100), 1}, {"south", AsId(101), 2}};
  std::vector<AsId> dsts;
  for (std::uint32_t d = 401; d <= 412; ++d) dsts.push_back(AsId(d));
  return finish(std::move(graph), std::move(relays), std::move(clients),
                cycle_traces(dsts, 120),
                {{12, "org-mid"}, {13, "org-mid"}, {401, "org-web"}, {402, "org-web"}},
                {{1, "US"}, {2, "DE"}, {11, "US"}, {12, "US"}, {13, "US"}, {14, "DE"},
                 {15, "DE"}, {16, "DE"}, {100, "US"}, {101, "DE"}});
}

Scenario guard_diversity() {
  auto graph = graph_of({
      {1, 2, 0},
      {1, 11, -1},
      {2, 20, -1},
      {11, 100, -1},
      {20, 500, -1},
      {20, 301, -1}, {20, 302, -1}, {20, 303, -1},
      {20, 210, -1},
      {11, 211, -1}, {11, 212, -1}, {11, 213, -1}, {11, 214, -1},
  });
  std::vector<Relay> relays{
      relay("BAD", 210, 100, kGuard, 0x0b01),
      relay("GOOD1", 211, 5, kGuard, 0x0b02),
      relay("GOOD2", 212, 5, kGuard, 0x0b03),
      relay("GOOD3", 213, 5, kGuard, 0x0b04),
      relay("GOOD4", 214, 5, kGuard, 0x0b05),
      relay("EX1", 301, 10, kExit, 0x0c01),
      relay("EX2", 302, 10, kExit, 0x0c02),
      relay("EX3", 303, 10, kExit, 0x0c03),
      relay("MID", 2, 10, kMiddle, 0x0d01),
  };
  std::vector<ClientAs> clients{{"solo", AsId(100), 1}};
  return finish(std::move(graph), std::move(relays), std::move(clients),
                cycle_traces({AsId(500)}, 4), {}, {});
}

void write_scenario(const Scenario& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "topology.txt");
    f << "# fixture topology\n";
    write_topology(f, s.bundle.graph);
  }
  {
    std::ofstream f(dir / "siblings.txt");
    for (const auto& [as, org] : s.orgs) f << org << "|" << as << "\n";
  }
  {
    std::ofstream f(dir / "countries.txt");
    for (const auto& [as, cc] : s.countries) f << as << "|" << cc << "\n";
  }
  {
    std::ofstream f(dir / "consensus.csv");
    f << "# timestamp: " << s.consensus.timestamp() << "\n";
    f << "fingerprint,asn,bandwidth,flags,net16,family\n";
    for (const auto& r : s.consensus.relays()) {
      std::string flags;
      const auto add = [&](RelayFlag bit, const char* name) {
        if (!r.has(bit)) return;
        if (!flags.empty()) flags += ';';
        flags += name;
      };
      add(kFlagGuard, "Guard");
      add(kFlagExit, "Exit");
      add(kFlagFast, "Fast");
      add(kFlagStable, "Stable");
      f << r.fingerprint << "," << r.asn.value << "," << r.bandwidth << "," << flags << ","
        << format_net16(r.net16) << "," << r.family << "\n";
    }
  }
  {
    std::ofstream f(dir / "traces.csv");
    f << "site,dst_asn,is_main\n";
    for (const auto& t : s.traces)
      f << t.site << "," << t.dst.value << "," << (t.is_main ? 1 : 0) << "\n";
  }
  {
    std::ofstream f(dir / "clients.csv");
    f << "label,asn\n";
    for (const auto& c : s.clients) f << c.label << "," << c.asn.value << "\n";
  }
}

std::filesystem::path temp_dir(const std::string& tag) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("astoria-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
                    std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
