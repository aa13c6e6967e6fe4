#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include <nlohmann/json.hpp>

#include "dhnet/errors.hpp"
#include "dhnet/network.hpp"

using namespace dhnet;
using nlohmann::json;

namespace {

json minimal_loop_json() {
    return json::parse(R"({
      "constants": {"g": 9.81, "theta": 8.0},
      "nodes": [
        {"id": "f0", "part": "foreflow"},
        {"id": "f1", "part": "foreflow"},
        {"id": "b1", "part": "backflow"},
        {"id": "b0", "part": "backflow"}
      ],
      "arcs": [
        {"id": "pf", "kind": "pipe_ff", "tail": "f0", "head": "f1",
         "pipe": {"length": 100.0, "diameter": 0.1, "roughness": 1e-4}},
        {"id": "c", "kind": "consumer", "tail": "f1", "head": "b1"},
        {"id": "pb", "kind": "pipe_bf", "tail": "b1", "head": "b0",
         "pipe": {"length": 100.0, "diameter": 0.1}},
        {"id": "d", "kind": "depot", "tail": "b0", "head": "f0"}
      ]
    })");
}

}  // namespace

TEST_CASE("minimal four-node loop loads and validates") {
    const Network net = Network::from_json(minimal_loop_json());
    CHECK(net.pipes().size() == 2);
    CHECK(net.consumers().size() == 1);
    CHECK(net.nodes().size() == 4);
    CHECK(net.constants().g == doctest::Approx(9.81));
    CHECK(net.constants().theta == doctest::Approx(8.0));
    CHECK(net.loop_count() == 0);

    const auto& pipe = *net.arc(net.pipes()[0]).pipe;
    CHECK(pipe.cross_section() ==
          doctest::Approx(0.1 * 0.1 * std::numbers::pi / 4.0).epsilon(1e-15));
}

TEST_CASE("schema violations raise distinct diagnostics") {
    SUBCASE("two depot arcs") {
        json j = minimal_loop_json();
        j["arcs"].push_back(
            {{"id", "d2"}, {"kind", "depot"}, {"tail", "b0"}, {"head", "f0"}});
        CHECK_THROWS_WITH_AS(Network::from_json(j), doctest::Contains("multiple depot"),
                             SchemaError);
    }
    SUBCASE("duplicate node id") {
        json j = minimal_loop_json();
        j["nodes"].push_back({{"id", "f0"}, {"part", "foreflow"}});
        CHECK_THROWS_WITH_AS(Network::from_json(j), doctest::Contains("duplicate node"),
                             SchemaError);
    }
    SUBCASE("consumer must bridge foreflow to backflow") {
        json j = minimal_loop_json();
        j["arcs"][1]["tail"] = "b1";
        j["arcs"][1]["head"] = "f1";
        CHECK_THROWS_AS(Network::from_json(j), SchemaError);
    }
    SUBCASE("disconnected graph") {
        json j = minimal_loop_json();
        j["nodes"].push_back({{"id", "iso1"}, {"part", "foreflow"}});
        j["nodes"].push_back({{"id", "iso2"}, {"part", "foreflow"}});
        j["arcs"].push_back({{"id", "isop"},
                             {"kind", "pipe_ff"},
                             {"tail", "iso1"},
                             {"head", "iso2"},
                             {"pipe", {{"length", 10.0}, {"diameter", 0.1}}}});
        CHECK_THROWS_WITH_AS(Network::from_json(j), doctest::Contains("not connected"),
                             SchemaError);
    }
    SUBCASE("missing depot") {
        json j = minimal_loop_json();
        j["arcs"].erase(3);
        CHECK_THROWS_WITH_AS(Network::from_json(j), doctest::Contains("no depot"),
                             SchemaError);
    }
}

TEST_CASE("material overrides in the network file") {
    json j = minimal_loop_json();
    j["constants"]["material"] = {{"T_coeffs", {2.0, 200.0, 50.0}},
                                  {"rho_coeffs", {1.0, 0.0, 0.0}},
                                  {"e0", 1e9}};
    const Network net = Network::from_json(j);
    CHECK(net.material().temperature_of_energy(0.0) == doctest::Approx(2.0));
    CHECK(net.material().density_of_energy(0.3e9) == doctest::Approx(1000.0));
    // wrong coefficient count is a schema error
    j["constants"]["material"]["T_coeffs"] = {1.0, 2.0};
    CHECK_THROWS_AS(Network::from_json(j), SchemaError);
}

TEST_CASE("json round trip preserves the topology") {
    const Network net = make_star_network(4);
    const Network back = Network::from_json(net.to_json());
    CHECK(back.nodes().size() == net.nodes().size());
    CHECK(back.arcs().size() == net.arcs().size());
    CHECK(back.pipes().size() == net.pipes().size());
    CHECK(back.loop_count() == net.loop_count());
}

TEST_CASE("generators produce the documented shapes") {
    SUBCASE("path with asymmetric segments") {
        const Network net = make_path_network(1, 3, 2);
        CHECK(net.pipes().size() == 5);
        CHECK(net.consumers().size() == 1);
        CHECK(net.loop_count() == 0);
    }
    SUBCASE("star") {
        const Network net = make_star_network(3);
        CHECK(net.pipes().size() == 10);
        CHECK(net.consumers().size() == 3);
        CHECK(net.loop_count() == 0);
    }
    SUBCASE("two-loop") {
        const Network net = make_two_loop_network(2);
        CHECK(net.pipes().size() == 20);
        CHECK(net.consumers().size() == 2);
        CHECK(net.loop_count() == 2);
    }
    SUBCASE("street-scale consumer count") {
        const Network net = make_star_network(32);
        CHECK(net.consumers().size() == 32);
        const std::string csv = net.topology_summary_csv();
        CHECK(csv.find("pipes,consumers,depot,arcs,nodes,loops") != std::string::npos);
        CHECK(csv.find("68,32,1,101,70,0") != std::string::npos);
    }
}

TEST_CASE("flow partition classifies by flow sign with >=/<= tie breaking") {
    const Network net = Network::from_json(minimal_loop_json());
    const int pf = net.arc_index("pf");
    const int f0 = net.node_index("f0"), f1 = net.node_index("f1");

    SUBCASE("aligned flows: I_n is the topological in-set") {
        std::vector<double> q(net.arcs().size(), 1.0);
        const auto part = flow_partition(net, q);
        for (std::size_t n = 0; n < net.nodes().size(); ++n) {
            CHECK(part.inflow[n] == net.in_arcs()[n]);
            CHECK(part.outflow[n] == net.out_arcs()[n]);
        }
        CHECK_FALSE(part.reversed[pf]);
    }
    SUBCASE("one reversed pipe swaps its classification") {
        std::vector<double> q(net.arcs().size(), 1.0);
        q[pf] = -1.0;
        const auto part = flow_partition(net, q);
        CHECK(std::count(part.outflow[f0].begin(), part.outflow[f0].end(), pf) == 0);
        CHECK(std::count(part.inflow[f0].begin(), part.inflow[f0].end(), pf) == 1);
        CHECK(std::count(part.outflow[f1].begin(), part.outflow[f1].end(), pf) == 1);
        CHECK(part.reversed[pf]);
    }
    SUBCASE("zero flow lands in the inflow set at both endpoints") {
        std::vector<double> q(net.arcs().size(), 1.0);
        q[pf] = 0.0;
        const auto part = flow_partition(net, q);
        CHECK(std::count(part.inflow[f1].begin(), part.inflow[f1].end(), pf) == 1);
        CHECK(std::count(part.inflow[f0].begin(), part.inflow[f0].end(), pf) == 1);
    }
}

TEST_CASE("partition is a partition for random flows") {
    const Network net = make_two_loop_network(2);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> q(net.arcs().size());
        for (double& x : q) x = dist(rng);
        const auto part = flow_partition(net, q);
        for (std::size_t n = 0; n < net.nodes().size(); ++n) {
            const std::size_t incident =
                net.in_arcs()[n].size() + net.out_arcs()[n].size();
            CHECK(part.inflow[n].size() + part.outflow[n].size() == incident);
        }
    }
}

TEST_CASE("solenoidal flow sampler conserves volume exactly") {
    std::mt19937 rng(11);
    for (const auto& net : {make_path_network(1, 3, 2), make_star_network(3),
                            make_two_loop_network(2)}) {
        for (int trial = 0; trial < 10; ++trial) {
            const auto q = random_solenoidal_flow(net, rng, 1e-3);
            const auto res = volume_residuals(net, q);
            for (double r : res) CHECK(r < 1e-12);
            for (double x : q) CHECK(x >= 0.0);
        }
    }
}
