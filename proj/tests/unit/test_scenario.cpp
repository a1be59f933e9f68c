#include "doctest.h"
#include "edgemesh/scenario.hpp"

using namespace edgemesh;
using namespace edgemesh::sim;

TEST_CASE("topology generators produce the expected edge sets") {
  CHECK(topology_edges({Topology::Kind::Complete}, 5, 1).size() == 10);
  CHECK(topology_edges({Topology::Kind::Line}, 4, 1) ==
        std::vector<std::pair<NodeId, NodeId>>{{0, 1}, {1, 2}, {2, 3}});
  CHECK(topology_edges({Topology::Kind::Ring}, 4, 1).size() == 4);
  Topology grid;
  grid.kind = Topology::Kind::Grid;
  grid.cols = 2;
  CHECK(topology_edges(grid, 4, 1).size() == 4);  // 2x2 grid
  Topology rnd;
  rnd.kind = Topology::Kind::Random;
  rnd.p = 0.0;
  // Backbone keeps random graphs connected even at p = 0.
  CHECK(topology_edges(rnd, 6, 9).size() == 5);
  CHECK(topology_edges(rnd, 6, 9) == topology_edges(rnd, 6, 9));
}

TEST_CASE("a full scenario parses from JSON") {
  const std::string text = R"({
    "name": "demo",
    "nodes": 4,
    "seed": 9,
    "horizon_ms": 20000,
    "topology": {"kind": "edges", "edges": [[0,1],[1,2],[2,3]]},
    "link": {"loss": 0.1, "latency_min_ms": 2, "latency_max_ms": 8},
    "join": {"policy": "lowest_neighbor", "start_ms": 50, "stagger_ms": 25},
    "membership": {"a_max": 4, "p_max": 12},
    "replication": {"mode": "delta", "sync_interval_ms": 500},
    "tasks": {"cycle_ms": 2000, "selection": "least_load"},
    "aggregation": {"window": 5},
    "faults": [
      {"at_ms": 5000, "kind": "partition", "groups": [[0,1],[2,3]]},
      {"at_ms": 9000, "kind": "heal"},
      {"at_ms": 11000, "kind": "kill", "node": 3},
      {"at_ms": 13000, "kind": "restart", "node": 3}
    ],
    "actions": [
      {"at_ms": 1000, "node": 0, "do": "update", "key": "hits", "type": "gcounter",
       "op": {"kind": "inc", "amount": 4}},
      {"at_ms": 2000, "node": 1, "do": "add_task",
       "task": {"name": "sense", "kind": "sense_aggregate", "targets": [1, 2],
                "params": {"sensor": "temp1", "window": 5, "delta_interval_ms": 250}}},
      {"at_ms": 3000, "node": 2, "do": "broadcast", "payload": "hello"}
    ],
    "checks": [
      {"kind": "stores_converged"},
      {"kind": "counter_equals", "key": "hits", "expect": 4}
    ]
  })";
  auto result = parse_scenario(text);
  REQUIRE(result.errors.empty());
  REQUIRE(result.scenario.has_value());
  const Scenario& scn = *result.scenario;
  CHECK(scn.nodes == 4);
  CHECK(scn.topology.edges.size() == 3);
  CHECK(scn.node.membership.a_max == 4);
  CHECK(scn.node.replication.sync_interval_ms == 500);
  CHECK(scn.faults.size() == 4);
  CHECK(scn.actions.size() == 3);
  REQUIRE(scn.actions[1].task.targets.has_value());
  CHECK(scn.actions[1].task.targets->count(2));
  CHECK(scn.checks.size() == 2);
}

TEST_CASE("validation lists every offending field") {
  const std::string text = R"({
    "nodes": 3,
    "horizon_ms": 1000,
    "topology": {"kind": "edges", "edges": [[0,7],[1,1]]},
    "link": {"loss": 1.5},
    "faults": [
      {"at_ms": 5000, "kind": "kill", "node": 9},
      {"at_ms": 600, "kind": "restart", "node": 1}
    ],
    "actions": [
      {"at_ms": 100, "node": 8, "do": "update", "key": "", "type": "gcounter",
       "op": {"kind": "inc"}}
    ]
  })";
  auto result = parse_scenario(text);
  CHECK(!result.scenario.has_value());
  REQUIRE(!result.errors.empty());
  auto has_error_about = [&](const std::string& needle) {
    for (const auto& e : result.errors) {
      if (e.find(needle) != std::string::npos) return true;
    }
    return false;
  };
  CHECK(has_error_about("topology.edges"));
  CHECK(has_error_about("link.loss"));
  CHECK(has_error_about("restart without a preceding kill"));
  CHECK(has_error_about("after horizon"));
  CHECK(has_error_about("actions[0].node"));
  CHECK(has_error_about("actions[0].key"));
}

TEST_CASE("malformed JSON reports a file-level error") {
  auto result = parse_scenario("{not json");
  CHECK(!result.scenario.has_value());
  REQUIRE(result.errors.size() == 1);
  CHECK(result.errors[0].find("not valid JSON") != std::string::npos);
}

TEST_CASE("unknown enum values are rejected with field names") {
  auto result = parse_scenario(R"({"nodes": 2, "topology": {"kind": "moebius"}})");
  CHECK(!result.scenario.has_value());
  REQUIRE(!result.errors.empty());
  CHECK(result.errors[0].find("topology.kind") != std::string::npos);
}
