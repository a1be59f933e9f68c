#include "doctest.h"
#include "edgemesh/sim.hpp"

using namespace edgemesh;
using namespace edgemesh::sim;

namespace {

Scenario base_scenario(std::uint32_t nodes, TimeMs horizon, std::uint64_t seed) {
  Scenario scn;
  scn.nodes = nodes;
  scn.seed = seed;
  scn.horizon_ms = horizon;
  scn.link.latency_min_ms = 1;
  scn.link.latency_max_ms = 5;
  scn.join.start_ms = 100;
  scn.join.stagger_ms = 50;
  return scn;
}

kv::StoreKey counter_key(const char* name = "hits") {
  return {name, crdt::CrdtType::GCounter};
}

}  // namespace

TEST_CASE("run_until(now) is a no-op and time is monotone") {
  World w(base_scenario(1, 1'000, 1));
  w.run_until(500);
  CHECK(w.now() == 500);
  w.run_until(500);
  CHECK(w.now() == 500);
}

TEST_CASE("a single-node world runs its schedulers without any traffic") {
  World w(base_scenario(1, 10'000, 1));
  w.run_to_horizon();
  CHECK(w.metrics().sum_prefix("recv.") == 0);
  CHECK(w.alive(0));
}

TEST_CASE("same seed, same scenario: identical metrics and dumps") {
  auto build = [] {
    Scenario scn = base_scenario(5, 20'000, 99);
    Action update;
    update.at_ms = 2'000;
    update.node = 2;
    update.kind = Action::Kind::Update;
    update.key = counter_key();
    update.op = crdt::Increment{3};
    scn.actions.push_back(update);
    Action bcast;
    bcast.at_ms = 4'000;
    bcast.node = 0;
    bcast.kind = Action::Kind::Broadcast;
    bcast.payload = "ping";
    scn.actions.push_back(bcast);
    return scn;
  };
  World w1(build());
  World w2(build());
  w1.run_to_horizon();
  w2.run_to_horizon();
  CHECK(w1.metrics().to_csv() == w2.metrics().to_csv());
  for (NodeId id = 0; id < 5; ++id) {
    CHECK(w1.store_dump(id) == w2.store_dump(id));
  }
  // A different seed must change the trace.
  Scenario other = build();
  other.seed = 100;
  World w3(std::move(other));
  w3.run_to_horizon();
  CHECK(w1.metrics().to_csv() != w3.metrics().to_csv());
}

TEST_CASE("loss 1.0 delivers nothing remotely") {
  Scenario scn = base_scenario(2, 5'000, 3);
  scn.link.loss = 1.0;
  World w(std::move(scn));
  w.run_to_horizon();
  CHECK(w.metrics().sum_prefix("recv.") == 0);
  CHECK(w.metrics().get("dropped_loss") > 0);
}

TEST_CASE("anti-entropy converges a small cluster") {
  Scenario scn = base_scenario(4, 15'000, 17);
  World w(std::move(scn));
  w.run_until(2'000);
  w.update(1, counter_key(), crdt::Increment{4});
  w.update(3, counter_key(), crdt::Increment{2});
  w.run_to_horizon();
  CHECK(w.stores_converged());
  const auto v = w.node(0).read(Bytes("hits"));
  CHECK(std::get<std::int64_t>(v) == 6);
  CHECK(w.metrics().get("store.converged_at_ms") > 0);
}

TEST_CASE("a lossless line overlay delivers a broadcast within hop-count latency") {
  Scenario scn = base_scenario(4, 20'000, 11);
  scn.topology.kind = Topology::Kind::Line;
  scn.join.policy = JoinPlan::Policy::LowestNeighbor;
  World w(std::move(scn));
  // Let membership settle to the physical line (unreachable walk-added
  // peers fail out of the active views within a few heartbeats).
  w.run_until(10'000);
  const TimeMs sent_at = w.now();
  const auto id = w.broadcast(0, "wave");
  w.run_until(sent_at + 3 * w.scenario().link.latency_max_ms);
  for (NodeId node = 0; node < 4; ++node) {
    bool delivered = false;
    for (const auto& rec : w.node(node).delivery_log()) {
      if (rec.id == id) {
        delivered = true;
        CHECK(rec.at <= sent_at + 3 * w.scenario().link.latency_max_ms);
      }
    }
    CHECK(delivered);
  }
}

TEST_CASE("partition isolates islands; healing reconverges them") {
  Scenario scn = base_scenario(4, 40'000, 23);
  World w(std::move(scn));
  w.run_until(5'000);
  w.partition({{0, 1}, {2, 3}});
  w.update(0, counter_key(), crdt::Increment{10});
  w.update(3, counter_key(), crdt::Increment{5});
  w.run_until(12'000);
  // Reads during the partition see only locally visible values.
  CHECK(std::get<std::int64_t>(w.node(0).read(Bytes("hits"))) == 10);
  CHECK(std::get<std::int64_t>(w.node(3).read(Bytes("hits"))) == 5);
  CHECK(!w.stores_converged());
  w.heal();
  w.run_to_horizon();
  CHECK(w.stores_converged());
  CHECK(std::get<std::int64_t>(w.node(1).read(Bytes("hits"))) == 15);
}

TEST_CASE("heal with no partition is a no-op") {
  World w(base_scenario(2, 2'000, 5));
  w.heal();
  w.run_to_horizon();
  CHECK(w.alive(0));
}

TEST_CASE("overlapping partition groups are rejected") {
  World w(base_scenario(3, 2'000, 5));
  CHECK_THROWS_AS(w.partition({{0, 1}, {1, 2}}), std::invalid_argument);
  CHECK_THROWS_AS(w.partition({{0}, {2}}), std::invalid_argument);  // misses node 1
}

TEST_CASE("a killed node rebuilds its store after restart") {
  Scenario scn = base_scenario(4, 60'000, 31);
  World w(std::move(scn));
  w.run_until(3'000);
  w.update(0, counter_key(), crdt::Increment{7});
  w.run_until(8'000);
  w.kill_node(3);
  CHECK(!w.alive(3));
  w.update(1, counter_key(), crdt::Increment{2});
  w.run_until(20'000);
  w.restart_node(3);
  CHECK_THROWS_AS(w.restart_node(3), std::invalid_argument);  // already alive
  w.run_to_horizon();
  CHECK(w.stores_converged());
  CHECK(std::get<std::int64_t>(w.node(3).read(Bytes("hits"))) == 9);
}

TEST_CASE("invariant hooks stay quiet on a healthy churning run") {
  Scenario scn = base_scenario(8, 30'000, 41);
  scn.link.loss = 0.1;
  Fault kill;
  kill.kind = Fault::Kind::Kill;
  kill.at_ms = 10'000;
  kill.node = 5;
  scn.faults.push_back(kill);
  Fault restart;
  restart.kind = Fault::Kind::Restart;
  restart.at_ms = 18'000;
  restart.node = 5;
  scn.faults.push_back(restart);
  World w(std::move(scn), WorldOptions{.check_invariants = true});
  w.run_to_horizon();  // SimAssertionError would fail the test
  CHECK(w.alive(5));
}

TEST_CASE("three-way partition: island broadcasts deliver island-wide only") {
  Scenario scn = base_scenario(9, 30'000, 61);
  World w(std::move(scn));
  w.run_until(8'000);
  w.partition({{0, 1, 2}, {3, 4, 5}, {6, 7, 8}});
  w.run_until(15'000);  // failure detectors trim cross-island views
  const auto id = w.broadcast(3, "island-news");
  w.run_until(20'000);
  for (NodeId node = 0; node < 9; ++node) {
    bool delivered = false;
    for (const auto& rec : w.node(node).delivery_log()) {
      if (rec.id == id) delivered = true;
    }
    const bool same_island = node >= 3 && node <= 5;
    CHECK(delivered == same_island);
  }
}

TEST_CASE("an isolated node's scheduler still executes locally visible tasks") {
  Scenario scn = base_scenario(4, 30'000, 67);
  World w(std::move(scn));
  w.run_until(5'000);
  w.partition({{0}, {1, 2, 3}});
  w.run_until(8'000);
  tasks::TaskSpec spec;
  spec.name = "solo";
  spec.kind = "set_collect";
  spec.targets = std::set<NodeId>{0};
  w.add_task(0, spec);  // added on the isolated node itself
  w.run_until(20'000);
  CHECK(w.node(0).task_runtime().started_here("solo"));
  const auto v = w.node(0).read(Bytes("result/solo/nodes"));
  CHECK(std::get<std::set<Bytes>>(v) == std::set<Bytes>{"0"});
  // The rest of the cluster has never heard of it.
  CHECK(std::holds_alternative<std::monostate>(w.node(1).read(Bytes("result/solo/nodes"))));
}

TEST_CASE("remove_task stops rescheduling; concurrent re-add wins") {
  Scenario scn = base_scenario(3, 40'000, 71);
  World w(std::move(scn));
  w.run_until(3'000);
  tasks::TaskSpec spec;
  spec.name = "job";
  spec.kind = "counter_bump";
  spec.params["amount"] = std::int64_t{1};
  w.add_task(0, spec);
  w.run_until(12'000);
  w.remove_task(1, "job");
  w.run_until(20'000);
  for (NodeId id = 0; id < 3; ++id) {
    CHECK(w.node(id).task_runtime().visible_tasks().empty());
  }
  // Concurrent remove/add during a partition: the add wins after healing.
  w.partition({{0}, {1, 2}});
  w.add_task(0, spec);        // re-add on the isolated side
  w.run_until(22'000);
  w.remove_task(1, "job");    // removes nothing it can see
  w.run_until(24'000);
  w.heal();
  w.run_to_horizon();
  for (NodeId id = 0; id < 3; ++id) {
    CHECK(w.node(id).task_runtime().visible_tasks().count("job"));
  }
}

TEST_CASE("task announcements reach every connected node's tasks view") {
  Scenario scn = base_scenario(5, 30'000, 53);
  World w(std::move(scn));
  w.run_until(3'000);
  tasks::TaskSpec spec;
  spec.name = "collect";
  spec.kind = "set_collect";
  w.add_task(0, spec);
  w.run_to_horizon();
  for (NodeId id = 0; id < 5; ++id) {
    const auto visible = w.node(id).task_runtime().visible_tasks();
    REQUIRE(visible.count("collect"));
  }
  // Every node executed it (targets = all) exactly at-least-once, and the
  // collected set holds every node id.
  const auto v = w.node(2).read(Bytes("result/collect/nodes"));
  CHECK(std::get<std::set<Bytes>>(v) == std::set<Bytes>{"0", "1", "2", "3", "4"});
  CHECK(w.stores_converged());
}
