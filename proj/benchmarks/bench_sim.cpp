#include <benchmark/benchmark.h>

#include "edgemesh/sim.hpp"

using namespace edgemesh;
using namespace edgemesh::sim;

namespace {

Scenario cluster_scenario(std::uint32_t nodes, TimeMs horizon) {
  Scenario scn;
  scn.nodes = nodes;
  scn.seed = 7;
  scn.horizon_ms = horizon;
  scn.link.latency_min_ms = 1;
  scn.link.latency_max_ms = 8;
  scn.join.stagger_ms = 50;
  return scn;
}

/// Full-stack event throughput: joins, heartbeats, shuffles, anti-entropy
/// and a replicated counter workload.
void BM_WorldRun(benchmark::State& state) {
  const auto nodes = static_cast<std::uint32_t>(state.range(0));
  for (auto _ : state) {
    Scenario scn = cluster_scenario(nodes, 20'000);
    for (NodeId n = 0; n < nodes; ++n) {
      Action a;
      a.at_ms = 2'000 + n * 100;
      a.node = n;
      a.kind = Action::Kind::Update;
      a.key = {"hits", crdt::CrdtType::GCounter};
      a.op = crdt::Increment{1};
      scn.actions.push_back(a);
    }
    World world(std::move(scn));
    world.run_to_horizon();
    benchmark::DoNotOptimize(world.stores_converged());
  }
}
BENCHMARK(BM_WorldRun)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Broadcast32(benchmark::State& state) {
  for (auto _ : state) {
    Scenario scn = cluster_scenario(32, 15'000);
    Action a;
    a.at_ms = 10'000;
    a.node = 0;
    a.kind = Action::Kind::Broadcast;
    a.payload = "payload";
    scn.actions.push_back(a);
    World world(std::move(scn));
    world.run_to_horizon();
    benchmark::DoNotOptimize(world.metrics().get("broadcast.delivered"));
  }
}
BENCHMARK(BM_Broadcast32)->Unit(benchmark::kMillisecond);

}  // namespace
