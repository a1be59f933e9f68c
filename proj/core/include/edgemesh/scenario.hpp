#pragma once

#include <optional>
#include <string>
#include <vector>

#include "edgemesh/node.hpp"
#include "edgemesh/types.hpp"

namespace edgemesh::sim {

// Scenario model: everything a deterministic run needs — cluster size and
// physical topology, link behavior, fault schedule, scripted API actions,
// and end-of-run checks. Scenarios load from JSON files or are built
// programmatically by tests.

struct LinkModel {
  double loss = 0.0;  ///< per-message drop probability, [0, 1]
  TimeMs latency_min_ms = 1;
  TimeMs latency_max_ms = 10;
};

struct Topology {
  enum class Kind { Complete, Line, Ring, Grid, Random, Edges };
  Kind kind = Kind::Complete;
  std::vector<std::pair<NodeId, NodeId>> edges;  ///< Kind::Edges
  double p = 0.5;                                ///< Kind::Random edge probability
  std::uint32_t cols = 0;                        ///< Kind::Grid (0 = square-ish)
};

struct JoinPlan {
  enum class Policy { Node0, LowestNeighbor, None };
  Policy policy = Policy::Node0;
  TimeMs start_ms = 100;
  TimeMs stagger_ms = 100;
};

struct Fault {
  enum class Kind { Partition, Heal, Kill, Restart };
  TimeMs at_ms = 0;
  Kind kind = Kind::Heal;
  std::vector<std::vector<NodeId>> groups;  ///< Partition
  NodeId node = 0;                          ///< Kill / Restart
};

struct Action {
  enum class Kind {
    AddTask,
    RemoveTask,
    StartTask,
    StartAllTasks,
    FindAndStartTask,
    Declare,
    Update,
    Broadcast,
  };
  TimeMs at_ms = 0;
  NodeId node = 0;
  Kind kind = Kind::Update;
  tasks::TaskSpec task;     ///< AddTask
  std::string task_name;    ///< RemoveTask / StartTask
  kv::StoreKey key;         ///< Declare / Update
  crdt::MutatorOp op;       ///< Update
  Bytes payload;            ///< Broadcast
};

struct Check {
  enum class Kind {
    StoresConverged,
    OverlayConnected,
    CounterEquals,        ///< key + expect
    SetSizeAtLeast,       ///< key + expect
    TaskOnAllTargets,     ///< task executed on every target, and only there
  };
  Kind kind = Kind::StoresConverged;
  Bytes key;
  std::string task;
  std::int64_t expect = 0;
};

struct Scenario {
  std::string name = "scenario";
  std::uint32_t nodes = 1;
  std::uint64_t seed = 1;
  TimeMs horizon_ms = 10'000;
  Topology topology;
  LinkModel link;
  JoinPlan join;
  NodeConfig node;  ///< per-node protocol configuration (contacts ignored)
  std::vector<Fault> faults;
  std::vector<Action> actions;
  std::vector<Check> checks;
};

/// Structural validation; returns one message per offending field.
std::vector<std::string> validate(const Scenario& scn);

/// Materialize the physical edge set of a topology (undirected, a < b).
std::vector<std::pair<NodeId, NodeId>> topology_edges(const Topology& t, std::uint32_t nodes,
                                                      std::uint64_t seed);

struct ParseResult {
  std::optional<Scenario> scenario;
  std::vector<std::string> errors;
};

/// Parse a scenario from JSON text. Collects schema errors rather than
/// throwing; validate() still applies afterwards.
ParseResult parse_scenario(const std::string& json_text);
ParseResult load_scenario_file(const std::string& path);

}  // namespace edgemesh::sim
