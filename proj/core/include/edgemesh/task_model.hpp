#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "edgemesh/aggregation.hpp"
#include "edgemesh/crdt.hpp"
#include "edgemesh/kv_store.hpp"
#include "edgemesh/rng.hpp"
#include "edgemesh/types.hpp"

namespace edgemesh::tasks {

// Generic replicated task model. Task specifications live in an add-wins
// set under the reserved "tasks" key, so adding, removing and discovering
// work rides the same convergence machinery as any other data. Execution
// is at-least-once: every shipped task kind writes through idempotent
// store updates (fixed identifiers where needed), so re-running a task on
// any node leaves the converged store unchanged.

inline constexpr const char* kTasksKey = "tasks";
inline constexpr const char* kExecLogPrefix = "exec/";
inline constexpr const char* kResultPrefix = "result/";

using ParamValue = std::variant<std::int64_t, double, std::string, bool>;

struct TaskSpec {
  std::string name;
  /// nullopt targets every node.
  std::optional<std::set<NodeId>> targets;
  std::string kind;
  std::map<std::string, ParamValue> params;

  bool targets_node(NodeId id) const { return !targets || targets->count(id) > 0; }
  std::optional<std::int64_t> int_param(const std::string& key) const;
  std::optional<double> num_param(const std::string& key) const;
  std::optional<std::string> str_param(const std::string& key) const;

  bool operator==(const TaskSpec&) const = default;
};

/// A spec as stored in the tasks CRDT: stamped with the writer's Lamport
/// time so duplicate names resolve to the newest body.
struct StoredTask {
  TaskSpec spec;
  std::uint64_t stamp = 0;
  NodeId writer = 0;
};

Bytes encode_task(const TaskSpec& spec, std::uint64_t stamp, NodeId writer);
std::optional<StoredTask> decode_task(std::string_view in);

struct SchedulerConfig {
  TimeMs cycle_ms = 5'000;
  enum class Selection { LeastLoad, Random };
  Selection selection = Selection::LeastLoad;
};

enum class ExecStatus : std::uint8_t {
  Executed,
  SkippedTarget,
  UnknownName,
  UnknownKind,
  NoneEligible,
};

struct ExecutionResult {
  std::string name;
  ExecStatus status = ExecStatus::NoneEligible;
};

/// Node services a task behavior may use. Implemented by the node runtime;
/// all effects are store updates, which is what makes re-execution safe.
class NodeHooks {
 public:
  virtual ~NodeHooks() = default;
  virtual NodeId self() const = 0;
  virtual crdt::QueryResult store_update(const kv::StoreKey& key, const crdt::MutatorOp& op) = 0;
  virtual crdt::QueryResult store_read(const kv::StoreKey& key) const = 0;
  virtual void install_window(const agg::WindowSpec& spec) = 0;
};

using Behavior = std::function<void(NodeHooks&, const TaskSpec&)>;

class TaskRuntime {
 public:
  TaskRuntime(NodeId self, SchedulerConfig cfg, NodeHooks& hooks, std::uint64_t seed);

  const SchedulerConfig& config() const { return cfg_; }

  /// Registration happens at node start; scenarios assume identical
  /// registries on every node.
  void register_kind(const std::string& kind, Behavior behavior);
  bool knows_kind(const std::string& kind) const { return registry_.count(kind) > 0; }

  /// Add a task to the replicated tasks set. Unknown kinds are accepted
  /// with a warning flag (other nodes may know them).
  void add_task(const TaskSpec& spec, std::uint64_t stamp);

  /// Observed-remove of every visible entry with this name. A concurrent
  /// re-add wins. No-op when absent.
  void remove_task(const std::string& name);

  ExecutionResult start_task(const std::string& name);

  /// Pick the eligible not-yet-started task with the fewest execution log
  /// records (ties by name), or none.
  std::optional<ExecutionResult> find_and_start_task();

  /// start_task on every locally visible, targeting-eligible task in name
  /// order. Per-task failures are collected, not fatal.
  std::vector<ExecutionResult> start_all_tasks();

  /// Discovery tick body (the runtime re-arms the timer).
  void scheduler_tick();

  /// Current view of the tasks CRDT, duplicates resolved by stamp.
  std::map<std::string, StoredTask> visible_tasks() const;

  std::uint64_t executions(const std::string& name) const;
  bool started_here(const std::string& name) const { return started_.count(name) > 0; }

 private:
  std::size_t exec_log_records(const std::string& name) const;
  void log_execution(const std::string& name);

  NodeId self_;
  SchedulerConfig cfg_;
  NodeHooks& hooks_;
  Rng rng_;
  std::map<std::string, Behavior> registry_;
  std::set<std::string> started_;  ///< volatile: lost on restart (at-least-once)
  std::map<std::string, std::uint64_t> local_runs_;
};

/// Shipped task kinds: sense_aggregate, counter_bump, set_collect.
void register_builtin_kinds(TaskRuntime& rt);

/// Canonical execution-log element: (node, execution-count bucket).
Bytes encode_exec_element(NodeId node, std::uint64_t bucket);

}  // namespace edgemesh::tasks
