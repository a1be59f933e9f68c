#pragma once

#include <deque>
#include <memory>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgemesh/metrics.hpp"
#include "edgemesh/node.hpp"
#include "edgemesh/rng.hpp"
#include "edgemesh/scenario.hpp"

namespace edgemesh::sim {

// Deterministic discrete-event simulator. A single queue orders events by
// (time, insertion sequence); link loss and latency come from one seeded
// stream, so identical (scenario, seed) pairs replay identical histories,
// bit for bit, including metrics and store dumps.

struct SimAssertionError : std::runtime_error {
  SimAssertionError(const std::string& what, std::vector<std::string> tail)
      : std::runtime_error(what), trace_tail(std::move(tail)) {}
  std::vector<std::string> trace_tail;
};

struct WorldOptions {
  bool check_invariants = false;  ///< run assertion hooks after every event
};

class World {
 public:
  using Options = WorldOptions;

  explicit World(Scenario scenario, Options options = {});

  TimeMs now() const { return now_; }
  std::uint32_t node_count() const { return scenario_.nodes; }
  const Scenario& scenario() const { return scenario_; }
  Metrics& metrics() { return metrics_; }
  const Metrics& metrics() const { return metrics_; }

  /// Process every event with time <= t, in order.
  void run_until(TimeMs t);
  void run_to_horizon() { run_until(scenario_.horizon_ms); }

  // --- faults (also reachable through the scenario fault schedule) ---
  void partition(const std::vector<std::vector<NodeId>>& groups);
  void heal();
  void kill_node(NodeId id);
  void restart_node(NodeId id);

  bool alive(NodeId id) const { return id < alive_.size() && alive_[id]; }
  std::size_t alive_count() const;
  Node& node(NodeId id);
  const Node& node(NodeId id) const;

  // --- scripted API against a node, scheduled deterministically "now" ---
  crdt::QueryResult update(NodeId id, const kv::StoreKey& key, const crdt::MutatorOp& op);
  void add_task(NodeId id, const tasks::TaskSpec& spec);
  void remove_task(NodeId id, const std::string& name);
  tasks::ExecutionResult start_task(NodeId id, const std::string& name);
  std::vector<tasks::ExecutionResult> start_all_tasks(NodeId id);
  wire::MessageId broadcast(NodeId id, const Bytes& payload);

  // --- inspection ---
  Bytes store_dump(NodeId id) const { return node(id).store().canonical_dump(); }
  bool stores_converged() const;

  /// Undirected union of live nodes' active views.
  std::vector<std::pair<NodeId, NodeId>> overlay_edges() const;
  bool overlay_connected() const;

  /// Undirected eager-push edges (either endpoint eager counts).
  std::vector<std::pair<NodeId, NodeId>> eager_edges() const;
  bool eager_graph_connected() const;

  struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
  };
  std::vector<CheckResult> run_checks() const;

  const std::deque<std::string>& trace_tail() const { return trace_; }

 private:
  struct Event {
    TimeMs at = 0;
    std::uint64_t seq = 0;
    enum class Kind { Start, Deliver, Timer, Fault, Action } kind = Kind::Start;
    NodeId node = 0;        // Start/Timer target, Deliver destination
    NodeId from = 0;        // Deliver source
    std::uint32_t gen = 0;  // target incarnation at scheduling time
    Bytes frame;
    Timer timer;
    Fault fault;
    Action action;
  };
  struct EventOrder {
    bool operator()(const Event& a, const Event& b) const {
      if (a.at != b.at) return a.at > b.at;
      return a.seq > b.seq;
    }
  };

  void schedule(Event ev);
  void process(const Event& ev);
  void dispatch_outputs(NodeId from, NodeOutputs& out);
  void send_frame(NodeId from, NodeId to, Bytes frame);
  void run_action(const Action& a);
  void apply_fault(const Fault& f);
  bool adjacent(NodeId a, NodeId b) const;
  const LinkModel& link_for(NodeId a, NodeId b) const;
  void build_nodes();
  std::vector<NodeId> contacts_for(NodeId id) const;
  void note_store_activity(NodeId id);
  void refresh_convergence();
  void check_node_invariants(NodeId id);
  void trace(const Event& ev);

  Scenario scenario_;
  Options options_;
  Metrics metrics_;
  Rng link_rng_;
  TimeMs now_ = 0;
  std::uint64_t next_event_seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, EventOrder> queue_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::vector<bool> alive_;
  std::vector<std::uint32_t> gen_;
  std::vector<std::set<NodeId>> neighbors_;  // physical adjacency
  bool complete_topology_ = false;
  std::vector<std::uint32_t> group_of_;      // partition group per node
  bool partitioned_ = false;
  std::vector<std::uint64_t> store_versions_seen_;
  std::vector<std::uint64_t> store_hashes_;
  std::deque<std::string> trace_;
};

/// FNV-1a over a byte string; stable across platforms.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace edgemesh::sim
