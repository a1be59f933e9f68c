#pragma once

#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "edgemesh/aggregation.hpp"
#include "edgemesh/broadcast.hpp"
#include "edgemesh/kv_store.hpp"
#include "edgemesh/membership.hpp"
#include "edgemesh/metrics.hpp"
#include "edgemesh/replication.hpp"
#include "edgemesh/sensors.hpp"
#include "edgemesh/task_model.hpp"
#include "edgemesh/types.hpp"

namespace edgemesh {

// One protocol node: store, replication, membership, broadcast, task
// scheduler and sensor windows behind a single serial event handler. The
// node never touches a transport; every entry point appends outgoing
// frames and timer requests to the caller's output buffer. All state is
// volatile: a restarted node rebuilds its store from its peers.

struct NodeConfig {
  membership::Config membership;
  broadcast::Config broadcast;
  repl::Config replication;
  tasks::SchedulerConfig scheduler;
  agg::Config aggregation;
  sensors::Config sensors;
  std::vector<NodeId> contacts;  ///< join contacts, tried in rotation
};

struct NodeOutputs {
  std::vector<std::pair<NodeId, Bytes>> frames;
  std::vector<TimerReq> timers;
};

struct LamportClock {
  std::uint64_t time = 0;
  std::uint64_t tick() { return ++time; }
  void observe(std::uint64_t seen) {
    if (seen > time) time = seen;
  }
};

class Node final : public tasks::NodeHooks {
 public:
  Node(NodeId id, NodeConfig cfg, std::uint64_t seed, Metrics* metrics = nullptr);

  NodeId id() const { return id_; }
  std::uint64_t seed() const { return seed_; }

  /// Arm the periodic timers and contact the first join target.
  void start(TimeMs now, NodeOutputs& out);

  void on_frame(TimeMs now, NodeId from, const Bytes& frame, NodeOutputs& out);
  void on_timer(TimeMs now, const Timer& timer, NodeOutputs& out);

  // --- local API (driven by the CLI/scenario actions and tests) ---
  void declare(const kv::StoreKey& key);
  crdt::QueryResult update(TimeMs now, const kv::StoreKey& key, const crdt::MutatorOp& op,
                           NodeOutputs& out);
  crdt::QueryResult read(const kv::StoreKey& key) const { return store_.read(key); }
  crdt::QueryResult read(const Bytes& name) const { return store_.read(name); }

  void add_task(TimeMs now, const tasks::TaskSpec& spec, NodeOutputs& out);
  void remove_task(TimeMs now, const std::string& name, NodeOutputs& out);
  tasks::ExecutionResult start_task(TimeMs now, const std::string& name, NodeOutputs& out);
  std::optional<tasks::ExecutionResult> find_and_start_task(TimeMs now, NodeOutputs& out);
  std::vector<tasks::ExecutionResult> start_all_tasks(TimeMs now, NodeOutputs& out);

  wire::MessageId broadcast_payload(TimeMs now, const Bytes& payload, NodeOutputs& out);

  // --- introspection ---
  const kv::Store& store() const { return store_; }
  const membership::Membership& views() const { return membership_; }
  const broadcast::Broadcast& bcast() const { return broadcast_; }
  const repl::Replicator& replicator() const { return replicator_; }
  const tasks::TaskRuntime& task_runtime() const { return *task_runtime_; }
  std::uint64_t store_version() const { return store_version_; }
  std::uint64_t lamport_time() const { return lamport_.time; }
  bool has_window(const Bytes& store_key) const { return windows_.count(store_key) > 0; }

  struct DeliveryRecord {
    wire::MessageId id;
    TimeMs at = 0;
  };
  const std::vector<DeliveryRecord>& delivery_log() const { return delivery_log_; }

  /// First violated module invariant, if any (simulator assertion hook).
  std::optional<std::string> invariant_violation() const;

  // --- tasks::NodeHooks ---
  NodeId self() const override { return id_; }
  crdt::QueryResult store_update(const kv::StoreKey& key, const crdt::MutatorOp& op) override;
  crdt::QueryResult store_read(const kv::StoreKey& key) const override { return store_.read(key); }
  void install_window(const agg::WindowSpec& spec) override;

  /// Broadcast payload tags: user payloads are opaque; store-delta payloads
  /// carry a key + CRDT fragment that receivers join in (task announcements).
  static Bytes make_delta_payload(const Bytes& key, const crdt::CrdtState& delta);

 private:
  struct WindowState {
    agg::AggWindow window;
    std::uint64_t raw_seq = 0;
  };

  void flush(TimeMs now, Outbox& box, NodeOutputs& out);
  void sync_views(TimeMs now, Outbox& box);
  void handle_frame(TimeMs now, NodeId from, const wire::Frame& frame, Outbox& box);
  void apply_items(TimeMs now, NodeId from, const std::vector<wire::DeltaItem>& items,
                   bool rebuffer, Outbox& box);
  void handle_delivery(TimeMs now, const Delivery& delivery, Outbox& box);
  void sensor_sample(TimeMs now, const Bytes& window_key, Outbox& box);
  sensors::Stream& stream(std::uint8_t kind);
  crdt::MutatorOp stamp(const crdt::MutatorOp& op);
  void metric(const std::string& name, std::uint64_t delta = 1);

  NodeId id_;
  NodeConfig cfg_;
  std::uint64_t seed_;
  Metrics* metrics_;
  kv::Store store_;
  membership::Membership membership_;
  broadcast::Broadcast broadcast_;
  repl::Replicator replicator_;
  std::unique_ptr<tasks::TaskRuntime> task_runtime_;
  LamportClock lamport_;
  std::map<NodeId, TimeMs> last_heard_;
  std::map<Bytes, WindowState> windows_;
  std::map<std::uint8_t, sensors::Stream> streams_;
  std::vector<DeliveryRecord> delivery_log_;
  std::uint64_t store_version_ = 0;
  std::size_t contact_idx_ = 0;
  std::uint32_t starved_ticks_ = 0;  ///< heartbeats spent under half capacity
  TimeMs now_ = 0;                  ///< time of the entry point in progress
  Outbox* active_outbox_ = nullptr; ///< set while an entry point runs
};

}  // namespace edgemesh
