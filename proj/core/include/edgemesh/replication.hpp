#pragma once

#include <map>
#include <set>

#include "edgemesh/crdt.hpp"
#include "edgemesh/kv_store.hpp"
#include "edgemesh/outbox.hpp"
#include "edgemesh/types.hpp"

namespace edgemesh::repl {

// Delta-based anti-entropy. Local and forwarded deltas are buffered under
// strictly increasing sequence numbers; every sync interval each active
// peer is sent the range it has not yet acknowledged. Peers whose floor
// predates the retained buffer get a full-state catch-up instead. A
// full-state reference mode replaces delta shipping entirely and exists as
// the equivalence/traffic oracle for the delta path.

struct Config {
  enum class Mode { Delta, FullState };
  Mode mode = Mode::Delta;
  TimeMs sync_interval_ms = 1'000;
  std::size_t buffer_capacity = 1'024;
};

class Replicator {
 public:
  explicit Replicator(NodeId self, Config cfg) : self_(self), cfg_(cfg) {}

  const Config& config() const { return cfg_; }

  /// Buffer a delta produced locally, or received and found to inflate the
  /// local state (transitive propagation). `origin` is the peer the delta
  /// arrived from (self for local mutations); it is skipped when shipping.
  std::uint64_t record_local_delta(const Bytes& key, crdt::Delta delta, NodeId origin);

  /// Periodic sync: emit one DeltaGroup or FullState per peer that is
  /// behind. `peers` is the current membership active view.
  void anti_entropy_tick(const kv::Store& store, const std::set<NodeId>& peers, Outbox& out);

  /// Cumulative acknowledgement from a peer; garbage-collects entries that
  /// every active peer has acknowledged.
  void on_ack(NodeId peer, std::uint64_t seq, const std::set<NodeId>& peers);

  void on_peer_added(NodeId peer);
  void on_peer_removed(NodeId peer, const std::set<NodeId>& peers);

  std::uint64_t next_seq() const { return next_seq_; }
  std::uint64_t latest_seq() const { return next_seq_ - 1; }
  std::uint64_t acked_floor(NodeId peer) const;
  std::size_t buffered() const { return buffer_.size(); }
  std::uint64_t evicted_through() const { return evicted_through_; }

 private:
  void gc(const std::set<NodeId>& peers);

  struct Entry {
    Bytes key;
    crdt::Delta delta;
    NodeId origin;
  };

  NodeId self_;
  Config cfg_;
  std::map<std::uint64_t, Entry> buffer_;
  std::uint64_t next_seq_ = 1;
  std::uint64_t evicted_through_ = 0;  ///< highest seq no longer buffered
  std::map<NodeId, std::uint64_t> ack_floor_;
};

}  // namespace edgemesh::repl
