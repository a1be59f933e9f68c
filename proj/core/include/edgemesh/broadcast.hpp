#pragma once

#include <list>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "edgemesh/outbox.hpp"
#include "edgemesh/rng.hpp"
#include "edgemesh/types.hpp"

namespace edgemesh::broadcast {

// Plumtree-style epidemic broadcast tree: payloads ride eager push links
// (which converge to a spanning tree of the overlay), while lazy links only
// carry IHave announcements. A missed payload is repaired by grafting the
// announcing lazy link back into the tree.

struct Config {
  TimeMs graft_timeout_ms = 200;
  TimeMs ihave_batch_ms = 100;
  std::size_t cache_capacity = 256;
};

using MessageId = wire::MessageId;

class Broadcast {
 public:
  Broadcast(NodeId self, Config cfg, std::uint64_t seed);

  const std::set<NodeId>& eager() const { return eager_; }
  const std::set<NodeId>& lazy() const { return lazy_; }
  bool has_delivered(const MessageId& id) const { return delivered_.count(id) > 0; }
  std::size_t delivered_count() const { return delivered_.size(); }

  /// Originate a broadcast: deliver locally, push to eager peers, announce
  /// to lazy peers.
  MessageId broadcast(const Bytes& payload, Outbox& out);

  void on_gossip(NodeId from, const wire::Gossip& msg, Outbox& out);
  void on_ihave(NodeId from, const std::vector<MessageId>& ids, Outbox& out);
  void on_graft(NodeId from, const MessageId& id, Outbox& out);
  void on_prune(NodeId from);

  /// Membership wiring: new active peers start eager (optimistic), removed
  /// peers are purged from both sets.
  void on_peer_added(NodeId peer);
  void on_peer_removed(NodeId peer);

  /// Timer callbacks.
  void ihave_flush(Outbox& out);
  void graft_timer_fired(const MessageId& id, Outbox& out);

  /// eager/lazy must partition the given active view.
  std::optional<std::string> invariant_violation(const std::set<NodeId>& active) const;

 private:
  void deliver(const MessageId& id, const Bytes& payload, Outbox& out);
  void enqueue_ihave(const MessageId& id, NodeId skip, Outbox& out);
  void move_to_eager(NodeId peer);
  void move_to_lazy(NodeId peer);
  void cache_put(const MessageId& id, const Bytes& payload);
  const Bytes* cache_get(const MessageId& id);

  struct MissingEntry {
    std::vector<NodeId> announcers;
    std::size_t attempts = 0;
  };

  NodeId self_;
  Config cfg_;
  Rng rng_;
  std::uint64_t next_seq_ = 0;
  std::set<NodeId> eager_;
  std::set<NodeId> lazy_;
  std::set<MessageId> delivered_;
  std::map<MessageId, MissingEntry> missing_;
  std::map<NodeId, std::vector<MessageId>> pending_ihave_;
  bool flush_armed_ = false;
  // Bounded payload cache, LRU eviction.
  std::list<std::pair<MessageId, Bytes>> cache_order_;
  std::map<MessageId, std::list<std::pair<MessageId, Bytes>>::iterator> cache_index_;
};

}  // namespace edgemesh::broadcast
