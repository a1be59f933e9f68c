#include "edgemesh/broadcast.hpp"

#include <algorithm>

namespace edgemesh::broadcast {

Broadcast::Broadcast(NodeId self, Config cfg, std::uint64_t seed)
    : self_(self), cfg_(cfg), rng_(seed) {}

MessageId Broadcast::broadcast(const Bytes& payload, Outbox& out) {
  const MessageId id{self_, ++next_seq_};
  deliver(id, payload, out);
  for (NodeId peer : eager_) {
    out.message(peer, wire::Gossip{id, 0, payload});
  }
  enqueue_ihave(id, self_, out);
  return id;
}

void Broadcast::on_gossip(NodeId from, const wire::Gossip& msg, Outbox& out) {
  if (delivered_.count(msg.id)) {
    // Redundant tree edge: demote both directions.
    out.message(from, wire::Prune{});
    move_to_lazy(from);
    return;
  }
  deliver(msg.id, msg.payload, out);
  missing_.erase(msg.id);
  move_to_eager(from);
  for (NodeId peer : eager_) {
    if (peer != from) out.message(peer, wire::Gossip{msg.id, msg.round + 1, msg.payload});
  }
  enqueue_ihave(msg.id, from, out);
}

void Broadcast::on_ihave(NodeId from, const std::vector<MessageId>& ids, Outbox& out) {
  for (const MessageId& id : ids) {
    if (delivered_.count(id)) continue;
    auto [it, inserted] = missing_.try_emplace(id);
    auto& anns = it->second.announcers;
    if (std::find(anns.begin(), anns.end(), from) == anns.end()) anns.push_back(from);
    if (inserted) {
      out.arm(cfg_.graft_timeout_ms, Timer{TimerKind::Graft, id, {}});
    }
  }
}

void Broadcast::on_graft(NodeId from, const MessageId& id, Outbox& out) {
  move_to_eager(from);
  if (const Bytes* payload = cache_get(id)) {
    out.message(from, wire::Gossip{id, 0, *payload});
  }
  // Evicted payloads go unanswered; the requester's timer walks on to the
  // next announcer.
}

void Broadcast::on_prune(NodeId from) { move_to_lazy(from); }

void Broadcast::on_peer_added(NodeId peer) {
  if (peer == self_ || eager_.count(peer) || lazy_.count(peer)) return;
  eager_.insert(peer);
}

void Broadcast::on_peer_removed(NodeId peer) {
  eager_.erase(peer);
  lazy_.erase(peer);
  pending_ihave_.erase(peer);
}

void Broadcast::ihave_flush(Outbox& out) {
  for (auto& [peer, ids] : pending_ihave_) {
    if (ids.empty()) continue;
    out.message(peer, wire::IHave{std::move(ids)});
    ids.clear();
  }
  pending_ihave_.clear();
  flush_armed_ = false;
}

void Broadcast::graft_timer_fired(const MessageId& id, Outbox& out) {
  auto it = missing_.find(id);
  if (it == missing_.end() || delivered_.count(id)) {
    missing_.erase(id);
    return;
  }
  MissingEntry& entry = it->second;
  // Try the next live announcer; give up when the list is exhausted (the
  // replication layer still converges the durable state).
  while (entry.attempts < entry.announcers.size()) {
    const NodeId target = entry.announcers[entry.attempts++];
    if (!eager_.count(target) && !lazy_.count(target)) continue;
    move_to_eager(target);
    out.message(target, wire::Graft{id});
    out.arm(cfg_.graft_timeout_ms * 2, Timer{TimerKind::Graft, id, {}});
    return;
  }
  missing_.erase(it);
}

std::optional<std::string> Broadcast::invariant_violation(const std::set<NodeId>& active) const {
  for (NodeId n : eager_) {
    if (lazy_.count(n)) return "peer in both eager and lazy sets";
  }
  std::set<NodeId> view;
  view.insert(eager_.begin(), eager_.end());
  view.insert(lazy_.begin(), lazy_.end());
  if (view != active) return "eager+lazy does not match the active view";
  for (const auto& [id, entry] : missing_) {
    if (delivered_.count(id)) return "message id both delivered and missing";
  }
  return std::nullopt;
}

void Broadcast::deliver(const MessageId& id, const Bytes& payload, Outbox& out) {
  delivered_.insert(id);
  cache_put(id, payload);
  out.delivered.push_back(Delivery{id, payload});
}

void Broadcast::enqueue_ihave(const MessageId& id, NodeId skip, Outbox& out) {
  bool queued = false;
  for (NodeId peer : lazy_) {
    if (peer == skip) continue;
    pending_ihave_[peer].push_back(id);
    queued = true;
  }
  if (queued && !flush_armed_) {
    out.arm(cfg_.ihave_batch_ms, Timer{TimerKind::IHaveFlush, {}, {}});
    flush_armed_ = true;
  }
}

void Broadcast::move_to_eager(NodeId peer) {
  if (peer == self_) return;
  // Only peers of the current view move; a message racing a view change
  // is ignored here and handled when membership re-adds the peer.
  if (lazy_.erase(peer) || eager_.count(peer)) eager_.insert(peer);
}

void Broadcast::move_to_lazy(NodeId peer) {
  if (peer == self_) return;
  if (eager_.erase(peer) || lazy_.count(peer)) lazy_.insert(peer);
}

void Broadcast::cache_put(const MessageId& id, const Bytes& payload) {
  auto it = cache_index_.find(id);
  if (it != cache_index_.end()) {
    cache_order_.splice(cache_order_.end(), cache_order_, it->second);
    return;
  }
  cache_order_.emplace_back(id, payload);
  cache_index_[id] = std::prev(cache_order_.end());
  if (cache_order_.size() > cfg_.cache_capacity) {
    cache_index_.erase(cache_order_.front().first);
    cache_order_.pop_front();
  }
}

const Bytes* Broadcast::cache_get(const MessageId& id) {
  auto it = cache_index_.find(id);
  if (it == cache_index_.end()) return nullptr;
  cache_order_.splice(cache_order_.end(), cache_order_, it->second);
  return &it->second->second;
}

}  // namespace edgemesh::broadcast
