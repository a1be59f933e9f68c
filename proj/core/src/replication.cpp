#include "edgemesh/replication.hpp"

#include <algorithm>

namespace edgemesh::repl {

std::uint64_t Replicator::record_local_delta(const Bytes& key, crdt::Delta delta, NodeId origin) {
  const std::uint64_t seq = next_seq_++;
  if (cfg_.mode == Config::Mode::FullState) {
    // Reference mode ships whole stores; nothing to buffer.
    evicted_through_ = seq;
    return seq;
  }
  buffer_.emplace(seq, Entry{key, std::move(delta), origin});
  if (buffer_.size() > cfg_.buffer_capacity) {
    evicted_through_ = std::max(evicted_through_, buffer_.begin()->first);
    buffer_.erase(buffer_.begin());
  }
  return seq;
}

void Replicator::anti_entropy_tick(const kv::Store& store, const std::set<NodeId>& peers,
                                   Outbox& out) {
  if (peers.empty()) return;

  if (cfg_.mode == Config::Mode::FullState) {
    if (store.empty()) return;
    wire::FullState full;
    store.for_each([&](const Bytes& name, const crdt::CrdtState& state) {
      full.items.push_back(wire::DeltaItem{name, crdt::encode(state)});
    });
    for (NodeId peer : peers) {
      out.message(peer, full, 0, latest_seq());
    }
    return;
  }

  for (NodeId peer : peers) {
    const std::uint64_t floor = acked_floor(peer);
    if (floor >= latest_seq()) continue;  // fully caught up
    if (floor >= evicted_through_) {
      // The whole gap is still buffered: coalesce it per key (the join of
      // the pending deltas is itself a delta) and ship one group.
      std::map<Bytes, crdt::CrdtState> pending;
      for (auto it = buffer_.upper_bound(floor); it != buffer_.end(); ++it) {
        if (it->second.origin == peer) continue;  // it already has its own
        auto [slot, inserted] = pending.try_emplace(it->second.key, it->second.delta);
        if (!inserted) slot->second = crdt::join(slot->second, it->second.delta);
      }
      wire::DeltaGroup group;
      for (const auto& [key, fragment] : pending) {
        group.items.push_back(wire::DeltaItem{key, crdt::encode(fragment)});
      }
      out.message(peer, std::move(group), floor + 1, latest_seq());
    } else {
      // The peer's floor predates retained history (evicted or the peer is
      // new/rejoined): fall back to full state for every key.
      wire::FullState full;
      store.for_each([&](const Bytes& name, const crdt::CrdtState& state) {
        full.items.push_back(wire::DeltaItem{name, crdt::encode(state)});
      });
      out.message(peer, std::move(full), 0, latest_seq());
    }
  }
}

void Replicator::on_ack(NodeId peer, std::uint64_t seq, const std::set<NodeId>& peers) {
  auto [it, inserted] = ack_floor_.try_emplace(peer, seq);
  if (!inserted) it->second = std::max(it->second, seq);
  gc(peers);
}

void Replicator::on_peer_added(NodeId peer) { ack_floor_[peer] = 0; }

void Replicator::on_peer_removed(NodeId peer, const std::set<NodeId>& peers) {
  ack_floor_.erase(peer);
  gc(peers);
}

std::uint64_t Replicator::acked_floor(NodeId peer) const {
  auto it = ack_floor_.find(peer);
  return it == ack_floor_.end() ? 0 : it->second;
}

void Replicator::gc(const std::set<NodeId>& peers) {
  if (buffer_.empty()) return;
  std::uint64_t min_floor = latest_seq();
  for (NodeId peer : peers) {
    min_floor = std::min(min_floor, acked_floor(peer));
  }
  while (!buffer_.empty() && buffer_.begin()->first <= min_floor) {
    evicted_through_ = std::max(evicted_through_, buffer_.begin()->first);
    buffer_.erase(buffer_.begin());
  }
}

}  // namespace edgemesh::repl
