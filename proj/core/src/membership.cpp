#include "edgemesh/membership.hpp"

#include <algorithm>

namespace edgemesh::membership {

Membership::Membership(NodeId self, Config cfg, std::uint64_t seed)
    : self_(self), cfg_(cfg), rng_(seed) {}

void Membership::join_via(NodeId contact, Outbox& out) {
  if (contact == self_) return;
  out.message(contact, wire::Join{});
}

void Membership::seed_passive(const std::vector<NodeId>& ids) {
  for (NodeId id : ids) add_passive(id);
}

void Membership::on_join(NodeId from, Outbox& out) {
  if (from == self_) return;
  // A (re)join is a fresh link: runtime listeners reset per-peer state even
  // if the joiner was already in the view.
  if (active_.count(from)) {
    deactivated_.push_back(from);
    activated_.push_back(from);
  } else {
    add_active(from, out);
  }
  out.message(from, wire::Neighbor{true});
  for (NodeId peer : active_) {
    if (peer != from) out.message(peer, wire::ForwardJoin{from, cfg_.arwl});
  }
}

void Membership::on_forward_join(NodeId from, NodeId joiner, std::uint8_t ttl, Outbox& out) {
  if (joiner == self_) return;
  if (ttl == 0 || active_.size() <= 1) {
    if (!active_.count(joiner)) {
      add_active(joiner, out);
      out.message(joiner, wire::Neighbor{true});
    }
    return;
  }
  const std::uint8_t next_ttl = static_cast<std::uint8_t>(ttl - 1);
  if (next_ttl == cfg_.prwl) add_passive(joiner);
  std::set<NodeId> exclude{from, joiner};
  auto next = random_active(exclude);
  if (!next) {
    if (!active_.count(joiner)) {
      add_active(joiner, out);
      out.message(joiner, wire::Neighbor{true});
    }
    return;
  }
  out.message(*next, wire::ForwardJoin{joiner, next_ttl});
}

void Membership::on_neighbor(NodeId from, bool high_priority, Outbox& out) {
  if (from == self_) return;
  if (active_.count(from)) return;
  if (high_priority || active_.size() < cfg_.a_max) {
    add_active(from, out);
  } else {
    out.message(from, wire::NeighborReject{});
  }
}

void Membership::on_neighbor_reject(NodeId from, Outbox& out) {
  if (!active_.count(from)) return;
  remove_active(from, /*to_passive=*/true, /*suspect=*/false, out, /*send_disconnect=*/false);
  // Try the next candidate, but only within this round's budget; the next
  // shuffle tick starts a fresh round. Keeps reject chains finite.
  if (probe_budget_ > 0 && active_.size() < cfg_.a_max) {
    --probe_budget_;
    probe_passive(out);
  }
}

void Membership::on_disconnect(NodeId from, Outbox& out) {
  if (!active_.count(from)) return;
  remove_active(from, /*to_passive=*/true, /*suspect=*/false, out, /*send_disconnect=*/false);
}

void Membership::on_shuffle(NodeId from, const wire::Shuffle& msg, Outbox& out) {
  const std::uint8_t next_ttl = msg.ttl > 0 ? static_cast<std::uint8_t>(msg.ttl - 1) : 0;
  std::set<NodeId> exclude{from, msg.origin};
  auto next = next_ttl > 0 ? random_active(exclude) : std::nullopt;
  if (next) {
    wire::Shuffle fwd = msg;
    fwd.ttl = next_ttl;
    out.message(*next, std::move(fwd));
    return;
  }
  // Walk terminal: answer the origin with an equally sized passive sample,
  // then absorb the received one.
  if (msg.origin != self_) {
    wire::ShuffleReply reply;
    reply.sample = rng_.sample(passive_, msg.sample.size());
    integrate_sample(msg.sample, reply.sample);
    out.message(msg.origin, std::move(reply));
  } else {
    integrate_sample(msg.sample, {});
  }
}

void Membership::on_shuffle_reply(const wire::ShuffleReply& msg, Outbox& out) {
  (void)out;
  integrate_sample(msg.sample, last_shuffle_sent_);
  last_shuffle_sent_.clear();
}

void Membership::on_peer_failure(NodeId peer, Outbox& out) {
  if (!active_.count(peer)) return;
  remove_active(peer, /*to_passive=*/true, /*suspect=*/true, out, /*send_disconnect=*/false);
  probe_budget_ = passive_.size();
  probe_passive(out);
}

void Membership::shuffle_tick(Outbox& out) {
  if (active_.size() < cfg_.a_max && !passive_.empty()) {
    probe_budget_ = passive_.size();
    probe_passive(out);
  }
  if (active_.empty()) return;
  wire::Shuffle msg;
  msg.origin = self_;
  msg.ttl = cfg_.arwl;
  msg.sample.push_back(self_);
  for (NodeId n : rng_.sample(active_, cfg_.shuffle_ka)) msg.sample.push_back(n);
  last_shuffle_sent_ = rng_.sample(passive_, cfg_.shuffle_kp);
  for (NodeId n : last_shuffle_sent_) msg.sample.push_back(n);
  out.message(rng_.pick(active_), std::move(msg));
}

void Membership::note_alive(NodeId peer) { suspects_.erase(peer); }

std::vector<NodeId> Membership::drain_activated() { return std::exchange(activated_, {}); }
std::vector<NodeId> Membership::drain_deactivated() { return std::exchange(deactivated_, {}); }

std::optional<std::string> Membership::invariant_violation() const {
  if (active_.size() > cfg_.a_max) return "active view over capacity";
  if (passive_.size() > cfg_.p_max) return "passive view over capacity";
  if (active_.count(self_) || passive_.count(self_)) return "self in own view";
  for (NodeId n : active_) {
    if (passive_.count(n)) return "active/passive views intersect";
  }
  for (NodeId n : suspects_) {
    if (!passive_.count(n)) return "suspect outside passive view";
  }
  return std::nullopt;
}

bool Membership::add_active(NodeId n, Outbox& out) {
  if (n == self_ || active_.count(n)) return false;
  passive_.erase(n);
  suspects_.erase(n);
  if (active_.size() >= cfg_.a_max) {
    // Demote a random member to make room; tell it first.
    const NodeId evictee = rng_.pick(active_);
    remove_active(evictee, /*to_passive=*/true, /*suspect=*/false, out, /*send_disconnect=*/true);
  }
  active_.insert(n);
  activated_.push_back(n);
  return true;
}

void Membership::remove_active(NodeId n, bool to_passive, bool suspect, Outbox& out,
                               bool send_disconnect) {
  if (!active_.erase(n)) return;
  if (send_disconnect) out.message(n, wire::Disconnect{});
  deactivated_.push_back(n);
  if (to_passive) add_passive(n, suspect);
}

void Membership::add_passive(NodeId n, bool suspect) {
  if (n == self_ || active_.count(n) || passive_.count(n)) return;
  if (passive_.size() >= cfg_.p_max) {
    // Prefer evicting entries we just shuffled away, then random.
    std::optional<NodeId> victim;
    for (NodeId sent : last_shuffle_sent_) {
      if (passive_.count(sent)) {
        victim = sent;
        break;
      }
    }
    if (!victim) victim = rng_.pick(passive_);
    passive_.erase(*victim);
    suspects_.erase(*victim);
  }
  passive_.insert(n);
  if (suspect) suspects_.insert(n);
}

void Membership::integrate_sample(const std::vector<NodeId>& sample,
                                  const std::vector<NodeId>& sent_away) {
  std::vector<NodeId> prior = last_shuffle_sent_;
  last_shuffle_sent_ = sent_away;
  for (NodeId n : sample) add_passive(n);
  last_shuffle_sent_ = std::move(prior);
}

void Membership::probe_passive(Outbox& out) {
  if (passive_.empty() || active_.size() >= cfg_.a_max) return;
  // Fresh candidates first; suspects only when nothing else remains.
  std::set<NodeId> fresh;
  for (NodeId n : passive_) {
    if (!suspects_.count(n)) fresh.insert(n);
  }
  const std::set<NodeId>& pool = fresh.empty() ? passive_ : fresh;
  const NodeId candidate = rng_.pick(pool);
  const bool high = active_.empty();
  // Optimistic promotion: heartbeat timeout or NeighborReject undoes it.
  add_active(candidate, out);
  out.message(candidate, wire::Neighbor{high});
}

std::optional<NodeId> Membership::random_active(const std::set<NodeId>& exclude) const {
  std::vector<NodeId> pool;
  for (NodeId n : active_) {
    if (!exclude.count(n)) pool.push_back(n);
  }
  if (pool.empty()) return std::nullopt;
  return pool[rng_.below(pool.size())];
}

}  // namespace edgemesh::membership
