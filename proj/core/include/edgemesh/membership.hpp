#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "edgemesh/outbox.hpp"
#include "edgemesh/rng.hpp"
#include "edgemesh/types.hpp"

namespace edgemesh::membership {

// HyParView-style partial-view membership: a small symmetric active view
// used for all communication, and a larger passive view kept as repair
// material under churn. Handlers are serial per node and side-effect free
// apart from their own view state and the Outbox.

struct Config {
  std::size_t a_max = 5;   ///< active view capacity
  std::size_t p_max = 30;  ///< passive view capacity
  std::uint8_t arwl = 6;   ///< active random walk length
  std::uint8_t prwl = 3;   ///< passive random walk length
  TimeMs shuffle_interval_ms = 10'000;
  std::size_t shuffle_ka = 3;  ///< active sample size per shuffle
  std::size_t shuffle_kp = 4;  ///< passive sample size per shuffle
  TimeMs heartbeat_interval_ms = 1'000;
  TimeMs failure_after_ms = 3'000;  ///< 3 missed heartbeats
};

class Membership {
 public:
  Membership(NodeId self, Config cfg, std::uint64_t seed);

  NodeId self() const { return self_; }
  const Config& config() const { return cfg_; }
  const std::set<NodeId>& active() const { return active_; }
  const std::set<NodeId>& passive() const { return passive_; }

  /// Send a Join to a contact node. The contact (and walk terminals) will
  /// answer with Neighbor messages that fill this node's active view.
  void join_via(NodeId contact, Outbox& out);

  /// Bootstrap contacts double as permanent repair material: seeding them
  /// into the passive view gives an isolated node somewhere to probe.
  void seed_passive(const std::vector<NodeId>& ids);

  void on_join(NodeId from, Outbox& out);
  void on_forward_join(NodeId from, NodeId joiner, std::uint8_t ttl, Outbox& out);
  void on_neighbor(NodeId from, bool high_priority, Outbox& out);
  void on_neighbor_reject(NodeId from, Outbox& out);
  void on_disconnect(NodeId from, Outbox& out);
  void on_shuffle(NodeId from, const wire::Shuffle& msg, Outbox& out);
  void on_shuffle_reply(const wire::ShuffleReply& msg, Outbox& out);

  /// Link-layer failure signal (missed heartbeats). Moves the peer to the
  /// passive view as a suspect and probes for a replacement.
  void on_peer_failure(NodeId peer, Outbox& out);

  /// Periodic shuffle; also retries active-view refill while under
  /// capacity so islands relink after partitions heal.
  void shuffle_tick(Outbox& out);

  /// Any message from a peer is evidence of life; clears suspicion.
  void note_alive(NodeId peer);

  /// View-change events since the last drain, for the composing runtime.
  std::vector<NodeId> drain_activated();
  std::vector<NodeId> drain_deactivated();

  /// Returns a description of the first violated invariant, if any.
  std::optional<std::string> invariant_violation() const;

 private:
  bool add_active(NodeId n, Outbox& out);
  void remove_active(NodeId n, bool to_passive, bool suspect, Outbox& out, bool send_disconnect);
  void add_passive(NodeId n, bool suspect = false);
  void integrate_sample(const std::vector<NodeId>& sample, const std::vector<NodeId>& sent_away);
  void probe_passive(Outbox& out);
  std::optional<NodeId> random_active(const std::set<NodeId>& exclude) const;

  NodeId self_;
  Config cfg_;
  mutable Rng rng_;
  std::set<NodeId> active_;
  std::set<NodeId> passive_;
  std::set<NodeId> suspects_;           // subset of passive_
  std::vector<NodeId> last_shuffle_sent_;
  std::vector<NodeId> activated_;
  std::vector<NodeId> deactivated_;
  std::size_t probe_budget_ = 0;        // rejects left to chase this repair round
};

}  // namespace edgemesh::membership
