#include <algorithm>
#include <map>

#include "doctest.h"
#include "edgemesh/membership.hpp"

using namespace edgemesh;
using namespace edgemesh::membership;

namespace {

Config small_config() {
  Config cfg;
  cfg.a_max = 3;
  cfg.p_max = 6;
  cfg.arwl = 4;
  cfg.prwl = 2;
  cfg.shuffle_ka = 2;
  cfg.shuffle_kp = 2;
  return cfg;
}

/// Synchronously exchanges membership messages between in-process instances
/// until quiescence. No loss, no latency: pure protocol-logic harness.
struct Cluster {
  std::map<NodeId, Membership> nodes;
  std::vector<std::pair<NodeId, Envelope>> queue;  // (recipient is env.to), sender first

  Membership& add(NodeId id, const Config& cfg) {
    nodes.emplace(id, Membership(id, cfg, 1000 + id));
    return nodes.at(id);
  }

  void post(NodeId from, Outbox& box) {
    for (auto& env : box.send) queue.emplace_back(from, env);
    box.send.clear();
  }

  void settle(std::size_t max_steps = 10'000) {
    std::size_t steps = 0;
    while (!queue.empty() && steps++ < max_steps) {
      auto [from, env] = queue.front();
      queue.erase(queue.begin());
      auto it = nodes.find(env.to);
      if (it == nodes.end()) continue;  // unreachable peer: message lost
      Membership& m = it->second;
      m.note_alive(from);
      Outbox box;
      std::visit(
          [&](const auto& msg) {
            using T = std::decay_t<decltype(msg)>;
            if constexpr (std::is_same_v<T, wire::Join>) m.on_join(from, box);
            if constexpr (std::is_same_v<T, wire::ForwardJoin>)
              m.on_forward_join(from, msg.joiner, msg.ttl, box);
            if constexpr (std::is_same_v<T, wire::Neighbor>)
              m.on_neighbor(from, msg.high_priority, box);
            if constexpr (std::is_same_v<T, wire::NeighborReject>) m.on_neighbor_reject(from, box);
            if constexpr (std::is_same_v<T, wire::Disconnect>) m.on_disconnect(from, box);
            if constexpr (std::is_same_v<T, wire::Shuffle>) m.on_shuffle(from, msg, box);
            if constexpr (std::is_same_v<T, wire::ShuffleReply>) m.on_shuffle_reply(msg, box);
          },
          env.msg);
      REQUIRE(!m.invariant_violation());
      post(env.to, box);
    }
    REQUIRE(queue.empty());  // quiescence, not step exhaustion
  }

  void join(NodeId who, NodeId contact) {
    Outbox box;
    nodes.at(who).join_via(contact, box);
    post(who, box);
    settle();
  }
};

}  // namespace

TEST_CASE("first join creates a symmetric two-node overlay") {
  Cluster c;
  c.add(0, small_config());
  c.add(1, small_config());
  c.join(1, 0);
  CHECK(c.nodes.at(0).active() == std::set<NodeId>{1});
  CHECK(c.nodes.at(1).active() == std::set<NodeId>{0});
}

TEST_CASE("join into a full active view demotes one member to passive") {
  Cluster c;
  Config cfg = small_config();
  for (NodeId id = 0; id <= 4; ++id) c.add(id, cfg);
  for (NodeId id = 1; id <= 3; ++id) c.join(id, 0);
  REQUIRE(c.nodes.at(0).active().size() == cfg.a_max);

  c.join(4, 0);
  const auto& m0 = c.nodes.at(0);
  CHECK(m0.active().size() <= cfg.a_max);
  CHECK(m0.active().count(4));
  // The evictee moved to the passive view, views stay disjoint.
  CHECK(m0.passive().size() >= 1);
  CHECK(!m0.invariant_violation());
}

TEST_CASE("sequential joins through one contact keep every view within capacity") {
  Cluster c;
  Config cfg = small_config();
  for (NodeId id = 0; id < 16; ++id) c.add(id, cfg);
  for (NodeId id = 1; id < 16; ++id) c.join(id, 0);
  for (auto& [id, m] : c.nodes) {
    CHECK(m.active().size() <= cfg.a_max);
    CHECK(!m.invariant_violation());
  }
  // Eviction cascades can leave a node temporarily linkless; the periodic
  // shuffle refill repairs that from the passive view.
  for (int round = 0; round < 3; ++round) {
    for (auto& [id, m] : c.nodes) {
      Outbox box;
      m.shuffle_tick(box);
      c.post(id, box);
    }
    c.settle();
  }
  for (auto& [id, m] : c.nodes) {
    CHECK(m.active().size() >= 1);
    CHECK(m.active().size() <= cfg.a_max);
    CHECK(!m.invariant_violation());
  }
}

TEST_CASE("forward join terminates at ttl zero") {
  Membership m(5, small_config(), 1);
  Outbox box;
  // Give the node two active peers so it is not a trivial terminal.
  m.on_neighbor(1, true, box);
  m.on_neighbor(2, true, box);
  box.send.clear();
  m.on_forward_join(1, 9, 0, box);
  CHECK(m.active().count(9));
  // Neighbor goes back to the joiner.
  bool neighbor_to_joiner = false;
  for (const auto& env : box.send) {
    if (env.to == 9 && std::holds_alternative<wire::Neighbor>(env.msg)) neighbor_to_joiner = true;
  }
  CHECK(neighbor_to_joiner);
}

TEST_CASE("forward join records the joiner in passive when ttl hits prwl") {
  Config cfg = small_config();  // prwl = 2
  Membership m(5, cfg, 1);
  Outbox box;
  m.on_neighbor(1, true, box);
  m.on_neighbor(2, true, box);
  box.send.clear();
  m.on_forward_join(1, 9, 3, box);  // decrements to prwl
  CHECK(m.passive().count(9));
  // And the walk continues to the peer that is not the sender.
  REQUIRE(box.send.size() == 1);
  CHECK(box.send[0].to == 2);
  const auto& fwd = std::get<wire::ForwardJoin>(box.send[0].msg);
  CHECK(fwd.joiner == 9);
  CHECK(fwd.ttl == 2);
}

TEST_CASE("peer failure promotes a passive candidate") {
  Cluster c;
  Config cfg = small_config();
  for (NodeId id = 0; id < 5; ++id) c.add(id, cfg);
  for (NodeId id = 1; id < 5; ++id) c.join(id, 0);

  Membership& m0 = c.nodes.at(0);
  REQUIRE(!m0.active().empty());
  const NodeId dead = *m0.active().begin();
  const auto before = m0.active().size();
  Outbox box;
  m0.on_peer_failure(dead, box);
  CHECK(!m0.active().count(dead));
  CHECK(m0.passive().count(dead));
  // Replacement probe: optimistic promotion plus a Neighbor message.
  if (before <= cfg.a_max && !m0.passive().empty()) {
    bool probed = false;
    for (const auto& env : box.send) {
      if (std::holds_alternative<wire::Neighbor>(env.msg)) probed = true;
    }
    CHECK(probed);
  }
  CHECK(!m0.invariant_violation());
}

TEST_CASE("high priority neighbor is accepted even by a full view") {
  Config cfg = small_config();
  Membership m(0, cfg, 1);
  Outbox box;
  for (NodeId id = 1; id <= cfg.a_max; ++id) m.on_neighbor(id, true, box);
  REQUIRE(m.active().size() == cfg.a_max);
  box.send.clear();

  SUBCASE("low priority is rejected when full") {
    m.on_neighbor(99, false, box);
    CHECK(!m.active().count(99));
    REQUIRE(box.send.size() == 1);
    CHECK(box.send[0].to == 99);
    CHECK(std::holds_alternative<wire::NeighborReject>(box.send[0].msg));
  }

  SUBCASE("high priority evicts someone") {
    m.on_neighbor(99, true, box);
    CHECK(m.active().count(99));
    CHECK(m.active().size() == cfg.a_max);
    bool disconnect_sent = false;
    for (const auto& env : box.send) {
      if (std::holds_alternative<wire::Disconnect>(env.msg)) disconnect_sent = true;
    }
    CHECK(disconnect_sent);
  }
}

TEST_CASE("shuffle samples never contain self and integration respects capacity") {
  Cluster c;
  Config cfg = small_config();
  for (NodeId id = 0; id < 10; ++id) c.add(id, cfg);
  for (NodeId id = 1; id < 10; ++id) c.join(id, 0);

  for (auto& [id, m] : c.nodes) {
    Outbox box;
    m.shuffle_tick(box);
    for (const auto& env : box.send) {
      if (const auto* sh = std::get_if<wire::Shuffle>(&env.msg)) {
        CHECK(sh->origin == id);
        // The sample advertises the origin itself.
        CHECK(std::count(sh->sample.begin(), sh->sample.end(), id) == 1);
      }
    }
    c.post(id, box);
  }
  c.settle();
  for (auto& [id, m] : c.nodes) {
    CHECK(m.passive().size() <= cfg.p_max);
    CHECK(!m.active().count(id));   // self never enters own views
    CHECK(!m.passive().count(id));
    CHECK(!m.invariant_violation());
  }
}

TEST_CASE("shuffles leak island members across a bridge") {
  // Two 2-node islands; the bridge is that island heads know each other.
  Cluster c;
  Config cfg = small_config();
  for (NodeId id = 0; id < 4; ++id) c.add(id, cfg);
  c.join(1, 0);
  c.join(3, 2);
  c.join(2, 0);  // bridge link
  // A few shuffle rounds spread passive knowledge.
  for (int round = 0; round < 4; ++round) {
    for (auto& [id, m] : c.nodes) {
      Outbox box;
      m.shuffle_tick(box);
      c.post(id, box);
    }
    c.settle();
  }
  // Node 1 (island A) eventually knows somebody from island B.
  const auto& m1 = c.nodes.at(1);
  bool knows_b = m1.active().count(2) || m1.active().count(3) || m1.passive().count(2) ||
                 m1.passive().count(3);
  CHECK(knows_b);
}
