#include "doctest.h"
#include "edgemesh/broadcast.hpp"

using namespace edgemesh;
using namespace edgemesh::broadcast;

namespace {

Config fast_config() {
  Config cfg;
  cfg.graft_timeout_ms = 200;
  cfg.ihave_batch_ms = 100;
  cfg.cache_capacity = 4;  // small so eviction is testable
  return cfg;
}

std::size_t count_type(const Outbox& box, wire::MsgType t) {
  std::size_t n = 0;
  for (const auto& env : box.send) {
    if (wire::type_of(env.msg) == t) ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("broadcast on a single-node cluster delivers locally and sends nothing") {
  Broadcast b(0, fast_config(), 1);
  Outbox box;
  const auto id = b.broadcast("hello", box);
  CHECK(box.send.empty());
  CHECK(box.timers.empty());
  REQUIRE(box.delivered.size() == 1);
  CHECK(box.delivered[0].id == id);
  CHECK(box.delivered[0].payload == "hello");
  CHECK(b.has_delivered(id));
}

TEST_CASE("two-node broadcast gossips to the eager peer exactly once") {
  Broadcast a(0, fast_config(), 1);
  Broadcast b(1, fast_config(), 2);
  a.on_peer_added(1);
  b.on_peer_added(0);

  Outbox out_a;
  const auto id = a.broadcast("m", out_a);
  REQUIRE(count_type(out_a, wire::MsgType::Gossip) == 1);
  const auto& gossip = std::get<wire::Gossip>(out_a.send[0].msg);

  Outbox out_b;
  b.on_gossip(0, gossip, out_b);
  REQUIRE(out_b.delivered.size() == 1);
  CHECK(out_b.delivered[0].id == id);
  // No further eager peers: nothing forwarded.
  CHECK(count_type(out_b, wire::MsgType::Gossip) == 0);

  // Duplicate delivery triggers a prune, not a second delivery.
  Outbox out_dup;
  b.on_gossip(0, gossip, out_dup);
  CHECK(out_dup.delivered.empty());
  CHECK(count_type(out_dup, wire::MsgType::Prune) == 1);
  CHECK(b.lazy().count(0));
}

TEST_CASE("duplicate gossip demotes the redundant edge on both sides") {
  // Triangle: node 1 hears the same message from 0 and 2.
  Broadcast n1(1, fast_config(), 1);
  n1.on_peer_added(0);
  n1.on_peer_added(2);

  Outbox box;
  n1.on_gossip(0, wire::Gossip{{0, 1}, 0, "x"}, box);
  CHECK(n1.eager().count(0));
  box = Outbox{};
  n1.on_gossip(2, wire::Gossip{{0, 1}, 1, "x"}, box);
  CHECK(count_type(box, wire::MsgType::Prune) == 1);
  CHECK(box.send[0].to == 2);
  CHECK(n1.lazy().count(2));
  // Prune from the other side moves it to lazy there too.
  n1.on_prune(0);
  CHECK(n1.lazy().count(0));
}

TEST_CASE("ihave for an undelivered id arms a graft timer and repair follows") {
  Broadcast b(1, fast_config(), 1);
  b.on_peer_added(0);
  b.on_peer_added(2);

  const wire::MessageId id{0, 7};
  Outbox box;
  b.on_ihave(2, {id}, box);
  REQUIRE(box.timers.size() == 1);
  CHECK(box.timers[0].timer.kind == TimerKind::Graft);
  CHECK(box.timers[0].delay_ms == fast_config().graft_timeout_ms);

  SUBCASE("ihave for a delivered id is a no-op") {
    Outbox pre;
    b.on_gossip(0, wire::Gossip{id, 0, "p"}, pre);
    Outbox post;
    b.on_ihave(2, {id}, post);
    CHECK(post.timers.empty());
  }

  SUBCASE("timer expiry grafts from the first announcer") {
    Outbox fire;
    b.graft_timer_fired(id, fire);
    REQUIRE(count_type(fire, wire::MsgType::Graft) == 1);
    CHECK(fire.send[0].to == 2);
    CHECK(b.eager().count(2));
    // Second-chance timer armed at twice the timeout.
    REQUIRE(fire.timers.size() == 1);
    CHECK(fire.timers[0].delay_ms == 2 * fast_config().graft_timeout_ms);

    // Another announcer appears; the next expiry tries it.
    Outbox more;
    b.on_ihave(0, {id}, more);
    Outbox fire2;
    b.graft_timer_fired(id, fire2);
    REQUIRE(count_type(fire2, wire::MsgType::Graft) == 1);
    CHECK(fire2.send[0].to == 0);

    // Exhausted announcers: the repair gives up quietly.
    Outbox fire3;
    b.graft_timer_fired(id, fire3);
    CHECK(fire3.send.empty());
    CHECK(fire3.timers.empty());
  }
}

TEST_CASE("graft answers from cache; evicted payloads go unanswered") {
  Broadcast b(0, fast_config(), 1);
  b.on_peer_added(1);
  Outbox box;
  const auto id = b.broadcast("payload", box);

  Outbox graft;
  b.on_graft(1, id, graft);
  REQUIRE(count_type(graft, wire::MsgType::Gossip) == 1);
  CHECK(std::get<wire::Gossip>(graft.send[0].msg).payload == "payload");
  CHECK(b.eager().count(1));

  // Push enough newer payloads through the cache to evict the first.
  for (int i = 0; i < 6; ++i) {
    Outbox fill;
    b.broadcast("fill", fill);
  }
  Outbox graft2;
  b.on_graft(1, id, graft2);
  CHECK(count_type(graft2, wire::MsgType::Gossip) == 0);
}

TEST_CASE("prune then graft leaves the peer eager") {
  Broadcast b(0, fast_config(), 1);
  b.on_peer_added(1);
  Outbox box;
  const auto id = b.broadcast("x", box);
  b.on_prune(1);
  CHECK(b.lazy().count(1));
  Outbox graft;
  b.on_graft(1, id, graft);
  CHECK(b.eager().count(1));
  CHECK(!b.lazy().count(1));
}

TEST_CASE("ihave announcements batch per lazy peer until the flush timer") {
  Broadcast b(0, fast_config(), 1);
  b.on_peer_added(1);
  b.on_peer_added(2);
  b.on_prune(1);
  b.on_prune(2);

  Outbox box;
  b.broadcast("a", box);
  b.broadcast("b", box);
  CHECK(count_type(box, wire::MsgType::IHave) == 0);
  // Only one flush timer armed for the whole batch window.
  std::size_t flush_timers = 0;
  for (const auto& t : box.timers) {
    if (t.timer.kind == TimerKind::IHaveFlush) ++flush_timers;
  }
  CHECK(flush_timers == 1);

  Outbox flush;
  b.ihave_flush(flush);
  REQUIRE(count_type(flush, wire::MsgType::IHave) == 2);
  for (const auto& env : flush.send) {
    CHECK(std::get<wire::IHave>(env.msg).ids.size() == 2);
  }
}

TEST_CASE("membership wiring keeps eager and lazy a partition of the view") {
  Broadcast b(0, fast_config(), 1);
  b.on_peer_added(1);
  b.on_peer_added(2);
  CHECK(!b.invariant_violation({1, 2}));
  b.on_prune(2);
  CHECK(!b.invariant_violation({1, 2}));
  b.on_peer_removed(1);
  CHECK(!b.invariant_violation({2}));
  CHECK(b.invariant_violation({1, 2}));  // view says 1 should be tracked
}
