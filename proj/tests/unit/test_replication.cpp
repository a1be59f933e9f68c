#include "doctest.h"
#include "edgemesh/replication.hpp"

using namespace edgemesh;
using namespace edgemesh::repl;

namespace {

crdt::Delta counter_delta(NodeId actor, std::uint64_t total) {
  crdt::GCounter d;
  d.entries[actor] = total;
  return crdt::CrdtState(std::move(d));
}

const wire::DeltaGroup* find_group(const Outbox& box, NodeId to) {
  for (const auto& env : box.send) {
    if (env.to == to) {
      if (const auto* g = std::get_if<wire::DeltaGroup>(&env.msg)) return g;
    }
  }
  return nullptr;
}

const Envelope* find_envelope(const Outbox& box, NodeId to) {
  for (const auto& env : box.send) {
    if (env.to == to) return &env;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("local deltas take strictly increasing sequence numbers") {
  Replicator r(1, Config{});
  CHECK(r.record_local_delta("k", counter_delta(1, 1), 1) == 1);
  CHECK(r.record_local_delta("k", counter_delta(1, 2), 1) == 2);
  CHECK(r.record_local_delta("other", counter_delta(1, 1), 1) == 3);
  CHECK(r.buffered() == 3);
}

TEST_CASE("anti-entropy with nothing pending sends nothing") {
  Replicator r(1, Config{});
  kv::Store store;
  Outbox box;
  r.anti_entropy_tick(store, {2, 3}, box);
  CHECK(box.send.empty());
}

TEST_CASE("unacked buffered range ships as one coalesced delta group") {
  Replicator r(1, Config{});
  kv::Store store;
  for (std::uint64_t i = 1; i <= 3; ++i) {
    store.update({"k", crdt::CrdtType::GCounter}, crdt::Increment{1}, 1);
    r.record_local_delta("k", counter_delta(1, i), 1);
  }
  Outbox box;
  r.anti_entropy_tick(store, {2}, box);
  const auto* env = find_envelope(box, 2);
  REQUIRE(env);
  CHECK(env->start_seq == 1);
  CHECK(env->end_seq == 3);
  const auto* group = find_group(box, 2);
  REQUIRE(group);
  // Per-key coalescing: the one shipped item equals the join of the three
  // buffered deltas.
  REQUIRE(group->items.size() == 1);
  auto fragment = crdt::decode(group->items[0].state);
  REQUIRE(fragment);
  CHECK(std::get<std::int64_t>(crdt::value_of(*fragment)) == 3);
}

TEST_CASE("acked floor narrows the shipped range; duplicate acks are harmless") {
  Replicator r(1, Config{});
  kv::Store store;
  for (std::uint64_t i = 1; i <= 5; ++i) {
    store.update({"k", crdt::CrdtType::GCounter}, crdt::Increment{1}, 1);
    r.record_local_delta("k", counter_delta(1, i), 1);
  }
  r.on_peer_added(2);
  r.on_ack(2, 3, {2});
  r.on_ack(2, 1, {2});  // below the floor: no change
  CHECK(r.acked_floor(2) == 3);
  Outbox box;
  r.anti_entropy_tick(store, {2}, box);
  const auto* env = find_envelope(box, 2);
  REQUIRE(env);
  CHECK(env->start_seq == 4);
  CHECK(env->end_seq == 5);
}

TEST_CASE("entries acknowledged by every active peer are garbage collected") {
  Replicator r(1, Config{});
  kv::Store store;
  for (std::uint64_t i = 1; i <= 5; ++i) r.record_local_delta("k", counter_delta(1, i), 1);
  r.on_peer_added(2);
  r.on_peer_added(3);
  r.on_ack(2, 5, {2, 3});
  CHECK(r.buffered() == 5);  // peer 3 still behind
  r.on_ack(3, 5, {2, 3});
  CHECK(r.buffered() == 0);
  CHECK(r.evicted_through() == 5);
}

TEST_CASE("a peer behind the retained buffer gets a full-state catch-up") {
  Config cfg;
  cfg.buffer_capacity = 4;
  Replicator r(1, cfg);
  kv::Store store;
  for (std::uint64_t i = 1; i <= 8; ++i) {
    store.update({"k", crdt::CrdtType::GCounter}, crdt::Increment{1}, 1);
    r.record_local_delta("k", counter_delta(1, i), 1);
  }
  CHECK(r.buffered() == 4);  // capacity eviction happened
  Outbox box;
  r.anti_entropy_tick(store, {2}, box);  // floor 0 predates the buffer
  const auto* env = find_envelope(box, 2);
  REQUIRE(env);
  REQUIRE(std::holds_alternative<wire::FullState>(env->msg));
  const auto& full = std::get<wire::FullState>(env->msg);
  CHECK(full.items.size() == store.size());
  CHECK(env->end_seq == 8);
  // Once the peer acks the full state, deltas resume.
  r.on_ack(2, 8, {2});
  r.record_local_delta("k", counter_delta(1, 9), 1);
  Outbox box2;
  r.anti_entropy_tick(store, {2}, box2);
  CHECK(find_group(box2, 2));
}

TEST_CASE("peer replacement resets the acked floor") {
  Replicator r(1, Config{});
  for (std::uint64_t i = 1; i <= 3; ++i) r.record_local_delta("k", counter_delta(1, i), 1);
  r.on_peer_added(2);
  r.on_ack(2, 3, {2});
  CHECK(r.acked_floor(2) == 3);
  r.on_peer_removed(2, {});
  r.on_peer_added(2);
  CHECK(r.acked_floor(2) == 0);
}

TEST_CASE("deltas are not echoed back to the peer they came from") {
  Replicator r(1, Config{});
  kv::Store store;
  store.join_in("k", counter_delta(2, 7));
  r.record_local_delta("k", counter_delta(2, 7), /*origin=*/2);
  Outbox box;
  r.anti_entropy_tick(store, {2, 3}, box);
  const auto* to_origin = find_group(box, 2);
  REQUIRE(to_origin);
  CHECK(to_origin->items.empty());  // range advances, no payload echo
  const auto* to_other = find_group(box, 3);
  REQUIRE(to_other);
  CHECK(to_other->items.size() == 1);
}

TEST_CASE("full-state reference mode always ships whole stores") {
  Config cfg;
  cfg.mode = Config::Mode::FullState;
  Replicator r(1, cfg);
  kv::Store store;
  store.update({"k", crdt::CrdtType::GCounter}, crdt::Increment{4}, 1);
  r.record_local_delta("k", counter_delta(1, 4), 1);
  for (int round = 0; round < 3; ++round) {
    Outbox box;
    r.anti_entropy_tick(store, {2}, box);
    const auto* env = find_envelope(box, 2);
    REQUIRE(env);
    CHECK(std::holds_alternative<wire::FullState>(env->msg));
  }
  CHECK(r.buffered() == 0);
}
