#include "doctest.h"
#include "edgemesh/kv_store.hpp"

using namespace edgemesh;
using namespace edgemesh::kv;

TEST_CASE("declare binds bottom and is idempotent") {
  Store s;
  const StoreKey key{"temp_sum", crdt::CrdtType::GCounter};
  s.declare(key);
  s.declare(key);
  CHECK(s.size() == 1);
  CHECK(std::get<std::int64_t>(s.read(key)) == 0);
}

TEST_CASE("re-declaring a name with a different type is an error") {
  Store s;
  s.declare({"k", crdt::CrdtType::GCounter});
  CHECK_THROWS_AS(s.declare({"k", crdt::CrdtType::GSet}), TypeConflictError);
  CHECK_THROWS_AS(s.declare({"", crdt::CrdtType::GSet}), BadKeyError);
}

TEST_CASE("update auto-declares and returns the new local value") {
  Store s;
  const auto result = s.update({"hits", crdt::CrdtType::GCounter}, crdt::Increment{4}, 1);
  CHECK(std::get<std::int64_t>(result.value) == 4);
  CHECK(std::get<std::int64_t>(s.read(Bytes("hits"))) == 4);
}

TEST_CASE("reads distinguish typed bottom from not-found") {
  Store s;
  CHECK(std::get<std::int64_t>(s.read(StoreKey{"absent", crdt::CrdtType::PNCounter})) == 0);
  CHECK(std::get<std::set<Bytes>>(s.read(StoreKey{"absent", crdt::CrdtType::AWSet})).empty());
  CHECK(std::holds_alternative<std::monostate>(s.read(Bytes("absent"))));
}

TEST_CASE("join_in reports inflation, idempotence and conflicts") {
  Store s;
  crdt::GCounter d;
  d.entries[2] = 5;
  const crdt::CrdtState delta(std::move(d));
  CHECK(s.join_in("k", delta) == Store::JoinOutcome::Inflated);
  CHECK(s.join_in("k", delta) == Store::JoinOutcome::Unchanged);
  CHECK(s.join_in("k", crdt::CrdtState(crdt::GSet{})) == Store::JoinOutcome::TypeConflict);
  CHECK(std::get<std::int64_t>(s.read(Bytes("k"))) == 5);
}

TEST_CASE("two replicas adding to a set converge to the union") {
  Store a, b;
  const StoreKey key{"s", crdt::CrdtType::AWSet};
  const auto da = a.update(key, crdt::AddElement{"a"}, 1).delta;
  const auto db = b.update(key, crdt::AddElement{"b"}, 2).delta;
  a.join_in("s", db);
  b.join_in("s", da);
  CHECK(std::get<std::set<Bytes>>(a.read(key)) == std::set<Bytes>{"a", "b"});
  CHECK(a.canonical_dump() == b.canonical_dump());
}

TEST_CASE("canonical dump is deterministic and roundtrips") {
  Store a;
  a.update({"z", crdt::CrdtType::GCounter}, crdt::Increment{1}, 1);
  a.update({"a", crdt::CrdtType::GSet}, crdt::AddElement{"e"}, 1);
  a.update({"m", crdt::CrdtType::LWWRegister}, crdt::SetValue{"v", 3}, 1);
  const Bytes dump = a.canonical_dump();
  CHECK(dump == a.canonical_dump());

  auto restored = Store::from_dump(dump);
  REQUIRE(restored.has_value());
  CHECK(restored->canonical_dump() == dump);
  CHECK(std::get<std::int64_t>(restored->read(Bytes("z"))) == 1);
  CHECK(!Store::from_dump("garbage").has_value());
}

TEST_CASE("counter reads are monotone at a single replica") {
  Store s;
  std::int64_t last = 0;
  for (int i = 0; i < 20; ++i) {
    const auto v =
        s.update({"c", crdt::CrdtType::GCounter}, crdt::Increment{1 + std::uint64_t(i % 3)}, 7);
    const auto now = std::get<std::int64_t>(v.value);
    CHECK(now > last);
    last = now;
  }
}
