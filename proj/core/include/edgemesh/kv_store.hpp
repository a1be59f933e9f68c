#pragma once

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>

#include "edgemesh/crdt.hpp"
#include "edgemesh/types.hpp"

namespace edgemesh::kv {

// Developer-facing replicated key/value store: named CRDT variables with
// declare/update/read. Purely node-local; convergence across nodes comes
// from the replication layer shipping deltas between stores.

struct StoreKey {
  Bytes name;
  crdt::CrdtType type = crdt::CrdtType::GCounter;

  bool operator==(const StoreKey&) const = default;
};

struct TypeConflictError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct BadKeyError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class Store {
 public:
  /// Bind a key to the bottom state of its type. Idempotent; re-declaring
  /// the same name with a different type throws TypeConflictError.
  void declare(const StoreKey& key);

  struct UpdateResult {
    crdt::QueryResult value;
    crdt::Delta delta;
  };

  /// Mutate a key (auto-declared on first typed use) and return the new
  /// local value plus the delta to hand to replication.
  UpdateResult update(const StoreKey& key, const crdt::MutatorOp& op, NodeId actor);

  /// Typed read: absent keys read as the type's bottom value.
  crdt::QueryResult read(const StoreKey& key) const;

  /// Untyped read: absent keys report not-found (monostate).
  crdt::QueryResult read(const Bytes& name) const;

  const crdt::CrdtState* get(const Bytes& name) const;

  enum class JoinOutcome { Unchanged, Inflated, TypeConflict };

  /// Join a received state fragment into the store, declaring the key at
  /// bottom if absent. Never throws: conflicts are reported for dropping.
  JoinOutcome join_in(const Bytes& name, const crdt::CrdtState& fragment);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// Deterministic iteration in key order.
  void for_each(const std::function<void(const Bytes&, const crdt::CrdtState&)>& fn) const;

  /// Canonical binary dump: converged stores dump byte-identically.
  Bytes canonical_dump() const;

  /// Rebuild a store from a canonical dump (used by the dump inspector).
  static std::optional<Store> from_dump(std::string_view dump);

 private:
  std::map<Bytes, crdt::CrdtState> entries_;
};

}  // namespace edgemesh::kv
