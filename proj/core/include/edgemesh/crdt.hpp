#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string_view>
#include <variant>

#include "edgemesh/types.hpp"

namespace edgemesh::crdt {

// State-based CRDTs with delta-mutators. Every state forms a join
// semilattice; merge is a least upper bound, so concurrently updated
// replicas converge once they have exchanged state in any order.

enum class CrdtType : std::uint8_t {
  GCounter = 1,
  PNCounter = 2,
  GSet = 3,
  AWSet = 4,
  LWWRegister = 5,
};

std::string_view type_name(CrdtType t);
std::optional<CrdtType> type_from_name(std::string_view name);

struct TypeMismatchError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct MutationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A per-replica event identifier: (origin, counter) pairs are never reused.
struct Dot {
  NodeId origin = 0;
  std::uint64_t counter = 0;

  auto operator<=>(const Dot&) const = default;
};

/// Summary of which dots a state has observed: a compact map of maximal
/// contiguous counters per origin, plus a cloud of non-contiguous dots.
/// The context is kept normalized: after compaction the cloud never holds
/// a dot with counter == compact[origin] + 1.
class CausalContext {
 public:
  bool contains(const Dot& d) const;
  void insert(const Dot& d);
  void merge(const CausalContext& other);

  /// Next unused counter for an origin (covers both compact and cloud).
  std::uint64_t next_counter(NodeId origin) const;

  /// Record that all dots 1..counter of an origin are observed. Used by
  /// the decoder to rebuild compact entries without dot-by-dot insertion.
  void merge_compact_entry(NodeId origin, std::uint64_t counter);

  const std::map<NodeId, std::uint64_t>& compact() const { return compact_; }
  const std::set<Dot>& cloud() const { return cloud_; }

  bool operator==(const CausalContext&) const = default;

 private:
  void compact_cloud();

  std::map<NodeId, std::uint64_t> compact_;
  std::set<Dot> cloud_;
};

/// Grow-only counter: one non-negative slot per contributing node,
/// pointwise-max merge. The value is the sum of all slots.
struct GCounter {
  std::map<NodeId, std::uint64_t> entries;

  std::int64_t value() const;
  bool operator==(const GCounter&) const = default;
};

/// Increment/decrement counter built from two grow-only halves.
struct PNCounter {
  GCounter inc;
  GCounter dec;

  std::int64_t value() const { return inc.value() - dec.value(); }
  bool operator==(const PNCounter&) const = default;
};

/// Grow-only set of opaque byte strings; merge is union.
struct GSet {
  std::set<Bytes> elements;

  bool operator==(const GSet&) const = default;
};

/// Observed-remove set with add-wins semantics. An element is present iff
/// it has at least one surviving dot; removes cover only observed dots, so
/// a concurrent add survives the merge.
struct AWSet {
  std::map<Bytes, std::set<Dot>> entries;
  CausalContext context;

  std::set<Bytes> elements() const;
  bool contains(const Bytes& e) const { return entries.count(e) > 0; }
  bool operator==(const AWSet&) const = default;
};

/// Last-writer-wins register ordered by (timestamp, writer, value).
/// timestamp == 0 means unwritten (bottom).
struct LWWRegister {
  Bytes value;
  std::uint64_t timestamp = 0;
  NodeId writer = 0;

  bool operator==(const LWWRegister&) const = default;
};

/// Tagged union over the replicated data types. Deltas are state fragments
/// of the same representation, so this type serves for both.
class CrdtState {
 public:
  CrdtState() : v_(GCounter{}) {}
  CrdtState(GCounter s) : v_(std::move(s)) {}
  CrdtState(PNCounter s) : v_(std::move(s)) {}
  CrdtState(GSet s) : v_(std::move(s)) {}
  CrdtState(AWSet s) : v_(std::move(s)) {}
  CrdtState(LWWRegister s) : v_(std::move(s)) {}

  static CrdtState bottom(CrdtType t);

  CrdtType type() const;

  template <typename T>
  const T& as() const {
    return std::get<T>(v_);
  }
  template <typename T>
  T& as() {
    return std::get<T>(v_);
  }
  template <typename T>
  bool is() const {
    return std::holds_alternative<T>(v_);
  }

  bool operator==(const CrdtState&) const = default;

 private:
  std::variant<GCounter, PNCounter, GSet, AWSet, LWWRegister> v_;
};

using Delta = CrdtState;

// Mutator operations. Register writes carry the timestamp assigned by the
// writing node's Lamport clock.
struct Increment {
  std::uint64_t amount = 1;
};
struct Decrement {
  std::uint64_t amount = 1;
};
struct AddElement {
  Bytes element;
};
struct RemoveElement {
  Bytes element;
};
struct SetValue {
  Bytes value;
  std::uint64_t timestamp = 0;
};

using MutatorOp = std::variant<Increment, Decrement, AddElement, RemoveElement, SetValue>;

struct RegisterValue {
  Bytes value;
  std::uint64_t timestamp = 0;
  NodeId writer = 0;

  bool set() const { return timestamp > 0; }
  bool operator==(const RegisterValue&) const = default;
};

/// Read result: monostate = key not found, int64 for counters, element set
/// for sets, RegisterValue for registers.
using QueryResult = std::variant<std::monostate, std::int64_t, std::set<Bytes>, RegisterValue>;

/// Least upper bound of two states of the same type. Commutative,
/// associative, idempotent; throws TypeMismatchError when the tags differ.
CrdtState join(const CrdtState& a, const CrdtState& b);

struct MutateResult {
  CrdtState state;  ///< join(input, delta)
  Delta delta;      ///< minimal fragment covering the mutation
};

/// Apply a mutator at `actor`, returning the new state and the delta that,
/// joined into any replica, reproduces the mutation.
MutateResult mutate(const CrdtState& state, const MutatorOp& op, NodeId actor);

/// Pure read of the current value.
QueryResult value_of(const CrdtState& state);

/// Canonical binary encoding: type-tagged, length-prefixed, deterministic
/// field order. Equal states encode identically.
Bytes encode(const CrdtState& state);
std::optional<CrdtState> decode(std::string_view in);

/// True iff b dominates a in the lattice order (join(a, b) == b).
bool dominates(const CrdtState& a, const CrdtState& b);

/// Largest register timestamp carried by a state (0 for non-registers);
/// used to merge Lamport clocks on receipt.
std::uint64_t max_register_timestamp(const CrdtState& state);

}  // namespace edgemesh::crdt
