#include "edgemesh/kv_store.hpp"

#include "edgemesh/codec.hpp"

namespace edgemesh::kv {

void Store::declare(const StoreKey& key) {
  if (key.name.empty()) throw BadKeyError("store key name must be non-empty");
  auto it = entries_.find(key.name);
  if (it == entries_.end()) {
    entries_.emplace(key.name, crdt::CrdtState::bottom(key.type));
    return;
  }
  if (it->second.type() != key.type) {
    throw TypeConflictError("key '" + key.name + "' already declared as " +
                            std::string(crdt::type_name(it->second.type())));
  }
}

Store::UpdateResult Store::update(const StoreKey& key, const crdt::MutatorOp& op, NodeId actor) {
  declare(key);
  auto& state = entries_.at(key.name);
  auto [next, delta] = crdt::mutate(state, op, actor);
  state = std::move(next);
  return UpdateResult{crdt::value_of(state), std::move(delta)};
}

crdt::QueryResult Store::read(const StoreKey& key) const {
  auto it = entries_.find(key.name);
  if (it == entries_.end()) return crdt::value_of(crdt::CrdtState::bottom(key.type));
  return crdt::value_of(it->second);
}

crdt::QueryResult Store::read(const Bytes& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) return std::monostate{};
  return crdt::value_of(it->second);
}

const crdt::CrdtState* Store::get(const Bytes& name) const {
  auto it = entries_.find(name);
  return it == entries_.end() ? nullptr : &it->second;
}

Store::JoinOutcome Store::join_in(const Bytes& name, const crdt::CrdtState& fragment) {
  if (name.empty()) return JoinOutcome::TypeConflict;
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    auto bottom = crdt::CrdtState::bottom(fragment.type());
    auto joined = crdt::join(bottom, fragment);
    const bool changed = joined != bottom;
    entries_.emplace(name, std::move(joined));
    return changed ? JoinOutcome::Inflated : JoinOutcome::Unchanged;
  }
  if (it->second.type() != fragment.type()) return JoinOutcome::TypeConflict;
  auto joined = crdt::join(it->second, fragment);
  if (joined == it->second) return JoinOutcome::Unchanged;
  it->second = std::move(joined);
  return JoinOutcome::Inflated;
}

void Store::for_each(const std::function<void(const Bytes&, const crdt::CrdtState&)>& fn) const {
  for (const auto& [name, state] : entries_) fn(name, state);
}

Bytes Store::canonical_dump() const {
  Encoder e;
  e.u32(static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, state] : entries_) {
    e.bytes(name);
    e.bytes(crdt::encode(state));
  }
  return e.take();
}

std::optional<Store> Store::from_dump(std::string_view dump) {
  Decoder d(dump);
  Store out;
  const std::uint32_t n = d.u32();
  for (std::uint32_t i = 0; i < n && d.ok(); ++i) {
    Bytes name = d.bytes();
    auto state = crdt::decode(d.bytes());
    if (!state || name.empty()) return std::nullopt;
    out.entries_.emplace(std::move(name), std::move(*state));
  }
  if (!d.done()) return std::nullopt;
  return out;
}

}  // namespace edgemesh::kv
