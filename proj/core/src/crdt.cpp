#include "edgemesh/crdt.hpp"

#include <algorithm>

#include "edgemesh/codec.hpp"

namespace edgemesh::crdt {

std::string_view type_name(CrdtType t) {
  switch (t) {
    case CrdtType::GCounter: return "gcounter";
    case CrdtType::PNCounter: return "pncounter";
    case CrdtType::GSet: return "gset";
    case CrdtType::AWSet: return "awset";
    case CrdtType::LWWRegister: return "lwwregister";
  }
  return "unknown";
}

std::optional<CrdtType> type_from_name(std::string_view name) {
  if (name == "gcounter") return CrdtType::GCounter;
  if (name == "pncounter") return CrdtType::PNCounter;
  if (name == "gset") return CrdtType::GSet;
  if (name == "awset") return CrdtType::AWSet;
  if (name == "lwwregister") return CrdtType::LWWRegister;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// CausalContext

bool CausalContext::contains(const Dot& d) const {
  auto it = compact_.find(d.origin);
  if (it != compact_.end() && d.counter <= it->second) return true;
  return cloud_.count(d) > 0;
}

void CausalContext::insert(const Dot& d) {
  if (contains(d)) return;
  cloud_.insert(d);
  compact_cloud();
}

void CausalContext::merge(const CausalContext& other) {
  for (const auto& [origin, counter] : other.compact_) {
    auto [it, inserted] = compact_.try_emplace(origin, counter);
    if (!inserted) it->second = std::max(it->second, counter);
  }
  for (const Dot& d : other.cloud_) {
    if (!contains(d)) cloud_.insert(d);
  }
  compact_cloud();
}

std::uint64_t CausalContext::next_counter(NodeId origin) const {
  std::uint64_t max = 0;
  auto it = compact_.find(origin);
  if (it != compact_.end()) max = it->second;
  // The cloud may hold later, non-contiguous dots for this origin.
  for (auto c = cloud_.lower_bound(Dot{origin, 0}); c != cloud_.end() && c->origin == origin; ++c) {
    max = std::max(max, c->counter);
  }
  return max + 1;
}

void CausalContext::merge_compact_entry(NodeId origin, std::uint64_t counter) {
  auto [it, inserted] = compact_.try_emplace(origin, counter);
  if (!inserted) it->second = std::max(it->second, counter);
  compact_cloud();
}

void CausalContext::compact_cloud() {
  bool moved = true;
  while (moved) {
    moved = false;
    for (auto it = cloud_.begin(); it != cloud_.end();) {
      auto slot = compact_.find(it->origin);
      const std::uint64_t base = slot == compact_.end() ? 0 : slot->second;
      if (it->counter == base + 1) {
        compact_[it->origin] = it->counter;
        it = cloud_.erase(it);
        moved = true;
      } else if (it->counter <= base) {
        it = cloud_.erase(it);
        moved = true;
      } else {
        ++it;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Values

std::int64_t GCounter::value() const {
  std::int64_t sum = 0;
  for (const auto& [node, n] : entries) sum += static_cast<std::int64_t>(n);
  return sum;
}

std::set<Bytes> AWSet::elements() const {
  std::set<Bytes> out;
  for (const auto& [e, dots] : entries) {
    if (!dots.empty()) out.insert(e);
  }
  return out;
}

CrdtState CrdtState::bottom(CrdtType t) {
  switch (t) {
    case CrdtType::GCounter: return CrdtState(GCounter{});
    case CrdtType::PNCounter: return CrdtState(PNCounter{});
    case CrdtType::GSet: return CrdtState(GSet{});
    case CrdtType::AWSet: return CrdtState(AWSet{});
    case CrdtType::LWWRegister: return CrdtState(LWWRegister{});
  }
  throw TypeMismatchError("unknown CRDT type tag");
}

CrdtType CrdtState::type() const {
  if (is<GCounter>()) return CrdtType::GCounter;
  if (is<PNCounter>()) return CrdtType::PNCounter;
  if (is<GSet>()) return CrdtType::GSet;
  if (is<AWSet>()) return CrdtType::AWSet;
  return CrdtType::LWWRegister;
}

// ---------------------------------------------------------------------------
// join

namespace {

GCounter join_gcounter(const GCounter& a, const GCounter& b) {
  GCounter out = a;
  for (const auto& [node, n] : b.entries) {
    auto [it, inserted] = out.entries.try_emplace(node, n);
    if (!inserted) it->second = std::max(it->second, n);
  }
  return out;
}

AWSet join_awset(const AWSet& a, const AWSet& b) {
  AWSet out;
  // A dot survives if both sides hold it, or one side holds it and the
  // other has not observed it. Observed-but-dropped dots stay dead.
  auto survivors = [&](const AWSet& x, const AWSet& y) {
    for (const auto& [elem, dots] : x.entries) {
      for (const Dot& d : dots) {
        bool in_other = false;
        auto it = y.entries.find(elem);
        if (it != y.entries.end()) in_other = it->second.count(d) > 0;
        if (in_other || !y.context.contains(d)) out.entries[elem].insert(d);
      }
    }
  };
  survivors(a, b);
  survivors(b, a);
  out.context = a.context;
  out.context.merge(b.context);
  // Presence invariant: an element is present iff its dot set is non-empty.
  for (auto it = out.entries.begin(); it != out.entries.end();) {
    if (it->second.empty()) {
      it = out.entries.erase(it);
    } else {
      ++it;
    }
  }
  return out;
}

const LWWRegister& pick_lww(const LWWRegister& a, const LWWRegister& b) {
  // Total order on (timestamp, writer, value) so ties cannot diverge.
  if (a.timestamp != b.timestamp) return a.timestamp > b.timestamp ? a : b;
  if (a.writer != b.writer) return a.writer > b.writer ? a : b;
  return a.value >= b.value ? a : b;
}

}  // namespace

CrdtState join(const CrdtState& a, const CrdtState& b) {
  if (a.type() != b.type()) {
    throw TypeMismatchError("join: mismatched CRDT types");
  }
  switch (a.type()) {
    case CrdtType::GCounter:
      return CrdtState(join_gcounter(a.as<GCounter>(), b.as<GCounter>()));
    case CrdtType::PNCounter: {
      PNCounter out;
      out.inc = join_gcounter(a.as<PNCounter>().inc, b.as<PNCounter>().inc);
      out.dec = join_gcounter(a.as<PNCounter>().dec, b.as<PNCounter>().dec);
      return CrdtState(std::move(out));
    }
    case CrdtType::GSet: {
      GSet out = a.as<GSet>();
      const GSet& other = b.as<GSet>();
      out.elements.insert(other.elements.begin(), other.elements.end());
      return CrdtState(std::move(out));
    }
    case CrdtType::AWSet:
      return CrdtState(join_awset(a.as<AWSet>(), b.as<AWSet>()));
    case CrdtType::LWWRegister:
      return CrdtState(pick_lww(a.as<LWWRegister>(), b.as<LWWRegister>()));
  }
  throw TypeMismatchError("join: unknown CRDT type");
}

// ---------------------------------------------------------------------------
// mutate

namespace {

[[noreturn]] void bad_op(const CrdtState& state, const char* op) {
  throw MutationError(std::string(op) + " is not valid for " + std::string(type_name(state.type())));
}

Delta make_delta(const CrdtState& state, const MutatorOp& op, NodeId actor) {
  if (const auto* inc = std::get_if<Increment>(&op)) {
    if (inc->amount == 0) throw MutationError("increment amount must be positive");
    if (state.is<GCounter>()) {
      GCounter d;
      const auto& entries = state.as<GCounter>().entries;
      auto it = entries.find(actor);
      d.entries[actor] = (it == entries.end() ? 0 : it->second) + inc->amount;
      return CrdtState(std::move(d));
    }
    if (state.is<PNCounter>()) {
      PNCounter d;
      const auto& entries = state.as<PNCounter>().inc.entries;
      auto it = entries.find(actor);
      d.inc.entries[actor] = (it == entries.end() ? 0 : it->second) + inc->amount;
      return CrdtState(std::move(d));
    }
    bad_op(state, "increment");
  }
  if (const auto* dec = std::get_if<Decrement>(&op)) {
    if (dec->amount == 0) throw MutationError("decrement amount must be positive");
    if (state.is<PNCounter>()) {
      PNCounter d;
      const auto& entries = state.as<PNCounter>().dec.entries;
      auto it = entries.find(actor);
      d.dec.entries[actor] = (it == entries.end() ? 0 : it->second) + dec->amount;
      return CrdtState(std::move(d));
    }
    bad_op(state, "decrement");
  }
  if (const auto* add = std::get_if<AddElement>(&op)) {
    if (add->element.empty()) throw MutationError("element must be non-empty");
    if (state.is<GSet>()) {
      GSet d;
      d.elements.insert(add->element);
      return CrdtState(std::move(d));
    }
    if (state.is<AWSet>()) {
      const AWSet& s = state.as<AWSet>();
      AWSet d;
      const Dot dot{actor, s.context.next_counter(actor)};
      d.entries[add->element].insert(dot);
      d.context.insert(dot);
      // Cover the dots this add replaces so the merge retires them.
      auto it = s.entries.find(add->element);
      if (it != s.entries.end()) {
        for (const Dot& old : it->second) d.context.insert(old);
      }
      return CrdtState(std::move(d));
    }
    bad_op(state, "add");
  }
  if (const auto* rem = std::get_if<RemoveElement>(&op)) {
    if (rem->element.empty()) throw MutationError("element must be non-empty");
    if (state.is<AWSet>()) {
      const AWSet& s = state.as<AWSet>();
      AWSet d;
      auto it = s.entries.find(rem->element);
      if (it != s.entries.end()) {
        for (const Dot& old : it->second) d.context.insert(old);
      }
      return CrdtState(std::move(d));
    }
    bad_op(state, "remove");
  }
  const auto& set = std::get<SetValue>(op);
  if (state.is<LWWRegister>()) {
    if (set.timestamp == 0) throw MutationError("register write needs a positive timestamp");
    return CrdtState(LWWRegister{set.value, set.timestamp, actor});
  }
  bad_op(state, "set");
}

}  // namespace

MutateResult mutate(const CrdtState& state, const MutatorOp& op, NodeId actor) {
  Delta delta = make_delta(state, op, actor);
  // The delta-mutator law, by construction: new state == join(old, delta).
  return MutateResult{join(state, delta), std::move(delta)};
}

QueryResult value_of(const CrdtState& state) {
  switch (state.type()) {
    case CrdtType::GCounter: return state.as<GCounter>().value();
    case CrdtType::PNCounter: return state.as<PNCounter>().value();
    case CrdtType::GSet: return state.as<GSet>().elements;
    case CrdtType::AWSet: return state.as<AWSet>().elements();
    case CrdtType::LWWRegister: {
      const auto& r = state.as<LWWRegister>();
      return RegisterValue{r.value, r.timestamp, r.writer};
    }
  }
  return std::monostate{};
}

// ---------------------------------------------------------------------------
// Canonical encoding

namespace {

void encode_gcounter(Encoder& e, const GCounter& c) {
  e.u32(static_cast<std::uint32_t>(c.entries.size()));
  for (const auto& [node, n] : c.entries) {
    e.u64(node);
    e.u64(n);
  }
}

bool decode_gcounter(Decoder& d, GCounter& out) {
  const std::uint32_t n = d.u32();
  for (std::uint32_t i = 0; i < n && d.ok(); ++i) {
    const NodeId node = d.u64();
    out.entries[node] = d.u64();
  }
  return d.ok();
}

void encode_context(Encoder& e, const CausalContext& ctx) {
  e.u32(static_cast<std::uint32_t>(ctx.compact().size()));
  for (const auto& [node, n] : ctx.compact()) {
    e.u64(node);
    e.u64(n);
  }
  e.u32(static_cast<std::uint32_t>(ctx.cloud().size()));
  for (const Dot& dot : ctx.cloud()) {
    e.u64(dot.origin);
    e.u64(dot.counter);
  }
}

bool decode_context(Decoder& d, CausalContext& out) {
  const std::uint32_t nc = d.u32();
  for (std::uint32_t i = 0; i < nc && d.ok(); ++i) {
    const NodeId node = d.u64();
    out.merge_compact_entry(node, d.u64());
  }
  const std::uint32_t ncl = d.u32();
  for (std::uint32_t i = 0; i < ncl && d.ok(); ++i) {
    const NodeId node = d.u64();
    out.insert(Dot{node, d.u64()});
  }
  return d.ok();
}

void encode_awset(Encoder& e, const AWSet& s) {
  encode_context(e, s.context);
  e.u32(static_cast<std::uint32_t>(s.entries.size()));
  for (const auto& [elem, dots] : s.entries) {
    e.bytes(elem);
    e.u32(static_cast<std::uint32_t>(dots.size()));
    for (const Dot& dot : dots) {
      e.u64(dot.origin);
      e.u64(dot.counter);
    }
  }
}

bool decode_awset(Decoder& d, AWSet& out) {
  if (!decode_context(d, out.context)) return false;
  const std::uint32_t n = d.u32();
  for (std::uint32_t i = 0; i < n && d.ok(); ++i) {
    Bytes elem = d.bytes();
    const std::uint32_t ndots = d.u32();
    std::set<Dot> dots;
    for (std::uint32_t k = 0; k < ndots && d.ok(); ++k) {
      const NodeId node = d.u64();
      dots.insert(Dot{node, d.u64()});
    }
    if (!dots.empty()) out.entries[std::move(elem)] = std::move(dots);
  }
  return d.ok();
}

}  // namespace

Bytes encode(const CrdtState& state) {
  Encoder e;
  e.u8(static_cast<std::uint8_t>(state.type()));
  switch (state.type()) {
    case CrdtType::GCounter:
      encode_gcounter(e, state.as<GCounter>());
      break;
    case CrdtType::PNCounter:
      encode_gcounter(e, state.as<PNCounter>().inc);
      encode_gcounter(e, state.as<PNCounter>().dec);
      break;
    case CrdtType::GSet: {
      const auto& s = state.as<GSet>();
      e.u32(static_cast<std::uint32_t>(s.elements.size()));
      for (const Bytes& elem : s.elements) e.bytes(elem);
      break;
    }
    case CrdtType::AWSet:
      encode_awset(e, state.as<AWSet>());
      break;
    case CrdtType::LWWRegister: {
      const auto& r = state.as<LWWRegister>();
      e.bytes(r.value);
      e.u64(r.timestamp);
      e.u64(r.writer);
      break;
    }
  }
  return e.take();
}

std::optional<CrdtState> decode(std::string_view in) {
  Decoder d(in);
  const auto tag = d.u8();
  if (!d.ok()) return std::nullopt;
  switch (static_cast<CrdtType>(tag)) {
    case CrdtType::GCounter: {
      GCounter c;
      if (!decode_gcounter(d, c) || !d.done()) return std::nullopt;
      return CrdtState(std::move(c));
    }
    case CrdtType::PNCounter: {
      PNCounter c;
      if (!decode_gcounter(d, c.inc) || !decode_gcounter(d, c.dec) || !d.done()) return std::nullopt;
      return CrdtState(std::move(c));
    }
    case CrdtType::GSet: {
      GSet s;
      const std::uint32_t n = d.u32();
      for (std::uint32_t i = 0; i < n && d.ok(); ++i) s.elements.insert(d.bytes());
      if (!d.done()) return std::nullopt;
      return CrdtState(std::move(s));
    }
    case CrdtType::AWSet: {
      AWSet s;
      if (!decode_awset(d, s) || !d.done()) return std::nullopt;
      return CrdtState(std::move(s));
    }
    case CrdtType::LWWRegister: {
      LWWRegister r;
      r.value = d.bytes();
      r.timestamp = d.u64();
      r.writer = d.u64();
      if (!d.done()) return std::nullopt;
      return CrdtState(std::move(r));
    }
    default:
      return std::nullopt;
  }
}

bool dominates(const CrdtState& a, const CrdtState& b) { return join(a, b) == b; }

std::uint64_t max_register_timestamp(const CrdtState& state) {
  if (state.is<LWWRegister>()) return state.as<LWWRegister>().timestamp;
  return 0;
}

}  // namespace edgemesh::crdt
