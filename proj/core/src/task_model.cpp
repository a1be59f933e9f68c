#include "edgemesh/task_model.hpp"

#include <algorithm>

#include "edgemesh/codec.hpp"
#include "edgemesh/sensors.hpp"

namespace edgemesh::tasks {

std::optional<std::int64_t> TaskSpec::int_param(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end()) return std::nullopt;
  if (const auto* i = std::get_if<std::int64_t>(&it->second)) return *i;
  if (const auto* d = std::get_if<double>(&it->second)) return static_cast<std::int64_t>(*d);
  return std::nullopt;
}

std::optional<double> TaskSpec::num_param(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end()) return std::nullopt;
  if (const auto* d = std::get_if<double>(&it->second)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
  return std::nullopt;
}

std::optional<std::string> TaskSpec::str_param(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end()) return std::nullopt;
  if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
  return std::nullopt;
}

Bytes encode_task(const TaskSpec& spec, std::uint64_t stamp, NodeId writer) {
  Encoder e;
  e.u64(stamp);
  e.u64(writer);
  e.bytes(spec.name);
  if (spec.targets) {
    e.u8(1);
    e.u32(static_cast<std::uint32_t>(spec.targets->size()));
    for (NodeId n : *spec.targets) e.u64(n);
  } else {
    e.u8(0);
  }
  e.bytes(spec.kind);
  e.u32(static_cast<std::uint32_t>(spec.params.size()));
  for (const auto& [key, value] : spec.params) {
    e.bytes(key);
    if (const auto* i = std::get_if<std::int64_t>(&value)) {
      e.u8(1);
      e.u64(static_cast<std::uint64_t>(*i));
    } else if (const auto* d = std::get_if<double>(&value)) {
      e.u8(2);
      e.f64(*d);
    } else if (const auto* s = std::get_if<std::string>(&value)) {
      e.u8(3);
      e.bytes(*s);
    } else {
      e.u8(4);
      e.u8(std::get<bool>(value) ? 1 : 0);
    }
  }
  return e.take();
}

std::optional<StoredTask> decode_task(std::string_view in) {
  Decoder d(in);
  StoredTask out;
  out.stamp = d.u64();
  out.writer = d.u64();
  out.spec.name = d.bytes();
  if (d.u8() == 1) {
    std::set<NodeId> targets;
    const std::uint32_t n = d.u32();
    for (std::uint32_t i = 0; i < n && d.ok(); ++i) targets.insert(d.u64());
    out.spec.targets = std::move(targets);
  }
  out.spec.kind = d.bytes();
  const std::uint32_t np = d.u32();
  for (std::uint32_t i = 0; i < np && d.ok(); ++i) {
    std::string key = d.bytes();
    switch (d.u8()) {
      case 1: out.spec.params[key] = static_cast<std::int64_t>(d.u64()); break;
      case 2: out.spec.params[key] = d.f64(); break;
      case 3: out.spec.params[key] = Bytes(d.bytes()); break;
      case 4: out.spec.params[key] = d.u8() != 0; break;
      default: return std::nullopt;
    }
  }
  if (!d.done() || out.spec.name.empty()) return std::nullopt;
  return out;
}

Bytes encode_exec_element(NodeId node, std::uint64_t bucket) {
  Encoder e;
  e.u64(node);
  e.u64(bucket);
  return e.take();
}

// ---------------------------------------------------------------------------

TaskRuntime::TaskRuntime(NodeId self, SchedulerConfig cfg, NodeHooks& hooks, std::uint64_t seed)
    : self_(self), cfg_(cfg), hooks_(hooks), rng_(seed) {}

void TaskRuntime::register_kind(const std::string& kind, Behavior behavior) {
  registry_[kind] = std::move(behavior);
}

void TaskRuntime::add_task(const TaskSpec& spec, std::uint64_t stamp) {
  if (spec.name.empty() || spec.kind.empty()) {
    throw std::invalid_argument("task needs a name and a kind");
  }
  const kv::StoreKey key{kTasksKey, crdt::CrdtType::AWSet};
  hooks_.store_update(key, crdt::AddElement{encode_task(spec, stamp, self_)});
}

void TaskRuntime::remove_task(const std::string& name) {
  const kv::StoreKey key{kTasksKey, crdt::CrdtType::AWSet};
  const auto view = hooks_.store_read(key);
  const auto* elems = std::get_if<std::set<Bytes>>(&view);
  if (!elems) return;
  for (const Bytes& elem : *elems) {
    auto stored = decode_task(elem);
    if (stored && stored->spec.name == name) {
      hooks_.store_update(key, crdt::RemoveElement{elem});
    }
  }
}

std::map<std::string, StoredTask> TaskRuntime::visible_tasks() const {
  std::map<std::string, StoredTask> out;
  const auto view = hooks_.store_read(kv::StoreKey{kTasksKey, crdt::CrdtType::AWSet});
  const auto* elems = std::get_if<std::set<Bytes>>(&view);
  if (!elems) return out;
  for (const Bytes& elem : *elems) {
    auto stored = decode_task(elem);
    if (!stored) continue;
    auto it = out.find(stored->spec.name);
    // Duplicate names: newest (stamp, writer) body wins.
    if (it == out.end() || std::pair(it->second.stamp, it->second.writer) <
                               std::pair(stored->stamp, stored->writer)) {
      out[stored->spec.name] = std::move(*stored);
    }
  }
  return out;
}

ExecutionResult TaskRuntime::start_task(const std::string& name) {
  const auto tasks = visible_tasks();
  auto it = tasks.find(name);
  if (it == tasks.end()) return {name, ExecStatus::UnknownName};
  const TaskSpec& spec = it->second.spec;
  if (!spec.targets_node(self_)) return {name, ExecStatus::SkippedTarget};
  auto behavior = registry_.find(spec.kind);
  if (behavior == registry_.end()) return {name, ExecStatus::UnknownKind};
  behavior->second(hooks_, spec);
  started_.insert(name);
  ++local_runs_[name];
  log_execution(name);
  return {name, ExecStatus::Executed};
}

std::optional<ExecutionResult> TaskRuntime::find_and_start_task() {
  const auto tasks = visible_tasks();
  std::vector<const StoredTask*> eligible;
  for (const auto& [name, stored] : tasks) {
    if (!stored.spec.targets_node(self_)) continue;
    if (!knows_kind(stored.spec.kind)) continue;
    if (started_.count(name)) continue;
    eligible.push_back(&stored);
  }
  if (eligible.empty()) return std::nullopt;
  const StoredTask* pick = nullptr;
  if (cfg_.selection == SchedulerConfig::Selection::Random) {
    pick = eligible[rng_.below(eligible.size())];
  } else {
    // Least observed load; visible_tasks() iterates in name order, so ties
    // resolve to the lexicographically first name.
    std::size_t best = SIZE_MAX;
    for (const StoredTask* t : eligible) {
      const std::size_t load = exec_log_records(t->spec.name);
      if (load < best) {
        best = load;
        pick = t;
      }
    }
  }
  return start_task(pick->spec.name);
}

std::vector<ExecutionResult> TaskRuntime::start_all_tasks() {
  std::vector<ExecutionResult> out;
  for (const auto& [name, stored] : visible_tasks()) {
    if (!stored.spec.targets_node(self_)) continue;
    out.push_back(start_task(name));
  }
  return out;
}

void TaskRuntime::scheduler_tick() { find_and_start_task(); }

std::uint64_t TaskRuntime::executions(const std::string& name) const {
  auto it = local_runs_.find(name);
  return it == local_runs_.end() ? 0 : it->second;
}

std::size_t TaskRuntime::exec_log_records(const std::string& name) const {
  const kv::StoreKey key{kExecLogPrefix + name, crdt::CrdtType::GSet};
  const auto view = hooks_.store_read(key);
  const auto* elems = std::get_if<std::set<Bytes>>(&view);
  return elems ? elems->size() : 0;
}

void TaskRuntime::log_execution(const std::string& name) {
  // One grow-only record per (node, bucket); re-execution reuses the same
  // element so converged state does not depend on the execution count.
  const Bytes element = encode_exec_element(self_, 0);
  const kv::StoreKey key{kExecLogPrefix + name, crdt::CrdtType::GSet};
  const auto view = hooks_.store_read(key);
  if (const auto* elems = std::get_if<std::set<Bytes>>(&view)) {
    if (elems->count(element)) return;
  }
  hooks_.store_update(key, crdt::AddElement{element});
}

// ---------------------------------------------------------------------------
// Built-in kinds

namespace {

void run_sense_aggregate(NodeHooks& hooks, const TaskSpec& spec) {
  agg::WindowSpec w;
  w.store_key = spec.str_param("key").value_or(std::string(kResultPrefix) + spec.name + "/means");
  w.capacity = static_cast<std::size_t>(spec.int_param("window").value_or(10));
  if (w.capacity == 0) w.capacity = 1;
  w.delta_interval_ms = static_cast<TimeMs>(spec.int_param("delta_interval_ms").value_or(1'000));
  if (w.delta_interval_ms == 0) w.delta_interval_ms = 1;
  w.threshold = spec.num_param("threshold").value_or(0.0);
  const auto kind = sensors::kind_from_name(spec.str_param("sensor").value_or("temp1"));
  w.sensor = static_cast<std::uint8_t>(kind.value_or(sensors::Kind::Temp1));
  hooks.install_window(w);
}

void run_counter_bump(NodeHooks& hooks, const TaskSpec& spec) {
  const std::string counter_key =
      spec.str_param("key").value_or(std::string(kResultPrefix) + spec.name + "/count");
  const std::int64_t amount = spec.int_param("amount").value_or(1);
  if (amount == 0) return;
  // Effectively-once per node: a fixed done-marker guards the bump so
  // re-execution cannot inflate the counter.
  const kv::StoreKey done_key{std::string(kResultPrefix) + spec.name + "/done",
                              crdt::CrdtType::GSet};
  const Bytes marker = encode_exec_element(hooks.self(), 0);
  const auto done = hooks.store_read(done_key);
  if (const auto* elems = std::get_if<std::set<Bytes>>(&done)) {
    if (elems->count(marker)) return;
  }
  const kv::StoreKey key{counter_key, crdt::CrdtType::PNCounter};
  if (amount > 0) {
    hooks.store_update(key, crdt::Increment{static_cast<std::uint64_t>(amount)});
  } else {
    hooks.store_update(key, crdt::Decrement{static_cast<std::uint64_t>(-amount)});
  }
  hooks.store_update(done_key, crdt::AddElement{marker});
}

void run_set_collect(NodeHooks& hooks, const TaskSpec& spec) {
  const std::string set_key =
      spec.str_param("key").value_or(std::string(kResultPrefix) + spec.name + "/nodes");
  const Bytes element = std::to_string(hooks.self());
  const kv::StoreKey key{set_key, crdt::CrdtType::AWSet};
  // Guarded add keeps re-execution byte-identical (no fresh dots).
  const auto view = hooks.store_read(key);
  if (const auto* elems = std::get_if<std::set<Bytes>>(&view)) {
    if (elems->count(element)) return;
  }
  hooks.store_update(key, crdt::AddElement{element});
}

}  // namespace

void register_builtin_kinds(TaskRuntime& rt) {
  rt.register_kind("sense_aggregate", run_sense_aggregate);
  rt.register_kind("counter_bump", run_counter_bump);
  rt.register_kind("set_collect", run_set_collect);
}

}  // namespace edgemesh::tasks
