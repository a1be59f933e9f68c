#include "edgemesh/sim.hpp"

#include <algorithm>

#include "edgemesh/codec.hpp"

namespace edgemesh::sim {

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

World::World(Scenario scenario, Options options)
    : scenario_(std::move(scenario)),
      options_(options),
      link_rng_(derive_seed(scenario_.seed, 0x11f0)) {
  auto problems = validate(scenario_);
  if (!problems.empty()) {
    std::string what = "invalid scenario:";
    for (const auto& p : problems) what += "\n  - " + p;
    throw std::invalid_argument(what);
  }
  build_nodes();
}

void World::build_nodes() {
  const std::uint32_t n = scenario_.nodes;
  neighbors_.assign(n, {});
  complete_topology_ = scenario_.topology.kind == Topology::Kind::Complete;
  if (!complete_topology_) {
    for (auto [a, b] : topology_edges(scenario_.topology, n, scenario_.seed)) {
      neighbors_[a].insert(b);
      neighbors_[b].insert(a);
    }
  }
  group_of_.assign(n, 0);
  alive_.assign(n, true);
  gen_.assign(n, 0);
  store_versions_seen_.assign(n, 0);
  store_hashes_.assign(n, fnv1a(kv::Store{}.canonical_dump()));
  nodes_.resize(n);
  for (NodeId id = 0; id < n; ++id) {
    NodeConfig cfg = scenario_.node;
    cfg.contacts = contacts_for(id);
    nodes_[id] = std::make_unique<Node>(id, std::move(cfg), derive_seed(scenario_.seed, id),
                                        &metrics_);
    Event ev;
    ev.kind = Event::Kind::Start;
    ev.node = id;
    ev.gen = 0;
    ev.at = scenario_.join.start_ms + id * scenario_.join.stagger_ms;
    schedule(std::move(ev));
  }
  for (const Fault& f : scenario_.faults) {
    Event ev;
    ev.kind = Event::Kind::Fault;
    ev.at = f.at_ms;
    ev.fault = f;
    schedule(std::move(ev));
  }
  for (const Action& a : scenario_.actions) {
    Event ev;
    ev.kind = Event::Kind::Action;
    ev.at = a.at_ms;
    ev.node = a.node;
    ev.action = a;
    schedule(std::move(ev));
  }
}

std::vector<NodeId> World::contacts_for(NodeId id) const {
  std::vector<NodeId> contacts;
  if (scenario_.join.policy == JoinPlan::Policy::None || id == 0) return contacts;
  if (scenario_.join.policy == JoinPlan::Policy::Node0 || complete_topology_) {
    contacts.push_back(0);
    // Fallbacks for churn in the seed node.
    for (NodeId other = 1; other < scenario_.nodes && contacts.size() < 6; ++other) {
      if (other != id) contacts.push_back(other);
    }
    return contacts;
  }
  // LowestNeighbor on a sparse physical topology: only adjacent nodes can
  // serve as contacts.
  for (NodeId nb : neighbors_[id]) contacts.push_back(nb);
  return contacts;
}

void World::schedule(Event ev) {
  ev.seq = next_event_seq_++;
  queue_.push(std::move(ev));
}

void World::run_until(TimeMs t) {
  while (!queue_.empty()) {
    const Event& top = queue_.top();
    if (top.at > t) break;
    Event ev = top;
    queue_.pop();
    now_ = std::max(now_, ev.at);
    process(ev);
  }
  now_ = std::max(now_, t);
}

void World::process(const Event& ev) {
  if (options_.check_invariants) trace(ev);
  switch (ev.kind) {
    case Event::Kind::Start: {
      if (!alive_[ev.node] || gen_[ev.node] != ev.gen) return;
      NodeOutputs out;
      nodes_[ev.node]->start(now_, out);
      dispatch_outputs(ev.node, out);
      note_store_activity(ev.node);
      check_node_invariants(ev.node);
      break;
    }
    case Event::Kind::Deliver: {
      if (!alive_[ev.node] || gen_[ev.node] != ev.gen) {
        metrics_.count("dropped_dead");
        return;
      }
      NodeOutputs out;
      nodes_[ev.node]->on_frame(now_, ev.from, ev.frame, out);
      dispatch_outputs(ev.node, out);
      note_store_activity(ev.node);
      check_node_invariants(ev.node);
      break;
    }
    case Event::Kind::Timer: {
      if (!alive_[ev.node] || gen_[ev.node] != ev.gen) return;
      NodeOutputs out;
      nodes_[ev.node]->on_timer(now_, ev.timer, out);
      dispatch_outputs(ev.node, out);
      note_store_activity(ev.node);
      check_node_invariants(ev.node);
      break;
    }
    case Event::Kind::Fault:
      apply_fault(ev.fault);
      break;
    case Event::Kind::Action:
      run_action(ev.action);
      break;
  }
}

void World::dispatch_outputs(NodeId from, NodeOutputs& out) {
  for (auto& [to, frame] : out.frames) {
    send_frame(from, to, std::move(frame));
  }
  for (const TimerReq& req : out.timers) {
    Event ev;
    ev.kind = Event::Kind::Timer;
    ev.node = from;
    ev.gen = gen_[from];
    ev.at = now_ + req.delay_ms;
    ev.timer = req.timer;
    schedule(std::move(ev));
  }
  out.frames.clear();
  out.timers.clear();
}

void World::send_frame(NodeId from, NodeId to, Bytes frame) {
  metrics_.link_bytes(from, to, frame.size());
  if (to >= nodes_.size() || !alive_[to]) {
    metrics_.count("dropped_dead");
    return;
  }
  if (!adjacent(from, to)) {
    metrics_.count("dropped_no_link");
    return;
  }
  if (partitioned_ && group_of_[from] != group_of_[to]) {
    metrics_.count("dropped_down");
    return;
  }
  const LinkModel& link = link_for(from, to);
  if (link.loss > 0.0 && link_rng_.chance(link.loss)) {
    metrics_.count("dropped_loss");
    return;
  }
  Event ev;
  ev.kind = Event::Kind::Deliver;
  ev.node = to;
  ev.from = from;
  ev.gen = gen_[to];
  ev.at = now_ + link_rng_.range(link.latency_min_ms, link.latency_max_ms);
  ev.frame = std::move(frame);
  schedule(std::move(ev));
}

bool World::adjacent(NodeId a, NodeId b) const {
  if (a == b) return false;
  if (complete_topology_) return true;
  return neighbors_[a].count(b) > 0;
}

const LinkModel& World::link_for(NodeId a, NodeId b) const {
  (void)a;
  (void)b;
  return scenario_.link;
}

void World::apply_fault(const Fault& f) {
  switch (f.kind) {
    case Fault::Kind::Partition: partition(f.groups); break;
    case Fault::Kind::Heal: heal(); break;
    case Fault::Kind::Kill: kill_node(f.node); break;
    case Fault::Kind::Restart: restart_node(f.node); break;
  }
}

void World::partition(const std::vector<std::vector<NodeId>>& groups) {
  std::vector<bool> seen(scenario_.nodes, false);
  for (const auto& group : groups) {
    for (NodeId id : group) {
      if (id >= scenario_.nodes || seen[id]) {
        throw std::invalid_argument("partition groups must be disjoint and in range");
      }
      seen[id] = true;
    }
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw std::invalid_argument("partition groups must cover all nodes");
  }
  for (std::uint32_t g = 0; g < groups.size(); ++g) {
    for (NodeId id : groups[g]) group_of_[id] = g;
  }
  partitioned_ = true;
  metrics_.count("faults.partition");
}

void World::heal() {
  if (!partitioned_) return;
  partitioned_ = false;
  std::fill(group_of_.begin(), group_of_.end(), 0);
  metrics_.count("faults.heal");
}

void World::kill_node(NodeId id) {
  if (id >= nodes_.size() || !alive_[id]) return;
  alive_[id] = false;
  ++gen_[id];  // queued deliveries and timers for this incarnation go stale
  nodes_[id].reset();
  metrics_.count("faults.kill");
  refresh_convergence();
}

void World::restart_node(NodeId id) {
  if (id >= nodes_.size()) return;
  if (alive_[id]) throw std::invalid_argument("restart_node: node is alive");
  NodeConfig cfg = scenario_.node;
  cfg.contacts = contacts_for(id);
  nodes_[id] = std::make_unique<Node>(id, std::move(cfg), derive_seed(scenario_.seed, id),
                                      &metrics_);
  alive_[id] = true;
  ++gen_[id];
  store_versions_seen_[id] = 0;
  store_hashes_[id] = fnv1a(kv::Store{}.canonical_dump());
  metrics_.count("faults.restart");
  NodeOutputs out;
  nodes_[id]->start(now_, out);
  dispatch_outputs(id, out);
  refresh_convergence();
}

std::size_t World::alive_count() const {
  return static_cast<std::size_t>(std::count(alive_.begin(), alive_.end(), true));
}

Node& World::node(NodeId id) {
  if (id >= nodes_.size() || !nodes_[id]) throw std::out_of_range("no such live node");
  return *nodes_[id];
}

const Node& World::node(NodeId id) const {
  if (id >= nodes_.size() || !nodes_[id]) throw std::out_of_range("no such live node");
  return *nodes_[id];
}

crdt::QueryResult World::update(NodeId id, const kv::StoreKey& key, const crdt::MutatorOp& op) {
  NodeOutputs out;
  auto result = node(id).update(now_, key, op, out);
  dispatch_outputs(id, out);
  note_store_activity(id);
  return result;
}

void World::add_task(NodeId id, const tasks::TaskSpec& spec) {
  NodeOutputs out;
  node(id).add_task(now_, spec, out);
  dispatch_outputs(id, out);
  note_store_activity(id);
}

void World::remove_task(NodeId id, const std::string& name) {
  NodeOutputs out;
  node(id).remove_task(now_, name, out);
  dispatch_outputs(id, out);
  note_store_activity(id);
}

tasks::ExecutionResult World::start_task(NodeId id, const std::string& name) {
  NodeOutputs out;
  auto result = node(id).start_task(now_, name, out);
  dispatch_outputs(id, out);
  note_store_activity(id);
  return result;
}

std::vector<tasks::ExecutionResult> World::start_all_tasks(NodeId id) {
  NodeOutputs out;
  auto results = node(id).start_all_tasks(now_, out);
  dispatch_outputs(id, out);
  note_store_activity(id);
  return results;
}

wire::MessageId World::broadcast(NodeId id, const Bytes& payload) {
  NodeOutputs out;
  auto mid = node(id).broadcast_payload(now_, payload, out);
  dispatch_outputs(id, out);
  note_store_activity(id);
  return mid;
}

void World::run_action(const Action& a) {
  if (!alive(a.node)) return;
  switch (a.kind) {
    case Action::Kind::AddTask: add_task(a.node, a.task); break;
    case Action::Kind::RemoveTask: remove_task(a.node, a.task_name); break;
    case Action::Kind::StartTask: start_task(a.node, a.task_name); break;
    case Action::Kind::StartAllTasks: start_all_tasks(a.node); break;
    case Action::Kind::FindAndStartTask: {
      NodeOutputs out;
      node(a.node).find_and_start_task(now_, out);
      dispatch_outputs(a.node, out);
      note_store_activity(a.node);
      break;
    }
    case Action::Kind::Declare: node(a.node).declare(a.key); break;
    case Action::Kind::Update: update(a.node, a.key, a.op); break;
    case Action::Kind::Broadcast: broadcast(a.node, a.payload); break;
  }
}

bool World::stores_converged() const {
  const Bytes* ref = nullptr;
  Bytes first;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (!alive_[id]) continue;
    Bytes dump = nodes_[id]->store().canonical_dump();
    if (!ref) {
      first = std::move(dump);
      ref = &first;
    } else if (dump != *ref) {
      return false;
    }
  }
  return true;
}

std::vector<std::pair<NodeId, NodeId>> World::overlay_edges() const {
  std::set<std::pair<NodeId, NodeId>> edges;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (!alive_[id]) continue;
    for (NodeId peer : nodes_[id]->views().active()) {
      if (peer < alive_.size() && alive_[peer]) {
        edges.emplace(std::min(id, peer), std::max(id, peer));
      }
    }
  }
  return {edges.begin(), edges.end()};
}

namespace {

bool connected(std::uint32_t n, const std::vector<bool>& alive,
               const std::vector<std::pair<NodeId, NodeId>>& edges) {
  std::vector<std::vector<NodeId>> adj(n);
  for (auto [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  NodeId start = n;
  std::size_t live = 0;
  for (NodeId id = 0; id < n; ++id) {
    if (alive[id]) {
      ++live;
      if (start == n) start = id;
    }
  }
  if (live <= 1) return true;
  std::vector<bool> seen(n, false);
  std::vector<NodeId> stack{start};
  seen[start] = true;
  std::size_t reached = 1;
  while (!stack.empty()) {
    const NodeId cur = stack.back();
    stack.pop_back();
    for (NodeId nb : adj[cur]) {
      if (!seen[nb] && alive[nb]) {
        seen[nb] = true;
        ++reached;
        stack.push_back(nb);
      }
    }
  }
  return reached == live;
}

}  // namespace

bool World::overlay_connected() const {
  return connected(scenario_.nodes, alive_, overlay_edges());
}

std::vector<std::pair<NodeId, NodeId>> World::eager_edges() const {
  std::set<std::pair<NodeId, NodeId>> edges;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (!alive_[id]) continue;
    for (NodeId peer : nodes_[id]->bcast().eager()) {
      if (peer < alive_.size() && alive_[peer]) {
        edges.emplace(std::min(id, peer), std::max(id, peer));
      }
    }
  }
  return {edges.begin(), edges.end()};
}

bool World::eager_graph_connected() const {
  return connected(scenario_.nodes, alive_, eager_edges());
}

std::vector<World::CheckResult> World::run_checks() const {
  std::vector<CheckResult> out;
  for (const Check& check : scenario_.checks) {
    CheckResult r;
    switch (check.kind) {
      case Check::Kind::StoresConverged: {
        r.name = "stores_converged";
        r.pass = stores_converged();
        if (!r.pass) r.detail = "live stores differ at horizon";
        break;
      }
      case Check::Kind::OverlayConnected: {
        r.name = "overlay_connected";
        r.pass = overlay_connected();
        if (!r.pass) r.detail = "active-view graph is not connected";
        break;
      }
      case Check::Kind::CounterEquals: {
        r.name = "counter_equals." + check.key;
        std::int64_t got = 0;
        bool all_equal = true;
        bool first = true;
        for (NodeId id = 0; id < nodes_.size(); ++id) {
          if (!alive_[id]) continue;
          const auto v = nodes_[id]->read(check.key);
          const auto* n = std::get_if<std::int64_t>(&v);
          const std::int64_t value = n ? *n : 0;
          if (first) {
            got = value;
            first = false;
          } else if (value != got) {
            all_equal = false;
          }
        }
        r.pass = all_equal && got == check.expect;
        if (!r.pass) {
          r.detail = "expected " + std::to_string(check.expect) + ", got " + std::to_string(got) +
                     (all_equal ? "" : " (divergent)");
        }
        break;
      }
      case Check::Kind::SetSizeAtLeast: {
        r.name = "set_size_at_least." + check.key;
        r.pass = true;
        for (NodeId id = 0; id < nodes_.size(); ++id) {
          if (!alive_[id]) continue;
          const auto v = nodes_[id]->read(check.key);
          const auto* elems = std::get_if<std::set<Bytes>>(&v);
          const std::int64_t size = elems ? static_cast<std::int64_t>(elems->size()) : 0;
          if (size < check.expect) {
            r.pass = false;
            r.detail = "node " + std::to_string(id) + " sees " + std::to_string(size);
            break;
          }
        }
        break;
      }
      case Check::Kind::TaskOnAllTargets: {
        r.name = "task_on_all_targets." + check.task;
        const Bytes log_key = std::string(tasks::kExecLogPrefix) + check.task;
        // Read the converged execution log from any live node.
        std::set<NodeId> executed;
        std::optional<std::set<NodeId>> targets;
        for (NodeId id = 0; id < nodes_.size(); ++id) {
          if (!alive_[id]) continue;
          const auto v = nodes_[id]->read(log_key);
          if (const auto* elems = std::get_if<std::set<Bytes>>(&v)) {
            for (const Bytes& e : *elems) {
              Decoder d(e);
              executed.insert(d.u64());
            }
          }
          const auto visible = nodes_[id]->task_runtime().visible_tasks();
          auto it = visible.find(check.task);
          if (it != visible.end()) targets = it->second.spec.targets;
          break;
        }
        r.pass = true;
        if (targets) {
          for (NodeId t : *targets) {
            if (!executed.count(t)) {
              r.pass = false;
              r.detail = "target " + std::to_string(t) + " never executed";
            }
          }
          for (NodeId e : executed) {
            if (!targets->count(e)) {
              r.pass = false;
              r.detail = "non-target " + std::to_string(e) + " executed";
            }
          }
        } else if (executed.empty()) {
          r.pass = false;
          r.detail = "no execution records";
        }
        break;
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

void World::note_store_activity(NodeId id) {
  if (!alive_[id] || !nodes_[id]) return;
  const std::uint64_t version = nodes_[id]->store_version();
  if (version == store_versions_seen_[id]) return;
  store_versions_seen_[id] = version;
  store_hashes_[id] = fnv1a(nodes_[id]->store().canonical_dump());
  refresh_convergence();
}

void World::refresh_convergence() {
  std::uint64_t first = 0;
  bool have = false;
  bool all_equal = true;
  bool any_data = false;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (!alive_[id]) continue;
    if (!have) {
      first = store_hashes_[id];
      have = true;
    } else if (store_hashes_[id] != first) {
      all_equal = false;
      break;
    }
    if (nodes_[id] && !nodes_[id]->store().empty()) any_data = true;
  }
  if (have && all_equal && any_data) {
    metrics_.set_value("store.converged_at_ms", now_);
  }
}

void World::check_node_invariants(NodeId id) {
  if (!options_.check_invariants || !alive_[id] || !nodes_[id]) return;
  if (auto violation = nodes_[id]->invariant_violation()) {
    throw SimAssertionError(
        "invariant violated at node " + std::to_string(id) + " (t=" + std::to_string(now_) +
            "ms): " + *violation,
        {trace_.begin(), trace_.end()});
  }
}

void World::trace(const Event& ev) {
  std::string line = "t=" + std::to_string(ev.at) + "ms ";
  switch (ev.kind) {
    case Event::Kind::Start: line += "start node " + std::to_string(ev.node); break;
    case Event::Kind::Deliver:
      line += "deliver " + std::to_string(ev.from) + ">" + std::to_string(ev.node);
      if (ev.frame.size() >= 2) {
        line += " " + std::string(wire::msg_type_name(static_cast<wire::MsgType>(
                    static_cast<unsigned char>(ev.frame[1]))));
      }
      line += " (" + std::to_string(ev.frame.size()) + "B)";
      break;
    case Event::Kind::Timer:
      line += "timer node " + std::to_string(ev.node) + " kind " +
              std::to_string(static_cast<int>(ev.timer.kind));
      break;
    case Event::Kind::Fault: line += "fault kind " + std::to_string(static_cast<int>(ev.fault.kind)); break;
    case Event::Kind::Action:
      line += "action node " + std::to_string(ev.node) + " kind " +
              std::to_string(static_cast<int>(ev.action.kind));
      break;
  }
  trace_.push_back(std::move(line));
  while (trace_.size() > 64) trace_.pop_front();
}

}  // namespace edgemesh::sim
