#include "edgemesh/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "edgemesh/rng.hpp"

namespace edgemesh::sim {

namespace {
using nlohmann::json;
}

std::vector<std::pair<NodeId, NodeId>> topology_edges(const Topology& t, std::uint32_t nodes,
                                                      std::uint64_t seed) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  auto add = [&](NodeId a, NodeId b) {
    if (a == b || a >= nodes || b >= nodes) return;
    edges.emplace_back(std::min(a, b), std::max(a, b));
  };
  switch (t.kind) {
    case Topology::Kind::Complete:
      for (NodeId a = 0; a < nodes; ++a) {
        for (NodeId b = a + 1; b < nodes; ++b) add(a, b);
      }
      break;
    case Topology::Kind::Line:
      for (NodeId a = 0; a + 1 < nodes; ++a) add(a, a + 1);
      break;
    case Topology::Kind::Ring:
      for (NodeId a = 0; a + 1 < nodes; ++a) add(a, a + 1);
      if (nodes > 2) add(nodes - 1, 0);
      break;
    case Topology::Kind::Grid: {
      std::uint32_t cols = t.cols;
      if (cols == 0) {
        cols = 1;
        while (cols * cols < nodes) ++cols;
      }
      for (NodeId a = 0; a < nodes; ++a) {
        if ((a + 1) % cols != 0) add(a, a + 1);
        add(a, a + cols);
      }
      break;
    }
    case Topology::Kind::Random: {
      // Seeded G(n, p) plus a line backbone so the graph stays connected.
      Rng rng(derive_seed(seed, 0x70b0));
      for (NodeId a = 0; a + 1 < nodes; ++a) add(a, a + 1);
      for (NodeId a = 0; a < nodes; ++a) {
        for (NodeId b = a + 2; b < nodes; ++b) {
          if (rng.chance(t.p)) add(a, b);
        }
      }
      break;
    }
    case Topology::Kind::Edges:
      for (auto [a, b] : t.edges) add(a, b);
      break;
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<std::string> validate(const Scenario& scn) {
  std::vector<std::string> problems;
  auto bad = [&](const std::string& field, const std::string& why) {
    problems.push_back(field + ": " + why);
  };

  if (scn.nodes == 0) bad("nodes", "must be >= 1");
  if (scn.horizon_ms == 0) bad("horizon_ms", "must be > 0");
  if (scn.link.loss < 0.0 || scn.link.loss > 1.0) bad("link.loss", "must be in [0, 1]");
  if (scn.link.latency_min_ms > scn.link.latency_max_ms) {
    bad("link.latency", "min exceeds max");
  }
  if (scn.topology.kind == Topology::Kind::Edges) {
    for (auto [a, b] : scn.topology.edges) {
      if (a >= scn.nodes || b >= scn.nodes) {
        bad("topology.edges", "edge (" + std::to_string(a) + "," + std::to_string(b) +
                                  ") references a node >= nodes");
      }
      if (a == b) bad("topology.edges", "self-loop at node " + std::to_string(a));
    }
  }
  if (scn.topology.kind == Topology::Kind::Random &&
      (scn.topology.p < 0.0 || scn.topology.p > 1.0)) {
    bad("topology.p", "must be in [0, 1]");
  }

  const auto& m = scn.node.membership;
  if (m.a_max == 0) bad("membership.a_max", "must be >= 1");
  if (m.prwl > m.arwl) bad("membership.prwl", "must be <= arwl");
  if (m.shuffle_ka > m.a_max) bad("membership.shuffle_ka", "exceeds a_max");
  if (m.shuffle_kp > m.p_max) bad("membership.shuffle_kp", "exceeds p_max");
  if (scn.node.scheduler.cycle_ms == 0) bad("tasks.cycle_ms", "must be > 0");
  if (scn.node.aggregation.window == 0) bad("aggregation.window", "must be >= 1");
  if (scn.node.replication.buffer_capacity == 0) bad("replication.buffer_capacity", "must be >= 1");

  std::vector<bool> killed(scn.nodes, false);
  std::vector<Fault> faults = scn.faults;
  std::stable_sort(faults.begin(), faults.end(),
                   [](const Fault& a, const Fault& b) { return a.at_ms < b.at_ms; });
  for (std::size_t i = 0; i < faults.size(); ++i) {
    const Fault& f = faults[i];
    const std::string field = "faults[" + std::to_string(i) + "]";
    if (f.at_ms > scn.horizon_ms) bad(field + ".at_ms", "after horizon");
    switch (f.kind) {
      case Fault::Kind::Partition: {
        std::vector<bool> seen(scn.nodes, false);
        for (const auto& group : f.groups) {
          for (NodeId id : group) {
            if (id >= scn.nodes) {
              bad(field + ".groups", "node " + std::to_string(id) + " out of range");
            } else if (seen[id]) {
              bad(field + ".groups", "node " + std::to_string(id) + " in two groups");
            } else {
              seen[id] = true;
            }
          }
        }
        for (NodeId id = 0; id < scn.nodes; ++id) {
          if (!seen[id]) {
            bad(field + ".groups", "node " + std::to_string(id) + " missing from groups");
            break;
          }
        }
        break;
      }
      case Fault::Kind::Heal:
        break;
      case Fault::Kind::Kill:
        if (f.node >= scn.nodes) {
          bad(field + ".node", "out of range");
        } else {
          killed[f.node] = true;
        }
        break;
      case Fault::Kind::Restart:
        if (f.node >= scn.nodes) {
          bad(field + ".node", "out of range");
        } else if (!killed[f.node]) {
          bad(field + ".node", "restart without a preceding kill");
        } else {
          killed[f.node] = false;
        }
        break;
    }
  }

  for (std::size_t i = 0; i < scn.actions.size(); ++i) {
    const Action& a = scn.actions[i];
    const std::string field = "actions[" + std::to_string(i) + "]";
    if (a.node >= scn.nodes) bad(field + ".node", "out of range");
    if (a.at_ms > scn.horizon_ms) bad(field + ".at_ms", "after horizon");
    if (a.kind == Action::Kind::AddTask) {
      if (a.task.name.empty()) bad(field + ".task.name", "must be non-empty");
      if (a.task.kind.empty()) bad(field + ".task.kind", "must be non-empty");
      if (a.task.targets) {
        for (NodeId t : *a.task.targets) {
          if (t >= scn.nodes) bad(field + ".task.targets", "node " + std::to_string(t) + " out of range");
        }
      }
    }
    if ((a.kind == Action::Kind::Update || a.kind == Action::Kind::Declare) && a.key.name.empty()) {
      bad(field + ".key", "must be non-empty");
    }
    if (a.kind == Action::Kind::Broadcast && a.payload.empty()) {
      bad(field + ".payload", "must be non-empty");
    }
  }
  return problems;
}

// ---------------------------------------------------------------------------
// JSON parsing

namespace {

struct Parser {
  std::vector<std::string> errors;

  void fail(const std::string& field, const std::string& why) {
    errors.push_back(field + ": " + why);
  }

  std::optional<crdt::CrdtType> type_field(const json& j, const std::string& field) {
    if (!j.contains("type") || !j["type"].is_string()) {
      fail(field + ".type", "expected a CRDT type name");
      return std::nullopt;
    }
    auto t = crdt::type_from_name(j["type"].get<std::string>());
    if (!t) fail(field + ".type", "unknown CRDT type '" + j["type"].get<std::string>() + "'");
    return t;
  }

  std::optional<crdt::MutatorOp> op_field(const json& j, const std::string& field) {
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
      fail(field, "expected an op object with a 'kind'");
      return std::nullopt;
    }
    const std::string kind = j["kind"].get<std::string>();
    if (kind == "inc") return crdt::Increment{j.value("amount", std::uint64_t{1})};
    if (kind == "dec") return crdt::Decrement{j.value("amount", std::uint64_t{1})};
    if (kind == "add") return crdt::AddElement{j.value("element", std::string{})};
    if (kind == "remove") return crdt::RemoveElement{j.value("element", std::string{})};
    if (kind == "set") return crdt::SetValue{j.value("value", std::string{}), 0};
    fail(field + ".kind", "unknown op kind '" + kind + "'");
    return std::nullopt;
  }

  std::optional<tasks::TaskSpec> task_field(const json& j, const std::string& field) {
    tasks::TaskSpec spec;
    if (!j.is_object()) {
      fail(field, "expected a task object");
      return std::nullopt;
    }
    spec.name = j.value("name", std::string{});
    spec.kind = j.value("kind", std::string{});
    if (j.contains("targets") && !j["targets"].is_string()) {
      if (!j["targets"].is_array()) {
        fail(field + ".targets", "expected 'all' or an array of node ids");
      } else {
        std::set<NodeId> targets;
        for (const auto& t : j["targets"]) targets.insert(t.get<NodeId>());
        spec.targets = std::move(targets);
      }
    }
    if (j.contains("params")) {
      for (const auto& [key, value] : j["params"].items()) {
        if (value.is_number_integer()) {
          spec.params[key] = value.get<std::int64_t>();
        } else if (value.is_number_float()) {
          spec.params[key] = value.get<double>();
        } else if (value.is_boolean()) {
          spec.params[key] = value.get<bool>();
        } else if (value.is_string()) {
          spec.params[key] = value.get<std::string>();
        } else {
          fail(field + ".params." + key, "unsupported value type");
        }
      }
    }
    return spec;
  }
};

}  // namespace

ParseResult parse_scenario(const std::string& json_text) {
  Parser p;
  json j = json::parse(json_text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) {
    return {std::nullopt, {"file: not valid JSON"}};
  }
  Scenario scn;
  scn.name = j.value("name", std::string{"scenario"});
  scn.nodes = j.value("nodes", std::uint32_t{1});
  scn.seed = j.value("seed", std::uint64_t{1});
  scn.horizon_ms = j.value("horizon_ms", std::uint64_t{10'000});

  if (j.contains("topology")) {
    const auto& t = j["topology"];
    const std::string kind = t.value("kind", std::string{"complete"});
    if (kind == "complete") {
      scn.topology.kind = Topology::Kind::Complete;
    } else if (kind == "line") {
      scn.topology.kind = Topology::Kind::Line;
    } else if (kind == "ring") {
      scn.topology.kind = Topology::Kind::Ring;
    } else if (kind == "grid") {
      scn.topology.kind = Topology::Kind::Grid;
      scn.topology.cols = t.value("cols", std::uint32_t{0});
    } else if (kind == "random") {
      scn.topology.kind = Topology::Kind::Random;
      scn.topology.p = t.value("p", 0.5);
    } else if (kind == "edges") {
      scn.topology.kind = Topology::Kind::Edges;
      for (const auto& e : t.value("edges", json::array())) {
        if (e.is_array() && e.size() == 2) {
          scn.topology.edges.emplace_back(e[0].get<NodeId>(), e[1].get<NodeId>());
        } else {
          p.fail("topology.edges", "each edge must be a [a, b] pair");
        }
      }
    } else {
      p.fail("topology.kind", "unknown topology '" + kind + "'");
    }
  }

  if (j.contains("link")) {
    const auto& l = j["link"];
    scn.link.loss = l.value("loss", 0.0);
    scn.link.latency_min_ms = l.value("latency_min_ms", std::uint64_t{1});
    scn.link.latency_max_ms = l.value("latency_max_ms", std::uint64_t{10});
  }

  if (j.contains("join")) {
    const auto& jn = j["join"];
    const std::string policy = jn.value("policy", std::string{"node0"});
    if (policy == "node0") {
      scn.join.policy = JoinPlan::Policy::Node0;
    } else if (policy == "lowest_neighbor") {
      scn.join.policy = JoinPlan::Policy::LowestNeighbor;
    } else if (policy == "none") {
      scn.join.policy = JoinPlan::Policy::None;
    } else {
      p.fail("join.policy", "unknown policy '" + policy + "'");
    }
    scn.join.start_ms = jn.value("start_ms", std::uint64_t{100});
    scn.join.stagger_ms = jn.value("stagger_ms", std::uint64_t{100});
  }

  if (j.contains("membership")) {
    const auto& m = j["membership"];
    auto& cfg = scn.node.membership;
    cfg.a_max = m.value("a_max", cfg.a_max);
    cfg.p_max = m.value("p_max", cfg.p_max);
    cfg.arwl = m.value("arwl", cfg.arwl);
    cfg.prwl = m.value("prwl", cfg.prwl);
    cfg.shuffle_interval_ms = m.value("shuffle_interval_ms", cfg.shuffle_interval_ms);
    cfg.shuffle_ka = m.value("shuffle_ka", cfg.shuffle_ka);
    cfg.shuffle_kp = m.value("shuffle_kp", cfg.shuffle_kp);
    cfg.heartbeat_interval_ms = m.value("heartbeat_interval_ms", cfg.heartbeat_interval_ms);
    cfg.failure_after_ms = m.value("failure_after_ms", cfg.failure_after_ms);
  }

  if (j.contains("broadcast")) {
    const auto& b = j["broadcast"];
    auto& cfg = scn.node.broadcast;
    cfg.graft_timeout_ms = b.value("graft_timeout_ms", cfg.graft_timeout_ms);
    cfg.ihave_batch_ms = b.value("ihave_batch_ms", cfg.ihave_batch_ms);
    cfg.cache_capacity = b.value("cache_capacity", cfg.cache_capacity);
  }

  if (j.contains("replication")) {
    const auto& r = j["replication"];
    auto& cfg = scn.node.replication;
    const std::string mode = r.value("mode", std::string{"delta"});
    if (mode == "delta") {
      cfg.mode = repl::Config::Mode::Delta;
    } else if (mode == "full_state") {
      cfg.mode = repl::Config::Mode::FullState;
    } else {
      p.fail("replication.mode", "expected 'delta' or 'full_state'");
    }
    cfg.sync_interval_ms = r.value("sync_interval_ms", cfg.sync_interval_ms);
    cfg.buffer_capacity = r.value("buffer_capacity", cfg.buffer_capacity);
  }

  if (j.contains("tasks")) {
    const auto& t = j["tasks"];
    auto& cfg = scn.node.scheduler;
    cfg.cycle_ms = t.value("cycle_ms", cfg.cycle_ms);
    const std::string sel = t.value("selection", std::string{"least_load"});
    if (sel == "least_load") {
      cfg.selection = tasks::SchedulerConfig::Selection::LeastLoad;
    } else if (sel == "random") {
      cfg.selection = tasks::SchedulerConfig::Selection::Random;
    } else {
      p.fail("tasks.selection", "expected 'least_load' or 'random'");
    }
  }

  if (j.contains("aggregation")) {
    const auto& a = j["aggregation"];
    scn.node.aggregation.window = a.value("window", scn.node.aggregation.window);
    scn.node.aggregation.raw_reference = a.value("raw_reference", false);
  }

  if (j.contains("sensors")) {
    const auto& s = j["sensors"];
    auto& cfg = scn.node.sensors;
    cfg.temp_min = s.value("temp_min", cfg.temp_min);
    cfg.temp_max = s.value("temp_max", cfg.temp_max);
    cfg.temp_step = s.value("temp_step", cfg.temp_step);
    cfg.pressure_min = s.value("pressure_min", cfg.pressure_min);
    cfg.pressure_max = s.value("pressure_max", cfg.pressure_max);
    cfg.pressure_step = s.value("pressure_step", cfg.pressure_step);
  }

  std::size_t fi = 0;
  for (const auto& f : j.value("faults", json::array())) {
    const std::string field = "faults[" + std::to_string(fi++) + "]";
    Fault fault;
    fault.at_ms = f.value("at_ms", std::uint64_t{0});
    const std::string kind = f.value("kind", std::string{});
    if (kind == "partition") {
      fault.kind = Fault::Kind::Partition;
      for (const auto& g : f.value("groups", json::array())) {
        std::vector<NodeId> group;
        for (const auto& id : g) group.push_back(id.get<NodeId>());
        fault.groups.push_back(std::move(group));
      }
    } else if (kind == "heal") {
      fault.kind = Fault::Kind::Heal;
    } else if (kind == "kill") {
      fault.kind = Fault::Kind::Kill;
      fault.node = f.value("node", NodeId{0});
    } else if (kind == "restart") {
      fault.kind = Fault::Kind::Restart;
      fault.node = f.value("node", NodeId{0});
    } else {
      p.fail(field + ".kind", "unknown fault kind '" + kind + "'");
      continue;
    }
    scn.faults.push_back(std::move(fault));
  }

  std::size_t ai = 0;
  for (const auto& a : j.value("actions", json::array())) {
    const std::string field = "actions[" + std::to_string(ai++) + "]";
    Action action;
    action.at_ms = a.value("at_ms", std::uint64_t{0});
    action.node = a.value("node", NodeId{0});
    const std::string verb = a.value("do", std::string{});
    if (verb == "add_task") {
      action.kind = Action::Kind::AddTask;
      if (auto task = p.task_field(a.value("task", json::object()), field + ".task")) {
        action.task = std::move(*task);
      }
    } else if (verb == "remove_task") {
      action.kind = Action::Kind::RemoveTask;
      action.task_name = a.value("name", std::string{});
    } else if (verb == "start_task") {
      action.kind = Action::Kind::StartTask;
      action.task_name = a.value("name", std::string{});
    } else if (verb == "start_all_tasks") {
      action.kind = Action::Kind::StartAllTasks;
    } else if (verb == "find_and_start_task") {
      action.kind = Action::Kind::FindAndStartTask;
    } else if (verb == "declare") {
      action.kind = Action::Kind::Declare;
      action.key.name = a.value("key", std::string{});
      if (auto t = p.type_field(a, field)) action.key.type = *t;
    } else if (verb == "update") {
      action.kind = Action::Kind::Update;
      action.key.name = a.value("key", std::string{});
      if (auto t = p.type_field(a, field)) action.key.type = *t;
      if (auto op = p.op_field(a.value("op", json::object()), field + ".op")) {
        action.op = std::move(*op);
      }
    } else if (verb == "broadcast") {
      action.kind = Action::Kind::Broadcast;
      action.payload = a.value("payload", std::string{});
    } else {
      p.fail(field + ".do", "unknown action '" + verb + "'");
      continue;
    }
    scn.actions.push_back(std::move(action));
  }

  std::size_t ci = 0;
  for (const auto& c : j.value("checks", json::array())) {
    const std::string field = "checks[" + std::to_string(ci++) + "]";
    Check check;
    const std::string kind = c.value("kind", std::string{});
    if (kind == "stores_converged") {
      check.kind = Check::Kind::StoresConverged;
    } else if (kind == "overlay_connected") {
      check.kind = Check::Kind::OverlayConnected;
    } else if (kind == "counter_equals") {
      check.kind = Check::Kind::CounterEquals;
      check.key = c.value("key", std::string{});
      check.expect = c.value("expect", std::int64_t{0});
    } else if (kind == "set_size_at_least") {
      check.kind = Check::Kind::SetSizeAtLeast;
      check.key = c.value("key", std::string{});
      check.expect = c.value("expect", std::int64_t{0});
    } else if (kind == "task_on_all_targets") {
      check.kind = Check::Kind::TaskOnAllTargets;
      check.task = c.value("task", std::string{});
    } else {
      p.fail(field + ".kind", "unknown check kind '" + kind + "'");
      continue;
    }
    scn.checks.push_back(std::move(check));
  }

  if (!p.errors.empty()) return {std::nullopt, std::move(p.errors)};
  auto problems = validate(scn);
  if (!problems.empty()) return {std::nullopt, std::move(problems)};
  return {std::move(scn), {}};
}

ParseResult load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    return {std::nullopt, {"file: cannot open '" + path + "'"}};
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace edgemesh::sim
