// edgemesh CLI: run scenarios to their horizon, dump and inspect stores,
// and drive the task API against a simulated cluster.
//
// Exit codes: 0 success, 1 run/check/assertion failure or unknown key,
// 2 scenario validation failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "edgemesh/metrics.hpp"
#include "edgemesh/sim.hpp"

namespace fs = std::filesystem;
using namespace edgemesh;

namespace {

struct RunFlags {
  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> horizon;
  std::string out_dir = "out";
  bool assert_hooks = false;
  std::string metrics_mode = "both";
};

void add_run_flags(CLI::App* cmd, RunFlags& flags) {
  cmd->add_option("--scenario", flags.scenario_path, "Scenario JSON file")->required();
  cmd->add_option("--seed", flags.seed, "Override the scenario seed");
  cmd->add_option("--horizon", flags.horizon, "Override the horizon (simulated ms)");
  cmd->add_option("--out", flags.out_dir, "Output directory (default: out)");
  cmd->add_flag("--assert", flags.assert_hooks, "Run invariant assertion hooks on every event");
  cmd->add_option("--metrics", flags.metrics_mode, "Metrics format: csv, jsonl or both")
      ->check(CLI::IsMember({"csv", "jsonl", "both"}));
}

int load_or_fail(const RunFlags& flags, sim::Scenario& out) {
  auto result = sim::load_scenario_file(flags.scenario_path);
  if (!result.scenario) {
    std::cerr << "scenario validation failed:\n";
    for (const auto& e : result.errors) std::cerr << "  - " << e << "\n";
    return 2;
  }
  out = std::move(*result.scenario);
  if (flags.seed) out.seed = *flags.seed;
  if (flags.horizon) out.horizon_ms = *flags.horizon;
  return 0;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  f << content;
}

void write_outputs(const RunFlags& flags, sim::World& world) {
  const fs::path out(flags.out_dir);
  fs::create_directories(out / "store");
  if (flags.metrics_mode == "csv" || flags.metrics_mode == "both") {
    write_file(out / "metrics.csv", world.metrics().to_csv());
  }
  if (flags.metrics_mode == "jsonl" || flags.metrics_mode == "both") {
    write_file(out / "metrics.jsonl", world.metrics().to_jsonl());
  }
  std::string stores;
  for (NodeId id = 0; id < world.node_count(); ++id) {
    if (!world.alive(id)) continue;
    write_file(out / "store" / ("node_" + std::to_string(id) + ".dump"), world.store_dump(id));
    for (const auto& line : store_json_lines(world.node(id).store())) {
      stores += "{\"node\":" + std::to_string(id) + "," + line.substr(1) + "\n";
    }
  }
  write_file(out / "stores.jsonl", stores);
}

int finish_run(const RunFlags& flags, sim::World& world) {
  write_outputs(flags, world);
  bool all_pass = true;
  for (const auto& check : world.run_checks()) {
    std::cout << (check.pass ? "[PASS] " : "[FAIL] ") << check.name;
    if (!check.detail.empty()) std::cout << " (" << check.detail << ")";
    std::cout << "\n";
    all_pass &= check.pass;
  }
  std::cout << "outputs written to " << flags.out_dir << "\n";
  return all_pass ? 0 : 1;
}

int run_world(const RunFlags& flags, sim::Scenario scn,
              const std::function<void(sim::World&)>& mid_run = {}) {
  try {
    sim::World world(std::move(scn), sim::WorldOptions{flags.assert_hooks});
    if (mid_run) mid_run(world);
    world.run_to_horizon();
    return finish_run(flags, world);
  } catch (const sim::SimAssertionError& e) {
    std::cerr << "assertion failure: " << e.what() << "\n";
    std::cerr << "event trace tail:\n";
    for (const auto& line : e.trace_tail) std::cerr << "  " << line << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
}

int cmd_run(const RunFlags& flags) {
  sim::Scenario scn;
  if (int rc = load_or_fail(flags, scn)) return rc;
  return run_world(flags, std::move(scn));
}

int cmd_inspect(const std::string& dump_path, const std::optional<std::string>& key) {
  std::ifstream in(dump_path, std::ios::binary);
  if (!in) {
    std::cerr << "cannot open dump '" << dump_path << "'\n";
    return 1;
  }
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto store = kv::Store::from_dump(bytes);
  if (!store) {
    std::cerr << "'" << dump_path << "' is not a store dump\n";
    return 1;
  }
  if (key && !store->get(*key)) {
    std::cerr << "unknown key '" << *key << "'\n";
    return 1;
  }
  for (const auto& line : store_json_lines(*store)) {
    if (key && line.find("\"key\":\"" + *key + "\"") == std::string::npos) continue;
    std::cout << line << "\n";
  }
  return 0;
}

struct TaskFlags {
  RunFlags run;
  NodeId node = 0;
  TimeMs at_ms = 2'000;
  std::string name;
  std::string kind;
  std::string targets = "all";
  std::vector<std::string> params;
};

std::optional<tasks::TaskSpec> parse_task_spec(const TaskFlags& t, std::uint32_t nodes) {
  tasks::TaskSpec spec;
  spec.name = t.name;
  spec.kind = t.kind;
  if (t.targets != "all") {
    std::set<NodeId> ids;
    std::stringstream ss(t.targets);
    std::string part;
    while (std::getline(ss, part, ',')) {
      try {
        const NodeId id = std::stoull(part);
        if (id >= nodes) {
          std::cerr << "target node " << id << " out of range\n";
          return std::nullopt;
        }
        ids.insert(id);
      } catch (...) {
        std::cerr << "bad target list '" << t.targets << "'\n";
        return std::nullopt;
      }
    }
    spec.targets = std::move(ids);
  }
  for (const auto& kv_pair : t.params) {
    const auto eq = kv_pair.find('=');
    if (eq == std::string::npos) {
      std::cerr << "bad --param '" << kv_pair << "', expected key=value\n";
      return std::nullopt;
    }
    const std::string key = kv_pair.substr(0, eq);
    const std::string value = kv_pair.substr(eq + 1);
    try {
      if (value == "true" || value == "false") {
        spec.params[key] = value == "true";
      } else if (value.find('.') != std::string::npos) {
        spec.params[key] = std::stod(value);
      } else {
        spec.params[key] = static_cast<std::int64_t>(std::stoll(value));
      }
    } catch (...) {
      spec.params[key] = value;  // plain string parameter
    }
  }
  return spec;
}

int cmd_task(const std::string& verb, const TaskFlags& t) {
  sim::Scenario scn;
  if (int rc = load_or_fail(t.run, scn)) return rc;
  if (t.node >= scn.nodes) {
    std::cerr << "node " << t.node << " out of range (scenario has " << scn.nodes << ")\n";
    return 2;
  }
  sim::Action action;
  action.at_ms = std::min(t.at_ms, scn.horizon_ms);
  action.node = t.node;
  if (verb == "add") {
    auto spec = parse_task_spec(t, scn.nodes);
    if (!spec) return 2;
    action.kind = sim::Action::Kind::AddTask;
    action.task = std::move(*spec);
  } else if (verb == "remove") {
    action.kind = sim::Action::Kind::RemoveTask;
    action.task_name = t.name;
  } else if (verb == "start") {
    action.kind = sim::Action::Kind::StartTask;
    action.task_name = t.name;
  } else {
    action.kind = sim::Action::Kind::StartAllTasks;
  }
  scn.actions.push_back(std::move(action));
  return run_world(t.run, std::move(scn));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"replicated storage, tasks and gossip on a simulated edge cluster"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "Run a scenario to its horizon and write outputs");
  add_run_flags(run, run_flags);

  std::string dump_path;
  std::optional<std::string> inspect_key;
  auto* inspect = app.add_subcommand("inspect", "Decode a store dump as JSON lines");
  inspect->add_option("dump", dump_path, "Path to a store/node_<i>.dump file")->required();
  inspect->add_option("--key", inspect_key, "Print one key only");

  auto* task = app.add_subcommand("task", "Task API verbs against a scenario node");
  task->require_subcommand(1);
  TaskFlags task_flags;
  auto add_task_common = [&](CLI::App* cmd, bool with_name) {
    add_run_flags(cmd, task_flags.run);
    cmd->add_option("--node", task_flags.node, "Node the verb runs on")->required();
    cmd->add_option("--at", task_flags.at_ms, "Simulated time of the call (ms, default 2000)");
    if (with_name) cmd->add_option("--name", task_flags.name, "Task name")->required();
  };
  auto* task_add = task->add_subcommand("add", "Add a task to the tasks CRDT");
  add_task_common(task_add, true);
  task_add->add_option("--kind", task_flags.kind, "Registered task kind")->required();
  task_add->add_option("--targets", task_flags.targets, "'all' or comma-separated node ids");
  task_add->add_option("--param", task_flags.params, "key=value task parameter (repeatable)");
  auto* task_remove = task->add_subcommand("remove", "Remove a task by name");
  add_task_common(task_remove, true);
  auto* task_start = task->add_subcommand("start", "Start a named task on the node");
  add_task_common(task_start, true);
  auto* task_start_all = task->add_subcommand("start-all", "Start every visible task");
  add_task_common(task_start_all, false);

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return cmd_run(run_flags);
  if (inspect->parsed()) return cmd_inspect(dump_path, inspect_key);
  if (task->parsed()) {
    for (const char* verb : {"add", "remove", "start", "start-all"}) {
      if (task->get_subcommand(verb)->parsed()) {
        return cmd_task(verb == std::string("start-all") ? "start_all" : verb, task_flags);
      }
    }
  }
  return 2;
}
