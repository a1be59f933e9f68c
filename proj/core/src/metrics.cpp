#include "edgemesh/metrics.hpp"

#include <nlohmann/json.hpp>

#include "edgemesh/aggregation.hpp"
#include "edgemesh/codec.hpp"
#include "edgemesh/task_model.hpp"

namespace edgemesh {

namespace {
using nlohmann::json;
}

std::uint64_t Metrics::sum_prefix(const std::string& prefix) const {
  std::uint64_t sum = 0;
  for (auto it = counters_.lower_bound(prefix); it != counters_.end(); ++it) {
    if (it->first.compare(0, prefix.size(), prefix) != 0) break;
    sum += it->second;
  }
  return sum;
}

void Metrics::link_bytes(NodeId from, NodeId to, std::uint64_t bytes) {
  count("link_bytes." + std::to_string(from) + ">" + std::to_string(to), bytes);
}

void Metrics::key_bytes(const Bytes& key, std::uint64_t bytes) {
  count("key_bytes." + key, bytes);
}

void Metrics::broadcast_latency(TimeMs latency) {
  count("broadcast.latency_ms.sum", latency);
  count("broadcast.latency_ms.count", 1);
  max_value("broadcast.latency_ms.max", latency);
}

std::string Metrics::to_csv() const {
  std::string out = "metric,value\n";
  for (const auto& [name, v] : counters_) {
    out += name;
    out += ',';
    out += std::to_string(v);
    out += '\n';
  }
  return out;
}

std::string Metrics::to_jsonl() const {
  std::string out;
  for (const auto& [name, v] : counters_) {
    json line;
    line["metric"] = name;
    line["value"] = v;
    out += line.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

bool printable(const Bytes& b) {
  if (b.empty()) return false;
  for (unsigned char c : b) {
    if (c < 0x20 || c > 0x7e) return false;
  }
  return true;
}

std::string hex(const Bytes& b) {
  static const char* digits = "0123456789abcdef";
  std::string out = "0x";
  for (unsigned char c : b) {
    out += digits[c >> 4];
    out += digits[c & 0xf];
  }
  return out;
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

json element_json(const Bytes& name, const Bytes& elem) {
  if (name.rfind(tasks::kExecLogPrefix, 0) == 0 && elem.size() == 16) {
    Decoder d(elem);
    json j;
    j["node"] = d.u64();
    j["bucket"] = d.u64();
    return j;
  }
  if (ends_with(name, "/means")) {
    if (auto m = agg::decode_mean_element(elem)) {
      json j;
      j["node"] = m->node;
      j["seq"] = m->window_seq;
      j["mean"] = m->mean;
      return j;
    }
  }
  if (name == tasks::kTasksKey) {
    if (auto t = tasks::decode_task(elem)) {
      json j;
      j["name"] = t->spec.name;
      j["kind"] = t->spec.kind;
      if (t->spec.targets) {
        j["targets"] = std::vector<NodeId>(t->spec.targets->begin(), t->spec.targets->end());
      } else {
        j["targets"] = "all";
      }
      return j;
    }
  }
  return printable(elem) ? json(elem) : json(hex(elem));
}

}  // namespace

std::vector<std::string> store_json_lines(const kv::Store& store) {
  std::vector<std::string> lines;
  store.for_each([&](const Bytes& name, const crdt::CrdtState& state) {
    json j;
    j["key"] = printable(name) ? name : hex(name);
    j["type"] = std::string(crdt::type_name(state.type()));
    const auto value = crdt::value_of(state);
    if (const auto* n = std::get_if<std::int64_t>(&value)) {
      j["value"] = *n;
    } else if (const auto* elems = std::get_if<std::set<Bytes>>(&value)) {
      json arr = json::array();
      for (const Bytes& e : *elems) arr.push_back(element_json(name, e));
      j["value"] = std::move(arr);
    } else if (const auto* reg = std::get_if<crdt::RegisterValue>(&value)) {
      if (reg->set()) {
        j["value"] = printable(reg->value) ? json(reg->value) : json(hex(reg->value));
        j["timestamp"] = reg->timestamp;
        j["writer"] = reg->writer;
      } else {
        j["value"] = nullptr;
      }
    }
    lines.push_back(j.dump());
  });
  return lines;
}

}  // namespace edgemesh
