#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "edgemesh/kv_store.hpp"
#include "edgemesh/types.hpp"

namespace edgemesh {

/// Run metrics: counters and gauges keyed by name, kept in sorted maps so
/// CSV/JSONL exports are deterministic and diffable across runs.
class Metrics {
 public:
  void count(const std::string& name, std::uint64_t delta = 1) { counters_[name] += delta; }
  void set_value(const std::string& name, std::uint64_t v) { counters_[name] = v; }
  void max_value(const std::string& name, std::uint64_t v) {
    auto [it, inserted] = counters_.try_emplace(name, v);
    if (!inserted && it->second < v) it->second = v;
  }

  std::uint64_t get(const std::string& name) const {
    auto it = counters_.find(name);
    return it == counters_.end() ? 0 : it->second;
  }

  /// Sum of a metric family, e.g. prefix "sent_bytes." over all types.
  std::uint64_t sum_prefix(const std::string& prefix) const;

  void link_bytes(NodeId from, NodeId to, std::uint64_t bytes);
  void key_bytes(const Bytes& key, std::uint64_t bytes);
  void broadcast_latency(TimeMs latency);

  std::string to_csv() const;
  std::string to_jsonl() const;

 private:
  std::map<std::string, std::uint64_t> counters_;
};

/// Human-readable store rendering: one JSON line per key. Reserved keys
/// (execution logs, aggregation means) are decoded into structured fields.
std::vector<std::string> store_json_lines(const kv::Store& store);

}  // namespace edgemesh
