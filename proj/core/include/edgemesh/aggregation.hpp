#pragma once

#include <optional>
#include <vector>

#include "edgemesh/types.hpp"

namespace edgemesh::agg {

// Local windowed aggregation: raw sensor readings stay on the node; only
// window means are handed back for propagation into the replicated store.

struct Config {
  std::size_t window = 10;  ///< samples per flush (k)
  bool raw_reference = false;  ///< ship every raw sample (traffic oracle only)
};

struct WindowSpec {
  Bytes store_key;                 ///< target key for propagated means
  std::size_t capacity = 10;       ///< k
  TimeMs delta_interval_ms = 1'000;
  double threshold = 0.0;          ///< min |mean - last propagated| to ship
  std::uint8_t sensor = 1;         ///< sensors::Kind
};

class AggWindow {
 public:
  explicit AggWindow(WindowSpec spec) : spec_(std::move(spec)) {}

  const WindowSpec& spec() const { return spec_; }
  std::size_t pending() const { return samples_.size(); }
  std::uint64_t flush_count() const { return flush_seq_; }

  enum class SampleStatus { Buffered, Flushed, Rejected };

  /// Append one reading. When the buffer reaches capacity the arithmetic
  /// mean is computed, the buffer cleared, and the mean returned through
  /// `mean_out`. Non-finite readings are rejected.
  SampleStatus record_sample(double value, TimeMs at, double* mean_out);

  /// Change filter for propagation: true if the mean moved at least
  /// `threshold` since the last shipped mean (the first always ships).
  bool should_propagate(double mean);
  void mark_propagated(double mean) { last_propagated_ = mean; }

 private:
  WindowSpec spec_;
  std::vector<std::pair<double, TimeMs>> samples_;
  std::uint64_t flush_seq_ = 0;
  std::optional<double> last_propagated_;
};

/// Canonical encoding of one propagated mean, tagged with the producing
/// node and window sequence so re-execution is idempotent.
Bytes encode_mean_element(NodeId node, std::uint64_t window_seq, double mean);

struct MeanElement {
  NodeId node = 0;
  std::uint64_t window_seq = 0;
  double mean = 0.0;
};
std::optional<MeanElement> decode_mean_element(std::string_view in);

}  // namespace edgemesh::agg
