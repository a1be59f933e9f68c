#include "edgemesh/aggregation.hpp"

#include <cmath>

#include "edgemesh/codec.hpp"

namespace edgemesh::agg {

AggWindow::SampleStatus AggWindow::record_sample(double value, TimeMs at, double* mean_out) {
  if (!std::isfinite(value)) return SampleStatus::Rejected;
  samples_.emplace_back(value, at);
  if (samples_.size() < spec_.capacity) return SampleStatus::Buffered;
  double sum = 0.0;
  for (const auto& [v, t] : samples_) sum += v;
  const double mean = sum / static_cast<double>(samples_.size());
  samples_.clear();
  ++flush_seq_;
  if (mean_out) *mean_out = mean;
  return SampleStatus::Flushed;
}

bool AggWindow::should_propagate(double mean) {
  if (!last_propagated_) return true;
  return std::fabs(mean - *last_propagated_) >= spec_.threshold;
}

Bytes encode_mean_element(NodeId node, std::uint64_t window_seq, double mean) {
  Encoder e;
  e.u64(node);
  e.u64(window_seq);
  e.f64(mean);
  return e.take();
}

std::optional<MeanElement> decode_mean_element(std::string_view in) {
  Decoder d(in);
  MeanElement m;
  m.node = d.u64();
  m.window_seq = d.u64();
  m.mean = d.f64();
  if (!d.done()) return std::nullopt;
  return m;
}

}  // namespace edgemesh::agg
