#include "edgemesh/sensors.hpp"

#include <algorithm>

namespace edgemesh::sensors {

std::string_view kind_name(Kind k) {
  switch (k) {
    case Kind::Temp1: return "temp1";
    case Kind::Temp2: return "temp2";
    case Kind::Pressure: return "pressure";
  }
  return "unknown";
}

std::optional<Kind> kind_from_name(std::string_view name) {
  if (name == "temp1") return Kind::Temp1;
  if (name == "temp2") return Kind::Temp2;
  if (name == "pressure") return Kind::Pressure;
  return std::nullopt;
}

Stream::Stream(Kind kind, const Config& cfg, std::uint64_t seed) : kind_(kind), rng_(seed) {
  if (kind == Kind::Pressure) {
    min_ = cfg.pressure_min;
    max_ = cfg.pressure_max;
    step_ = cfg.pressure_step;
  } else {
    min_ = cfg.temp_min;
    max_ = cfg.temp_max;
    step_ = cfg.temp_step;
  }
  value_ = rng_.real_range(min_, max_);
}

double Stream::next() {
  value_ = std::clamp(value_ + rng_.real_range(-step_, step_), min_, max_);
  return value_;
}

}  // namespace edgemesh::sensors
