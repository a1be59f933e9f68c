#pragma once

#include <optional>
#include <string_view>

#include "edgemesh/rng.hpp"
#include "edgemesh/types.hpp"

namespace edgemesh::sensors {

// Virtual sensor inputs: bounded random walks, one independent seeded
// stream per (node, kind). Identical seed and config produce an identical
// sample sequence.

enum class Kind : std::uint8_t {
  Temp1 = 1,
  Temp2 = 2,
  Pressure = 3,
};

std::string_view kind_name(Kind k);
std::optional<Kind> kind_from_name(std::string_view name);

struct Config {
  double temp_min = 10.0;
  double temp_max = 35.0;
  double temp_step = 0.5;       ///< walk amplitude m for temperature streams
  double pressure_min = 950.0;
  double pressure_max = 1050.0;
  double pressure_step = 2.0;   ///< walk amplitude m for pressure
};

class Stream {
 public:
  Stream(Kind kind, const Config& cfg, std::uint64_t seed);

  Kind kind() const { return kind_; }

  /// Next reading of the walk, clamped to the stream bounds.
  double next();

 private:
  Kind kind_;
  double min_, max_, step_;
  double value_;
  Rng rng_;
};

}  // namespace edgemesh::sensors
