#pragma once

#include <cstdint>
#include <string>

namespace edgemesh {

/// Opaque, totally ordered node identifier. Unique per node in a cluster.
using NodeId = std::uint64_t;

/// Simulated time in milliseconds.
using TimeMs = std::uint64_t;

/// Byte-string payloads and element values. std::string compares with
/// unsigned byte semantics, which keeps orderings canonical.
using Bytes = std::string;

}  // namespace edgemesh
