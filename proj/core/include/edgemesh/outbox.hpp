#pragma once

#include <cstdint>
#include <vector>

#include "edgemesh/types.hpp"
#include "edgemesh/wire.hpp"

namespace edgemesh {

// Protocol handlers are pure transitions: they mutate only their own state
// and append outgoing messages / timer requests to an Outbox. Nothing here
// touches a transport; the node runtime encodes envelopes into frames and
// the simulator (or a future real transport) carries them.

enum class TimerKind : std::uint8_t {
  Heartbeat = 1,    ///< periodic liveness + failure detection sweep
  Shuffle = 2,      ///< membership passive-view shuffle
  AntiEntropy = 3,  ///< replication sync round
  TaskCycle = 4,    ///< task discovery tick
  IHaveFlush = 5,   ///< batched lazy announcements
  Graft = 6,        ///< broadcast repair timer for one message id
  SensorSample = 7, ///< sample one aggregation window (data = store key)
};

struct Timer {
  TimerKind kind = TimerKind::Heartbeat;
  wire::MessageId mid;  ///< Graft only
  Bytes data;           ///< SensorSample: window store key
};

struct TimerReq {
  std::uint64_t delay_ms = 0;
  Timer timer;
};

struct Envelope {
  NodeId to = 0;
  wire::Message msg;
  std::uint64_t start_seq = 0;
  std::uint64_t end_seq = 0;
};

struct Delivery {
  wire::MessageId id;
  Bytes payload;
};

struct Outbox {
  std::vector<Envelope> send;
  std::vector<TimerReq> timers;
  std::vector<Delivery> delivered;

  void message(NodeId to, wire::Message msg, std::uint64_t start_seq = 0,
               std::uint64_t end_seq = 0) {
    send.push_back(Envelope{to, std::move(msg), start_seq, end_seq});
  }
  void arm(std::uint64_t delay_ms, Timer t) { timers.push_back(TimerReq{delay_ms, std::move(t)}); }
};

}  // namespace edgemesh
