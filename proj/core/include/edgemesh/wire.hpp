#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "edgemesh/crdt.hpp"
#include "edgemesh/types.hpp"

namespace edgemesh::wire {

// Wire protocol. Every frame starts with a fixed header (version byte,
// message type byte, sender id, sequence range) followed by a type-specific
// payload encoded with the canonical codec. The sequence range is meaningful
// for replication traffic and zero elsewhere.

inline constexpr std::uint8_t kProtocolVersion = 1;

enum class MsgType : std::uint8_t {
  Join = 1,
  ForwardJoin = 2,
  Neighbor = 3,
  NeighborReject = 4,
  Disconnect = 5,
  Shuffle = 6,
  ShuffleReply = 7,
  Heartbeat = 8,
  Gossip = 9,
  IHave = 10,
  Graft = 11,
  Prune = 12,
  DeltaGroup = 13,
  FullState = 14,
  Ack = 15,
};

std::string_view msg_type_name(MsgType t);

struct Header {
  std::uint8_t version = kProtocolVersion;
  MsgType type = MsgType::Heartbeat;
  NodeId sender = 0;
  std::uint64_t start_seq = 0;
  std::uint64_t end_seq = 0;
};

inline constexpr std::size_t kHeaderSize = 1 + 1 + 8 + 8 + 8;

/// Identifies one broadcast: origin plus a per-origin sequence.
struct MessageId {
  NodeId origin = 0;
  std::uint64_t sequence = 0;

  auto operator<=>(const MessageId&) const = default;
};

// --- membership ---
struct Join {};
struct ForwardJoin {
  NodeId joiner = 0;
  std::uint8_t ttl = 0;
};
struct Neighbor {
  bool high_priority = false;
};
struct NeighborReject {};
struct Disconnect {};
struct Shuffle {
  NodeId origin = 0;
  std::uint8_t ttl = 0;
  std::vector<NodeId> sample;
};
struct ShuffleReply {
  std::vector<NodeId> sample;
};
struct Heartbeat {};

// --- broadcast ---
struct Gossip {
  MessageId id;
  std::uint32_t round = 0;
  Bytes payload;
};
struct IHave {
  std::vector<MessageId> ids;
};
struct Graft {
  MessageId id;
};
struct Prune {};

// --- replication ---
struct DeltaItem {
  Bytes key;    ///< store key name
  Bytes state;  ///< canonical CRDT state/delta encoding
};
struct DeltaGroup {
  std::vector<DeltaItem> items;  ///< range carried in the header
};
struct FullState {
  std::vector<DeltaItem> items;
};
struct Ack {};  ///< acked sequence carried in header end_seq

using Message = std::variant<Join, ForwardJoin, Neighbor, NeighborReject, Disconnect, Shuffle,
                             ShuffleReply, Heartbeat, Gossip, IHave, Graft, Prune, DeltaGroup,
                             FullState, Ack>;

MsgType type_of(const Message& m);

/// Encode a full frame (header + payload).
Bytes encode(NodeId sender, const Message& m, std::uint64_t start_seq = 0,
             std::uint64_t end_seq = 0);

struct Frame {
  Header header;
  Message msg;
};

/// Decode a frame; returns nullopt on any malformed input.
std::optional<Frame> decode(std::string_view bytes);

}  // namespace edgemesh::wire
