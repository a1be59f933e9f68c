#include "edgemesh/wire.hpp"

#include "edgemesh/codec.hpp"

namespace edgemesh::wire {

std::string_view msg_type_name(MsgType t) {
  switch (t) {
    case MsgType::Join: return "join";
    case MsgType::ForwardJoin: return "forward_join";
    case MsgType::Neighbor: return "neighbor";
    case MsgType::NeighborReject: return "neighbor_reject";
    case MsgType::Disconnect: return "disconnect";
    case MsgType::Shuffle: return "shuffle";
    case MsgType::ShuffleReply: return "shuffle_reply";
    case MsgType::Heartbeat: return "heartbeat";
    case MsgType::Gossip: return "gossip";
    case MsgType::IHave: return "ihave";
    case MsgType::Graft: return "graft";
    case MsgType::Prune: return "prune";
    case MsgType::DeltaGroup: return "delta_group";
    case MsgType::FullState: return "full_state";
    case MsgType::Ack: return "ack";
  }
  return "unknown";
}

MsgType type_of(const Message& m) {
  return std::visit(
      [](const auto& v) -> MsgType {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Join>) return MsgType::Join;
        if constexpr (std::is_same_v<T, ForwardJoin>) return MsgType::ForwardJoin;
        if constexpr (std::is_same_v<T, Neighbor>) return MsgType::Neighbor;
        if constexpr (std::is_same_v<T, NeighborReject>) return MsgType::NeighborReject;
        if constexpr (std::is_same_v<T, Disconnect>) return MsgType::Disconnect;
        if constexpr (std::is_same_v<T, Shuffle>) return MsgType::Shuffle;
        if constexpr (std::is_same_v<T, ShuffleReply>) return MsgType::ShuffleReply;
        if constexpr (std::is_same_v<T, Heartbeat>) return MsgType::Heartbeat;
        if constexpr (std::is_same_v<T, Gossip>) return MsgType::Gossip;
        if constexpr (std::is_same_v<T, IHave>) return MsgType::IHave;
        if constexpr (std::is_same_v<T, Graft>) return MsgType::Graft;
        if constexpr (std::is_same_v<T, Prune>) return MsgType::Prune;
        if constexpr (std::is_same_v<T, DeltaGroup>) return MsgType::DeltaGroup;
        if constexpr (std::is_same_v<T, FullState>) return MsgType::FullState;
        if constexpr (std::is_same_v<T, Ack>) return MsgType::Ack;
      },
      m);
}

namespace {

void encode_id_list(Encoder& e, const std::vector<NodeId>& ids) {
  e.u32(static_cast<std::uint32_t>(ids.size()));
  for (NodeId id : ids) e.u64(id);
}

std::vector<NodeId> decode_id_list(Decoder& d) {
  std::vector<NodeId> out;
  const std::uint32_t n = d.u32();
  for (std::uint32_t i = 0; i < n && d.ok(); ++i) out.push_back(d.u64());
  return out;
}

void encode_items(Encoder& e, const std::vector<DeltaItem>& items) {
  e.u32(static_cast<std::uint32_t>(items.size()));
  for (const DeltaItem& it : items) {
    e.bytes(it.key);
    e.bytes(it.state);
  }
}

std::vector<DeltaItem> decode_items(Decoder& d) {
  std::vector<DeltaItem> out;
  const std::uint32_t n = d.u32();
  for (std::uint32_t i = 0; i < n && d.ok(); ++i) {
    DeltaItem it;
    it.key = d.bytes();
    it.state = d.bytes();
    out.push_back(std::move(it));
  }
  return out;
}

}  // namespace

Bytes encode(NodeId sender, const Message& m, std::uint64_t start_seq, std::uint64_t end_seq) {
  Encoder e;
  e.u8(kProtocolVersion);
  e.u8(static_cast<std::uint8_t>(type_of(m)));
  e.u64(sender);
  e.u64(start_seq);
  e.u64(end_seq);
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ForwardJoin>) {
          e.u64(v.joiner);
          e.u8(v.ttl);
        } else if constexpr (std::is_same_v<T, Neighbor>) {
          e.u8(v.high_priority ? 1 : 0);
        } else if constexpr (std::is_same_v<T, Shuffle>) {
          e.u64(v.origin);
          e.u8(v.ttl);
          encode_id_list(e, v.sample);
        } else if constexpr (std::is_same_v<T, ShuffleReply>) {
          encode_id_list(e, v.sample);
        } else if constexpr (std::is_same_v<T, Gossip>) {
          e.u64(v.id.origin);
          e.u64(v.id.sequence);
          e.u32(v.round);
          e.bytes(v.payload);
        } else if constexpr (std::is_same_v<T, IHave>) {
          e.u32(static_cast<std::uint32_t>(v.ids.size()));
          for (const MessageId& id : v.ids) {
            e.u64(id.origin);
            e.u64(id.sequence);
          }
        } else if constexpr (std::is_same_v<T, Graft>) {
          e.u64(v.id.origin);
          e.u64(v.id.sequence);
        } else if constexpr (std::is_same_v<T, DeltaGroup> || std::is_same_v<T, FullState>) {
          encode_items(e, v.items);
        }
        // Join, NeighborReject, Disconnect, Heartbeat, Prune, Ack: header only.
      },
      m);
  return e.take();
}

std::optional<Frame> decode(std::string_view bytes) {
  Decoder d(bytes);
  Frame f;
  f.header.version = d.u8();
  const std::uint8_t tag = d.u8();
  f.header.sender = d.u64();
  f.header.start_seq = d.u64();
  f.header.end_seq = d.u64();
  if (!d.ok() || f.header.version != kProtocolVersion) return std::nullopt;
  f.header.type = static_cast<MsgType>(tag);

  switch (f.header.type) {
    case MsgType::Join: f.msg = Join{}; break;
    case MsgType::NeighborReject: f.msg = NeighborReject{}; break;
    case MsgType::Disconnect: f.msg = Disconnect{}; break;
    case MsgType::Heartbeat: f.msg = Heartbeat{}; break;
    case MsgType::Prune: f.msg = Prune{}; break;
    case MsgType::Ack: f.msg = Ack{}; break;
    case MsgType::ForwardJoin: {
      ForwardJoin m;
      m.joiner = d.u64();
      m.ttl = d.u8();
      f.msg = m;
      break;
    }
    case MsgType::Neighbor: {
      Neighbor m;
      m.high_priority = d.u8() != 0;
      f.msg = m;
      break;
    }
    case MsgType::Shuffle: {
      Shuffle m;
      m.origin = d.u64();
      m.ttl = d.u8();
      m.sample = decode_id_list(d);
      f.msg = std::move(m);
      break;
    }
    case MsgType::ShuffleReply: {
      ShuffleReply m;
      m.sample = decode_id_list(d);
      f.msg = std::move(m);
      break;
    }
    case MsgType::Gossip: {
      Gossip m;
      m.id.origin = d.u64();
      m.id.sequence = d.u64();
      m.round = d.u32();
      m.payload = d.bytes();
      f.msg = std::move(m);
      break;
    }
    case MsgType::IHave: {
      IHave m;
      const std::uint32_t n = d.u32();
      for (std::uint32_t i = 0; i < n && d.ok(); ++i) {
        MessageId id;
        id.origin = d.u64();
        id.sequence = d.u64();
        m.ids.push_back(id);
      }
      f.msg = std::move(m);
      break;
    }
    case MsgType::Graft: {
      Graft m;
      m.id.origin = d.u64();
      m.id.sequence = d.u64();
      f.msg = m;
      break;
    }
    case MsgType::DeltaGroup: {
      DeltaGroup m;
      m.items = decode_items(d);
      f.msg = std::move(m);
      break;
    }
    case MsgType::FullState: {
      FullState m;
      m.items = decode_items(d);
      f.msg = std::move(m);
      break;
    }
    default:
      return std::nullopt;
  }
  if (!d.done()) return std::nullopt;
  return f;
}

}  // namespace edgemesh::wire
