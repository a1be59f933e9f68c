#include "edgemesh/node.hpp"

#include <cassert>

#include "edgemesh/codec.hpp"

namespace edgemesh {

namespace {
constexpr std::uint8_t kPayloadUser = 0;
constexpr std::uint8_t kPayloadStoreDelta = 1;
}  // namespace

Node::Node(NodeId id, NodeConfig cfg, std::uint64_t seed, Metrics* metrics)
    : id_(id),
      cfg_(std::move(cfg)),
      seed_(seed),
      metrics_(metrics),
      membership_(id, cfg_.membership, derive_seed(seed, 1)),
      broadcast_(id, cfg_.broadcast, derive_seed(seed, 2)),
      replicator_(id, cfg_.replication) {
  task_runtime_ = std::make_unique<tasks::TaskRuntime>(id, cfg_.scheduler, *this,
                                                       derive_seed(seed, 3));
  tasks::register_builtin_kinds(*task_runtime_);
}

Bytes Node::make_delta_payload(const Bytes& key, const crdt::CrdtState& delta) {
  Encoder e;
  e.u8(kPayloadStoreDelta);
  e.bytes(key);
  e.bytes(crdt::encode(delta));
  return e.take();
}

void Node::start(TimeMs now, NodeOutputs& out) {
  Outbox box;
  now_ = now;
  active_outbox_ = &box;
  box.arm(cfg_.membership.heartbeat_interval_ms, Timer{TimerKind::Heartbeat, {}, {}});
  box.arm(cfg_.membership.shuffle_interval_ms, Timer{TimerKind::Shuffle, {}, {}});
  box.arm(cfg_.replication.sync_interval_ms, Timer{TimerKind::AntiEntropy, {}, {}});
  box.arm(cfg_.scheduler.cycle_ms, Timer{TimerKind::TaskCycle, {}, {}});
  membership_.seed_passive(cfg_.contacts);
  if (!cfg_.contacts.empty()) {
    membership_.join_via(cfg_.contacts[contact_idx_ % cfg_.contacts.size()], box);
    ++contact_idx_;
  }
  flush(now, box, out);
}

void Node::on_frame(TimeMs now, NodeId from, const Bytes& frame, NodeOutputs& out) {
  Outbox box;
  now_ = now;
  active_outbox_ = &box;
  auto decoded = wire::decode(frame);
  if (!decoded || decoded->header.sender != from) {
    metric("decode_failures");
    flush(now, box, out);
    return;
  }
  metric("recv." + std::string(wire::msg_type_name(decoded->header.type)));
  last_heard_[from] = now;
  membership_.note_alive(from);
  handle_frame(now, from, *decoded, box);
  flush(now, box, out);
}

void Node::handle_frame(TimeMs now, NodeId from, const wire::Frame& frame, Outbox& box) {
  const auto& header = frame.header;
  std::visit(
      [&](const auto& msg) {
        using T = std::decay_t<decltype(msg)>;
        if constexpr (std::is_same_v<T, wire::Join>) {
          membership_.on_join(from, box);
        } else if constexpr (std::is_same_v<T, wire::ForwardJoin>) {
          membership_.on_forward_join(from, msg.joiner, msg.ttl, box);
        } else if constexpr (std::is_same_v<T, wire::Neighbor>) {
          membership_.on_neighbor(from, msg.high_priority, box);
        } else if constexpr (std::is_same_v<T, wire::NeighborReject>) {
          membership_.on_neighbor_reject(from, box);
        } else if constexpr (std::is_same_v<T, wire::Disconnect>) {
          membership_.on_disconnect(from, box);
        } else if constexpr (std::is_same_v<T, wire::Shuffle>) {
          membership_.on_shuffle(from, msg, box);
        } else if constexpr (std::is_same_v<T, wire::ShuffleReply>) {
          membership_.on_shuffle_reply(msg, box);
        } else if constexpr (std::is_same_v<T, wire::Heartbeat>) {
          // Heartbeats double as symmetry repair: an unknown sender either
          // takes a free active slot or learns we dropped it.
          if (!membership_.active().count(from)) {
            membership_.on_neighbor(from, false, box);
          }
        } else if constexpr (std::is_same_v<T, wire::Gossip>) {
          if (membership_.active().count(from)) {
            broadcast_.on_gossip(from, msg, box);
          } else {
            metric("stale_gossip");
          }
        } else if constexpr (std::is_same_v<T, wire::IHave>) {
          broadcast_.on_ihave(from, msg.ids, box);
        } else if constexpr (std::is_same_v<T, wire::Graft>) {
          broadcast_.on_graft(from, msg.id, box);
        } else if constexpr (std::is_same_v<T, wire::Prune>) {
          broadcast_.on_prune(from);
        } else if constexpr (std::is_same_v<T, wire::DeltaGroup>) {
          apply_items(now, from, msg.items, /*rebuffer=*/true, box);
          box.message(from, wire::Ack{}, 0, header.end_seq);
        } else if constexpr (std::is_same_v<T, wire::FullState>) {
          const bool rebuffer = cfg_.replication.mode == repl::Config::Mode::Delta;
          apply_items(now, from, msg.items, rebuffer, box);
          box.message(from, wire::Ack{}, 0, header.end_seq);
        } else if constexpr (std::is_same_v<T, wire::Ack>) {
          replicator_.on_ack(from, header.end_seq, membership_.active());
        }
      },
      frame.msg);
}

void Node::apply_items(TimeMs now, NodeId from, const std::vector<wire::DeltaItem>& items,
                       bool rebuffer, Outbox& box) {
  (void)now;
  (void)box;
  for (const auto& item : items) {
    auto fragment = crdt::decode(item.state);
    if (!fragment || item.key.empty()) {
      metric("decode_failures");
      continue;
    }
    lamport_.observe(crdt::max_register_timestamp(*fragment));
    const auto outcome = store_.join_in(item.key, *fragment);
    switch (outcome) {
      case kv::Store::JoinOutcome::TypeConflict:
        metric("type_conflicts");
        break;
      case kv::Store::JoinOutcome::Inflated:
        ++store_version_;
        if (rebuffer) {
          // New information gets forwarded onward so sparse overlays
          // still converge transitively.
          replicator_.record_local_delta(item.key, std::move(*fragment), from);
        }
        break;
      case kv::Store::JoinOutcome::Unchanged:
        break;
    }
  }
}

void Node::on_timer(TimeMs now, const Timer& timer, NodeOutputs& out) {
  Outbox box;
  now_ = now;
  active_outbox_ = &box;
  switch (timer.kind) {
    case TimerKind::Heartbeat: {
      // Failure detection first, then keepalives to the survivors.
      std::vector<NodeId> failed;
      for (NodeId peer : membership_.active()) {
        auto it = last_heard_.find(peer);
        const TimeMs heard = it == last_heard_.end() ? 0 : it->second;
        if (now >= heard + cfg_.membership.failure_after_ms) failed.push_back(peer);
      }
      for (NodeId peer : failed) membership_.on_peer_failure(peer, box);
      for (NodeId peer : membership_.active()) box.message(peer, wire::Heartbeat{});
      // View-graph islands cannot repair themselves through shuffles alone
      // (walks ride active links). A node starved below half capacity for
      // several beats re-joins through a bootstrap contact.
      if (!cfg_.contacts.empty()) {
        if (membership_.active().empty()) {
          membership_.join_via(cfg_.contacts[contact_idx_ % cfg_.contacts.size()], box);
          ++contact_idx_;
          starved_ticks_ = 0;
        } else if (membership_.active().size() * 2 < cfg_.membership.a_max) {
          if (++starved_ticks_ >= 5) {
            membership_.join_via(cfg_.contacts[contact_idx_ % cfg_.contacts.size()], box);
            ++contact_idx_;
            starved_ticks_ = 0;
          }
        } else {
          starved_ticks_ = 0;
        }
      }
      box.arm(cfg_.membership.heartbeat_interval_ms, Timer{TimerKind::Heartbeat, {}, {}});
      break;
    }
    case TimerKind::Shuffle:
      membership_.shuffle_tick(box);
      box.arm(cfg_.membership.shuffle_interval_ms, Timer{TimerKind::Shuffle, {}, {}});
      break;
    case TimerKind::AntiEntropy:
      replicator_.anti_entropy_tick(store_, membership_.active(), box);
      box.arm(cfg_.replication.sync_interval_ms, Timer{TimerKind::AntiEntropy, {}, {}});
      break;
    case TimerKind::TaskCycle:
      task_runtime_->scheduler_tick();
      box.arm(cfg_.scheduler.cycle_ms, Timer{TimerKind::TaskCycle, {}, {}});
      break;
    case TimerKind::IHaveFlush:
      broadcast_.ihave_flush(box);
      break;
    case TimerKind::Graft:
      broadcast_.graft_timer_fired(timer.mid, box);
      break;
    case TimerKind::SensorSample:
      sensor_sample(now, timer.data, box);
      break;
  }
  flush(now, box, out);
}

void Node::declare(const kv::StoreKey& key) {
  store_.declare(key);
}

crdt::QueryResult Node::update(TimeMs now, const kv::StoreKey& key, const crdt::MutatorOp& op,
                               NodeOutputs& out) {
  Outbox box;
  now_ = now;
  active_outbox_ = &box;
  auto result = store_update(key, op);
  flush(now, box, out);
  return result;
}

crdt::QueryResult Node::store_update(const kv::StoreKey& key, const crdt::MutatorOp& op) {
  auto [value, delta] = store_.update(key, stamp(op), id_);
  ++store_version_;
  metric("store.updates");
  if (key.name == tasks::kTasksKey && active_outbox_) {
    // Fast path for task visibility: gossip the delta; anti-entropy
    // remains the durable route.
    broadcast_.broadcast(make_delta_payload(key.name, delta), *active_outbox_);
  }
  replicator_.record_local_delta(key.name, std::move(delta), id_);
  return value;
}

void Node::install_window(const agg::WindowSpec& spec) {
  if (windows_.count(spec.store_key)) return;  // re-execution is a no-op
  agg::WindowSpec w = spec;
  if (cfg_.aggregation.window != 0 && spec.capacity == 0) w.capacity = cfg_.aggregation.window;
  auto [it, inserted] = windows_.emplace(spec.store_key, WindowState{agg::AggWindow(w), 0});
  (void)it;
  if (inserted && active_outbox_) {
    active_outbox_->arm(w.delta_interval_ms, Timer{TimerKind::SensorSample, {}, spec.store_key});
  }
}

void Node::add_task(TimeMs now, const tasks::TaskSpec& spec, NodeOutputs& out) {
  Outbox box;
  now_ = now;
  active_outbox_ = &box;
  task_runtime_->add_task(spec, lamport_.tick());
  if (!task_runtime_->knows_kind(spec.kind)) metric("tasks.unknown_kind_added");
  flush(now, box, out);
}

void Node::remove_task(TimeMs now, const std::string& name, NodeOutputs& out) {
  Outbox box;
  now_ = now;
  active_outbox_ = &box;
  task_runtime_->remove_task(name);
  flush(now, box, out);
}

tasks::ExecutionResult Node::start_task(TimeMs now, const std::string& name, NodeOutputs& out) {
  Outbox box;
  now_ = now;
  active_outbox_ = &box;
  auto result = task_runtime_->start_task(name);
  if (result.status == tasks::ExecStatus::Executed) metric("tasks.executions");
  flush(now, box, out);
  return result;
}

std::optional<tasks::ExecutionResult> Node::find_and_start_task(TimeMs now, NodeOutputs& out) {
  Outbox box;
  now_ = now;
  active_outbox_ = &box;
  auto result = task_runtime_->find_and_start_task();
  if (result && result->status == tasks::ExecStatus::Executed) metric("tasks.executions");
  flush(now, box, out);
  return result;
}

std::vector<tasks::ExecutionResult> Node::start_all_tasks(TimeMs now, NodeOutputs& out) {
  Outbox box;
  now_ = now;
  active_outbox_ = &box;
  auto results = task_runtime_->start_all_tasks();
  for (const auto& r : results) {
    if (r.status == tasks::ExecStatus::Executed) metric("tasks.executions");
  }
  flush(now, box, out);
  return results;
}

wire::MessageId Node::broadcast_payload(TimeMs now, const Bytes& payload, NodeOutputs& out) {
  Outbox box;
  now_ = now;
  active_outbox_ = &box;
  Encoder e;
  e.u8(kPayloadUser);
  e.bytes(payload);
  const auto id = broadcast_.broadcast(e.take(), box);
  flush(now, box, out);
  return id;
}

void Node::sensor_sample(TimeMs now, const Bytes& window_key, Outbox& box) {
  auto it = windows_.find(window_key);
  if (it == windows_.end()) return;
  WindowState& ws = it->second;
  const auto& spec = ws.window.spec();
  const double reading = stream(spec.sensor).next();
  metric("agg.samples");

  const kv::StoreKey key{window_key, crdt::CrdtType::GSet};
  if (cfg_.aggregation.raw_reference) {
    // Traffic oracle only: ship every raw reading.
    store_update(key, crdt::AddElement{agg::encode_mean_element(id_, ++ws.raw_seq, reading)});
    metric("agg.raw_propagated");
  } else {
    double mean = 0.0;
    const auto status = ws.window.record_sample(reading, now, &mean);
    if (status == agg::AggWindow::SampleStatus::Rejected) {
      metric("agg.rejected");
    } else if (status == agg::AggWindow::SampleStatus::Flushed) {
      metric("agg.flushes");
      if (ws.window.should_propagate(mean)) {
        store_update(key,
                     crdt::AddElement{agg::encode_mean_element(id_, ws.window.flush_count(), mean)});
        ws.window.mark_propagated(mean);
        metric("agg.propagated");
      }
    }
  }
  box.arm(spec.delta_interval_ms, Timer{TimerKind::SensorSample, {}, window_key});
}

sensors::Stream& Node::stream(std::uint8_t kind) {
  auto it = streams_.find(kind);
  if (it == streams_.end()) {
    it = streams_
             .emplace(kind, sensors::Stream(static_cast<sensors::Kind>(kind), cfg_.sensors,
                                            derive_seed(seed_, 1000 + kind)))
             .first;
  }
  return it->second;
}

crdt::MutatorOp Node::stamp(const crdt::MutatorOp& op) {
  if (const auto* set = std::get_if<crdt::SetValue>(&op)) {
    if (set->timestamp == 0) return crdt::SetValue{set->value, lamport_.tick()};
  }
  return op;
}

void Node::handle_delivery(TimeMs now, const Delivery& delivery, Outbox& box) {
  delivery_log_.push_back(DeliveryRecord{delivery.id, now});
  metric("broadcast.delivered");
  Decoder d(delivery.payload);
  const std::uint8_t tag = d.u8();
  if (!d.ok()) return;
  if (tag == kPayloadStoreDelta) {
    const Bytes key = d.bytes();
    auto fragment = crdt::decode(d.bytes());
    if (!d.done() || !fragment || key.empty()) {
      metric("decode_failures");
      return;
    }
    lamport_.observe(crdt::max_register_timestamp(*fragment));
    if (store_.join_in(key, *fragment) == kv::Store::JoinOutcome::Inflated) {
      ++store_version_;
      replicator_.record_local_delta(key, std::move(*fragment), id_);
    }
  }
  (void)box;
}

void Node::sync_views(TimeMs now, Outbox& box) {
  (void)box;
  for (NodeId peer : membership_.drain_deactivated()) {
    last_heard_.erase(peer);
    broadcast_.on_peer_removed(peer);
    replicator_.on_peer_removed(peer, membership_.active());
  }
  for (NodeId peer : membership_.drain_activated()) {
    last_heard_.emplace(peer, now);
    broadcast_.on_peer_added(peer);
    replicator_.on_peer_added(peer);
  }
}

void Node::flush(TimeMs now, Outbox& box, NodeOutputs& out) {
  sync_views(now, box);
  // Deliveries may join task announcements into the store; that never
  // produces new envelopes, so one pass suffices.
  for (const Delivery& delivery : box.delivered) {
    handle_delivery(now, delivery, box);
  }
  sync_views(now, box);
  for (const Envelope& env : box.send) {
    Bytes frame = wire::encode(id_, env.msg, env.start_seq, env.end_seq);
    const auto type = wire::type_of(env.msg);
    metric("sent." + std::string(wire::msg_type_name(type)));
    metric("sent_bytes." + std::string(wire::msg_type_name(type)), frame.size());
    if (type == wire::MsgType::DeltaGroup || type == wire::MsgType::FullState) {
      metric("payload_bytes." + std::string(wire::msg_type_name(type)),
             frame.size() - wire::kHeaderSize);
      if (metrics_) {
        // Per-key attribution of replication payload bytes.
        const auto* items = type == wire::MsgType::DeltaGroup
                                ? &std::get<wire::DeltaGroup>(env.msg).items
                                : &std::get<wire::FullState>(env.msg).items;
        for (const auto& item : *items) {
          metrics_->key_bytes(item.key, item.key.size() + item.state.size());
        }
      }
    }
    out.frames.emplace_back(env.to, std::move(frame));
  }
  out.timers.insert(out.timers.end(), box.timers.begin(), box.timers.end());
  box.send.clear();
  box.timers.clear();
  box.delivered.clear();
  active_outbox_ = nullptr;
}

std::optional<std::string> Node::invariant_violation() const {
  if (auto v = membership_.invariant_violation()) return v;
  if (auto v = broadcast_.invariant_violation(membership_.active())) return v;
  if (replicator_.buffered() > cfg_.replication.buffer_capacity) {
    return "replication buffer over capacity";
  }
  return std::nullopt;
}

void Node::metric(const std::string& name, std::uint64_t delta) {
  if (metrics_) metrics_->count(name, delta);
}

}  // namespace edgemesh
