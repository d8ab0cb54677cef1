#include "vcanlab/bus.hpp"

#include <algorithm>
#include <cmath>

namespace vcan {

const char* to_string(ConfigCheck check) noexcept {
  switch (check) {
    case ConfigCheck::Ok: return "ok";
    case ConfigCheck::RateRangeError: return "RateRangeError";
    case ConfigCheck::RateDistanceError: return "RateDistanceError";
    case ConfigCheck::DistanceError: return "DistanceError";
  }
  return "?";
}

ConfigCheck validate_bus_config(double bitrate_bps, double distance_m, bool allow_slow) {
  if (!std::isfinite(distance_m) || distance_m <= 0.0) return ConfigCheck::DistanceError;
  if (!std::isfinite(bitrate_bps) || bitrate_bps <= 0.0 || bitrate_bps > kMaxBitrate)
    return ConfigCheck::RateRangeError;
  if (bitrate_bps < kMinBitrate && !allow_slow) return ConfigCheck::RateRangeError;
  if (bitrate_bps * distance_m > kMaxRateDistance) return ConfigCheck::RateDistanceError;
  return ConfigCheck::Ok;
}

Level resolve_bit(std::span<const Level> driven) noexcept {
  return std::any_of(driven.begin(), driven.end(), [](Level l) { return l == Level::Dominant; }) ? Level::Dominant
                                                                                                 : Level::Recessive;
}

const char* to_string(TraceKind kind) noexcept {
  switch (kind) {
    case TraceKind::TxStart: return "TxStart";
    case TraceKind::ArbitrationLost: return "ArbitrationLost";
    case TraceKind::FrameDelivered: return "FrameDelivered";
    case TraceKind::AckError: return "AckError";
    case TraceKind::ErrorFrame: return "ErrorFrame";
    case TraceKind::Retransmit: return "Retransmit";
    case TraceKind::BusOffEntered: return "BusOffEntered";
    case TraceKind::BusOffRecovered: return "BusOffRecovered";
    case TraceKind::FaultInjected: return "FaultInjected";
  }
  return "?";
}

Bus::Bus(BusConfig config) : config_(config) {
  const ConfigCheck check = validate_bus_config(config.bitrate_bps, config.distance_m, config.allow_slow);
  if (check != ConfigCheck::Ok) throw BusError(BusErrc::InvalidConfig, to_string(check));
}

NodeHandle Bus::attach_node(const std::string& name, NodeConfig config) {
  if (running_) throw BusError(BusErrc::BusRunning, "cannot attach '" + name + "' to a running bus");
  if (find_node(name)) throw BusError(BusErrc::DuplicateName, "node '" + name + "' already attached");
  if (nodes_.size() >= kMaxNodes) throw BusError(BusErrc::TooManyNodes, "bus already has 110 nodes");
  nodes_.emplace_back(name, std::move(config));
  parts_.emplace_back();
  tx_faults_.emplace_back();
  return NodeHandle{nodes_.size() - 1};
}

std::optional<NodeHandle> Bus::find_node(const std::string& name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].name() == name) return NodeHandle{i};
  return std::nullopt;
}

void Bus::inject_fault(std::uint64_t at_bit, Level level) { faults_[at_bit] = level; }

void Bus::inject_transmission_fault(NodeHandle node, std::size_t stuffed_offset, Level level, unsigned count) {
  tx_faults_.at(node.index).push_back(TxFault{stuffed_offset, level, count});
}

std::uint64_t Bus::bits_for_us(std::uint64_t time_us) const noexcept {
  const std::uint64_t rate = config_.bitrate_bps;
  return (time_us / 1'000'000) * rate + (time_us % 1'000'000) * rate / 1'000'000;
}

double Bus::seconds(std::uint64_t time_bits) const noexcept {
  return static_cast<double>(time_bits) / static_cast<double>(config_.bitrate_bps);
}

std::vector<TraceEvent> Bus::run(const Schedule& schedule, std::uint64_t until_bits) {
  for (const auto& e : schedule.entries)
    if (!find_node(e.node))
      throw BusError(BusErrc::ScheduleForDetachedNode, "schedule names unattached node '" + e.node + "'");
  for (const auto& e : schedule.entries) {
    const std::uint64_t bit = std::max(bits_for_us(e.time_us), now_);
    releases_.push_back(Release{bit, release_seq_++, find_node(e.node)->index, e.frame});
  }
  std::stable_sort(releases_.begin() + static_cast<std::ptrdiff_t>(release_cursor_), releases_.end(),
                   [](const Release& a, const Release& b) { return a.bit < b.bit; });
  return advance_to(until_bits);
}

SubmitResult Bus::submit(NodeHandle node, const Frame& frame) { return nodes_.at(node.index).submit(frame); }

bool Bus::contenders_waiting() const {
  return std::any_of(nodes_.begin(), nodes_.end(),
                     [](const Node& n) { return n.has_pending() && n.mode() != NodeMode::BusOff; });
}

bool Bus::quiescent() const {
  return phase_ == Phase::Idle && !pending_delivery_ && release_cursor_ == releases_.size() &&
         std::none_of(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.has_pending(); });
}

std::uint64_t Bus::next_interesting_bit(std::uint64_t t, std::uint64_t until) const {
  std::uint64_t next = until;
  if (release_cursor_ < releases_.size()) next = std::min(next, std::max(releases_[release_cursor_].bit, t));
  if (auto it = faults_.lower_bound(t); it != faults_.end()) next = std::min(next, it->first);
  for (const auto& n : nodes_) {
    if (n.mode() != NodeMode::BusOff) continue;
    next = std::min(next, t + recovery_bits_remaining(n.state()) - 1);
  }
  return next;
}

std::vector<TraceEvent> Bus::advance_to(std::uint64_t until_bits) {
  running_ = true;
  const std::size_t first = trace_.size();
  while (now_ < until_bits) {
    if (phase_ == Phase::Idle && !contenders_waiting()) {
      const std::uint64_t next = next_interesting_bit(now_, until_bits);
      if (next > now_) {
        for (auto& n : nodes_)
          if (n.mode() == NodeMode::BusOff) n.observe_recessive(next - now_);
        now_ = next;
        continue;
      }
    }
    step(now_);
    ++now_;
  }
  return {trace_.begin() + static_cast<std::ptrdiff_t>(first), trace_.end()};
}

bool Bus::settled() const {
  const bool due_now = release_cursor_ < releases_.size() && releases_[release_cursor_].bit <= now_;
  return phase_ == Phase::Idle && !pending_delivery_ && !due_now &&
         std::none_of(nodes_.begin(), nodes_.end(),
                      [](const Node& n) { return n.has_pending() && n.mode() != NodeMode::BusOff; });
}

template <typename Done>
std::vector<TraceEvent> Bus::run_until(Done done, std::uint64_t horizon_bits) {
  const std::size_t first = trace_.size();
  while (!done() && now_ < horizon_bits) {
    // Jump to the next bit where the predicate could change; idle stretches
    // are skipped inside advance_to.
    std::uint64_t target = now_ + 1;
    if (phase_ == Phase::Intermission || phase_ == Phase::ErrorRecovery) target = std::max(target, phase_end_ + 1);
    if (phase_ == Phase::Idle && !contenders_waiting()) target = next_interesting_bit(now_, horizon_bits) + 1;
    advance_to(std::min(target, horizon_bits));
  }
  return {trace_.begin() + static_cast<std::ptrdiff_t>(first), trace_.end()};
}

std::vector<TraceEvent> Bus::run_until_quiescent(std::uint64_t horizon_bits) {
  return run_until([this] { return quiescent(); }, horizon_bits);
}

std::vector<TraceEvent> Bus::run_until_settled(std::uint64_t horizon_bits) {
  return run_until([this] { return settled(); }, horizon_bits);
}

void Bus::emit_named(std::uint64_t t, std::string node, TraceKind kind, const std::optional<Frame>& frame) {
  trace_.push_back(TraceEvent{t, seconds(t), std::move(node), kind, frame});
}

void Bus::emit(std::uint64_t t, std::size_t node, TraceKind kind, const std::optional<Frame>& frame) {
  emit_named(t, nodes_[node].name(), kind, frame);
}

void Bus::release_due(std::uint64_t t) {
  while (release_cursor_ < releases_.size() && releases_[release_cursor_].bit <= t) {
    const Release& r = releases_[release_cursor_++];
    // Frames offered to a bus-off node are refused, as submit() would.
    nodes_[r.node].submit(r.frame);
  }
}

std::optional<Level> Bus::absolute_fault(std::uint64_t t) {
  auto it = faults_.find(t);
  if (it == faults_.end()) return std::nullopt;
  return it->second;
}

void Bus::observe_bus_off(std::uint64_t t, Level resolved) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (n.mode() != NodeMode::BusOff) continue;
    if (resolved == Level::Dominant) {
      n.observe_dominant_bit();
      continue;
    }
    n.observe_recessive(1);
    if (n.mode() != NodeMode::BusOff) emit(t, i, TraceKind::BusOffRecovered, std::nullopt);
  }
}

void Bus::step(std::uint64_t t) {
  release_due(t);
  if ((phase_ == Phase::Intermission || phase_ == Phase::ErrorRecovery) && t >= phase_end_) {
    if (pending_delivery_) {
      trace_.push_back(*pending_delivery_);
      pending_delivery_.reset();
    }
    for (auto& [node, frame] : pending_rx_) nodes_[node].deliver(frame);
    pending_rx_.clear();
    phase_ = Phase::Idle;
  }
  if (phase_ == Phase::Idle && contenders_waiting()) start_frame(t);
  if (phase_ == Phase::InFrame) {
    step_frame(t);
    return;
  }
  Level resolved = Level::Recessive;
  if (auto f = absolute_fault(t)) {
    resolved = *f;
    emit_named(t, "", TraceKind::FaultInjected, std::nullopt);
  }
  observe_bus_off(t, resolved);
}

void Bus::start_frame(std::uint64_t t) {
  phase_ = Phase::InFrame;
  frame_start_ = t;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    Participant& p = parts_[i];
    p.active = p.transmitting = p.receiving = false;
    if (n.mode() == NodeMode::BusOff) continue;
    p.active = true;
    p.receiving = true;
    p.receiver = FrameReceiver{};
    if (!n.has_pending()) continue;
    p.transmitting = true;
    p.frame = n.head().frame;
    p.encoded = encode_frame(p.frame);
    n.begin_transmission();
    emit(t, i, n.head().attempted ? TraceKind::Retransmit : TraceKind::TxStart, p.frame);
  }
}

void Bus::step_frame(std::uint64_t t) {
  const std::size_t idx = static_cast<std::size_t>(t - frame_start_);

  driven_scratch_.clear();
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Participant& p = parts_[i];
    if (!p.active) continue;
    std::optional<Level> drive;
    if (p.transmitting) {
      drive = p.encoded.stuffed_bits[idx];
    } else if (p.receiving && p.receiver.at_ack_slot() && p.receiver.crc_matches()) {
      drive = Level::Dominant;
    }
    if (!drive) continue;
    driven_scratch_.push_back(*drive);
    if (*drive == Level::Dominant) nodes_[i].count_dominant_driven();
  }
  Level resolved = resolve_bit(driven_scratch_);

  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!parts_[i].transmitting) continue;
    for (auto& f : tx_faults_[i]) {
      if (f.remaining == 0 || f.offset != idx) continue;
      resolved = f.level;
      --f.remaining;
      emit(t, i, TraceKind::FaultInjected, parts_[i].frame);
    }
  }
  if (auto f = absolute_fault(t)) {
    resolved = *f;
    std::optional<Frame> in_flight;
    for (const auto& p : parts_)
      if (p.transmitting) {
        in_flight = p.frame;
        break;
      }
    emit_named(t, "", TraceKind::FaultInjected, in_flight);
  }

  observe_bus_off(t, resolved);

  // Transmitter read-back.
  std::optional<std::size_t> failed_tx;
  bool ack_error = false;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Participant& p = parts_[i];
    if (!p.transmitting) continue;
    const Level sent = p.encoded.stuffed_bits[idx];
    if (idx == p.encoded.ack_slot) {
      if (resolved == Level::Recessive && !failed_tx) {
        failed_tx = i;
        ack_error = true;
      }
    } else if (sent != resolved) {
      if (idx < p.encoded.arbitration_end && sent == Level::Recessive) {
        p.transmitting = false;
        nodes_[i].end_transmission(false);
        emit(t, i, TraceKind::ArbitrationLost, p.frame);
      } else if (!failed_tx || ack_error) {
        failed_tx = i;
        ack_error = false;
      }
    }
  }

  // Identical arbitration fields: the earliest attached node keeps the bus.
  std::size_t transmitters = 0;
  bool past_arbitration = true;
  for (const auto& p : parts_) {
    if (!p.transmitting) continue;
    ++transmitters;
    past_arbitration = past_arbitration && idx + 1 >= p.encoded.arbitration_end;
  }
  if (transmitters > 1 && past_arbitration && !failed_tx) {
    bool keep = true;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      Participant& p = parts_[i];
      if (!p.transmitting) continue;
      if (keep) {
        keep = false;
        continue;
      }
      p.transmitting = false;
      nodes_[i].end_transmission(false);
      emit(t, i, TraceKind::ArbitrationLost, p.frame);
    }
  }

  // Receivers. Error-passive receivers only discard locally.
  std::optional<std::size_t> detector;
  std::optional<std::size_t> local_failure;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Participant& p = parts_[i];
    if (!p.active || !p.receiving) continue;
    const auto st = p.receiver.feed(resolved);
    if (p.transmitting || st != FrameReceiver::Status::Failed) continue;
    if (nodes_[i].mode() == NodeMode::ErrorActive) {
      if (!detector) detector = i;
    } else {
      p.receiving = false;
      nodes_[i].apply(CounterEvent::RxError);
      if (!local_failure) local_failure = i;
    }
  }

  std::optional<std::size_t> tx;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (parts_[i].transmitting) {
      tx = i;
      break;
    }

  if (failed_tx) {
    abort_frame(t, failed_tx, ack_error, *failed_tx);
  } else if (detector) {
    abort_frame(t, tx, false, *detector);
  } else if (tx && idx + 1 == parts_[*tx].encoded.size()) {
    complete_frame(t, *tx);
  } else if (!tx && std::none_of(parts_.begin(), parts_.end(), [](const Participant& p) {
               return p.active && p.receiving && p.receiver.status() == FrameReceiver::Status::InProgress;
             })) {
    // Nobody left driving or decoding this frame.
    abort_frame(t, std::nullopt, false, local_failure.value_or(0));
  }
}

void Bus::abort_frame(std::uint64_t t, std::optional<std::size_t> tx, bool ack_error, std::size_t detector) {
  const std::optional<Frame> frame = tx ? std::optional<Frame>(parts_[*tx].frame) : std::nullopt;
  if (ack_error) emit(t, *tx, TraceKind::AckError, frame);
  emit(t, tx.value_or(detector), TraceKind::ErrorFrame, frame);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Participant& p = parts_[i];
    if (!p.active) continue;
    Node& n = nodes_[i];
    if (p.transmitting) {
      n.end_transmission(false);
      n.apply(CounterEvent::TxError);
      if (n.mode() == NodeMode::BusOff) emit(t, i, TraceKind::BusOffEntered, p.frame);
    } else if (p.receiving) {
      n.apply(CounterEvent::RxError);
    }
  }
  close_frame();
  phase_ = Phase::ErrorRecovery;
  phase_end_ = t + 1 + kErrorSignalBits + kIntermissionBits;
}

void Bus::complete_frame(std::uint64_t t, std::size_t tx) {
  Participant& sender = parts_[tx];
  nodes_[tx].end_transmission(true);
  nodes_[tx].apply(CounterEvent::TxSuccess);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Participant& p = parts_[i];
    if (i == tx || !p.active || !p.receiving) continue;
    if (p.receiver.status() != FrameReceiver::Status::Complete) continue;
    nodes_[i].apply(CounterEvent::RxSuccess);
    const Frame& got = *p.receiver.frame();
    if (nodes_[i].wants(got.id())) pending_rx_.emplace_back(i, got);
  }
  phase_end_ = t + 1 + kIntermissionBits;
  pending_delivery_ = TraceEvent{phase_end_, seconds(phase_end_), nodes_[tx].name(), TraceKind::FrameDelivered,
                                 sender.frame};
  close_frame();
  phase_ = Phase::Intermission;
}

void Bus::close_frame() {
  for (auto& p : parts_) p.active = p.transmitting = p.receiving = false;
}

}  // namespace vcan
