#include "vcanlab/node.hpp"

#include <algorithm>
#include <sstream>

namespace vcan {

AcceptanceFilter AcceptanceFilter::standard(std::uint32_t code, std::uint32_t mask) {
  if (code >= kStandardIdLimit || mask >= kStandardIdLimit)
    throw FrameError(FrameErrc::IdOutOfRange, "filter exceeds 11 bits");
  return {code, mask, false};
}

AcceptanceFilter AcceptanceFilter::extended_id(std::uint32_t code, std::uint32_t mask) {
  if (code >= kExtendedIdLimit || mask >= kExtendedIdLimit)
    throw FrameError(FrameErrc::IdOutOfRange, "filter exceeds 29 bits");
  return {code, mask, true};
}

bool accepts(const AcceptanceFilter& filter, const FrameId& id) {
  if (filter.extended != id.is_extended()) return false;
  return (id.value() & filter.mask) == (filter.code & filter.mask);
}

const char* to_string(NodeMode mode) noexcept {
  switch (mode) {
    case NodeMode::ErrorActive: return "ErrorActive";
    case NodeMode::ErrorPassive: return "ErrorPassive";
    case NodeMode::BusOff: return "BusOff";
  }
  return "?";
}

NodeMode mode_for(std::uint32_t tec, std::uint32_t rec) noexcept {
  if (tec > kBusOffLimit) return NodeMode::BusOff;
  if (tec > kErrorPassiveLimit || rec > kErrorPassiveLimit) return NodeMode::ErrorPassive;
  return NodeMode::ErrorActive;
}

NodeState update_counters(NodeState s, CounterEvent event) {
  // A bus-off node takes no part in traffic; only recovery changes it.
  if (s.mode == NodeMode::BusOff) return s;
  switch (event) {
    case CounterEvent::TxSuccess: s.tec = s.tec > 0 ? s.tec - 1 : 0; break;
    case CounterEvent::TxError: s.tec += kTxErrorIncrement; break;
    case CounterEvent::RxSuccess: s.rec = s.rec > 0 ? s.rec - 1 : 0; break;
    case CounterEvent::RxError: s.rec += kRxErrorIncrement; break;
  }
  s.mode = mode_for(s.tec, s.rec);
  if (s.mode == NodeMode::BusOff) {
    s.recessive_run_groups = 0;
    s.recessive_run_bits = 0;
  }
  return s;
}

NodeState observe_recovery(NodeState s, std::uint64_t bits) {
  if (s.mode != NodeMode::BusOff) throw NodeError("observe_recovery: node is not bus-off");
  const std::uint64_t total = s.recessive_run_bits + bits;
  const std::uint64_t groups = s.recessive_run_groups + total / kRecoveryGroupBits;
  if (groups >= kRecoveryGroups) return NodeState{};
  s.recessive_run_groups = static_cast<std::uint32_t>(groups);
  s.recessive_run_bits = static_cast<std::uint32_t>(total % kRecoveryGroupBits);
  return s;
}

NodeState observe_dominant(NodeState s) noexcept {
  s.recessive_run_bits = 0;
  return s;
}

std::uint64_t recovery_bits_remaining(const NodeState& s) noexcept {
  if (s.mode != NodeMode::BusOff) return 0;
  return std::uint64_t{kRecoveryGroups - s.recessive_run_groups} * kRecoveryGroupBits - s.recessive_run_bits;
}

std::string format_status(const std::string& name, const NodeStatus& st) {
  std::ostringstream os;
  os << name << " mode=" << to_string(st.mode) << " tec=" << st.tec << " rec=" << st.rec
     << " queued=" << st.queue_depth << " delivered=" << st.delivered_count;
  return os.str();
}

SubmitResult Node::submit(const Frame& frame) {
  if (state_.mode == NodeMode::BusOff) return SubmitResult::BusOffError;
  const auto first = tx_queue_.begin() + (head_in_flight_ ? 1 : 0);
  auto pos = std::find_if(first, tx_queue_.end(), [&](const Pending& p) {
    return priority_order(frame, p.frame) == Priority::AWins;
  });
  tx_queue_.insert(pos, Pending{frame, false});
  return SubmitResult::Queued;
}

void Node::end_transmission(bool delivered) {
  head_in_flight_ = false;
  if (delivered) {
    tx_queue_.erase(tx_queue_.begin());
    ++delivered_;
  } else {
    tx_queue_.front().attempted = true;
  }
}

std::vector<Frame> Node::take_received() {
  std::vector<Frame> out(rx_queue_.begin(), rx_queue_.end());
  rx_queue_.clear();
  return out;
}

NodeStatus Node::status() const {
  NodeStatus st;
  st.mode = state_.mode;
  st.tec = state_.tec;
  st.rec = state_.rec;
  st.queue_depth = tx_queue_.size();
  st.delivered_count = delivered_;
  st.received_count = received_;
  st.dominant_bits_driven = dominant_driven_;
  return st;
}

}  // namespace vcan
