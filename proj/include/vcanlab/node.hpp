#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcanlab/frame.hpp"

namespace vcan {

// Code/mask acceptance filter for one identifier class.
struct AcceptanceFilter {
  std::uint32_t code = 0;
  std::uint32_t mask = 0;
  bool extended = false;

  // Throws FrameError(IdOutOfRange) when code or mask exceed the id width.
  static AcceptanceFilter standard(std::uint32_t code, std::uint32_t mask);
  static AcceptanceFilter extended_id(std::uint32_t code, std::uint32_t mask);

  friend bool operator==(const AcceptanceFilter&, const AcceptanceFilter&) = default;
};

// Identifiers of the other class never match.
bool accepts(const AcceptanceFilter& filter, const FrameId& id);

enum class NodeMode { ErrorActive, ErrorPassive, BusOff };
const char* to_string(NodeMode mode) noexcept;

enum class CounterEvent { TxSuccess, TxError, RxSuccess, RxError };

inline constexpr std::uint32_t kTxErrorIncrement = 8;
inline constexpr std::uint32_t kRxErrorIncrement = 1;
inline constexpr std::uint32_t kErrorPassiveLimit = 127;
inline constexpr std::uint32_t kBusOffLimit = 255;
inline constexpr std::uint32_t kRecoveryGroupBits = 11;
inline constexpr std::uint32_t kRecoveryGroups = 128;

// Fault-confinement state. `mode` is always derived from the counters.
struct NodeState {
  std::uint32_t tec = 0;
  std::uint32_t rec = 0;
  NodeMode mode = NodeMode::ErrorActive;
  std::uint32_t recessive_run_groups = 0;
  std::uint32_t recessive_run_bits = 0;  // bits of the group in progress

  friend bool operator==(const NodeState&, const NodeState&) = default;
};

NodeMode mode_for(std::uint32_t tec, std::uint32_t rec) noexcept;

NodeState update_counters(NodeState state, CounterEvent event);

class NodeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Feeds a stretch of consecutive recessive bits to a bus-off node. Throws
// NodeError when the node is not bus-off.
NodeState observe_recovery(NodeState state, std::uint64_t consecutive_recessive_bits);
// A dominant bit breaks the group in progress; completed groups are kept.
NodeState observe_dominant(NodeState state) noexcept;
// Recessive bits still needed to leave bus-off.
std::uint64_t recovery_bits_remaining(const NodeState& state) noexcept;

struct NodeStatus {
  NodeMode mode = NodeMode::ErrorActive;
  std::uint32_t tec = 0;
  std::uint32_t rec = 0;
  std::size_t queue_depth = 0;
  std::uint64_t delivered_count = 0;  // frames this node transmitted successfully
  std::uint64_t received_count = 0;   // frames accepted by its filter
  std::uint64_t dominant_bits_driven = 0;
};

// `<name> mode=<M> tec=<n> rec=<n> queued=<n> delivered=<n>`
std::string format_status(const std::string& name, const NodeStatus& status);

enum class SubmitResult { Queued, BusOffError };

struct NodeConfig {
  std::optional<AcceptanceFilter> filter;  // none: accept everything
};

// Controller state for one attached node: transmit queue, received frames and
// fault confinement. Owned and driven by Bus.
class Node {
 public:
  struct Pending {
    Frame frame;
    bool attempted = false;
  };

  Node(std::string name, NodeConfig config) : name_(std::move(name)), config_(std::move(config)) {}

  const std::string& name() const noexcept { return name_; }
  const NodeConfig& config() const noexcept { return config_; }
  const NodeState& state() const noexcept { return state_; }
  NodeMode mode() const noexcept { return state_.mode; }

  // Queue in priority order, FIFO among equal arbitration fields.
  SubmitResult submit(const Frame& frame);
  bool has_pending() const noexcept { return !tx_queue_.empty(); }
  const Pending& head() const { return tx_queue_.front(); }
  // While the head is on the wire, new submissions queue behind it.
  void begin_transmission() noexcept { head_in_flight_ = true; }
  void end_transmission(bool delivered);

  void apply(CounterEvent event) { state_ = update_counters(state_, event); }
  void observe_recessive(std::uint64_t bits) { state_ = observe_recovery(state_, bits); }
  void observe_dominant_bit() { state_ = observe_dominant(state_); }

  bool wants(const FrameId& id) const { return !config_.filter || accepts(*config_.filter, id); }
  void deliver(const Frame& frame) {
    rx_queue_.push_back(frame);
    ++received_;
  }
  std::vector<Frame> take_received();

  void count_dominant_driven() noexcept { ++dominant_driven_; }

  NodeStatus status() const;

 private:
  std::string name_;
  NodeConfig config_;
  NodeState state_;
  std::vector<Pending> tx_queue_;
  bool head_in_flight_ = false;
  std::deque<Frame> rx_queue_;
  std::uint64_t delivered_ = 0;
  std::uint64_t received_ = 0;
  std::uint64_t dominant_driven_ = 0;
};

}  // namespace vcan
