#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcanlab/codec.hpp"
#include "vcanlab/frame.hpp"
#include "vcanlab/node.hpp"

namespace vcan {

inline constexpr std::uint32_t kMinBitrate = 20'000;
inline constexpr std::uint32_t kMaxBitrate = 1'000'000;
inline constexpr double kMaxRateDistance = 5e7;  // bit/s * m
inline constexpr std::size_t kMaxNodes = 110;
inline constexpr std::uint32_t kIntermissionBits = 3;
// Error flag (6) plus error delimiter (8). Signalled as a trace event; the
// wire stays recessive for this long.
inline constexpr std::uint32_t kErrorSignalBits = 14;

enum class ConfigCheck { Ok, RateRangeError, RateDistanceError, DistanceError };
const char* to_string(ConfigCheck check) noexcept;

// Below-band rates (< 20 kbit/s) are only accepted with `allow_slow`; the
// rate-distance product applies either way.
ConfigCheck validate_bus_config(double bitrate_bps, double distance_m, bool allow_slow = false);

struct BusConfig {
  std::uint32_t bitrate_bps = 1'000'000;
  double distance_m = 40.0;
  bool allow_slow = false;
};

// Wired-AND: dominant if anyone drives dominant, recessive (idle) otherwise.
Level resolve_bit(std::span<const Level> driven) noexcept;

enum class TraceKind {
  TxStart,
  ArbitrationLost,
  FrameDelivered,
  AckError,
  ErrorFrame,
  Retransmit,
  BusOffEntered,
  BusOffRecovered,
  FaultInjected,
};
const char* to_string(TraceKind kind) noexcept;

struct TraceEvent {
  std::uint64_t time_bits = 0;
  double time_s = 0.0;
  std::string node;
  TraceKind kind = TraceKind::TxStart;
  std::optional<Frame> frame;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct ScheduleEntry {
  std::uint64_t time_us = 0;
  std::string node;
  Frame frame;
};

struct Schedule {
  std::vector<ScheduleEntry> entries;
};

enum class BusErrc { InvalidConfig, TooManyNodes, DuplicateName, BusRunning, ScheduleForDetachedNode, UnknownNode };

class BusError : public std::runtime_error {
 public:
  BusError(BusErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  BusErrc code() const noexcept { return code_; }

 private:
  BusErrc code_;
};

struct NodeHandle {
  std::size_t index = 0;
  friend bool operator==(const NodeHandle&, const NodeHandle&) = default;
};

// Discrete-event virtual bus stepped in nominal bit times. Single-threaded
// and deterministic: equal configuration, nodes, schedule and faults give an
// identical trace.
class Bus {
 public:
  explicit Bus(BusConfig config);

  const BusConfig& config() const noexcept { return config_; }

  NodeHandle attach_node(const std::string& name, NodeConfig config = {});
  std::optional<NodeHandle> find_node(const std::string& name) const;
  std::size_t node_count() const noexcept { return nodes_.size(); }
  const Node& node(NodeHandle h) const { return nodes_.at(h.index); }

  // Overrides the resolved level at an absolute bit time.
  void inject_fault(std::uint64_t at_bit, Level level);
  // Overrides the resolved level at `stuffed_offset` (from SOF) of the next
  // `count` transmissions started by `node`.
  void inject_transmission_fault(NodeHandle node, std::size_t stuffed_offset, Level level, unsigned count = 1);

  // Queues the schedule and simulates up to (excluding) `until_bits`.
  // Returns the events produced by this call.
  std::vector<TraceEvent> run(const Schedule& schedule, std::uint64_t until_bits);

  SubmitResult submit(NodeHandle node, const Frame& frame);
  std::vector<TraceEvent> advance_to(std::uint64_t until_bits);
  // Runs until nothing is scheduled, queued or on the wire, or the horizon.
  std::vector<TraceEvent> run_until_quiescent(std::uint64_t horizon_bits);
  bool quiescent() const;
  // Like run_until_quiescent but ignores frames scheduled for later.
  std::vector<TraceEvent> run_until_settled(std::uint64_t horizon_bits);
  bool settled() const;

  std::uint64_t now() const noexcept { return now_; }
  const std::vector<TraceEvent>& trace() const noexcept { return trace_; }
  NodeStatus status(NodeHandle h) const { return nodes_.at(h.index).status(); }
  std::vector<Frame> take_received(NodeHandle h) { return nodes_.at(h.index).take_received(); }

  std::uint64_t bits_for_us(std::uint64_t time_us) const noexcept;
  double seconds(std::uint64_t time_bits) const noexcept;

 private:
  enum class Phase { Idle, InFrame, Intermission, ErrorRecovery };

  struct Participant {
    bool active = false;         // takes part in the current frame
    bool transmitting = false;   // still driving its own frame
    bool receiving = false;      // receiver still consuming bits
    EncodedFrame encoded;
    Frame frame = Frame::remote(FrameId::standard(0), 0);
    FrameReceiver receiver;
  };

  struct TxFault {
    std::size_t offset;
    Level level;
    unsigned remaining;
  };

  struct Release {
    std::uint64_t bit;
    std::size_t seq;
    std::size_t node;
    Frame frame;
  };

  void step(std::uint64_t t);
  void release_due(std::uint64_t t);
  void start_frame(std::uint64_t t);
  void step_frame(std::uint64_t t);
  void observe_bus_off(std::uint64_t t, Level resolved);
  void abort_frame(std::uint64_t t, std::optional<std::size_t> tx, bool ack_error, std::size_t detector);
  void complete_frame(std::uint64_t t, std::size_t tx);
  void close_frame();
  std::optional<Level> absolute_fault(std::uint64_t t);
  std::uint64_t next_interesting_bit(std::uint64_t t, std::uint64_t until) const;
  void emit(std::uint64_t t, std::size_t node, TraceKind kind, const std::optional<Frame>& frame);
  void emit_named(std::uint64_t t, std::string node, TraceKind kind, const std::optional<Frame>& frame);
  bool contenders_waiting() const;
  template <typename Done>
  std::vector<TraceEvent> run_until(Done done, std::uint64_t horizon_bits);

  BusConfig config_;
  std::vector<Node> nodes_;
  std::vector<Participant> parts_;
  std::vector<std::vector<TxFault>> tx_faults_;
  std::map<std::uint64_t, Level> faults_;
  std::vector<Release> releases_;  // sorted by (bit, seq)
  std::size_t release_cursor_ = 0;
  std::size_t release_seq_ = 0;

  Phase phase_ = Phase::Idle;
  std::uint64_t phase_end_ = 0;
  std::uint64_t frame_start_ = 0;
  std::optional<TraceEvent> pending_delivery_;
  std::vector<std::pair<std::size_t, Frame>> pending_rx_;

  bool running_ = false;
  std::uint64_t now_ = 0;
  std::vector<TraceEvent> trace_;
  std::vector<Level> driven_scratch_;
};

}  // namespace vcan
