#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "vcanlab/bus.hpp"
#include "vcanlab/frame.hpp"
#include "vcanlab/result.hpp"

namespace vcan::gateway {

inline constexpr char kCr = '\r';
inline constexpr char kBel = '\x07';
// Longest line (`T` + 8 id + dlc + 16 data) without its CR.
inline constexpr std::size_t kMaxLineBody = 27;

enum class ParseErrc { BadCommand, BadHex, BadDlc, IdOutOfRange, LengthMismatch, Overflow };
const char* to_string(ParseErrc code) noexcept;

// `t<iii><d><data>` / `T<iiiiiiii><d><data>` / `r<iii><d>` / `R<iiiiiiii><d>`,
// uppercase hex, optionally CR terminated.
Result<Frame, ParseErrc> parse_serial_line(std::string_view line);
// Canonical CR-terminated line.
std::string format_serial_line(const Frame& frame);

// One serial client bridged onto a bus node. Feed bytes with pump(); complete
// lines are submitted to the node and answered with CR (accepted) or BEL
// (rejected); frames the node received are appended as lines.
class GatewaySession {
 public:
  GatewaySession(Bus& bus, NodeHandle node) : bus_(&bus), node_(node) {}

  std::string pump(std::string_view incoming);

  NodeHandle node() const noexcept { return node_; }
  std::uint64_t frames_in() const noexcept { return frames_in_; }
  std::uint64_t frames_out() const noexcept { return frames_out_; }
  std::uint64_t parse_errors() const noexcept { return parse_errors_; }
  std::size_t buffered() const noexcept { return rx_buffer_.size(); }

 private:
  void handle_line(std::string& out);

  Bus* bus_;
  NodeHandle node_;
  std::string rx_buffer_;
  bool discarding_ = false;  // dropping the rest of an overlong line
  std::uint64_t frames_in_ = 0;
  std::uint64_t frames_out_ = 0;
  std::uint64_t parse_errors_ = 0;
};

std::string gateway_pump(GatewaySession& session, std::string_view incoming);

}  // namespace vcan::gateway
