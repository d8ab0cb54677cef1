#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "vcanlab/frame.hpp"
#include "vcanlab/result.hpp"

namespace vcan {

inline constexpr std::uint16_t kCrc15Polynomial = 0x4599;
inline constexpr unsigned kStuffRun = 5;
// CRC delimiter, ACK slot, ACK delimiter and 7 EOF bits. Never stuffed.
inline constexpr std::size_t kFrameTrailerBits = 10;
inline constexpr std::size_t kEofBits = 7;

enum class DecodeErrc { Stuff, Crc, Form, Truncated };

struct DecodeError {
  DecodeErrc kind;
  std::size_t offset;  // position in the (stuffed) input stream

  friend bool operator==(const DecodeError&, const DecodeError&) = default;
};

const char* to_string(DecodeErrc kind) noexcept;

std::uint16_t crc15(std::span<const Level> bits);

// Inserts the complement level after every run of five equal levels in the
// output so far (stuff bits count towards the following run).
BitStream stuff(std::span<const Level> bits);
Result<BitStream, DecodeError> destuff(std::span<const Level> bits);

struct EncodedFrame {
  BitStream stuffed_bits;
  std::uint16_t crc = 0;
  std::size_t stuff_count = 0;
  // Stuffed positions used by a transmitter to interpret bus read-back.
  std::size_t arbitration_end = 0;  // one past the RTR bit
  std::size_t stuffed_region_end = 0;  // one past the last CRC (or trailing stuff) bit
  std::size_t ack_slot = 0;

  std::size_t size() const noexcept { return stuffed_bits.size(); }
};

EncodedFrame encode_frame(const Frame& frame);
Result<Frame, DecodeError> decode_frame(std::span<const Level> bits);
std::size_t frame_bit_length(const Frame& frame, bool stuffed);

// Bit-serial receiver. Consumes the levels a node samples from SOF onwards and
// reports errors at the bit where a serial receiver detects them: stuff errors
// inside SOF..CRC, form errors on the fixed-form bits, and a CRC mismatch once
// the ACK delimiter has been sampled.
class FrameReceiver {
 public:
  enum class Status { InProgress, Complete, Failed };

  Status feed(Level level);

  Status status() const noexcept { return status_; }
  // True when the next sampled bit is the ACK slot.
  bool at_ack_slot() const noexcept { return status_ == Status::InProgress && field_ == Field::AckSlot; }
  // Valid once the stuffed region is complete.
  bool crc_matches() const noexcept { return crc_ok_; }
  std::size_t consumed() const noexcept { return offset_; }
  const std::optional<DecodeError>& error() const noexcept { return error_; }
  // Decoded frame; available once Complete.
  const std::optional<Frame>& frame() const noexcept { return frame_; }

 private:
  enum class Field { Region, CrcDelimiter, AckSlot, AckDelimiter, Eof, Done };

  Status fail(DecodeErrc kind);
  Status on_region_bit(Level level);
  void finish_region();

  Status status_ = Status::InProgress;
  Field field_ = Field::Region;
  std::size_t offset_ = 0;  // stuffed position of the bit being consumed
  std::optional<DecodeError> error_;
  std::optional<Frame> frame_;

  Level last_ = Level::Recessive;
  unsigned run_ = 0;
  std::size_t eof_seen_ = 0;

  BitStream unstuffed_;
  std::size_t region_length_ = 0;  // unstuffed SOF..CRC length, 0 while unknown
  bool crc_ok_ = false;
};

// Text renderings used by the command line tools.
std::string to_bit_string(std::span<const Level> bits);
std::optional<BitStream> parse_bit_string(std::string_view text);

// candump-style `<ID-hex>#<DATA-hex>`; remote frames render as `<ID>#R` or `<ID>#R<dlc>`.
std::string format_candump(const Frame& frame);
std::optional<Frame> parse_candump(std::string_view text);

}  // namespace vcan
