#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace vcan {

// Logical bus level. Dominant overrides recessive when driven together.
enum class Level : std::uint8_t { Dominant = 0, Recessive = 1 };

using BitStream = std::vector<Level>;

constexpr Level complement(Level l) noexcept {
  return l == Level::Dominant ? Level::Recessive : Level::Dominant;
}

enum class FrameErrc { IdOutOfRange, PayloadTooLong, DlcOutOfRange };

class FrameError : public std::invalid_argument {
 public:
  FrameError(FrameErrc code, const char* what) : std::invalid_argument(what), code_(code) {}
  FrameErrc code() const noexcept { return code_; }

 private:
  FrameErrc code_;
};

inline constexpr std::uint32_t kStandardIdLimit = 1u << 11;
inline constexpr std::uint32_t kExtendedIdLimit = 1u << 29;
inline constexpr std::size_t kMaxPayload = 8;

// 11-bit (CAN 2.0A) or 29-bit (CAN 2.0B) identifier. Out-of-range values are
// rejected, never truncated.
class FrameId {
 public:
  static FrameId standard(std::uint32_t value);
  static FrameId extended(std::uint32_t value);

  bool is_extended() const noexcept { return extended_; }
  std::uint32_t value() const noexcept { return value_; }
  unsigned width() const noexcept { return extended_ ? 29 : 11; }

  friend bool operator==(const FrameId&, const FrameId&) = default;

 private:
  FrameId(std::uint32_t value, bool extended) : value_(value), extended_(extended) {}

  std::uint32_t value_;
  bool extended_;
};

enum class FrameKind : std::uint8_t { Data, Remote };

// A data or remote frame. Data frames carry exactly dlc payload bytes; remote
// frames carry none but keep the requested dlc.
class Frame {
 public:
  static Frame data(FrameId id, std::span<const std::uint8_t> payload);
  static Frame data(FrameId id, std::initializer_list<std::uint8_t> payload) {
    return data(id, std::span<const std::uint8_t>(payload.begin(), payload.size()));
  }
  static Frame remote(FrameId id, unsigned dlc);

  const FrameId& id() const noexcept { return id_; }
  FrameKind kind() const noexcept { return kind_; }
  bool is_remote() const noexcept { return kind_ == FrameKind::Remote; }
  unsigned dlc() const noexcept { return dlc_; }
  std::span<const std::uint8_t> payload() const noexcept {
    return {payload_.data(), is_remote() ? 0u : dlc_};
  }

  friend bool operator==(const Frame& a, const Frame& b);

 private:
  Frame(FrameId id, FrameKind kind, unsigned dlc) : id_(id), kind_(kind), dlc_(dlc) {}

  FrameId id_;
  FrameKind kind_;
  std::uint8_t dlc_;
  std::array<std::uint8_t, kMaxPayload> payload_{};
};

// Arbitration field as it appears on the wire, most significant bit first.
// Standard: ID[10..0], RTR. Extended: ID[28..18], SRR, IDE, ID[17..0], RTR.
BitStream arbitration_field(const Frame& frame);

enum class Priority { AWins, BWins, Tie };

constexpr Priority inverted(Priority p) noexcept {
  return p == Priority::AWins ? Priority::BWins : p == Priority::BWins ? Priority::AWins : Priority::Tie;
}

// Which frame survives bitwise arbitration if both start in the same bit.
Priority priority_order(const Frame& a, const Frame& b);

}  // namespace vcan
