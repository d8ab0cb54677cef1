#include "vcanlab/frame.hpp"

#include <algorithm>

namespace vcan {

FrameId FrameId::standard(std::uint32_t value) {
  if (value >= kStandardIdLimit) throw FrameError(FrameErrc::IdOutOfRange, "standard id exceeds 11 bits");
  return FrameId(value, false);
}

FrameId FrameId::extended(std::uint32_t value) {
  if (value >= kExtendedIdLimit) throw FrameError(FrameErrc::IdOutOfRange, "extended id exceeds 29 bits");
  return FrameId(value, true);
}

Frame Frame::data(FrameId id, std::span<const std::uint8_t> payload) {
  if (payload.size() > kMaxPayload) throw FrameError(FrameErrc::PayloadTooLong, "payload longer than 8 bytes");
  Frame f(id, FrameKind::Data, static_cast<unsigned>(payload.size()));
  std::copy(payload.begin(), payload.end(), f.payload_.begin());
  return f;
}

Frame Frame::remote(FrameId id, unsigned dlc) {
  if (dlc > kMaxPayload) throw FrameError(FrameErrc::DlcOutOfRange, "dlc greater than 8");
  return Frame(id, FrameKind::Remote, dlc);
}

bool operator==(const Frame& a, const Frame& b) {
  if (a.id_ != b.id_ || a.kind_ != b.kind_ || a.dlc_ != b.dlc_) return false;
  auto pa = a.payload();
  auto pb = b.payload();
  return std::equal(pa.begin(), pa.end(), pb.begin(), pb.end());
}

namespace {

void push_bits(BitStream& out, std::uint32_t value, unsigned width) {
  for (unsigned i = width; i-- > 0;) out.push_back((value >> i) & 1u ? Level::Recessive : Level::Dominant);
}

Level rtr_level(const Frame& f) { return f.is_remote() ? Level::Recessive : Level::Dominant; }

// Arbitration field plus, for standard frames, the dominant IDE bit that
// decides a standard/extended contest when the top 11 bits and RTR/SRR tie.
BitStream contention_bits(const Frame& f) {
  BitStream bits = arbitration_field(f);
  if (!f.id().is_extended()) bits.push_back(Level::Dominant);
  return bits;
}

}  // namespace

BitStream arbitration_field(const Frame& frame) {
  BitStream bits;
  const auto id = frame.id().value();
  if (frame.id().is_extended()) {
    bits.reserve(32);
    push_bits(bits, id >> 18, 11);
    bits.push_back(Level::Recessive);  // SRR
    bits.push_back(Level::Recessive);  // IDE
    push_bits(bits, id & 0x3FFFFu, 18);
  } else {
    bits.reserve(12);
    push_bits(bits, id, 11);
  }
  bits.push_back(rtr_level(frame));
  return bits;
}

Priority priority_order(const Frame& a, const Frame& b) {
  const BitStream ba = contention_bits(a);
  const BitStream bb = contention_bits(b);
  const std::size_t n = std::min(ba.size(), bb.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (ba[i] == bb[i]) continue;
    return ba[i] == Level::Dominant ? Priority::AWins : Priority::BWins;
  }
  // Mixed formats always differ at IDE, so equal-length prefixes mean the same format.
  return Priority::Tie;
}

}  // namespace vcan
