#include "vcanlab/codec.hpp"

#include <cctype>
#include <cstdio>

namespace vcan {

namespace {

constexpr std::size_t kStandardHeaderBits = 19;  // SOF ID RTR IDE r0 DLC
constexpr std::size_t kExtendedHeaderBits = 39;  // SOF ID SRR IDE ID RTR r1 r0 DLC
constexpr std::size_t kCrcBits = 15;
constexpr std::size_t kIdeIndex = 13;

void push_bits(BitStream& out, std::uint32_t value, unsigned width) {
  for (unsigned i = width; i-- > 0;) out.push_back((value >> i) & 1u ? Level::Recessive : Level::Dominant);
}

std::uint32_t read_bits(const BitStream& bits, std::size_t from, unsigned width) {
  std::uint32_t v = 0;
  for (unsigned i = 0; i < width; ++i) v = (v << 1) | (bits[from + i] == Level::Recessive ? 1u : 0u);
  return v;
}

// Tracks the current run of equal levels for stuffing and destuffing.
struct RunTracker {
  Level last = Level::Recessive;
  unsigned run = 0;

  void push(Level l) {
    if (run > 0 && l == last) {
      ++run;
    } else {
      last = l;
      run = 1;
    }
  }
  bool full() const { return run == kStuffRun; }
};

BitStream unstuffed_header_and_data(const Frame& frame) {
  BitStream bits;
  bits.reserve(kExtendedHeaderBits + 64 + kCrcBits);
  bits.push_back(Level::Dominant);  // SOF
  const BitStream arb = arbitration_field(frame);
  bits.insert(bits.end(), arb.begin(), arb.end());
  if (frame.id().is_extended()) {
    bits.push_back(Level::Dominant);  // r1
  } else {
    bits.push_back(Level::Dominant);  // IDE
  }
  bits.push_back(Level::Dominant);  // r0
  push_bits(bits, frame.dlc(), 4);
  for (std::uint8_t byte : frame.payload()) push_bits(bits, byte, 8);
  return bits;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

std::optional<std::uint32_t> parse_hex(std::string_view text) {
  if (text.empty() || text.size() > 8) return std::nullopt;
  std::uint32_t v = 0;
  for (char c : text) {
    const int d = hex_value(c);
    if (d < 0) return std::nullopt;
    v = (v << 4) | static_cast<std::uint32_t>(d);
  }
  return v;
}

}  // namespace

const char* to_string(DecodeErrc kind) noexcept {
  switch (kind) {
    case DecodeErrc::Stuff: return "StuffError";
    case DecodeErrc::Crc: return "CrcError";
    case DecodeErrc::Form: return "FormError";
    case DecodeErrc::Truncated: return "TruncatedError";
  }
  return "?";
}

std::uint16_t crc15(std::span<const Level> bits) {
  std::uint16_t crc = 0;
  for (Level l : bits) {
    const bool in = l == Level::Recessive;
    const bool top = (crc >> 14) & 1u;
    crc = static_cast<std::uint16_t>((crc << 1) & 0x7FFFu);
    if (in != top) crc ^= kCrc15Polynomial;
  }
  return crc;
}

BitStream stuff(std::span<const Level> bits) {
  BitStream out;
  out.reserve(bits.size() + bits.size() / 4 + 1);
  RunTracker run;
  for (Level l : bits) {
    out.push_back(l);
    run.push(l);
    if (run.full()) {
      const Level s = complement(l);
      out.push_back(s);
      run.push(s);
    }
  }
  return out;
}

Result<BitStream, DecodeError> destuff(std::span<const Level> bits) {
  BitStream out;
  out.reserve(bits.size());
  RunTracker run;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const Level l = bits[i];
    if (run.full()) {
      if (l == run.last) return DecodeError{DecodeErrc::Stuff, i};
      run.push(l);
      continue;
    }
    out.push_back(l);
    run.push(l);
  }
  return out;
}

EncodedFrame encode_frame(const Frame& frame) {
  BitStream raw = unstuffed_header_and_data(frame);
  EncodedFrame enc;
  enc.crc = crc15(raw);
  push_bits(raw, enc.crc, kCrcBits);

  const std::size_t rtr_index = frame.id().is_extended() ? 32 : 12;
  enc.stuffed_bits.reserve(raw.size() + raw.size() / 4 + 1 + kFrameTrailerBits);
  RunTracker run;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    enc.stuffed_bits.push_back(raw[i]);
    run.push(raw[i]);
    if (i == rtr_index) enc.arbitration_end = enc.stuffed_bits.size();
    if (run.full()) {
      const Level s = complement(raw[i]);
      enc.stuffed_bits.push_back(s);
      run.push(s);
      ++enc.stuff_count;
    }
  }
  enc.stuffed_region_end = enc.stuffed_bits.size();
  enc.ack_slot = enc.stuffed_region_end + 1;
  enc.stuffed_bits.insert(enc.stuffed_bits.end(), kFrameTrailerBits, Level::Recessive);
  return enc;
}

std::size_t frame_bit_length(const Frame& frame, bool stuffed) {
  if (stuffed) return encode_frame(frame).size();
  const std::size_t header = frame.id().is_extended() ? kExtendedHeaderBits : kStandardHeaderBits;
  return header + 8 * frame.payload().size() + kCrcBits + kFrameTrailerBits;
}

Result<Frame, DecodeError> decode_frame(std::span<const Level> bits) {
  FrameReceiver rx;
  for (Level l : bits) {
    switch (rx.feed(l)) {
      case FrameReceiver::Status::Failed: return *rx.error();
      case FrameReceiver::Status::Complete: return *rx.frame();
      case FrameReceiver::Status::InProgress: break;
    }
  }
  return DecodeError{DecodeErrc::Truncated, bits.empty() ? 0 : bits.size() - 1};
}

// --- FrameReceiver -----------------------------------------------------------

FrameReceiver::Status FrameReceiver::fail(DecodeErrc kind) {
  error_ = DecodeError{kind, offset_};
  status_ = Status::Failed;
  return status_;
}

FrameReceiver::Status FrameReceiver::feed(Level level) {
  if (status_ != Status::InProgress) return status_;
  Status st = Status::InProgress;
  switch (field_) {
    case Field::Region:
      st = on_region_bit(level);
      break;
    case Field::CrcDelimiter:
      if (level != Level::Recessive) return fail(DecodeErrc::Form);
      field_ = Field::AckSlot;
      break;
    case Field::AckSlot:
      field_ = Field::AckDelimiter;
      break;
    case Field::AckDelimiter:
      if (level != Level::Recessive) return fail(DecodeErrc::Form);
      if (!crc_ok_) return fail(DecodeErrc::Crc);
      field_ = Field::Eof;
      break;
    case Field::Eof:
      if (level != Level::Recessive) return fail(DecodeErrc::Form);
      if (++eof_seen_ == kEofBits) {
        field_ = Field::Done;
        status_ = st = Status::Complete;
      }
      break;
    case Field::Done:
      break;
  }
  if (status_ == Status::Failed) return status_;
  ++offset_;
  return st;
}

FrameReceiver::Status FrameReceiver::on_region_bit(Level level) {
  if (run_ == kStuffRun) {
    if (level == last_) return fail(DecodeErrc::Stuff);
    last_ = level;
    run_ = 1;
    if (region_length_ != 0 && unstuffed_.size() == region_length_) finish_region();
    return Status::InProgress;
  }
  if (offset_ == 0 && level != Level::Dominant) return fail(DecodeErrc::Form);

  unstuffed_.push_back(level);
  if (run_ > 0 && level == last_) {
    ++run_;
  } else {
    last_ = level;
    run_ = 1;
  }

  const std::size_t n = unstuffed_.size();
  if (region_length_ == 0 && n > kIdeIndex) {
    const bool extended = unstuffed_[kIdeIndex] == Level::Recessive;
    const std::size_t header = extended ? kExtendedHeaderBits : kStandardHeaderBits;
    if (n == header) {
      const std::uint32_t dlc = read_bits(unstuffed_, header - 4, 4);
      if (dlc > kMaxPayload) return fail(DecodeErrc::Form);
      const bool remote = unstuffed_[extended ? 32 : 12] == Level::Recessive;
      region_length_ = header + (remote ? 0 : 8 * dlc) + kCrcBits;
    }
  }
  if (region_length_ != 0 && n == region_length_ && run_ != kStuffRun) finish_region();
  return Status::InProgress;
}

void FrameReceiver::finish_region() {
  const std::size_t body = region_length_ - kCrcBits;
  const std::uint16_t expected = crc15(std::span<const Level>(unstuffed_.data(), body));
  crc_ok_ = expected == read_bits(unstuffed_, body, kCrcBits);

  const bool extended = unstuffed_[kIdeIndex] == Level::Recessive;
  const std::size_t header = extended ? kExtendedHeaderBits : kStandardHeaderBits;
  const unsigned dlc = read_bits(unstuffed_, header - 4, 4);
  const bool remote = unstuffed_[extended ? 32 : 12] == Level::Recessive;
  const FrameId id = extended ? FrameId::extended((read_bits(unstuffed_, 1, 11) << 18) | read_bits(unstuffed_, 14, 18))
                              : FrameId::standard(read_bits(unstuffed_, 1, 11));
  if (remote) {
    frame_ = Frame::remote(id, dlc);
  } else {
    std::array<std::uint8_t, kMaxPayload> bytes{};
    for (unsigned i = 0; i < dlc; ++i) bytes[i] = static_cast<std::uint8_t>(read_bits(unstuffed_, header + 8 * i, 8));
    frame_ = Frame::data(id, std::span<const std::uint8_t>(bytes.data(), dlc));
  }
  field_ = Field::CrcDelimiter;
}

// --- text forms --------------------------------------------------------------

std::string to_bit_string(std::span<const Level> bits) {
  std::string s;
  s.reserve(bits.size());
  for (Level l : bits) s.push_back(l == Level::Recessive ? '1' : '0');
  return s;
}

std::optional<BitStream> parse_bit_string(std::string_view text) {
  BitStream bits;
  bits.reserve(text.size());
  for (char c : text) {
    if (c == '0') {
      bits.push_back(Level::Dominant);
    } else if (c == '1') {
      bits.push_back(Level::Recessive);
    } else {
      return std::nullopt;
    }
  }
  return bits;
}

std::string format_candump(const Frame& frame) {
  char buf[32];
  if (frame.id().is_extended()) {
    std::snprintf(buf, sizeof buf, "%08X#", static_cast<unsigned>(frame.id().value()));
  } else {
    std::snprintf(buf, sizeof buf, "%03X#", static_cast<unsigned>(frame.id().value()));
  }
  std::string s = buf;
  if (frame.is_remote()) {
    s.push_back('R');
    if (frame.dlc() > 0) s.push_back(static_cast<char>('0' + frame.dlc()));
    return s;
  }
  for (std::uint8_t b : frame.payload()) {
    std::snprintf(buf, sizeof buf, "%02X", b);
    s += buf;
  }
  return s;
}

std::optional<Frame> parse_candump(std::string_view text) {
  const auto hash = text.find('#');
  if (hash == std::string_view::npos) return std::nullopt;
  const std::string_view id_text = text.substr(0, hash);
  std::string_view rest = text.substr(hash + 1);
  const auto id_value = parse_hex(id_text);
  if (!id_value) return std::nullopt;
  try {
    FrameId id = id_text.size() == 8 ? FrameId::extended(*id_value)
                 : id_text.size() == 3 ? FrameId::standard(*id_value)
                                       : throw FrameError(FrameErrc::IdOutOfRange, "id must be 3 or 8 hex digits");
    if (!rest.empty() && (rest[0] == 'R' || rest[0] == 'r')) {
      if (rest.size() == 1) return Frame::remote(id, 0);
      if (rest.size() == 2 && rest[1] >= '0' && rest[1] <= '8') return Frame::remote(id, static_cast<unsigned>(rest[1] - '0'));
      return std::nullopt;
    }
    if (rest.size() % 2 != 0 || rest.size() > 2 * kMaxPayload) return std::nullopt;
    std::array<std::uint8_t, kMaxPayload> bytes{};
    const std::size_t n = rest.size() / 2;
    for (std::size_t i = 0; i < n; ++i) {
      const auto b = parse_hex(rest.substr(2 * i, 2));
      if (!b) return std::nullopt;
      bytes[i] = static_cast<std::uint8_t>(*b);
    }
    return Frame::data(id, std::span<const std::uint8_t>(bytes.data(), n));
  } catch (const FrameError&) {
    return std::nullopt;
  }
}

}  // namespace vcan
