#include "vcanlab/gateway.hpp"

#include <array>
#include <cstdio>

namespace vcan::gateway {

namespace {

int upper_hex(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

const char* to_string(ParseErrc code) noexcept {
  switch (code) {
    case ParseErrc::BadCommand: return "BadCommand";
    case ParseErrc::BadHex: return "BadHex";
    case ParseErrc::BadDlc: return "BadDlc";
    case ParseErrc::IdOutOfRange: return "IdOutOfRange";
    case ParseErrc::LengthMismatch: return "LengthMismatch";
    case ParseErrc::Overflow: return "Overflow";
  }
  return "?";
}

Result<Frame, ParseErrc> parse_serial_line(std::string_view line) {
  if (!line.empty() && line.back() == kCr) line.remove_suffix(1);
  if (line.size() > kMaxLineBody) return ParseErrc::Overflow;
  if (line.empty()) return ParseErrc::BadCommand;

  const char cmd = line[0];
  bool extended = false;
  bool remote = false;
  switch (cmd) {
    case 't': break;
    case 'T': extended = true; break;
    case 'r': remote = true; break;
    case 'R': extended = remote = true; break;
    default: return ParseErrc::BadCommand;
  }
  const std::size_t id_digits = extended ? 8 : 3;
  if (line.size() < 1 + id_digits + 1) return ParseErrc::LengthMismatch;

  std::uint32_t id = 0;
  for (std::size_t i = 1; i <= id_digits; ++i) {
    const int d = upper_hex(line[i]);
    if (d < 0) return ParseErrc::BadHex;
    id = (id << 4) | static_cast<std::uint32_t>(d);
  }
  const int dlc = upper_hex(line[1 + id_digits]);
  if (dlc < 0) return ParseErrc::BadHex;
  if (dlc > 8) return ParseErrc::BadDlc;
  if (id >= (extended ? kExtendedIdLimit : kStandardIdLimit)) return ParseErrc::IdOutOfRange;

  const std::string_view data = line.substr(2 + id_digits);
  const FrameId fid = extended ? FrameId::extended(id) : FrameId::standard(id);
  if (remote) {
    if (!data.empty()) return ParseErrc::LengthMismatch;
    return Frame::remote(fid, static_cast<unsigned>(dlc));
  }
  for (char c : data)
    if (upper_hex(c) < 0) return ParseErrc::BadHex;
  if (data.size() != 2 * static_cast<std::size_t>(dlc)) return ParseErrc::LengthMismatch;
  std::array<std::uint8_t, kMaxPayload> bytes{};
  for (int i = 0; i < dlc; ++i)
    bytes[i] = static_cast<std::uint8_t>((upper_hex(data[2 * i]) << 4) | upper_hex(data[2 * i + 1]));
  return Frame::data(fid, std::span<const std::uint8_t>(bytes.data(), static_cast<std::size_t>(dlc)));
}

std::string format_serial_line(const Frame& frame) {
  char buf[40];
  const bool ext = frame.id().is_extended();
  const char cmd = frame.is_remote() ? (ext ? 'R' : 'r') : (ext ? 'T' : 't');
  int n = ext ? std::snprintf(buf, sizeof buf, "%c%08X%u", cmd, static_cast<unsigned>(frame.id().value()), frame.dlc())
              : std::snprintf(buf, sizeof buf, "%c%03X%u", cmd, static_cast<unsigned>(frame.id().value()), frame.dlc());
  std::string s(buf, static_cast<std::size_t>(n));
  for (std::uint8_t b : frame.payload()) {
    std::snprintf(buf, sizeof buf, "%02X", b);
    s += buf;
  }
  s.push_back(kCr);
  return s;
}

void GatewaySession::handle_line(std::string& out) {
  const auto parsed = parse_serial_line(rx_buffer_);
  rx_buffer_.clear();
  if (!parsed) {
    ++parse_errors_;
    out.push_back(kBel);
    return;
  }
  if (bus_->submit(node_, parsed.value()) != SubmitResult::Queued) {
    out.push_back(kBel);
    return;
  }
  ++frames_in_;
  out.push_back(kCr);
}

std::string GatewaySession::pump(std::string_view incoming) {
  std::string out;
  for (char c : incoming) {
    if (c == kCr) {
      if (discarding_) {
        discarding_ = false;
        continue;
      }
      handle_line(out);
      continue;
    }
    if (discarding_) continue;
    if (rx_buffer_.size() == kMaxLineBody) {
      ++parse_errors_;
      out.push_back(kBel);
      rx_buffer_.clear();
      discarding_ = true;
      continue;
    }
    rx_buffer_.push_back(c);
  }
  for (const Frame& f : bus_->take_received(node_)) {
    out += format_serial_line(f);
    ++frames_out_;
  }
  return out;
}

std::string gateway_pump(GatewaySession& session, std::string_view incoming) { return session.pump(incoming); }

}  // namespace vcan::gateway
