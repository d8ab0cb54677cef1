#include "vcanlab/sensornet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "vcanlab/bus.hpp"

namespace vcan::sensornet {

namespace {

// Absorbs representation error in decimal inputs that sit exactly on a half step.
constexpr double kHalfUpSlack = 1e-9;

std::int64_t round_half_up(double x) { return static_cast<std::int64_t>(std::floor(x + 0.5 + kHalfUpSlack)); }

std::int32_t to_centideg(double c) { return static_cast<std::int32_t>(round_half_up(c * 100.0)); }

}  // namespace

std::array<double, kSwitchStates> default_setpoint_table() {
  std::array<double, kSwitchStates> table{};
  for (std::size_t i = 0; i < kSwitchStates; ++i) table[i] = kTableSetpoints[i % kTableSetpoints.size()];
  return table;
}

void validate(const SensorConfig& cfg) {
  if (cfg.adc_bits != kAdcBits) throw SensorError("sensor ADC must be 10 bits");
  if (!(cfg.range_min_c < cfg.range_max_c)) throw SensorError("sensor range must satisfy min < max");
  if (cfg.switch_state >= kSwitchStates) throw SensorError("switch state must be 0..15");
  if (cfg.channel > 1) throw SensorError("sensor channel must be 0 or 1");
}

std::uint16_t adc_sample(double true_temp_c, const SensorConfig& cfg) {
  const double span = cfg.range_max_c - cfg.range_min_c;
  const double lsb = span / kAdcMax;
  if (true_temp_c < cfg.range_min_c - lsb || true_temp_c > cfg.range_max_c + lsb)
    throw SensorError("temperature outside the sensor range");
  const std::int64_t code = round_half_up((true_temp_c - cfg.range_min_c) / span * kAdcMax);
  return static_cast<std::uint16_t>(std::clamp<std::int64_t>(code, 0, kAdcMax));
}

std::int32_t decode_reading(std::uint32_t adc_code, const SensorConfig& cfg) {
  const double span = cfg.range_max_c - cfg.range_min_c;
  const double celsius = (cfg.range_min_c * kAdcMax + adc_code * span) / kAdcMax;
  return static_cast<std::int32_t>(round_half_up(celsius * 100.0));
}

double setpoint_from_switches(unsigned switch_state, std::span<const double, kSwitchStates> table) {
  if (switch_state >= kSwitchStates) throw SensorError("switch state must be 0..15");
  return table[switch_state];
}

SensorReading take_reading(double true_temp_c, const SensorConfig& cfg) {
  const std::uint16_t code = adc_sample(true_temp_c, cfg);
  return SensorReading{code, static_cast<std::int16_t>(decode_reading(code, cfg))};
}

FrameId reading_frame_id(const SensorConfig& cfg) {
  return FrameId::standard(cfg.base_id.value() + cfg.channel);
}

Frame build_reading_frame(const SensorConfig& cfg, const SensorReading& reading) {
  const auto temp = static_cast<std::uint16_t>(reading.temperature_centideg);
  return Frame::data(reading_frame_id(cfg), {static_cast<std::uint8_t>(reading.adc_code >> 8),
                                             static_cast<std::uint8_t>(reading.adc_code & 0xFF),
                                             static_cast<std::uint8_t>(temp >> 8), static_cast<std::uint8_t>(temp & 0xFF)});
}

std::optional<SensorReading> parse_reading_frame(const Frame& frame) {
  if (frame.is_remote() || frame.dlc() != 4) return std::nullopt;
  const auto p = frame.payload();
  const auto code = static_cast<std::uint16_t>((p[0] << 8) | p[1]);
  if (code > kAdcMax) return std::nullopt;
  const auto temp = static_cast<std::int16_t>(static_cast<std::uint16_t>((p[2] << 8) | p[3]));
  return SensorReading{code, temp};
}

MonitorVerdict monitor_evaluate(double reading_c, double setpoint_c, double tolerance_c) {
  if (!(tolerance_c > 0.0)) throw SensorError("tolerance must be positive");
  const double delta = reading_c - setpoint_c;
  if (std::abs(delta) > tolerance_c) return Deviation{delta};
  return InRange{};
}

ExperimentReport run_table_experiment(const SensorConfig& cfg, std::span<const double> setpoints) {
  validate(cfg);
  for (double sp : setpoints) (void)adc_sample(sp, cfg);

  Bus bus(BusConfig{});
  const NodeHandle sensor = bus.attach_node(cfg.node_name);
  const FrameId id = reading_frame_id(cfg);
  const NodeHandle monitor = bus.attach_node("monitor", NodeConfig{AcceptanceFilter::standard(id.value(), 0x7FF)});

  ExperimentReport report;
  for (double sp : setpoints) {
    const SensorReading reading = take_reading(sp, cfg);
    bus.submit(sensor, build_reading_frame(cfg, reading));
    bus.run_until_quiescent(bus.now() + bus.bits_for_us(cfg.sample_period_us));
    const auto received = bus.take_received(monitor);
    if (received.size() != 1) throw std::runtime_error("monitor did not receive the reading");
    const auto decoded = parse_reading_frame(received.front());
    if (!decoded) throw std::runtime_error("monitor received a malformed reading");

    ExperimentRow row;
    row.set_centideg = to_centideg(sp);
    row.measured_centideg = decode_reading(decoded->adc_code, cfg);
    row.set_c = sp;
    row.measured_c = row.measured_centideg / 100.0;
    row.error_c = row.error_centideg() / 100.0;
    report.set_sum_centideg += row.set_centideg;
    report.measured_sum_centideg += row.measured_centideg;
    report.rows.push_back(row);
  }
  return report;
}

std::string format_centideg(std::int64_t centideg) {
  const char* sign = centideg < 0 ? "-" : "";
  const std::int64_t a = std::llabs(centideg);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%lld.%02lld", sign, static_cast<long long>(a / 100), static_cast<long long>(a % 100));
  return buf;
}

namespace {

std::string signed_centideg(std::int64_t centideg) {
  return (centideg >= 0 ? "+" : "") + format_centideg(centideg);
}

}  // namespace

std::string render_table(const ExperimentReport& report, bool decorate) {
  std::ostringstream os;
  char line[128];
  const char* bold = decorate ? "\x1b[1m" : "";
  const char* reset = decorate ? "\x1b[0m" : "";
  os << bold << "Test no | Set temperature | Measured temperature | Error" << reset << '\n';
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& r = report.rows[i];
    std::snprintf(line, sizeof line, "%7.2zu | %15s | %20s | %s\n", i + 1, format_centideg(r.set_centideg).c_str(),
                  format_centideg(r.measured_centideg).c_str(), signed_centideg(r.error_centideg()).c_str());
    os << line;
  }
  std::snprintf(line, sizeof line, "%-7s | %15s | %20s |\n", "Sum", format_centideg(report.set_sum_centideg).c_str(),
                format_centideg(report.measured_sum_centideg).c_str());
  os << line;
  return os.str();
}

std::string render_csv(const ExperimentReport& report) {
  std::ostringstream os;
  os << "test,set_c,measured_c,error_c\n";
  char line[128];
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& r = report.rows[i];
    std::snprintf(line, sizeof line, "%zu,%s,%s,%s\n", i + 1, format_centideg(r.set_centideg).c_str(),
                  format_centideg(r.measured_centideg).c_str(), format_centideg(r.error_centideg()).c_str());
    os << line;
  }
  os << "sum," << format_centideg(report.set_sum_centideg) << ',' << format_centideg(report.measured_sum_centideg) << ','
     << format_centideg(report.measured_sum_centideg - report.set_sum_centideg) << '\n';
  return os.str();
}

}  // namespace vcan::sensornet
