#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "vcanlab/frame.hpp"

namespace vcan::sensornet {

inline constexpr unsigned kAdcBits = 10;
inline constexpr std::uint32_t kAdcMax = (1u << kAdcBits) - 1;  // 1023
inline constexpr std::size_t kSwitchStates = 16;

// Table 1 set points in row order; switch states 8..15 repeat them.
inline constexpr std::array<double, 8> kTableSetpoints{20.00, 22.50, 23.00, 25.30, 30.00, 16.00, 19.50, 22.00};

std::array<double, kSwitchStates> default_setpoint_table();

struct SensorConfig {
  std::string node_name = "sensor";
  FrameId base_id = FrameId::standard(0x100);
  unsigned channel = 0;  // PA0 / PA1; the id is base_id + channel
  unsigned adc_bits = kAdcBits;
  double range_min_c = 0.0;
  double range_max_c = 40.0;
  std::uint32_t sample_period_us = 1'000'000;
  unsigned switch_state = 0;
  std::array<double, kSwitchStates> setpoint_table = default_setpoint_table();
};

class SensorError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Throws SensorError when the configuration breaks its invariants.
void validate(const SensorConfig& cfg);

struct SensorReading {
  std::uint16_t adc_code = 0;
  std::int16_t temperature_centideg = 0;

  friend bool operator==(const SensorReading&, const SensorReading&) = default;
};

// Round-half-up quantization onto 0..1023. Temperatures up to one LSB outside
// the range clamp; further out throws SensorError.
std::uint16_t adc_sample(double true_temp_c, const SensorConfig& cfg);

// min + code * span / 1023, rounded half-up to 0.01 degC.
std::int32_t decode_reading(std::uint32_t adc_code, const SensorConfig& cfg);

double setpoint_from_switches(unsigned switch_state, std::span<const double, kSwitchStates> table);

SensorReading take_reading(double true_temp_c, const SensorConfig& cfg);

FrameId reading_frame_id(const SensorConfig& cfg);

// 4-byte big-endian payload: adc code (u16) then centidegrees (s16).
Frame build_reading_frame(const SensorConfig& cfg, const SensorReading& reading);
std::optional<SensorReading> parse_reading_frame(const Frame& frame);

struct InRange {};
struct Deviation {
  double delta = 0.0;  // reading - setpoint
};
using MonitorVerdict = std::variant<InRange, Deviation>;

MonitorVerdict monitor_evaluate(double reading_c, double setpoint_c, double tolerance_c);

struct ExperimentRow {
  double set_c = 0.0;
  double measured_c = 0.0;
  double error_c = 0.0;
  std::int32_t set_centideg = 0;
  std::int32_t measured_centideg = 0;

  std::int32_t error_centideg() const noexcept { return measured_centideg - set_centideg; }
};

struct ExperimentReport {
  std::vector<ExperimentRow> rows;
  std::int64_t set_sum_centideg = 0;
  std::int64_t measured_sum_centideg = 0;

  double set_sum_c() const noexcept { return static_cast<double>(set_sum_centideg) / 100.0; }
  double measured_sum_c() const noexcept { return static_cast<double>(measured_sum_centideg) / 100.0; }
};

// Samples each set point, carries the reading over a two-node bus (sensor and
// monitor) and decodes it at the monitor.
ExperimentReport run_table_experiment(const SensorConfig& cfg, std::span<const double> setpoints);

std::string format_centideg(std::int64_t centideg);
std::string render_table(const ExperimentReport& report, bool decorate = false);
std::string render_csv(const ExperimentReport& report);

}  // namespace vcan::sensornet
