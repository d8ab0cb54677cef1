#include <cmath>

#include "doctest.h"
#include "vcanlab/sensornet.hpp"

using namespace vcan;
using namespace vcan::sensornet;

namespace {

struct TableRow {
  double set_c;
  std::uint16_t code;
  std::int32_t measured_centideg;
};

// Worked out separately in exact rational arithmetic (Python fractions).
constexpr TableRow kOracleRows[] = {
    {20.00, 512, 2002}, {22.50, 575, 2248}, {23.00, 588, 2299}, {25.30, 647, 2530},
    {30.00, 767, 2999}, {16.00, 409, 1599}, {19.50, 499, 1951}, {22.00, 563, 2201},
};

}  // namespace

TEST_CASE("adc_sample examples") {
  const SensorConfig cfg;
  CHECK(adc_sample(0.0, cfg) == 0);
  CHECK(adc_sample(40.0, cfg) == 1023);
  CHECK(adc_sample(20.0, cfg) == 512);
  CHECK_THROWS_AS(adc_sample(45.0, cfg), SensorError);
}

TEST_CASE("decode_reading examples") {
  const SensorConfig cfg;
  CHECK(decode_reading(0, cfg) == 0);
  CHECK(decode_reading(1023, cfg) == 4000);
  CHECK(decode_reading(512, cfg) == 2002);
  CHECK(decode_reading(409, cfg) == 1599);
}

TEST_CASE("table set points against the oracle") {
  const SensorConfig cfg;
  for (const auto& row : kOracleRows) {
    const SensorReading r = take_reading(row.set_c, cfg);
    CHECK(r.adc_code == row.code);
    CHECK(r.temperature_centideg == row.measured_centideg);
    CHECK(std::abs(row.measured_centideg - std::lround(row.set_c * 100)) <= 2);
  }
}

TEST_CASE("setpoint_from_switches") {
  const auto table = default_setpoint_table();
  CHECK(setpoint_from_switches(0, table) == 20.00);
  CHECK(setpoint_from_switches(7, table) == 22.00);
  for (unsigned s = 8; s < 16; ++s) CHECK(setpoint_from_switches(s, table) == table[s - 8]);
  CHECK_THROWS_AS(setpoint_from_switches(16, table), SensorError);
}

TEST_CASE("reading frame payload") {
  const SensorConfig cfg;
  const Frame f = build_reading_frame(cfg, SensorReading{512, 2002});
  CHECK(f.id() == FrameId::standard(0x100));
  CHECK(std::vector<std::uint8_t>(f.payload().begin(), f.payload().end()) == std::vector<std::uint8_t>{0x02, 0x00, 0x07, 0xD2});
  const Frame zero = build_reading_frame(cfg, SensorReading{0, 0});
  CHECK(std::vector<std::uint8_t>(zero.payload().begin(), zero.payload().end()) == std::vector<std::uint8_t>{0, 0, 0, 0});
  for (std::uint16_t code = 0; code <= 1023; ++code) {
    const SensorReading r{code, static_cast<std::int16_t>(decode_reading(code, cfg))};
    CHECK(parse_reading_frame(build_reading_frame(cfg, r)) == r);
  }
  SensorReading negative{3, -1234};
  CHECK(parse_reading_frame(build_reading_frame(cfg, negative)) == negative);

  SensorConfig ch1;
  ch1.channel = 1;
  CHECK(reading_frame_id(ch1) == FrameId::standard(0x101));
}

TEST_CASE("monitor_evaluate") {
  CHECK(std::holds_alternative<InRange>(monitor_evaluate(20.02, 20.00, 0.05)));
  const auto v = monitor_evaluate(25.00, 20.00, 0.05);
  REQUIRE(std::holds_alternative<Deviation>(v));
  CHECK(std::get<Deviation>(v).delta == doctest::Approx(5.0));
  CHECK(std::holds_alternative<InRange>(monitor_evaluate(31.7, 31.7, 1e-6)));
  CHECK(std::get<Deviation>(monitor_evaluate(19.0, 20.0, 0.5)).delta == doctest::Approx(-1.0));
}

TEST_CASE("quantization error bound over the range") {
  const SensorConfig cfg;
  const double bound_c = 40.0 / 1023 / 2 + 0.005;
  std::uint16_t prev = 0;
  for (int milli = 0; milli <= 40'000; ++milli) {
    const double t = milli / 1000.0;
    const std::uint16_t code = adc_sample(t, cfg);
    REQUIRE(code >= prev);
    prev = code;
    const double measured = decode_reading(code, cfg) / 100.0;
    REQUIRE(std::abs(measured - t) <= bound_c + 1e-9);
  }
}

TEST_CASE("decode_reading is strictly increasing") {
  const SensorConfig cfg;
  for (std::uint32_t c = 1; c <= 1023; ++c) CHECK(decode_reading(c, cfg) > decode_reading(c - 1, cfg));
}

TEST_CASE("table experiment") {
  const ExperimentReport report = run_table_experiment(SensorConfig{}, kTableSetpoints);
  REQUIRE(report.rows.size() == 8);
  CHECK(report.set_sum_centideg == 17830);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(report.rows[i].measured_centideg == kOracleRows[i].measured_centideg);
    CHECK(std::abs(report.rows[i].error_centideg()) <= 2);
  }
  const std::string csv = render_csv(report);
  CHECK(csv.rfind("test,set_c,measured_c,error_c\n", 0) == 0);
  CHECK(csv.find("178.30") != std::string::npos);
  const std::string table = render_table(report);
  CHECK(table.find("178.30") != std::string::npos);
  CHECK(table.find('\x1b') == std::string::npos);
}

TEST_CASE("config validation") {
  SensorConfig bad;
  bad.range_max_c = bad.range_min_c;
  CHECK_THROWS_AS(validate(bad), SensorError);
  SensorConfig outside;
  CHECK_THROWS_AS(run_table_experiment(outside, std::vector<double>{50.0}), SensorError);
  CHECK(format_centideg(-5) == "-0.05");
  CHECK(format_centideg(17830) == "178.30");
}
