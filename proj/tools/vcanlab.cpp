// vcanlab: command line front end for the virtual CAN bus.
//
// Exit codes: 0 success, 1 usage error, 2 scenario/config error,
// 3 runtime (simulation or decode) error.

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "gateway_host.hpp"
#include "vcanlab/bus.hpp"
#include "vcanlab/codec.hpp"
#include "vcanlab/scenario.hpp"
#include "vcanlab/sensornet.hpp"

namespace {

using namespace vcan;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// Simulated time allowed after the last scheduled event.
constexpr std::uint64_t kDrainSeconds = 10;

bool decorate_output() { return std::getenv("VCANLAB_NO_COLOR") == nullptr && ::isatty(STDOUT_FILENO); }

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_simulate(const std::string& path, const std::string& trace_out, std::optional<std::uint64_t> until_us,
                 bool allow_slow) {
  const auto text = read_file(path);
  if (!text) {
    std::cerr << "simulate: cannot read " << path << '\n';
    return kExitConfig;
  }
  Scenario sc;
  try {
    sc = parse_scenario(*text, allow_slow);
  } catch (const ScenarioError& e) {
    std::cerr << path << ": " << to_string(e.code()) << ": " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    Bus bus = make_bus(sc);
    bus.run(sc.schedule, 0);
    if (until_us) {
      bus.advance_to(bus.bits_for_us(*until_us));
    } else {
      const std::uint64_t last = sc.schedule.entries.empty() ? 0 : sc.schedule.entries.back().time_us;
      bus.run_until_quiescent(bus.bits_for_us(last + kDrainSeconds * 1'000'000));
    }

    std::ofstream file;
    std::ostream* trace_stream = &std::cout;
    if (!trace_out.empty()) {
      file.open(trace_out, std::ios::binary);
      if (!file) {
        std::cerr << "simulate: cannot write " << trace_out << '\n';
        return kExitRuntime;
      }
      trace_stream = &file;
    }
    for (const auto& ev : bus.trace()) *trace_stream << format_trace_event(ev) << '\n';
    trace_stream->flush();
    for (std::size_t i = 0; i < bus.node_count(); ++i) {
      const NodeHandle h{i};
      std::cout << format_status(bus.node(h).name(), bus.status(h)) << '\n';
    }
  } catch (const BusError& e) {
    std::cerr << "simulate: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_codec_encode(const std::string& frame_text) {
  const auto frame = parse_candump(frame_text);
  if (!frame) {
    std::cerr << "codec encode: expected <ID>#<DATA>, got '" << frame_text << "'\n";
    return kExitUsage;
  }
  const EncodedFrame enc = encode_frame(*frame);
  std::printf("%s\n", to_bit_string(enc.stuffed_bits).c_str());
  std::printf("crc=%04X stuff_bits=%zu length=%zu unstuffed=%zu\n", enc.crc, enc.stuff_count, enc.size(),
              frame_bit_length(*frame, false));
  return kExitOk;
}

int cmd_codec_decode(const std::string& bits_text) {
  const auto bits = parse_bit_string(bits_text);
  if (!bits) {
    std::cerr << "codec decode: bit string must contain only 0 and 1\n";
    return kExitUsage;
  }
  const auto result = decode_frame(*bits);
  if (!result) {
    std::printf("%s offset=%zu\n", to_string(result.error().kind), result.error().offset);
    return kExitRuntime;
  }
  std::printf("%s\n", format_candump(result.value()).c_str());
  return kExitOk;
}

int cmd_codec_crc(const std::string& bits_text) {
  const auto bits = parse_bit_string(bits_text);
  if (!bits) {
    std::cerr << "codec crc: bit string must contain only 0 and 1\n";
    return kExitUsage;
  }
  std::printf("%04X\n", crc15(*bits));
  return kExitOk;
}

int cmd_experiment(const std::string& range, bool csv) {
  sensornet::SensorConfig cfg;
  const auto colon = range.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument("range");
    std::size_t used = 0;
    cfg.range_min_c = std::stod(range.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument("range");
    const std::string hi = range.substr(colon + 1);
    cfg.range_max_c = std::stod(hi, &used);
    if (used != hi.size()) throw std::invalid_argument("range");
  } catch (const std::exception&) {
    std::cerr << "experiment: --range must be <min>:<max>, got '" << range << "'\n";
    return kExitUsage;
  }
  try {
    const auto report = sensornet::run_table_experiment(cfg, sensornet::kTableSetpoints);
    std::cout << (csv ? sensornet::render_csv(report) : sensornet::render_table(report, decorate_output()));
  } catch (const sensornet::SensorError& e) {
    std::cerr << "experiment: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "experiment: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_validate(double bitrate, double distance, bool allow_slow) {
  const ConfigCheck check = validate_bus_config(bitrate, distance, allow_slow);
  std::cout << to_string(check) << '\n';
  return check == ConfigCheck::Ok ? kExitOk : kExitConfig;
}

int cmd_gateway(bool stdio, std::optional<std::uint16_t> port, const std::string& scenario_path,
                std::size_t sessions) {
  if (stdio == port.has_value()) {
    std::cerr << "gateway: choose exactly one of --stdio or --listen <port>\n";
    return kExitUsage;
  }
  std::optional<Scenario> sc;
  if (!scenario_path.empty()) {
    const auto text = read_file(scenario_path);
    if (!text) {
      std::cerr << "gateway: cannot read " << scenario_path << '\n';
      return kExitConfig;
    }
    try {
      sc = parse_scenario(*text);
    } catch (const ScenarioError& e) {
      std::cerr << scenario_path << ": " << to_string(e.code()) << ": " << e.what() << '\n';
      return kExitConfig;
    }
  }
  try {
    tools::GatewayHost host(sc, stdio ? 1 : sessions);
    return stdio ? tools::serve_stdio(host, std::cin, std::cout) : tools::serve_tcp(host, *port, std::cerr);
  } catch (const BusError& e) {
    std::cerr << "gateway: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic virtual CAN bus: codec, simulator, sensor experiment and serial gateway"};
  app.require_subcommand(1);

  std::string sim_path;
  std::string trace_out;
  std::optional<std::uint64_t> until_us;
  bool sim_allow_slow = false;
  auto* simulate = app.add_subcommand("simulate", "Run a scenario file and print its trace");
  simulate->add_option("file", sim_path, "Scenario file")->required();
  simulate->add_option("--trace-out", trace_out, "Write the trace to this file instead of stdout");
  simulate->add_option("--until-us", until_us, "Stop at this simulated time (default: run until idle)");
  simulate->add_flag("--allow-slow", sim_allow_slow, "Accept bit rates below 20 kbit/s");

  auto* codec = app.add_subcommand("codec", "Frame encoding utilities");
  codec->require_subcommand(1);
  std::string codec_arg;
  auto* encode = codec->add_subcommand("encode", "Encode <ID>#<DATA> to stuffed wire bits");
  encode->add_option("frame", codec_arg)->required();
  auto* decode = codec->add_subcommand("decode", "Decode a 0/1 wire bit string");
  decode->add_option("bits", codec_arg)->required();
  auto* crc = codec->add_subcommand("crc", "CRC-15 of a 0/1 bit string");
  crc->add_option("bits", codec_arg);

  std::string range = "0:40";
  bool csv = false;
  auto* experiment = app.add_subcommand("experiment", "Run the set-point accuracy experiment");
  experiment->add_option("--range", range, "ADC reference range in degC, <min>:<max>");
  experiment->add_flag("--csv", csv, "Emit CSV instead of a table");

  bool stdio = false;
  std::optional<std::uint16_t> port;
  std::string gw_scenario;
  std::size_t sessions = 4;
  auto* gateway = app.add_subcommand("gateway", "Serial-line to bus gateway");
  gateway->add_flag("--stdio", stdio, "Serve one session on stdin/stdout");
  gateway->add_option("--listen", port, "Serve sessions on a TCP port");
  gateway->add_option("--scenario", gw_scenario, "Bus configuration, nodes and traffic");
  gateway->add_option("--sessions", sessions, "Gateway nodes available to TCP clients")->check(CLI::Range(1, 100));

  double bitrate = 0;
  double distance = 0;
  bool allow_slow = false;
  auto* validate = app.add_subcommand("validate", "Check a bit rate / cable length pair");
  validate->add_option("--bitrate", bitrate, "Bit rate in bit/s")->required();
  validate->add_option("--distance", distance, "Cable length in metres")->required();
  validate->add_flag("--allow-slow", allow_slow, "Accept bit rates below 20 kbit/s");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  if (*simulate) return cmd_simulate(sim_path, trace_out, until_us, sim_allow_slow);
  if (*encode) return cmd_codec_encode(codec_arg);
  if (*decode) return cmd_codec_decode(codec_arg);
  if (*crc) return cmd_codec_crc(codec_arg);
  if (*experiment) return cmd_experiment(range, csv);
  if (*gateway) return cmd_gateway(stdio, port, gw_scenario, sessions);
  if (*validate) return cmd_validate(bitrate, distance, allow_slow);
  return kExitUsage;
}
