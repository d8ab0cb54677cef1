#include "vcanlab/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "vcanlab/codec.hpp"
#include "vcanlab/gateway.hpp"

namespace vcan {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view s, int base = 10) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<double> parse_real(std::string_view s) {
  // from_chars for double is not available in every libstdc++ we target.
  std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<std::uint32_t> parse_hex_field(std::string_view s) {
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) s.remove_prefix(2);
  if (s.empty()) return std::nullopt;
  return parse_number<std::uint32_t>(s, 16);
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

}  // namespace

const char* to_string(ScenarioErrc code) noexcept {
  switch (code) {
    case ScenarioErrc::SyntaxError: return "SyntaxError";
    case ScenarioErrc::UnknownNode: return "UnknownNode";
    case ScenarioErrc::ConfigError: return "ConfigError";
  }
  return "?";
}

Scenario parse_scenario(std::string_view text, bool allow_slow) {
  Scenario sc;
  sc.config.allow_slow = allow_slow;
  bool have_bitrate = false;
  bool have_distance = false;
  bool in_events = false;
  std::size_t config_line = 0;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos && line.substr(0, hash).find_first_not_of(" \t") == std::string_view::npos)
      continue;  // comment line
    const auto tok = split_ws(line);
    if (tok.empty()) continue;

    auto syntax = [&](const std::string& what) { return ScenarioError(ScenarioErrc::SyntaxError, line_no, what); };

    if (tok[0].starts_with("bitrate=") || tok[0].starts_with("distance_m=")) {
      if (in_events) throw syntax("header line after events");
      if (tok.size() != 1) throw syntax("unexpected text after " + std::string(tok[0]));
      const auto eq = tok[0].find('=');
      const std::string_view key = tok[0].substr(0, eq);
      const std::string_view value = tok[0].substr(eq + 1);
      if (key == "bitrate") {
        const auto v = parse_number<std::uint32_t>(value);
        if (!v) throw syntax("bad bitrate '" + std::string(value) + "'");
        sc.config.bitrate_bps = *v;
        have_bitrate = true;
      } else {
        const auto v = parse_real(value);
        if (!v) throw syntax("bad distance '" + std::string(value) + "'");
        sc.config.distance_m = *v;
        have_distance = true;
      }
      config_line = line_no;
      continue;
    }
    if (tok[0] == "node") {
      if (in_events) throw syntax("node declaration after events");
      if (tok.size() < 2 || tok.size() > 3) throw syntax("expected: node <name> [filter=<code>/<mask>]");
      NodeDecl decl{std::string(tok[1]), std::nullopt};
      if (std::any_of(sc.nodes.begin(), sc.nodes.end(), [&](const NodeDecl& d) { return d.name == decl.name; }))
        throw syntax("node '" + decl.name + "' declared twice");
      if (sc.nodes.size() >= kMaxNodes) throw ScenarioError(ScenarioErrc::ConfigError, line_no, "more than 110 nodes");
      if (tok.size() == 3) {
        if (!tok[2].starts_with("filter=")) throw syntax("unknown node option '" + std::string(tok[2]) + "'");
        const std::string_view spec = tok[2].substr(7);
        const auto slash = spec.find('/');
        if (slash == std::string_view::npos) throw syntax("filter must be <code>/<mask>");
        const auto code = parse_hex_field(spec.substr(0, slash));
        const auto mask = parse_hex_field(spec.substr(slash + 1));
        if (!code || !mask) throw syntax("bad filter '" + std::string(spec) + "'");
        const bool extended = *code >= kStandardIdLimit || *mask >= kStandardIdLimit;
        try {
          decl.filter = extended ? AcceptanceFilter::extended_id(*code, *mask) : AcceptanceFilter::standard(*code, *mask);
        } catch (const FrameError&) {
          throw syntax("filter exceeds 29 bits");
        }
      }
      sc.nodes.push_back(std::move(decl));
      continue;
    }

    // Event line.
    if (!in_events) {
      in_events = true;
      if (!have_bitrate || !have_distance) throw syntax("bitrate= and distance_m= must precede events");
      const ConfigCheck check = validate_bus_config(sc.config.bitrate_bps, sc.config.distance_m, allow_slow);
      if (check != ConfigCheck::Ok) throw ScenarioError(ScenarioErrc::ConfigError, config_line, to_string(check));
    }
    if (tok.size() != 3) throw syntax("expected: <time_us> <node> <frame>");
    const auto time_us = parse_number<std::uint64_t>(tok[0]);
    if (!time_us) throw syntax("bad time '" + std::string(tok[0]) + "'");
    const std::string node(tok[1]);
    if (std::none_of(sc.nodes.begin(), sc.nodes.end(), [&](const NodeDecl& d) { return d.name == node; }))
      throw ScenarioError(ScenarioErrc::UnknownNode, line_no, "unknown node '" + node + "'");
    const auto frame = gateway::parse_serial_line(tok[2]);
    if (!frame) throw syntax(std::string("bad frame: ") + gateway::to_string(frame.error()));
    sc.schedule.entries.push_back(ScheduleEntry{*time_us, node, frame.value()});
  }

  if (!in_events) {
    if (!have_bitrate || !have_distance)
      throw ScenarioError(ScenarioErrc::SyntaxError, line_no, "scenario needs bitrate= and distance_m=");
    const ConfigCheck check = validate_bus_config(sc.config.bitrate_bps, sc.config.distance_m, allow_slow);
    if (check != ConfigCheck::Ok) throw ScenarioError(ScenarioErrc::ConfigError, config_line, to_string(check));
  }
  std::stable_sort(sc.schedule.entries.begin(), sc.schedule.entries.end(),
                   [](const ScheduleEntry& a, const ScheduleEntry& b) { return a.time_us < b.time_us; });
  return sc;
}

std::string render_scenario(const Scenario& sc) {
  std::ostringstream os;
  os << "bitrate=" << sc.config.bitrate_bps << '\n';
  os << "distance_m=" << format_real(sc.config.distance_m) << '\n';
  char buf[48];
  for (const auto& n : sc.nodes) {
    os << "node " << n.name;
    if (n.filter) {
      std::snprintf(buf, sizeof buf, n.filter->extended ? " filter=%08X/%08X" : " filter=%03X/%03X",
                    static_cast<unsigned>(n.filter->code), static_cast<unsigned>(n.filter->mask));
      os << buf;
    }
    os << '\n';
  }
  for (const auto& e : sc.schedule.entries) {
    std::string line = gateway::format_serial_line(e.frame);
    line.pop_back();
    os << e.time_us << ' ' << e.node << ' ' << line << '\n';
  }
  return os.str();
}

Bus make_bus(const Scenario& sc) {
  Bus bus(sc.config);
  for (const auto& n : sc.nodes) bus.attach_node(n.name, NodeConfig{n.filter});
  return bus;
}

std::string format_trace_event(const TraceEvent& ev) {
  char stamp[48];
  // Six decimals, rounded half-up from the exact bit time.
  const double micros = std::floor(ev.time_s * 1e6 + 0.5);
  const auto total = static_cast<unsigned long long>(micros);
  std::snprintf(stamp, sizeof stamp, "(%llu.%06llu)", total / 1'000'000ULL, total % 1'000'000ULL);
  std::string line = stamp;
  line += " vcan0 ";
  line += ev.frame ? format_candump(*ev.frame) : std::string("-");
  line += ' ';
  line += to_string(ev.kind);
  if (ev.kind == TraceKind::BusOffEntered || ev.kind == TraceKind::BusOffRecovered) line += " node=" + ev.node;
  return line;
}

}  // namespace vcan
