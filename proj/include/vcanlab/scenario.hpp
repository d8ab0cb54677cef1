#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vcanlab/bus.hpp"
#include "vcanlab/node.hpp"

namespace vcan {

struct NodeDecl {
  std::string name;
  std::optional<AcceptanceFilter> filter;

  friend bool operator==(const NodeDecl&, const NodeDecl&) = default;
};

// Text scenario: header lines (`bitrate=`, `distance_m=`, `node <name>
// [filter=<code>/<mask>]`) followed by `<time_us> <node> <serial-line>` events.
struct Scenario {
  BusConfig config;
  std::vector<NodeDecl> nodes;
  Schedule schedule;  // sorted by time, stable
};

enum class ScenarioErrc { SyntaxError, UnknownNode, ConfigError };
const char* to_string(ScenarioErrc code) noexcept;

class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(ScenarioErrc code, std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), code_(code), line_(line) {}
  ScenarioErrc code() const noexcept { return code_; }
  std::size_t line() const noexcept { return line_; }

 private:
  ScenarioErrc code_;
  std::size_t line_;
};

Scenario parse_scenario(std::string_view text, bool allow_slow = false);
std::string render_scenario(const Scenario& scenario);

// Builds a bus with every declared node attached.
Bus make_bus(const Scenario& scenario);

// `(<seconds, 6 decimals>) vcan0 <ID>#<DATA> <Event>`; bus-off transitions
// append ` node=<name>`, frame-less events print `-` for the frame.
std::string format_trace_event(const TraceEvent& event);

}  // namespace vcan
