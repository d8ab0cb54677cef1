#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vcanlab/bus.hpp"
#include "vcanlab/gateway.hpp"
#include "vcanlab/scenario.hpp"

namespace vcan::tools {

// Bus plus gateway nodes shared by the stdio and TCP front ends. Every input
// chunk is pumped line by line; after each line the bus runs until the
// submitted frame has settled, so output depends only on the byte sequence.
class GatewayHost {
 public:
  GatewayHost(const std::optional<Scenario>& scenario, std::size_t gateway_nodes);

  std::size_t slots() const noexcept { return sessions_.size(); }
  // Feeds bytes for one session; returns output for every session.
  std::vector<std::string> feed(std::size_t slot, const std::string& bytes);
  // Runs the rest of the scenario schedule and drains all sessions.
  std::vector<std::string> finish();

 private:
  std::vector<std::string> drain();

  Bus bus_;
  std::vector<gateway::GatewaySession> sessions_;
};

int serve_stdio(GatewayHost& host, std::istream& in, std::ostream& out);
int serve_tcp(GatewayHost& host, std::uint16_t port, std::ostream& log);

}  // namespace vcan::tools
