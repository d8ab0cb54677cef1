#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <istream>
#include <ostream>

#include "gateway_host.hpp"

namespace vcan::tools {

namespace {

constexpr std::uint64_t kSettleHorizonBits = 50'000'000;

Bus make_host_bus(const std::optional<Scenario>& scenario) {
  if (scenario) return make_bus(*scenario);
  Bus bus(BusConfig{});
  bus.attach_node("monitor");
  return bus;
}

}  // namespace

GatewayHost::GatewayHost(const std::optional<Scenario>& scenario, std::size_t gateway_nodes)
    : bus_(make_host_bus(scenario)) {
  for (std::size_t i = 0; i < gateway_nodes; ++i) {
    const std::string name = gateway_nodes == 1 ? "gw" : "gw" + std::to_string(i);
    sessions_.emplace_back(bus_, bus_.attach_node(name));
  }
  if (scenario) bus_.run(scenario->schedule, 0);
}

std::vector<std::string> GatewayHost::drain() {
  std::vector<std::string> out;
  out.reserve(sessions_.size());
  for (auto& s : sessions_) out.push_back(s.pump({}));
  return out;
}

std::vector<std::string> GatewayHost::feed(std::size_t slot, const std::string& bytes) {
  std::vector<std::string> out(sessions_.size());
  std::size_t start = 0;
  while (start < bytes.size()) {
    const std::size_t cr = bytes.find(gateway::kCr, start);
    const std::size_t end = cr == std::string::npos ? bytes.size() : cr + 1;
    out[slot] += sessions_[slot].pump(std::string_view(bytes).substr(start, end - start));
    start = end;
    if (cr == std::string::npos) break;
    bus_.run_until_settled(bus_.now() + kSettleHorizonBits);
    const auto drained = drain();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += drained[i];
  }
  return out;
}

std::vector<std::string> GatewayHost::finish() {
  bus_.run_until_quiescent(bus_.now() + kSettleHorizonBits);
  return drain();
}

int serve_stdio(GatewayHost& host, std::istream& in, std::ostream& out) {
  std::string chunk(256, '\0');
  while (in) {
    in.read(chunk.data(), static_cast<std::streamsize>(chunk.size()));
    const auto n = static_cast<std::size_t>(in.gcount());
    if (n == 0) break;
    out << host.feed(0, chunk.substr(0, n))[0] << std::flush;
  }
  out << host.finish()[0] << std::flush;
  return 0;
}

int serve_tcp(GatewayHost& host, std::uint16_t port, std::ostream& log) {
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) {
    log << "socket: " << std::strerror(errno) << '\n';
    return 3;
  }
  int yes = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(port);
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listener, 8) < 0) {
    log << "listen on port " << port << ": " << std::strerror(errno) << '\n';
    ::close(listener);
    return 3;
  }
  log << "gateway listening on port " << port << " (" << host.slots() << " sessions)\n" << std::flush;

  // Slot i serves connection fds[i] (-1 when free). One poll loop serves
  // connections in arrival order, one session step at a time.
  std::vector<int> fds(host.slots(), -1);
  auto send_all = [](int fd, const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
      if (n <= 0) return false;
      off += static_cast<std::size_t>(n);
    }
    return true;
  };

  for (;;) {
    std::vector<pollfd> pfds{{listener, POLLIN, 0}};
    std::vector<std::size_t> slot_of;
    for (std::size_t i = 0; i < fds.size(); ++i)
      if (fds[i] >= 0) {
        pfds.push_back({fds[i], POLLIN, 0});
        slot_of.push_back(i);
      }
    if (::poll(pfds.data(), pfds.size(), -1) < 0) {
      if (errno == EINTR) continue;
      log << "poll: " << std::strerror(errno) << '\n';
      break;
    }
    if (pfds[0].revents & POLLIN) {
      const int fd = ::accept(listener, nullptr, nullptr);
      if (fd >= 0) {
        bool placed = false;
        for (auto& slot : fds)
          if (slot < 0) {
            slot = fd;
            placed = true;
            break;
          }
        if (!placed) ::close(fd);
      }
    }
    for (std::size_t k = 1; k < pfds.size(); ++k) {
      if (!(pfds[k].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      const std::size_t slot = slot_of[k - 1];
      char buf[512];
      const ssize_t n = ::recv(fds[slot], buf, sizeof buf, 0);
      if (n <= 0) {
        ::close(fds[slot]);
        fds[slot] = -1;
        continue;
      }
      const auto outputs = host.feed(slot, std::string(buf, static_cast<std::size_t>(n)));
      for (std::size_t i = 0; i < outputs.size(); ++i)
        if (fds[i] >= 0 && !outputs[i].empty() && !send_all(fds[i], outputs[i])) {
          ::close(fds[i]);
          fds[i] = -1;
        }
    }
  }
  ::close(listener);
  return 3;
}

}  // namespace vcan::tools
