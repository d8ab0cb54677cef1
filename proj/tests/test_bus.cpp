#include <random>

#include "bus_helpers.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "vcanlab/bus.hpp"

using namespace vcan;
using namespace testutil;

namespace {

constexpr std::uint64_t kHorizon = 10'000'000;

Bus two_node_bus() {
  Bus bus(BusConfig{});
  bus.attach_node("a");
  bus.attach_node("b");
  return bus;
}

// A stuffed offset inside the data/CRC part of the frame. Callers flip
// whatever level is there, so stuff bits near it do not matter.
std::size_t data_offset(const EncodedFrame& e, const Frame& f) {
  return e.stuffed_region_end - 15 - 8 * f.payload().size();
}

Level flipped(Level l) { return l == Level::Dominant ? Level::Recessive : Level::Dominant; }

}  // namespace

TEST_CASE("bus config validation") {
  CHECK(validate_bus_config(5'000, 10'000, true) == ConfigCheck::Ok);
  CHECK(validate_bus_config(5'000, 10'000, false) == ConfigCheck::RateRangeError);
  CHECK(validate_bus_config(1'000'000, 40) == ConfigCheck::Ok);
  CHECK(validate_bus_config(1'000'000, 100) == ConfigCheck::RateDistanceError);
  CHECK(validate_bus_config(2'000'000, 1) == ConfigCheck::RateRangeError);
  CHECK(validate_bus_config(125'000, 400) == ConfigCheck::Ok);
  CHECK(validate_bus_config(125'000, 401) == ConfigCheck::RateDistanceError);
  CHECK(validate_bus_config(1'000'000, 0) == ConfigCheck::DistanceError);
  CHECK_THROWS_AS(Bus(BusConfig{1'000'000, 100, false}), BusError);
}

TEST_CASE("node attachment limits") {
  Bus bus(BusConfig{});
  for (int i = 0; i < 110; ++i) CHECK_NOTHROW(bus.attach_node("n" + std::to_string(i)));
  try {
    bus.attach_node("n110");
    FAIL("111th node attached");
  } catch (const BusError& e) {
    CHECK(e.code() == BusErrc::TooManyNodes);
  }

  Bus dup(BusConfig{});
  dup.attach_node("x");
  try {
    dup.attach_node("x");
    FAIL("duplicate name attached");
  } catch (const BusError& e) {
    CHECK(e.code() == BusErrc::DuplicateName);
  }

  dup.run(Schedule{}, 10);
  try {
    dup.attach_node("late");
    FAIL("attached to a running bus");
  } catch (const BusError& e) {
    CHECK(e.code() == BusErrc::BusRunning);
  }
}

TEST_CASE("resolve_bit is wired-AND") {
  const std::vector<Level> dr{Level::Dominant, Level::Recessive};
  const std::vector<Level> rr{Level::Recessive, Level::Recessive};
  CHECK(resolve_bit(dr) == Level::Dominant);
  CHECK(resolve_bit(rr) == Level::Recessive);
  CHECK(resolve_bit(std::vector<Level>{}) == Level::Recessive);
}

TEST_CASE("empty schedule gives an empty trace") {
  Bus bus = two_node_bus();
  CHECK(bus.run(Schedule{}, 100'000).empty());
  CHECK(bus.trace().empty());
}

TEST_CASE("schedule for an unattached node is rejected") {
  Bus bus = two_node_bus();
  try {
    bus.run(schedule({{0, "ghost", std_frame(1)}}), 100);
    FAIL("ghost accepted");
  } catch (const BusError& e) {
    CHECK(e.code() == BusErrc::ScheduleForDetachedNode);
  }
}

TEST_CASE("single frame delivery time") {
  const Frame f = std_frame(0x0A0, {0xDE, 0xAD, 0xBE, 0xEF});
  Bus bus = two_node_bus();
  bus.run(schedule({{0, "a", f}}), 0);
  bus.run_until_quiescent(kHorizon);
  const auto& tr = bus.trace();
  REQUIRE(tr.size() == 2);
  CHECK(tr[0].kind == TraceKind::TxStart);
  CHECK(tr[0].time_bits == 0);
  CHECK(tr[1].kind == TraceKind::FrameDelivered);
  CHECK(tr[1].time_bits == frame_bit_length(f, true) + kIntermissionBits);
  CHECK(tr[1].time_bits == 82);
  CHECK(bus.take_received(NodeHandle{1}) == std::vector<Frame>{f});
  CHECK(bus.status(NodeHandle{0}).delivered_count == 1);
}

TEST_CASE("arbitration example: lower id delivers first, loser retransmits") {
  const Frame fa = std_frame(0x100, {0xAB, 0xCD});
  const Frame fb = std_frame(0x0A0, {0xDE, 0xAD, 0xBE, 0xEF});
  Bus bus = two_node_bus();
  bus.run(schedule({{0, "a", fa}, {0, "b", fb}}), 0);
  bus.run_until_quiescent(kHorizon);
  const auto& tr = bus.trace();
  CHECK(kinds(tr) == std::vector<TraceKind>{TraceKind::TxStart, TraceKind::TxStart, TraceKind::ArbitrationLost,
                                            TraceKind::FrameDelivered, TraceKind::Retransmit, TraceKind::FrameDelivered});
  CHECK(tr[2].node == "a");
  CHECK(tr[3].frame == fb);
  CHECK(tr[5].frame == fa);
  // Loser drops out on the first id bit where it sends recessive under a dominant.
  CHECK(tr[2].time_bits == 3);
  CHECK(tr[3].time_bits == 82);
  CHECK(tr[4].time_bits == 82);
}

TEST_CASE("node queue order decides transmission order") {
  Bus bus = two_node_bus();
  bus.submit(NodeHandle{0}, std_frame(0x300));
  bus.submit(NodeHandle{0}, std_frame(0x200));
  bus.run_until_quiescent(kHorizon);
  const auto delivered = only(bus.trace(), TraceKind::FrameDelivered);
  REQUIRE(delivered.size() == 2);
  CHECK(delivered[0].frame->id().value() == 0x200);
  CHECK(delivered[1].frame->id().value() == 0x300);
}

TEST_CASE("sole transmitter without receivers records AckError") {
  Bus bus(BusConfig{});
  bus.attach_node("alone");
  bus.run(schedule({{0, "alone", std_frame(0x10)}}), 0);
  bus.run_until_quiescent(20'000);
  CHECK(count(bus.trace(), TraceKind::AckError) >= 32);
  CHECK(count(bus.trace(), TraceKind::FrameDelivered) == 0);
  // With no one to acknowledge, retries escalate to bus-off, recover, and repeat.
  CHECK(count(bus.trace(), TraceKind::BusOffEntered) >= 1);
  CHECK(count(bus.trace(), TraceKind::BusOffRecovered) >= 1);
  CHECK_FALSE(bus.quiescent());
}

TEST_CASE("absolute fault on a data bit") {
  const Frame f = std_frame(0x123, {0xAB, 0xCD});
  const EncodedFrame e = encode_frame(f);
  const std::size_t at = data_offset(e, f) + 3;

  // The flipped wire image is itself rejected by the codec.
  BitStream wire = e.stuffed_bits;
  wire[at] = flipped(wire[at]);
  CHECK_FALSE(decode_frame(wire).ok());

  Bus bus = two_node_bus();
  bus.inject_fault(at, flipped(e.stuffed_bits[at]));
  bus.run(schedule({{0, "a", f}}), 0);
  bus.run_until_quiescent(kHorizon);
  std::vector<TraceKind> k = kinds(bus.trace());
  CHECK(k == std::vector<TraceKind>{TraceKind::TxStart, TraceKind::FaultInjected, TraceKind::ErrorFrame,
                                    TraceKind::Retransmit, TraceKind::FrameDelivered});
  CHECK(bus.take_received(NodeHandle{1}) == std::vector<Frame>{f});
  CHECK(bus.status(NodeHandle{0}).tec == 7);
}

TEST_CASE("absolute fault on an idle bus") {
  Bus bus = two_node_bus();
  bus.inject_fault(50, Level::Dominant);
  bus.run(Schedule{}, 1000);
  CHECK(kinds(bus.trace()) == std::vector<TraceKind>{TraceKind::FaultInjected});
  CHECK(bus.trace()[0].time_bits == 50);
}

TEST_CASE("repeated transmission faults escalate the transmitter") {
  const Frame f = std_frame(0x123, {0xAB, 0xCD});
  const EncodedFrame e = encode_frame(f);
  const std::size_t at = data_offset(e, f);

  for (const unsigned faults : {16u, 32u}) {
    Bus bus = two_node_bus();
    bus.inject_transmission_fault(NodeHandle{0}, at, flipped(e.stuffed_bits[at]), faults);
    bus.run(schedule({{0, "a", f}}), 0);
    std::size_t errors = 0;
    std::vector<NodeMode> seen;
    while (errors < faults) {
      const auto evs = bus.advance_to(bus.now() + 1);
      for (const auto& ev : evs)
        if (ev.kind == TraceKind::ErrorFrame) {
          ++errors;
          seen.push_back(bus.status(NodeHandle{0}).mode);
        }
      REQUIRE(bus.now() < kHorizon);
    }
    const NodeStatus st = bus.status(NodeHandle{0});
    CHECK(st.tec == faults * 8);
    for (std::size_t i = 0; i < seen.size(); ++i) {
      const auto tec = (i + 1) * 8;
      CHECK(seen[i] == (tec > 255 ? NodeMode::BusOff : tec > 127 ? NodeMode::ErrorPassive : NodeMode::ErrorActive));
    }
    if (faults == 16) {
      CHECK(st.mode == NodeMode::ErrorPassive);
    } else {
      CHECK(st.mode == NodeMode::BusOff);
      CHECK(count(bus.trace(), TraceKind::BusOffEntered) == 1);
      const std::uint64_t off_at = first_time(bus.trace(), TraceKind::BusOffEntered, "a");
      bus.run_until_quiescent(kHorizon);
      const std::uint64_t back_at = first_time(bus.trace(), TraceKind::BusOffRecovered, "a");
      REQUIRE(back_at != UINT64_MAX);
      CHECK(back_at - off_at >= 1408);
      // Recovered with zeroed counters, then the kept frame goes out.
      CHECK(count(bus.trace(), TraceKind::FrameDelivered) == 1);
      CHECK(bus.status(NodeHandle{0}).mode == NodeMode::ErrorActive);
      CHECK(bus.status(NodeHandle{0}).tec == 0);
    }
  }
}

TEST_CASE("a bus-off node drives nothing") {
  const Frame doomed = std_frame(0x7F0, {0x01});
  const EncodedFrame e = encode_frame(doomed);
  const std::size_t at = data_offset(e, doomed);

  Bus with(BusConfig{});
  with.attach_node("a");
  with.attach_node("b");
  const NodeHandle c = with.attach_node("c");
  with.inject_transmission_fault(c, at, flipped(e.stuffed_bits[at]), 32);
  with.run(schedule({{0, "c", doomed}}), 0);
  with.run_until_settled(kHorizon);
  REQUIRE(with.status(c).mode == NodeMode::BusOff);
  const std::uint64_t t0 = with.now() + 10;
  const std::uint64_t driven_before = with.status(c).dominant_bits_driven;

  std::mt19937_64 rng(9);
  std::vector<ScheduleEntry> traffic;
  for (std::uint64_t k = 0; k < 4; ++k) {
    traffic.push_back({k * 5, "a", std_frame(0x100 + static_cast<std::uint32_t>(k), {0x00, 0x00, 0x00})});
    traffic.push_back({k * 5, "b", std_frame(0x0F0 + static_cast<std::uint32_t>(k), {0xFF})});
  }
  std::vector<ScheduleEntry> shifted = traffic;
  for (auto& s : shifted) s.time_us += t0;

  with.run(schedule(shifted), t0);
  const auto after = with.advance_to(t0 + 1000);
  REQUIRE(with.status(c).mode == NodeMode::BusOff);
  CHECK(with.status(c).dominant_bits_driven == driven_before);

  Bus without = two_node_bus();
  without.run(schedule(traffic), 1000);

  std::vector<TraceEvent> rebased;
  for (auto ev : after) {
    ev.time_bits -= t0;
    ev.time_s = without.seconds(ev.time_bits);
    rebased.push_back(ev);
  }
  CHECK(count(rebased, TraceKind::FrameDelivered) == 8);
  CHECK(rebased == without.trace());
}

TEST_CASE("arbitration winner latency is unaffected by losers") {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 200; ++i) {
    const Frame fa = oracle::random_frame(rng);
    const Frame fb = oracle::random_frame(rng);
    if (priority_order(fa, fb) == Priority::Tie) continue;
    const bool a_wins = priority_order(fa, fb) == Priority::AWins;
    const Frame& winner = a_wins ? fa : fb;

    Bus both = two_node_bus();
    both.attach_node("rx");
    both.run(schedule({{0, "a", fa}, {0, "b", fb}}), 0);
    both.run_until_quiescent(kHorizon);
    const auto delivered = only(both.trace(), TraceKind::FrameDelivered);
    REQUIRE(delivered.size() == 2);
    CHECK(delivered[0].frame == winner);
    CHECK(count(both.trace(), TraceKind::ArbitrationLost) == 1);

    Bus solo = two_node_bus();
    solo.attach_node("rx");
    solo.run(schedule({{0, a_wins ? "a" : "b", winner}}), 0);
    solo.run_until_quiescent(kHorizon);
    CHECK(only(solo.trace(), TraceKind::FrameDelivered)[0].time_bits == delivered[0].time_bits);
  }
}

TEST_CASE("identical traces on repeated runs") {
  auto run_once = [] {
    Bus bus(BusConfig{500'000, 100, false});
    for (int i = 0; i < 6; ++i) bus.attach_node("n" + std::to_string(i));
    std::mt19937_64 rng(77);
    std::vector<ScheduleEntry> entries;
    for (int i = 0; i < 300; ++i)
      entries.push_back({rng() % 20'000, "n" + std::to_string(rng() % 6), oracle::random_frame(rng)});
    bus.inject_fault(1234, Level::Dominant);
    bus.inject_fault(5678, Level::Recessive);
    bus.run(schedule(entries), 0);
    bus.run_until_quiescent(kHorizon);
    return bus.trace();
  };
  const auto first = run_once();
  CHECK(first.size() > 600);
  CHECK(first == run_once());
}

TEST_CASE("saturated sender throughput") {
  Bus bus = two_node_bus();
  std::mt19937_64 rng(8);
  std::uint64_t delivered = 0;
  while (bus.now() < 1'000'000) {
    while (bus.status(NodeHandle{0}).queue_depth < 16) {
      std::vector<std::uint8_t> p(8);
      for (auto& b : p) b = static_cast<std::uint8_t>(rng());
      bus.submit(NodeHandle{0}, std_frame(0x123, p));
    }
    delivered += count(bus.advance_to(std::min<std::uint64_t>(bus.now() + 500, 1'000'000)), TraceKind::FrameDelivered);
  }
  CHECK(delivered >= 7200);
  CHECK(delivered <= 9100);
}
