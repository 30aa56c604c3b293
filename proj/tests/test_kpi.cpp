#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "epicsim/kpi.hpp"

using namespace epicsim;

namespace {

RunTrace trace_with_rtt(std::vector<Micros> rtt) {
  RunTrace t;
  t.duration = 1'000'000;
  t.rtt_samples = std::move(rtt);
  return t;
}

}  // namespace

TEST(Percentile, Examples) {
  const std::vector<Micros> five = {5, 3, 1, 4, 2};
  EXPECT_EQ(percentile(five, 50), 3);
  const std::vector<Micros> one = {7};
  EXPECT_EQ(percentile(one, 1), 7);
  EXPECT_EQ(percentile(one, 100), 7);
  std::vector<Micros> hundred(100);
  for (int i = 0; i < 100; ++i) hundred[static_cast<std::size_t>(i)] = 100 - i;
  EXPECT_EQ(percentile(hundred, 99), 99);
  EXPECT_EQ(percentile(hundred, 100), 100);
  EXPECT_THROW(percentile(std::vector<Micros>{}, 50), ValidationError);
  EXPECT_THROW(percentile(one, 0), ValidationError);
  EXPECT_THROW(percentile(one, 101), ValidationError);
}

TEST(Percentile, MatchesSortReference) {
  std::mt19937_64 gen(8);
  for (int i = 0; i < 2000; ++i) {
    std::vector<Micros> s(1 + gen() % 300);
    for (auto& v : s) v = static_cast<Micros>(gen() % 10'000);
    const int p_int = 1 + static_cast<int>(gen() % 100);
    auto sorted = s;
    std::sort(sorted.begin(), sorted.end());
    // ceil(p * n / 100) in integers.
    const std::size_t rank = (static_cast<std::size_t>(p_int) * sorted.size() + 99) / 100;
    EXPECT_EQ(percentile(s, p_int), sorted[rank - 1]);
  }
}

TEST(Report, AggregateThroughputOfEightL0Clients) {
  RunTrace t;
  t.duration = 10'000'000;
  t.delivered_bits.assign(8, std::vector<std::uint64_t>(10, 99'532'800));
  t.frames_sent = t.frames_delivered = 4800;
  const KpiReport r = build_report(t, 0.0);
  EXPECT_EQ(r.aggregate_throughput, 796'262'400u);
  EXPECT_TRUE(r.pass_bandwidth);
  t.delivered_bits.resize(5);
  EXPECT_FALSE(build_report(t, 0.0).pass_bandwidth);
}

TEST(Report, RttVerdictIsStrict) {
  const KpiReport ok = build_report(trace_with_rtt(std::vector<Micros>(50, 4000)), 0.0);
  EXPECT_EQ(ok.rtt_p95, 4000);
  EXPECT_TRUE(ok.pass_rtt);
  const KpiReport edge = build_report(trace_with_rtt(std::vector<Micros>(50, 7000)), 0.0);
  EXPECT_EQ(edge.rtt_p95, 7000);
  EXPECT_FALSE(edge.pass_rtt);
  const KpiReport below = build_report(trace_with_rtt(std::vector<Micros>(50, 6999)), 0.0);
  EXPECT_TRUE(below.pass_rtt);
}

TEST(Report, BatteryAndBandwidthBoundaries) {
  KpiReport r;
  r.battery_gain = 30.0;
  EXPECT_FALSE(battery_verdict(r));
  r.battery_gain = 30.0001;
  EXPECT_TRUE(battery_verdict(r));
  r.aggregate_throughput = 700'000'000;
  EXPECT_FALSE(bandwidth_verdict(r));
  r.aggregate_throughput = 700'000'001;
  EXPECT_TRUE(bandwidth_verdict(r));
}

TEST(Report, LossAndConservation) {
  RunTrace t = trace_with_rtt({4000});
  t.frames_sent = 100;
  t.frames_delivered = 90;
  t.frames_dropped = 6;
  t.frames_in_flight = 4;
  const KpiReport r = build_report(t, 12.0);
  EXPECT_DOUBLE_EQ(r.loss_rate, 6.0 / 96.0);
  EXPECT_EQ(r.frames_sent, r.frames_delivered + r.frames_dropped + r.frames_in_flight);
  EXPECT_DOUBLE_EQ(r.battery_gain, 12.0);
  EXPECT_FALSE(r.pass_battery);
}

TEST(Report, EmptyTraceThrows) {
  RunTrace t;
  EXPECT_THROW(build_report(t, 0.0), ValidationError);
  t.duration = 1000;
  EXPECT_THROW(build_report(t, 0.0), ValidationError);
}

TEST(Search, LoadStopsAtFirstFailure) {
  EXPECT_EQ(load_search([](int n) { return n <= 10; }, 16), 10);
  EXPECT_EQ(load_search([](int) { return false; }, 16), 0);
  EXPECT_EQ(load_search([](int) { return true; }, 16), 16);
  // Non-monotone: fails at 4, passes again at 5.
  EXPECT_EQ(load_search([](int n) { return n != 4; }, 16), 3);
  EXPECT_THROW(load_search([](int) { return true; }, 0), ValidationError);
}

TEST(Search, StressFindsFirstCongestion) {
  EXPECT_EQ(stress_search([](int n) { return n >= 11; }, 16), 11);
  EXPECT_EQ(stress_search([](int) { return false; }, 16), std::nullopt);
  EXPECT_EQ(stress_search([](int n) { return n == 7 || n == 3; }, 16), 3);
}

TEST(Search, MatchesExhaustiveScan) {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 500; ++trial) {
    const int n_max = 1 + static_cast<int>(gen() % 16);
    std::vector<bool> table(17);
    for (auto&& b : table) b = gen() % 5 != 0;
    const auto pred = [&](int n) { return static_cast<bool>(table[static_cast<std::size_t>(n)]); };
    int expected_load = 0;
    while (expected_load < n_max && pred(expected_load + 1)) ++expected_load;
    EXPECT_EQ(load_search(pred, n_max), expected_load);
    std::optional<int> expected_stress;
    for (int n = n_max; n >= 1; --n) {
      if (!pred(n)) expected_stress = n;
    }
    EXPECT_EQ(stress_search([&](int n) { return !pred(n); }, n_max), expected_stress);
  }
}
