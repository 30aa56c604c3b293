#include <gtest/gtest.h>

#include <random>

#include "epicsim/power.hpp"

using namespace epicsim;

namespace {

EnergyConfig config(RenderMode mode, double device_render = 2e8, double device_decode = 7e9) {
  return EnergyConfig{mode, PowerProfile{}, default_ladder()[0], device_render, device_decode};
}

}  // namespace

TEST(Power, LocalRenderAtL0) {
  // 10.368 ms per frame at 60 fps keeps the renderer 62.2% busy.
  const EnergyConfig local = config(RenderMode::local_render);
  EXPECT_NEAR(utilization(local), 0.62208, 1e-12);
  EXPECT_NEAR(average_power(local), 5.79936, 1e-12);
  const EnergyConfig slow = config(RenderMode::local_render, 1e8);
  EXPECT_DOUBLE_EQ(utilization(slow), 1.0);
  EXPECT_DOUBLE_EQ(average_power(slow), 7.5);
}

TEST(Power, OffloadedFoldsInDecodeUtilization) {
  const EnergyConfig off = config(RenderMode::offloaded);
  const double u = 2'073'600.0 / 7e9 * 60.0;
  EXPECT_NEAR(utilization(off), 0.017774, 1e-6);
  EXPECT_DOUBLE_EQ(average_power(off), 3.0 + 1.2 + 0.8 * u);
  EXPECT_NEAR(average_power(off), 4.2142, 1e-4);
}

TEST(Power, ZeroRenderPowerMeansIdle) {
  EnergyConfig local = config(RenderMode::local_render);
  local.profile.p_render_local = 0.0;
  for (const auto& level : default_ladder()) {
    local.level = level;
    EXPECT_DOUBLE_EQ(average_power(local), local.profile.p_idle);
  }
}

TEST(Power, GainExamples) {
  // Device that saturates both render and decode: 7.5 W vs 5.0 W.
  const EnergyConfig local = config(RenderMode::local_render, 1e8, 1e8);
  const EnergyConfig off = config(RenderMode::offloaded, 1e8, 1e8);
  EXPECT_DOUBLE_EQ(average_power(off), 5.0);
  EXPECT_NEAR(battery_life_gain(local, off), 50.0, 1e-9);
  EXPECT_DOUBLE_EQ(battery_life_gain(local, local), 0.0);
  EnergyConfig six = local;
  six.profile.p_render_local = 3.0;
  EXPECT_NEAR(battery_life_gain(six, off), 20.0, 1e-9);
  EnergyConfig radio = off;
  radio.profile.p_radio = 2.7;
  EXPECT_NEAR(battery_life_gain(local, radio), (7.5 / 6.5 - 1.0) * 100.0, 1e-9);
  EXPECT_LT(battery_life_gain(local, radio), 30.0);
}

TEST(Power, BatteryLife) {
  const EnergyConfig local = config(RenderMode::local_render, 1e8);
  EXPECT_NEAR(battery_life_hours(local), 7.6 / 7.5, 1e-12);
}

TEST(Power, GainErrors) {
  EnergyConfig local = config(RenderMode::local_render);
  EnergyConfig off = config(RenderMode::offloaded);
  off.profile.battery_capacity = 5.0;
  EXPECT_THROW(battery_life_gain(local, off), ValidationError);
  off = config(RenderMode::offloaded);
  off.profile = PowerProfile{0.0, 0.0, 0.0, 0.0, 7.6};
  EXPECT_THROW(battery_life_gain(local, off), ValidationError);
  off = config(RenderMode::offloaded, 2e8, 0.0);
  EXPECT_THROW(average_power(off), ValidationError);
}

TEST(Power, Properties) {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> watts(0.1, 10.0);
  std::uniform_real_distribution<double> tp(1e6, 1e11);
  for (int i = 0; i < 2000; ++i) {
    EnergyConfig local = config(RenderMode::local_render, tp(gen), tp(gen));
    EnergyConfig off = config(RenderMode::offloaded, tp(gen), tp(gen));
    local.level = off.level = default_ladder()[gen() % 5];
    local.profile = PowerProfile{watts(gen), watts(gen), watts(gen), watts(gen), 7.6};
    off.profile = PowerProfile{watts(gen), watts(gen), watts(gen), watts(gen), 7.6};
    EXPECT_LE(utilization(local), 1.0);
    EXPECT_LE(utilization(off), 1.0);
    const double gain = battery_life_gain(local, off);
    EXPECT_EQ(gain > 0, average_power(off) < average_power(local));
    // Scaling every power term scales both averages.
    const double k = 1.0 + static_cast<double>(gen() % 50);
    for (EnergyConfig* c : {&local, &off}) {
      c->profile.p_idle *= k;
      c->profile.p_render_local *= k;
      c->profile.p_radio *= k;
      c->profile.p_decode *= k;
    }
    EXPECT_NEAR(battery_life_gain(local, off), gain, 1e-9 * std::max(1.0, std::abs(gain)));
  }
}
