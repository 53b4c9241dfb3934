// Copyright 2026 The dtmarket Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "dtmarket/network.hpp"
#include "dtmarket/simvalue.hpp"

namespace dtmarket {
namespace {

TEST(ShannonRate, UnitSnrGivesBandwidth) { EXPECT_DOUBLE_EQ(shannon_rate(20, 1, 1, 1), 20.0); }

TEST(ShannonRate, SnrThreeDoublesRate) { EXPECT_DOUBLE_EQ(shannon_rate(20, 1, 3, 1), 40.0); }

TEST(ShannonRate, ZeroGainGivesZero) { EXPECT_EQ(shannon_rate(20, 0, 5, 1), 0.0); }

TEST(ShannonRate, NonPositiveNoiseIsADomainError) {
  EXPECT_THROW(shannon_rate(20, 1, 1, 0), std::domain_error);
  EXPECT_THROW(shannon_rate(20, 1, 1, -1), std::domain_error);
}

TEST(ShannonRate, MonotoneInEveryArgument) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.01, 5.0);
  for (int i = 0; i < 2000; ++i) {
    const double b = u(rng), g = u(rng), p = u(rng), n = u(rng), bump = u(rng);
    const double base = shannon_rate(b, g, p, n);
    EXPECT_GE(shannon_rate(b + bump, g, p, n), base);
    EXPECT_GE(shannon_rate(b, g + bump, p, n), base);
    EXPECT_GE(shannon_rate(b, g, p + bump, n), base);
    EXPECT_LT(shannon_rate(b, g, p, n + bump), base);
  }
}

TEST(DtLatency, ZeroSizeTaskIsFreeAndFeasible) {
  const auto lat = dt_latency(DtTask{0.0, 2.0, 1.0}, 4.0, 3.6);
  EXPECT_EQ(lat.upload_s, 0.0);
  EXPECT_EQ(lat.compute_s, 0.0);
  EXPECT_TRUE(lat.feasible);
}

TEST(DtLatency, ZeroUplinkWithDataIsInfeasibleNotAnError) {
  const auto lat = dt_latency(DtTask{0.5, 1.0, 1.5}, 0.0, 3.6);
  EXPECT_TRUE(std::isinf(lat.upload_s));
  EXPECT_FALSE(lat.feasible);
}

TEST(SimLatency, NoSimulationsTakeNoTime) {
  SimulatorProfile sim;
  sim.sim_data_size_mb = 2.5;
  sim.gpu_cycles_per_mb = 5;
  const auto lat = sim_latency(0.0, sim, 20.0, 19.0);
  EXPECT_EQ(lat.transmit_s, 0.0);
  EXPECT_EQ(lat.compute_s, 0.0);
}

TEST(TotalLatency, NoSimulationLeavesDtLatency) {
  const DtLatency dt{1.0, 0.2778, 1.2778, true};
  EXPECT_DOUBLE_EQ(total_latency(dt, 0.0, 0.0), 1.2778);
}

TEST(TotalLatency, AddsComponents) {
  const DtLatency dt{0.3, 0.2, 0.5, true};
  EXPECT_DOUBLE_EQ(total_latency(dt, 0.3, 0.2), 1.0);
}

TEST(TotalLatency, EqualsSumOfFourComponentsExactly) {
  Rng rng(9);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const DtLatency dt{u(rng), u(rng), 0.0, true};
    const double t = u(rng), l = u(rng);
    EXPECT_EQ(total_latency(dt, t, l), (dt.upload_s + dt.compute_s) + (t + l));
  }
}

TEST(EffectiveSimRate, EqualsDownlinkWithoutGpuWork) { EXPECT_EQ(effective_sim_rate(20.0, 0.0, 19.0), 20.0); }

// Filling the residual window with the simulation budget lands exactly on the
// deadline, so allocated windows never break the deadline constraint.
TEST(EffectiveSimRate, BudgetFillsResidualWindowExactly) {
  Rng rng(21);
  std::uniform_real_distribution<double> u(0.01, 5.0);
  for (int i = 0; i < 2000; ++i) {
    SimulatorProfile sim;
    sim.sim_data_size_mb = u(rng);
    sim.gpu_cycles_per_mb = u(rng);
    const double down = 4.0 * u(rng), gpu = 19.0;
    const DtLatency dt{0.1 * u(rng), 0.1 * u(rng), 0.0, true};
    const double t_dt = dt.upload_s + dt.compute_s;
    const double deadline = t_dt + u(rng);
    const double rate = effective_sim_rate(down, sim.gpu_cycles_per_mb, gpu);
    const double q = simulation_budget(deadline, t_dt, rate, sim.sim_data_size_mb);
    const auto lat = sim_latency(q, sim, down, gpu);
    EXPECT_NEAR(total_latency(dt, lat.transmit_s, lat.compute_s), deadline, 1e-12 * deadline);
  }
}

}  // namespace
}  // namespace dtmarket
