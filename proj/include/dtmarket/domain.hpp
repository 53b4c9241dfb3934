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

#pragma once

// Market entities: autonomous vehicles (AVs) with digital-twin (DT) tasks, the
// roadside unit (RSU) that executes them, and the virtual simulators that
// compete for the residual time window of the winning AV.
//
// Units used throughout the library:
//   data sizes       MB        (1 MB = 8 Mbit)
//   bandwidth        MHz       (rates come out in Mbit/s)
//   cycle density    Gcycles/MB
//   clock            GHz
//   time             s
//   power            mW, noise in the same linear power units
//   value / surplus  the utility units of AvProfile::valuation

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dtmarket/util.hpp"

namespace dtmarket {

inline constexpr double kDefaultThetaFloor = 0.05;

struct DtTask {
  double data_size_mb = 0.0;
  double cycles_per_mb = 0.0;
  double deadline_s = 1.0;
};

struct AvProfile {
  std::size_t id = 0;
  double valuation = 0.0;
  double transmit_power_mw = 0.0;
  int cache_size = 0;
  std::vector<DtTask> tasks;
};

struct RsuProfile {
  double uplink_bw_mhz = 20.0;
  double downlink_bw_mhz = 20.0;
  double cpu_ghz = 3.6;
  double gpu_ghz = 19.0;
  double transmit_power_mw = 1.0;
  double noise_power = 1.0;
};

// Link between one AV and the RSU.
struct ChannelState {
  double gain = 1.0;
  double av_noise_power = 1.0;
  double r2_score = 1.0;
};

enum class SimulatorKind { kDriving, kTraffic };

struct SimulatorProfile {
  std::size_t id = 0;
  SimulatorKind kind = SimulatorKind::kTraffic;
  double sim_data_size_mb = 1.0;
  double gpu_cycles_per_mb = 0.0;
  // Scalar generative score, broadcast to every AV unless a per-AV entry exists.
  double generative_score = 0.5;
  std::vector<double> generative_per_av;
  // Preference-cache hits this simulator achieves for each AV.
  std::vector<int> pref_hits;
  double relative_accuracy = 1.0;

  double generative_for(std::size_t av) const {
    return generative_per_av.empty() ? generative_score : generative_per_av.at(av);
  }
  int hits_for(std::size_t av) const { return pref_hits.at(av); }
};

struct Scenario {
  // Seeds the auctioneer's Monte Carlo estimates; set by the generator.
  std::uint64_t seed = 0;
  RsuProfile rsu;
  std::vector<AvProfile> avs;
  std::vector<ChannelState> channels;  // one per AV
  std::vector<SimulatorProfile> sims;  // index 0 is the driving simulator
};

enum class Mechanism { kMtepvisa, kEpvisa, kPvisa, kSpa, kFirstPriceControl };
enum class GenerativeMode { kGenerative, kBaseline };
enum class PhiMode { kEfficientEstimate, kZero };

// How the online winner is charged.
//   kCriticalScore: the threshold price max(Phi_-i) - sum(phi_i), floored at 0.
//   kRunnerUpBid:   the bid price of the runner-up by score.
//   kFirstPrice:    the winner's own bid (non-truthful negative control).
enum class OnlinePayment { kCriticalScore, kRunnerUpBid, kFirstPrice };

struct AlphaPolicy {
  bool analytic = true;
  double fixed_value = 1.0;
};

struct MechanismConfig {
  Mechanism mechanism = Mechanism::kMtepvisa;
  double gamma = 1.0;
  AlphaPolicy alpha;
  PhiMode phi_mode = PhiMode::kEfficientEstimate;
  GenerativeMode generative_mode = GenerativeMode::kGenerative;
  double theta_floor = kDefaultThetaFloor;
  OnlinePayment online_payment = OnlinePayment::kCriticalScore;
  double alpha_cap = 10.0;
  int alpha_samples = 64;
  double phi_grid_step_s = 1.0 / 64.0;
  int deadline_grid = 16;
  bool floor_budget = false;

  // Canonical settings for each named mechanism.
  static MechanismConfig for_mechanism(Mechanism m, double gamma = 1.0,
                                       GenerativeMode mode = GenerativeMode::kGenerative) {
    MechanismConfig c;
    c.mechanism = m;
    c.gamma = gamma;
    c.generative_mode = mode;
    switch (m) {
      case Mechanism::kMtepvisa:
      case Mechanism::kEpvisa:
        break;
      case Mechanism::kFirstPriceControl:
        c.online_payment = OnlinePayment::kFirstPrice;
        break;
      case Mechanism::kPvisa:
      case Mechanism::kSpa:
        c.phi_mode = PhiMode::kZero;
        c.alpha = AlphaPolicy{false, 1.0};
        break;
    }
    return c;
  }
};

inline std::string_view to_string(Mechanism m) {
  switch (m) {
    case Mechanism::kMtepvisa: return "mtepvisa";
    case Mechanism::kEpvisa: return "epvisa";
    case Mechanism::kPvisa: return "pvisa";
    case Mechanism::kSpa: return "spa";
    case Mechanism::kFirstPriceControl: return "first-price";
  }
  return "unknown";
}

inline std::optional<Mechanism> parse_mechanism(std::string_view s) {
  for (auto m : {Mechanism::kMtepvisa, Mechanism::kEpvisa, Mechanism::kPvisa, Mechanism::kSpa,
                 Mechanism::kFirstPriceControl}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

inline std::string_view to_string(GenerativeMode m) {
  return m == GenerativeMode::kGenerative ? "generative" : "baseline";
}

struct MarketOutcome {
  std::optional<std::size_t> winner_av;
  double dt_payment = 0.0;
  std::optional<std::size_t> winner_sim;
  double sim_payment = 0.0;
  double alpha_used = 1.0;
  std::vector<double> scores;              // Phi per AV, indexed by AV id
  std::vector<double> submitted_deadlines; // winner's bid deadlines per task considered
  std::vector<double> per_task_windows;    // T^total per task considered (0 for excluded)
  std::vector<std::size_t> infeasible_tasks;
  double top_traffic_value = 0.0;
  double second_traffic_value = 0.0;
  double s_dt = 0.0;
  double s_traffic = 0.0;
  double s_driving = 0.0;
  double total = 0.0;
};

struct Violation {
  std::string constraint;  // invariant or constraint id, e.g. "cache_hits"
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

namespace detail {

inline bool finite_at_least(double x, double lo) { return std::isfinite(x) && x >= lo; }
inline bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace detail

// Reports every violated invariant instead of stopping at the first.
inline ValidationReport validate_scenario(const Scenario& s, double theta_floor = kDefaultThetaFloor) {
  using detail::finite_at_least;
  using detail::finite_positive;
  ValidationReport rep;
  auto fail = [&](std::string constraint, std::string msg) {
    rep.violations.push_back({std::move(constraint), std::move(msg)});
  };

  const auto& r = s.rsu;
  if (!finite_positive(r.uplink_bw_mhz)) fail("rsu", "rsu.uplink_bw_mhz must be > 0");
  if (!finite_positive(r.downlink_bw_mhz)) fail("rsu", "rsu.downlink_bw_mhz must be > 0");
  if (!finite_positive(r.cpu_ghz)) fail("rsu", "rsu.cpu_ghz must be > 0");
  if (!finite_positive(r.gpu_ghz)) fail("rsu", "rsu.gpu_ghz must be > 0");
  if (!finite_positive(r.transmit_power_mw)) fail("rsu", "rsu.transmit_power_mw must be > 0");
  if (!finite_positive(r.noise_power)) fail("rsu", "rsu.noise_power must be > 0");

  if (s.avs.empty()) fail("avs", "scenario has no AVs");
  for (std::size_t i = 0; i < s.avs.size(); ++i) {
    const auto& av = s.avs[i];
    const std::string p = "avs[" + std::to_string(i) + "]";
    if (av.id != i) fail("ids", p + ".id must equal its index");
    if (!finite_at_least(av.valuation, 0.0)) fail("av", p + ".valuation must be >= 0");
    if (!finite_at_least(av.transmit_power_mw, 0.0)) fail("av", p + ".transmit_power_mw must be >= 0");
    if (av.cache_size < 0) fail("av", p + ".cache_size must be >= 0");
    if (av.tasks.empty()) fail("av", p + ".tasks must be non-empty");
    for (std::size_t n = 0; n < av.tasks.size(); ++n) {
      const auto& t = av.tasks[n];
      const std::string tp = p + ".tasks[" + std::to_string(n) + "]";
      if (!finite_at_least(t.data_size_mb, 0.0)) fail("task", tp + ".data_size_mb must be >= 0");
      if (!finite_at_least(t.cycles_per_mb, 0.0)) fail("task", tp + ".cycles_per_mb must be >= 0");
      if (!finite_positive(t.deadline_s)) fail("task", tp + ".deadline_s must be > 0");
    }
  }

  if (s.channels.size() != s.avs.size()) {
    fail("channels", "expected one channel per AV (" + std::to_string(s.avs.size()) + "), got " +
                         std::to_string(s.channels.size()));
  }
  for (std::size_t i = 0; i < s.channels.size(); ++i) {
    const auto& c = s.channels[i];
    const std::string p = "channels[" + std::to_string(i) + "]";
    if (!finite_at_least(c.gain, 0.0)) fail("channel", p + ".gain must be >= 0");
    if (!finite_positive(c.av_noise_power)) fail("channel", p + ".av_noise_power must be > 0");
    if (!(c.r2_score >= 0.0 && c.r2_score <= 1.0)) fail("channel", p + ".r2_score must be in [0, 1]");
  }

  if (s.sims.empty()) {
    fail("driving", "no driving simulator: sims[0] must exist");
  } else if (s.sims[0].kind != SimulatorKind::kDriving) {
    fail("driving", "no driving simulator: sims[0] must be of kind driving");
  }
  for (std::size_t k = 0; k < s.sims.size(); ++k) {
    const auto& sim = s.sims[k];
    const std::string p = "sims[" + std::to_string(k) + "]";
    if (sim.id != k) fail("ids", p + ".id must equal its index");
    if (k > 0 && sim.kind != SimulatorKind::kTraffic) fail("kind", p + " must be a traffic simulator");
    if (!finite_positive(sim.sim_data_size_mb)) fail("sim", p + ".sim_data_size_mb must be > 0");
    if (!finite_at_least(sim.gpu_cycles_per_mb, 0.0)) fail("sim", p + ".gpu_cycles_per_mb must be >= 0");
    if (!(sim.generative_score >= 0.0 && sim.generative_score <= 1.0)) {
      fail("sim", p + ".generative_score must be in [0, 1]");
    }
    if (!sim.generative_per_av.empty() && sim.generative_per_av.size() != s.avs.size()) {
      fail("sim", p + ".generative_score must list one entry per AV");
    }
    for (std::size_t i = 0; i < sim.generative_per_av.size(); ++i) {
      const double g = sim.generative_per_av[i];
      if (!(g >= 0.0 && g <= 1.0)) {
        fail("sim", p + ".generative_score[" + std::to_string(i) + "] must be in [0, 1]");
      }
    }
    if (!(sim.relative_accuracy >= theta_floor && sim.relative_accuracy <= 1.0)) {
      fail("theta", p + ".relative_accuracy must be in [" + format_double(theta_floor) + ", 1]");
    }
    if (sim.pref_hits.size() != s.avs.size()) {
      fail("sim", p + ".pref_hits must list one entry per AV");
      continue;
    }
    for (std::size_t i = 0; i < sim.pref_hits.size(); ++i) {
      const int h = sim.pref_hits[i];
      if (h < 0) fail("cache_hits", p + ".pref_hits[" + std::to_string(i) + "] must be >= 0");
      if (h > s.avs[i].cache_size) {
        fail("cache_hits", p + ".pref_hits[" + std::to_string(i) + "] = " + std::to_string(h) +
                       " exceeds cache_size " + std::to_string(s.avs[i].cache_size) + " of avs[" +
                       std::to_string(i) + "]");
      }
    }
  }
  return rep;
}

}  // namespace dtmarket
