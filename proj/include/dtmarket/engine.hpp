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

// Scenario sampling and paired Monte Carlo runs.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtmarket/domain.hpp"
#include "dtmarket/mechanism.hpp"
#include "dtmarket/util.hpp"

namespace dtmarket {

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

struct ScenarioConfig {
  int num_avs = 30;
  int num_traffic_sims = 30;
  int num_tasks = 1;

  double uplink_bw_mhz = 20.0;
  double downlink_bw_mhz = 20.0;
  double cpu_ghz = 3.6;
  double gpu_ghz = 19.0;
  Range rsu_power_mw{0.0, 5.0};

  Range channel_gain{0.0, 1.0};
  Range av_power_mw{0.0, 1.0};
  // Noise powers are |N(0, 1)| draws clamped from below.
  double noise_floor = 0.01;
  Range r2_score{0.99, 1.0};

  Range dt_size_mb{0.0, 0.5};
  Range dt_cycles_per_mb{0.0, 2.0};
  Range deadline_s{1.0, 1.5};
  Range valuation{0.0, 1.0};
  double zipf_exponent = 2.0;
  int cache_max = 20;

  Range sim_size_mb{0.0, 2.5};
  Range sim_gpu_cycles_per_mb{0.0, 5.0};
  Range generative_score{0.4, 0.6};
  double theta = 0.53;
  double gamma = 1.0;

  std::uint64_t master_seed = 2023;
  int rounds = 1000;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::vector<std::string>& problems)
      : std::runtime_error(join(problems)), problems_(problems) {}
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string s = "invalid config:";
    for (const auto& x : p) s += "\n  " + x;
    return s;
  }
  std::vector<std::string> problems_;
};

inline std::vector<std::string> config_problems(const ScenarioConfig& c) {
  std::vector<std::string> out;
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) out.push_back(msg);
  };
  auto range = [&](const Range& r, const std::string& name, double min_lo, double max_hi) {
    need(std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi, name + ": bounds must be ordered (lo <= hi)");
    need(r.lo >= min_lo, name + ": lower bound must be >= " + format_double(min_lo));
    need(r.hi <= max_hi, name + ": upper bound must be <= " + format_double(max_hi));
  };
  constexpr double inf = INFINITY;
  need(c.num_avs >= 1, "num_avs must be >= 1");
  need(c.num_traffic_sims >= 1, "num_traffic_sims must be >= 1");
  need(c.num_tasks >= 1, "num_tasks must be >= 1");
  need(c.uplink_bw_mhz > 0, "uplink_bw_mhz must be > 0");
  need(c.downlink_bw_mhz > 0, "downlink_bw_mhz must be > 0");
  need(c.cpu_ghz > 0, "cpu_ghz must be > 0");
  need(c.gpu_ghz > 0, "gpu_ghz must be > 0");
  range(c.rsu_power_mw, "rsu_power_mw", 0.0, inf);
  need(c.rsu_power_mw.hi > 0, "rsu_power_mw: upper bound must be > 0");
  range(c.channel_gain, "channel_gain", 0.0, inf);
  range(c.av_power_mw, "av_power_mw", 0.0, inf);
  need(c.noise_floor > 0, "noise_floor must be > 0");
  range(c.r2_score, "r2_score", 0.0, 1.0);
  range(c.dt_size_mb, "dt_size_mb", 0.0, inf);
  range(c.dt_cycles_per_mb, "dt_cycles_per_mb", 0.0, inf);
  range(c.deadline_s, "deadline_s", 0.0, inf);
  need(c.deadline_s.lo > 0, "deadline_s: lower bound must be > 0");
  range(c.valuation, "valuation", 0.0, inf);
  need(c.zipf_exponent > 0, "zipf_exponent must be > 0");
  need(c.cache_max >= 1, "cache_max must be >= 1");
  range(c.sim_size_mb, "sim_size_mb", 0.0, inf);
  need(c.sim_size_mb.hi > 0, "sim_size_mb: upper bound must be > 0");
  range(c.sim_gpu_cycles_per_mb, "sim_gpu_cycles_per_mb", 0.0, inf);
  range(c.generative_score, "generative_score", 0.0, 1.0);
  need(c.theta >= kDefaultThetaFloor && c.theta <= 1.0, "theta must be in [0.05, 1]");
  need(c.gamma >= 0, "gamma must be >= 0");
  need(c.rounds >= 1, "rounds must be >= 1");
  return out;
}

inline void validate_config(const ScenarioConfig& c) {
  if (auto p = config_problems(c); !p.empty()) throw ConfigError(p);
}

namespace detail {

inline double uniform(Rng& rng, const Range& r) {
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

// Draws from the range but rejects the lower bound itself, for quantities
// that must stay strictly positive.
inline double uniform_positive(Rng& rng, const Range& r) {
  for (;;) {
    const double x = uniform(rng, r);
    if (x > 0.0) return x;
  }
}

inline double noise_power(Rng& rng, double floor) {
  return std::max(std::abs(std::normal_distribution<double>(0.0, 1.0)(rng)), floor);
}

}  // namespace detail

// Round `round_index` of the run seeded by config.master_seed. Each round owns
// an RNG stream seeded from (master_seed, round_index), so a scenario does not
// depend on how many rounds came before it or which thread generates it.
inline Scenario generate_scenario(const ScenarioConfig& c, std::uint64_t round_index) {
  validate_config(c);
  using detail::uniform;
  Rng rng = stream_rng(c.master_seed, round_index);
  Scenario s;
  s.seed = mix64(c.master_seed ^ mix64(round_index));

  s.rsu.uplink_bw_mhz = c.uplink_bw_mhz;
  s.rsu.downlink_bw_mhz = c.downlink_bw_mhz;
  s.rsu.cpu_ghz = c.cpu_ghz;
  s.rsu.gpu_ghz = c.gpu_ghz;
  s.rsu.transmit_power_mw = detail::uniform_positive(rng, c.rsu_power_mw);
  s.rsu.noise_power = detail::noise_power(rng, c.noise_floor);

  // Zipf(exponent) truncated to {1..cache_max}.
  std::vector<double> zipf_weights;
  for (int k = 1; k <= c.cache_max; ++k) zipf_weights.push_back(std::pow(static_cast<double>(k), -c.zipf_exponent));
  std::discrete_distribution<int> cache_dist(zipf_weights.begin(), zipf_weights.end());

  const auto n_avs = static_cast<std::size_t>(c.num_avs);
  for (std::size_t i = 0; i < n_avs; ++i) {
    AvProfile av;
    av.id = i;
    av.valuation = uniform(rng, c.valuation);
    av.transmit_power_mw = uniform(rng, c.av_power_mw);
    av.cache_size = cache_dist(rng) + 1;
    for (int n = 0; n < c.num_tasks; ++n) {
      DtTask t;
      t.data_size_mb = uniform(rng, c.dt_size_mb);
      t.cycles_per_mb = uniform(rng, c.dt_cycles_per_mb);
      t.deadline_s = detail::uniform_positive(rng, c.deadline_s);
      av.tasks.push_back(t);
    }
    s.avs.push_back(std::move(av));
    ChannelState ch;
    ch.gain = uniform(rng, c.channel_gain);
    ch.av_noise_power = detail::noise_power(rng, c.noise_floor);
    ch.r2_score = uniform(rng, c.r2_score);
    s.channels.push_back(ch);
  }

  const auto n_sims = static_cast<std::size_t>(c.num_traffic_sims) + 1;
  for (std::size_t k = 0; k < n_sims; ++k) {
    SimulatorProfile sim;
    sim.id = k;
    sim.kind = k == 0 ? SimulatorKind::kDriving : SimulatorKind::kTraffic;
    sim.sim_data_size_mb = detail::uniform_positive(rng, c.sim_size_mb);
    sim.gpu_cycles_per_mb = uniform(rng, c.sim_gpu_cycles_per_mb);
    sim.generative_score = 0.5 * (c.generative_score.lo + c.generative_score.hi);
    sim.relative_accuracy = c.theta;
    for (std::size_t i = 0; i < n_avs; ++i) {
      sim.generative_per_av.push_back(uniform(rng, c.generative_score));
      sim.pref_hits.push_back(std::uniform_int_distribution<int>(0, s.avs[i].cache_size)(rng));
    }
    s.sims.push_back(std::move(sim));
  }
  return s;
}

struct SummaryStats {
  double mean = 0.0;
  double variance = 0.0;  // unbiased; 0 for a single sample
};

inline SummaryStats summarize(std::span<const double> xs) {
  SummaryStats s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    for (double x : xs) s.variance += (x - s.mean) * (x - s.mean);
    s.variance /= static_cast<double>(xs.size() - 1);
  }
  return s;
}

struct MechanismRun {
  MechanismConfig config;
  std::vector<MarketOutcome> outcomes;  // indexed by round
  SummaryStats s_dt, s_traffic, s_driving, total, dt_payment, sim_payment;
};

struct RunReport {
  ScenarioConfig config;
  int rounds = 0;
  std::vector<MechanismRun> mechanisms;

  const MechanismRun& find(Mechanism m) const {
    for (const auto& r : mechanisms) {
      if (r.config.mechanism == m) return r;
    }
    throw std::out_of_range("RunReport: mechanism not in run");
  }
};

inline void aggregate(MechanismRun& run) {
  std::vector<double> a, b, c, d, e, f;
  for (const auto& o : run.outcomes) {
    a.push_back(o.s_dt);
    b.push_back(o.s_traffic);
    c.push_back(o.s_driving);
    d.push_back(o.total);
    e.push_back(o.dt_payment);
    f.push_back(o.sim_payment);
  }
  run.s_dt = summarize(a);
  run.s_traffic = summarize(b);
  run.s_driving = summarize(c);
  run.total = summarize(d);
  run.dt_payment = summarize(e);
  run.sim_payment = summarize(f);
}

// Every mechanism clears the identical scenario in each round.
inline RunReport run_monte_carlo(const ScenarioConfig& config, const std::vector<MechanismConfig>& mechanisms,
                                 int rounds, int jobs = 1) {
  validate_config(config);
  if (rounds < 1) throw ConfigError({"rounds must be >= 1"});
  RunReport report;
  report.config = config;
  report.rounds = rounds;
  for (const auto& m : mechanisms) {
    MechanismRun r;
    r.config = m;
    r.outcomes.resize(static_cast<std::size_t>(rounds));
    report.mechanisms.push_back(std::move(r));
  }
  parallel_for(static_cast<std::size_t>(rounds), jobs, [&](std::size_t round) {
    const Scenario scenario = generate_scenario(config, round);
    for (auto& m : report.mechanisms) m.outcomes[round] = run_mechanism(scenario, m.config);
  });
  for (auto& m : report.mechanisms) aggregate(m);
  return report;
}

}  // namespace dtmarket
