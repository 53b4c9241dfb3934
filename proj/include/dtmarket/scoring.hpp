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

// Multi-task DT scoring: the externality term phi(d), scores, marginal scores
// and deadline selection.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dtmarket/auction.hpp"
#include "dtmarket/domain.hpp"
#include "dtmarket/network.hpp"
#include "dtmarket/simvalue.hpp"

namespace dtmarket {

struct ScoreVector {
  double bid = 0.0;
  double total_score = 0.0;
  std::vector<double> marginals;
  std::vector<double> phi_values;      // in scoring order
  std::vector<std::size_t> task_order; // original task index of each entry
};

// Phi = bid + sum(phi). With `sort_tasks` the tasks are reordered by
// descending phi (stable), which makes the marginal sequence non-increasing.
inline ScoreVector score(double bid, std::span<const double> phi_values, bool sort_tasks = true) {
  if (bid < 0.0) throw std::domain_error("score: bid must be >= 0");
  ScoreVector sv;
  sv.bid = bid;
  sv.task_order.resize(phi_values.size());
  std::iota(sv.task_order.begin(), sv.task_order.end(), std::size_t{0});
  if (sort_tasks) {
    std::stable_sort(sv.task_order.begin(), sv.task_order.end(),
                     [&](std::size_t a, std::size_t b) { return phi_values[a] > phi_values[b]; });
  }
  double phi_sum = 0.0;
  for (std::size_t idx : sv.task_order) {
    sv.phi_values.push_back(phi_values[idx]);
    phi_sum += phi_values[idx];
  }
  sv.total_score = bid + phi_sum;
  // chi_1 = Phi(b, d_1); chi_n = Phi(b, d_1..n) - Phi(b, d_1..n-1) = phi(d_n).
  for (std::size_t n = 0; n < sv.phi_values.size(); ++n) {
    sv.marginals.push_back(n == 0 ? bid + sv.phi_values[0] : sv.phi_values[n]);
  }
  if (sv.marginals.empty()) sv.marginals.push_back(bid);
  return sv;
}

inline bool assumption1_check(const ScoreVector& sv) {
  for (std::size_t n = 0; n < sv.marginals.size(); ++n) {
    if (!(sv.marginals[n] >= 0.0)) return false;
    if (n + 1 < sv.marginals.size() && sv.marginals[n] < sv.marginals[n + 1]) return false;
  }
  return true;
}

// Argmax of phi over the candidates; ties go to the largest deadline.
template <class Phi>
double optimal_deadline(std::span<const double> candidates, Phi&& phi) {
  if (candidates.empty()) throw std::domain_error("optimal_deadline: empty candidate grid");
  double best_d = candidates[0];
  double best_v = phi(best_d);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double v = phi(candidates[i]);
    if (v > best_v || (v == best_v && candidates[i] > best_d)) {
      best_v = v;
      best_d = candidates[i];
    }
  }
  return best_d;
}

// Uniform grid d * j / points, j = 1..points, over (0, d].
inline std::vector<double> deadline_grid(double true_deadline_s, int points) {
  if (!(true_deadline_s > 0.0)) throw std::domain_error("deadline_grid: deadline must be > 0");
  if (points < 1) throw std::domain_error("deadline_grid: points must be >= 1");
  std::vector<double> g;
  g.reserve(static_cast<std::size_t>(points));
  for (int j = 1; j < points; ++j) g.push_back(true_deadline_s * j / points);
  g.push_back(true_deadline_s);
  return g;
}

template <class Phi>
double optimal_deadline(double true_deadline_s, Phi&& phi, int points) {
  const auto grid = deadline_grid(true_deadline_s, points);
  return optimal_deadline(std::span<const double>(grid), std::forward<Phi>(phi));
}

// Physical state of one AV against the RSU and every simulator.
struct AvContext {
  const Scenario* scenario = nullptr;
  std::size_t av = 0;
  LinkRates rates;
  std::vector<DtLatency> dt;     // per task, against the true deadlines
  std::vector<double> sim_rate;  // effective simulation throughput per simulator

  static AvContext build(const Scenario& s, std::size_t av) {
    AvContext c;
    c.scenario = &s;
    c.av = av;
    const auto& profile = s.avs.at(av);
    c.rates = link_rates(profile, s.rsu, s.channels.at(av));
    for (const auto& t : profile.tasks) c.dt.push_back(dt_latency(t, c.rates.uplink_mbps, s.rsu.cpu_ghz));
    for (const auto& sim : s.sims) {
      c.sim_rate.push_back(effective_sim_rate(c.rates.downlink_mbps, sim.gpu_cycles_per_mb, s.rsu.gpu_ghz));
    }
    return c;
  }

  const AvProfile& profile() const { return scenario->avs[av]; }

  double budget(std::size_t task, double deadline_s, std::size_t sim, bool floor_count) const {
    return simulation_budget(deadline_s, dt[task].total_s, sim_rate[sim], scenario->sims[sim].sim_data_size_mb,
                             floor_count);
  }

  double value(std::size_t sim, double q_count, const MechanismConfig& cfg) const {
    const auto& p = scenario->sims[sim];
    const double m = match_quality(cfg.generative_mode, p.generative_for(av), q_count, p.hits_for(av),
                                   p.relative_accuracy, cfg.theta_floor);
    return simulator_value(profile().valuation, m);
  }

  // T^total for one task when simulator `sim` runs q_count simulations.
  double window(std::size_t task, double q_count, std::size_t sim) const {
    const auto lat = sim_latency(q_count, scenario->sims[sim], rates.downlink_mbps, scenario->rsu.gpu_ghz);
    return total_latency(dt[task], lat.transmit_s, lat.compute_s);
  }
};

struct OfflineWinner {
  std::optional<std::size_t> sim;
  double unit_price = 0.0;
  double value = 0.0;
  double top_traffic = 0.0;
  double second_traffic = 0.0;
};

// Clears the offline submarket on unit-time bids indexed by simulator id. The
// simulator kind decides which side of the rule a bid sits on.
inline OfflineWinner clear_offline_bids(const Scenario& s, std::span<const double> bids, double alpha,
                                        bool second_price_all) {
  OfflineWinner out;
  thread_local std::vector<SimBid> traffic;
  thread_local std::vector<SimBid> all;
  traffic.clear();
  all.clear();
  std::optional<double> driving;
  for (std::size_t k = 0; k < bids.size(); ++k) {
    all.push_back({k, bids[k]});
    if (s.sims[k].kind == SimulatorKind::kDriving) {
      driving = bids[k];
    } else {
      traffic.push_back({k, bids[k]});
    }
  }
  const AuctionResult r = second_price_all ? clear_second_price(all) : clear_offline(driving, traffic, alpha);
  const AuctionResult t = second_price_all ? clear_offline(std::nullopt, traffic, 1.0) : r;
  out.top_traffic = t.first_value;
  out.second_traffic = t.second_value;
  out.sim = r.winner;
  out.unit_price = r.critical_price;
  return out;
}

// Auctioneer's estimate of the offline surplus one task generates when the AV
// stays connected until `deadline`: run the offline rule on the realized
// simulator values for this task's window alone and return window * rate.
inline double raw_externality(const AvContext& ctx, std::size_t task, double deadline_s, const MechanismConfig& cfg,
                              double alpha) {
  const auto& dt = ctx.dt[task];
  if (!(deadline_s > dt.total_s)) return 0.0;
  const auto& sims = ctx.scenario->sims;
  if (sims.empty()) return 0.0;
  thread_local std::vector<double> q;
  thread_local std::vector<double> values;
  q.resize(sims.size());
  values.resize(sims.size());
  for (std::size_t k = 0; k < sims.size(); ++k) {
    q[k] = ctx.budget(task, deadline_s, k, cfg.floor_budget);
    values[k] = ctx.value(k, q[k], cfg);
  }
  const auto w = clear_offline_bids(*ctx.scenario, values, alpha, cfg.mechanism == Mechanism::kSpa);
  if (!w.sim) return 0.0;
  const std::size_t k = *w.sim;
  const double rate = sims[k].kind == SimulatorKind::kDriving ? cfg.gamma * values[k] : values[k];
  return ctx.window(task, q[k], k) * rate;
}

// phi(d) for one task. The raw estimate is sampled on the absolute grid
// j * step and phi(d) is its running maximum over grid points <= d, which makes
// phi a non-decreasing step function with phi(0) = 0 even where the offline
// winner switches between simulator kinds.
class ExternalityEstimator {
 public:
  ExternalityEstimator() = default;

  ExternalityEstimator(const AvContext& ctx, std::size_t task, const MechanismConfig& cfg, double alpha,
                       double max_deadline_s)
      : step_(cfg.phi_grid_step_s) {
    if (!(step_ > 0.0)) throw std::domain_error("ExternalityEstimator: grid step must be > 0");
    if (cfg.phi_mode == PhiMode::kZero) return;
    const auto points = static_cast<std::size_t>(std::floor(max_deadline_s / step_ + 1e-9));
    table_.reserve(points + 1);
    double running = 0.0;
    for (std::size_t j = 1; j <= points; ++j) {
      const double d = static_cast<double>(j) * step_;
      running = std::max(running, raw_externality(ctx, task, d, cfg, alpha));
      table_.push_back(running);
    }
  }

  double operator()(double deadline_s) const {
    if (!(deadline_s > 0.0) || table_.empty()) return 0.0;
    const double pos = std::floor(deadline_s / step_ + 1e-9);
    const auto j = static_cast<std::size_t>(std::min<double>(pos, static_cast<double>(table_.size() - 1)));
    return table_[j];
  }

 private:
  double step_ = 1.0;
  std::vector<double> table_{0.0};
};

inline double externality_phi(double deadline_s, const AvContext& ctx, std::size_t task, const MechanismConfig& cfg,
                              double alpha = 1.0) {
  if (deadline_s < 0.0) throw std::domain_error("externality_phi: deadline must be >= 0");
  if (cfg.phi_mode == PhiMode::kZero) return 0.0;
  return ExternalityEstimator(ctx, task, cfg, alpha, deadline_s)(deadline_s);
}

}  // namespace dtmarket
