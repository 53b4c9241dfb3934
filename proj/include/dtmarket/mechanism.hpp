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

// One market round: deadline selection, the online auction over AVs, and the
// offline auction over simulators for the winner's residual window.
//
// Mechanism variants:
//   mtepvisa     externality scoring over every task, deadline selection, alpha
//   epvisa       externality scoring and offline window on the first task only, alpha
//   pvisa        price-only online auction, alpha = 1 with driving fallback
//   spa          price-only online auction, plain second price over all simulators
//   first-price  mtepvisa with a pay-your-bid online auction (negative control)

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dtmarket/auction.hpp"
#include "dtmarket/domain.hpp"
#include "dtmarket/scoring.hpp"
#include "dtmarket/simvalue.hpp"
#include "dtmarket/util.hpp"

namespace dtmarket {

// Offline submarket for a fixed winning AV and deadlines.
struct OfflineOutcome {
  std::optional<std::size_t> winner;
  double unit_price = 0.0;
  double payment = 0.0;
  double winner_value = 0.0;
  double alpha = 1.0;
  double top_traffic = 0.0;
  double second_traffic = 0.0;
  std::vector<double> windows;  // per considered task
};

class MarketSession {
 public:
  MarketSession(const Scenario& scenario, MechanismConfig cfg) : scenario_(&scenario), cfg_(cfg) {
    if (cfg_.gamma < 0.0) throw std::domain_error("MarketSession: gamma must be >= 0");
    if (!cfg_.alpha.analytic && cfg_.alpha.fixed_value < 1.0) {
      throw std::domain_error("MarketSession: fixed alpha must be >= 1");
    }
    const std::size_t n_avs = scenario.avs.size();
    avs_.reserve(n_avs);
    alpha_.assign(n_avs, 1.0);
    phi_.resize(n_avs);
    for (std::size_t i = 0; i < n_avs; ++i) {
      avs_.push_back(AvContext::build(scenario, i));
      alpha_[i] = estimate_alpha(i);
      if (cfg_.phi_mode == PhiMode::kEfficientEstimate) {
        for (std::size_t n : tasks_considered(i)) {
          phi_[i].emplace_back(avs_[i], n, cfg_, alpha_[i], scenario.avs[i].tasks[n].deadline_s);
        }
      }
    }
  }

  const Scenario& scenario() const { return *scenario_; }
  const MechanismConfig& config() const { return cfg_; }
  const AvContext& av_context(std::size_t av) const { return avs_.at(av); }
  double alpha_for(std::size_t av) const { return alpha_.at(av); }

  // Tasks the mechanism accounts for: the first task for EPViSA, all otherwise.
  std::vector<std::size_t> tasks_considered(std::size_t av) const {
    const std::size_t n = scenario_->avs.at(av).tasks.size();
    std::vector<std::size_t> out(cfg_.mechanism == Mechanism::kEpvisa ? std::min<std::size_t>(n, 1) : n);
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
  }

  // phi for the k-th considered task of `av`.
  double phi(std::size_t av, std::size_t k, double deadline_s) const {
    if (cfg_.phi_mode == PhiMode::kZero) return 0.0;
    return phi_.at(av).at(k)(deadline_s);
  }

  std::vector<double> phi_values(std::size_t av, std::span<const double> deadlines) const {
    std::vector<double> out(deadlines.size());
    for (std::size_t k = 0; k < deadlines.size(); ++k) out[k] = phi(av, k, deadlines[k]);
    return out;
  }

  // Deadlines an AV bids: grid-searched argmax of phi for MTEPViSA-style
  // mechanisms, the true deadlines otherwise.
  std::vector<double> bid_deadlines(std::size_t av) const {
    const auto& tasks = scenario_->avs.at(av).tasks;
    const auto considered = tasks_considered(av);
    std::vector<double> d;
    d.reserve(considered.size());
    const bool select = cfg_.mechanism == Mechanism::kMtepvisa || cfg_.mechanism == Mechanism::kFirstPriceControl;
    for (std::size_t k = 0; k < considered.size(); ++k) {
      const double truth = tasks[considered[k]].deadline_s;
      if (select) {
        d.push_back(optimal_deadline(truth, [&](double x) { return phi(av, k, x); }, cfg_.deadline_grid));
      } else {
        d.push_back(truth);
      }
    }
    return d;
  }

  std::vector<DtBid> truthful_bids() const {
    std::vector<DtBid> bids;
    bids.reserve(scenario_->avs.size());
    for (const auto& av : scenario_->avs) bids.push_back({av.id, av.valuation, bid_deadlines(av.id)});
    return bids;
  }

  ScoredBid scored(const DtBid& bid) const {
    double phi_sum = 0.0;
    for (std::size_t k = 0; k < bid.deadlines.size(); ++k) phi_sum += phi(bid.av_id, k, bid.deadlines[k]);
    return {bid.av_id, bid.price, phi_sum};
  }

  AuctionResult clear_online(std::span<const DtBid> bids) const {
    std::vector<ScoredBid> scored_bids;
    scored_bids.reserve(bids.size());
    for (const auto& b : bids) scored_bids.push_back(scored(b));
    return run_online_auction(scored_bids, cfg_.online_payment);
  }

  // Aggregate simulation budget per simulator over the feasible considered tasks.
  std::vector<double> simulation_counts(std::size_t av, std::span<const double> deadlines) const {
    const auto& ctx = avs_.at(av);
    const auto considered = tasks_considered(av);
    std::vector<double> q(scenario_->sims.size(), 0.0);
    for (std::size_t k = 0; k < considered.size(); ++k) {
      for (std::size_t s = 0; s < q.size(); ++s) q[s] += ctx.budget(considered[k], deadlines[k], s, cfg_.floor_budget);
    }
    return q;
  }

  // U_{av,k} for every simulator on the aggregate window.
  std::vector<double> simulator_values(std::size_t av, std::span<const double> deadlines) const {
    const auto q = simulation_counts(av, deadlines);
    std::vector<double> u(q.size());
    for (std::size_t s = 0; s < q.size(); ++s) u[s] = avs_.at(av).value(s, q[s], cfg_);
    return u;
  }

  // Per-task windows when simulator `sim` (or none) serves the AV. Tasks whose
  // DT latency already misses the submitted deadline get a zero window.
  std::vector<double> windows(std::size_t av, std::span<const double> deadlines, std::optional<std::size_t> sim) const {
    const auto& ctx = avs_.at(av);
    const auto considered = tasks_considered(av);
    std::vector<double> w(considered.size(), 0.0);
    for (std::size_t k = 0; k < considered.size(); ++k) {
      const std::size_t n = considered[k];
      if (ctx.dt[n].total_s > deadlines[k]) continue;
      if (sim) {
        w[k] = ctx.window(n, ctx.budget(n, deadlines[k], *sim, cfg_.floor_budget), *sim);
      } else {
        w[k] = total_latency(ctx.dt[n], 0.0, 0.0);
      }
    }
    return w;
  }

  // Offline auction for `av` on unit-time bids (defaults to truthful values).
  OfflineOutcome clear_offline_for(std::size_t av, std::span<const double> deadlines, std::span<const double> values,
                                   std::span<const double> bids) const {
    OfflineOutcome out;
    out.alpha = alpha_.at(av);
    if (scenario_->sims.empty()) {
      out.windows = windows(av, deadlines, std::nullopt);
      return out;
    }
    const auto w = clear_offline_bids(*scenario_, bids, out.alpha, cfg_.mechanism == Mechanism::kSpa);
    out.top_traffic = w.top_traffic;
    out.second_traffic = w.second_traffic;
    out.winner = w.sim;
    out.windows = windows(av, deadlines, w.sim);
    if (w.sim) {
      out.unit_price = w.unit_price;
      out.winner_value = values[*w.sim];
      out.payment = std::accumulate(out.windows.begin(), out.windows.end(), 0.0) * w.unit_price;
    }
    return out;
  }

  MarketOutcome run() const { return run(truthful_bids()); }

  // Clears both submarkets for the given DT bids. `sim_bids`, when non-empty,
  // replaces the simulators' truthful unit-time bids.
  MarketOutcome run(std::span<const DtBid> bids, std::span<const double> sim_bids = {}) const {
    MarketOutcome o;
    o.scores.assign(scenario_->avs.size(), 0.0);
    for (const auto& b : bids) o.scores.at(b.av_id) = scored(b).score();
    const AuctionResult online = clear_online(bids);
    if (!online.winner) return o;
    const std::size_t av = *online.winner;
    const DtBid* winning = nullptr;
    for (const auto& b : bids) {
      if (b.av_id == av) winning = &b;
    }
    o.winner_av = av;
    o.dt_payment = online.payment;
    o.submitted_deadlines = winning->deadlines;
    const auto considered = tasks_considered(av);
    for (std::size_t k = 0; k < considered.size(); ++k) {
      if (avs_[av].dt[considered[k]].total_s > winning->deadlines[k]) o.infeasible_tasks.push_back(considered[k]);
    }
    const auto values = simulator_values(av, winning->deadlines);
    const auto offline = clear_offline_for(av, winning->deadlines, values, sim_bids.empty() ? values : sim_bids);
    o.alpha_used = offline.alpha;
    o.per_task_windows = offline.windows;
    o.top_traffic_value = offline.top_traffic;
    o.second_traffic_value = offline.second_traffic;
    if (offline.winner) {
      o.winner_sim = offline.winner;
      o.sim_payment = offline.payment;
      if (scenario_->sims[*offline.winner].kind == SimulatorKind::kDriving) {
        o.s_driving = offline.winner_value;
      } else {
        o.s_traffic = offline.winner_value;
      }
    }
    o.s_dt = dt_surplus(scenario_->channels[av].r2_score, scenario_->avs[av].valuation, true);
    o.total = total_objective(o, cfg_.gamma);
    return o;
  }

 private:
  // Monte Carlo estimate of alpha for `av`: simulator values on the AV's true
  // window are resampled from the scenario's simulator pool, standing in for
  // the value distributions of the driving and of each traffic simulator.
  double estimate_alpha(std::size_t av) const {
    switch (cfg_.mechanism) {
      case Mechanism::kPvisa:
      case Mechanism::kSpa:
        return 1.0;
      default:
        break;
    }
    if (!cfg_.alpha.analytic) return std::max(1.0, cfg_.alpha.fixed_value);
    const auto& sims = scenario_->sims;
    if (sims.empty()) return 1.0;
    std::vector<double> truth;
    for (std::size_t n : tasks_considered(av)) truth.push_back(scenario_->avs[av].tasks[n].deadline_s);
    const auto pool = simulator_values(av, truth);
    std::size_t traffic_count = 0;
    for (const auto& s : sims) traffic_count += s.kind == SimulatorKind::kTraffic ? 1 : 0;
    return estimate_alpha_from_pool(pool, traffic_count, cfg_, alpha_seed(av));
  }

 public:
  std::uint64_t alpha_seed(std::size_t av) const { return mix64(scenario_->seed ^ (0x616c706861ULL + av)); }

  // Bootstraps the driving value and each of `traffic_count` traffic values
  // from `pool`, then applies price_scaling_factor.
  static double estimate_alpha_from_pool(std::span<const double> pool, std::size_t traffic_count,
                                         const MechanismConfig& cfg, std::uint64_t seed) {
    if (pool.empty()) return 1.0;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const ValueSampler draw = [&](Rng& rng) { return pool[pick(rng)]; };
    const std::vector<ValueSampler> traffic(traffic_count, draw);
    Rng rng(seed);
    return price_scaling_factor(cfg.gamma, draw, traffic, cfg.alpha_samples, rng, cfg.alpha_cap);
  }

 private:
  const Scenario* scenario_;
  MechanismConfig cfg_;
  std::vector<AvContext> avs_;
  std::vector<double> alpha_;
  std::vector<std::vector<ExternalityEstimator>> phi_;
};

inline MarketOutcome run_mechanism(const Scenario& scenario, const MechanismConfig& cfg) {
  return MarketSession(scenario, cfg).run();
}

}  // namespace dtmarket
