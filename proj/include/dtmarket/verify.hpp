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

// Randomized property checks over generated scenarios.
//
// Trial t uses the scenario of round t under the config's master seed, so a
// reported counterexample replays exactly with first_trial = t, trials = 1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dtmarket/engine.hpp"
#include "dtmarket/mechanism.hpp"
#include "dtmarket/scoring.hpp"
#include "dtmarket/util.hpp"

namespace dtmarket {

inline constexpr double kPropertyTolerance = 1e-9;
inline constexpr std::size_t kMaxReportedCounterexamples = 10;

struct Counterexample {
  std::uint64_t master_seed = 0;
  std::uint64_t trial = 0;
  std::string agent;      // "av" or "sim"
  std::size_t agent_id = 0;
  std::string deviation;  // human-readable description of the deviating report
  double truthful_utility = 0.0;
  double deviant_utility = 0.0;
  double magnitude = 0.0;
};

struct PropertyReport {
  std::string property;
  std::string mechanism;
  std::uint64_t master_seed = 0;
  std::uint64_t first_trial = 0;
  int trials = 0;
  std::uint64_t checks = 0;
  std::uint64_t violation_count = 0;
  double max_violation_magnitude = 0.0;
  std::vector<Counterexample> violations;  // first few, in trial order
  std::string note;

  bool ok() const { return violation_count == 0; }
};

namespace detail {

struct TrialFindings {
  std::uint64_t checks = 0;
  std::vector<Counterexample> found;
};

inline void record(TrialFindings& f, const Counterexample& c) {
  if (c.magnitude > kPropertyTolerance) f.found.push_back(c);
}

template <class Fn>
PropertyReport run_trials(std::string property, const ScenarioConfig& config, const MechanismConfig& mech,
                          int trials, std::uint64_t first_trial, int jobs, Fn&& per_trial) {
  validate_config(config);
  PropertyReport r;
  r.property = std::move(property);
  r.mechanism = std::string(to_string(mech.mechanism));
  r.master_seed = config.master_seed;
  r.first_trial = first_trial;
  r.trials = trials;
  std::vector<TrialFindings> slots(static_cast<std::size_t>(std::max(trials, 0)));
  parallel_for(slots.size(), jobs, [&](std::size_t t) {
    const std::uint64_t trial = first_trial + t;
    const Scenario s = generate_scenario(config, trial);
    const MarketSession session(s, mech);
    per_trial(session, trial, slots[t]);
  });
  for (auto& slot : slots) {
    r.checks += slot.checks;
    for (auto& c : slot.found) {
      ++r.violation_count;
      r.max_violation_magnitude = std::max(r.max_violation_magnitude, c.magnitude);
      if (r.violations.size() < kMaxReportedCounterexamples) r.violations.push_back(std::move(c));
    }
  }
  return r;
}

inline double av_utility(const AuctionResult& r, std::size_t av, double valuation) {
  return r.winner && *r.winner == av ? valuation - r.payment : 0.0;
}

inline double sim_utility(const OfflineOutcome& o, std::size_t sim) {
  if (!o.winner || *o.winner != sim) return 0.0;
  double t = 0.0;
  for (double w : o.windows) t += w;
  return t * o.winner_value - o.payment;
}

inline double price_point(double hi, int grid, int j) {
  return grid <= 1 ? hi : hi * static_cast<double>(j) / static_cast<double>(grid - 1);
}

}  // namespace detail

// No AV gains by misreporting its price, and no simulator subject to the
// offline rule gains by misreporting its unit-time bid. AV deviations span
// [0, v] on `grid` points; simulator deviations span [0, 2 * max value].
inline PropertyReport check_strategy_proofness(const ScenarioConfig& config, const MechanismConfig& mech,
                                               int trials, int grid = 20, std::uint64_t first_trial = 0,
                                               int jobs = 1) {
  auto report = detail::run_trials(
      "strategy_proofness", config, mech, trials, first_trial, jobs,
      [&](const MarketSession& session, std::uint64_t trial, detail::TrialFindings& f) {
        const Scenario& s = session.scenario();
        const auto bids = session.truthful_bids();
        const auto online = session.clear_online(bids);
        auto deviant = bids;
        for (const auto& av : s.avs) {
          const double u0 = detail::av_utility(online, av.id, av.valuation);
          for (int j = 0; j < grid; ++j) {
            const double p = detail::price_point(av.valuation, grid, j);
            if (p == av.valuation) continue;
            deviant[av.id].price = p;
            const double u = detail::av_utility(session.clear_online(deviant), av.id, av.valuation);
            ++f.checks;
            detail::record(f, {config.master_seed, trial, "av", av.id, "price=" + format_double(p), u0, u, u - u0});
          }
          deviant[av.id].price = av.valuation;
        }
        if (!online.winner) return;
        const std::size_t w = *online.winner;
        const auto& deadlines = bids[w].deadlines;
        const auto values = session.simulator_values(w, deadlines);
        const auto truthful = session.clear_offline_for(w, deadlines, values, values);
        const double top = values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
        const bool all_sims = mech.mechanism == Mechanism::kSpa;
        auto sim_bids = values;
        for (std::size_t k = 0; k < s.sims.size(); ++k) {
          if (!all_sims && s.sims[k].kind == SimulatorKind::kDriving) continue;
          const double u0 = detail::sim_utility(truthful, k);
          for (int j = 0; j < grid; ++j) {
            const double p = detail::price_point(2.0 * top, grid, j);
            if (p == values[k]) continue;
            sim_bids[k] = p;
            const double u = detail::sim_utility(session.clear_offline_for(w, deadlines, values, sim_bids), k);
            ++f.checks;
            detail::record(f, {config.master_seed, trial, "sim", k, "unit_bid=" + format_double(p), u0, u, u - u0});
          }
          sim_bids[k] = values[k];
        }
      });
  if (mech.mechanism != Mechanism::kSpa) {
    report.note = "driving simulator excluded: it is paid its own bid as the contracted fallback";
  }
  return report;
}

// Scaling every simulator value by lambda leaves the offline winner unchanged
// and scales its unit price by exactly lambda. Alpha is re-estimated on the
// scaled values.
inline PropertyReport check_adverse_selection_free(const ScenarioConfig& config, const MechanismConfig& mech,
                                                   int trials, std::vector<double> lambdas = {0.5, 1.0, 2.0},
                                                   std::uint64_t first_trial = 0, int jobs = 1) {
  return detail::run_trials(
      "adverse_selection_free", config, mech, trials, first_trial, jobs,
      [&](const MarketSession& session, std::uint64_t trial, detail::TrialFindings& f) {
        const Scenario& s = session.scenario();
        const auto bids = session.truthful_bids();
        const auto online = session.clear_online(bids);
        if (!online.winner || s.sims.empty()) return;
        const std::size_t w = *online.winner;
        const auto& deadlines = bids[w].deadlines;
        const auto values = session.simulator_values(w, deadlines);
        const double base_alpha = session.alpha_for(w);
        const auto base = clear_offline_bids(s, values, base_alpha, mech.mechanism == Mechanism::kSpa);

        std::vector<double> truth;
        for (std::size_t n : session.tasks_considered(w)) truth.push_back(s.avs[w].tasks[n].deadline_s);
        const auto pool = session.simulator_values(w, truth);
        std::size_t traffic_count = 0;
        for (const auto& sim : s.sims) traffic_count += sim.kind == SimulatorKind::kTraffic ? 1 : 0;

        for (double lambda : lambdas) {
          std::vector<double> scaled(values.size()), scaled_pool(pool.size());
          for (std::size_t k = 0; k < values.size(); ++k) scaled[k] = lambda * values[k];
          for (std::size_t k = 0; k < pool.size(); ++k) scaled_pool[k] = lambda * pool[k];
          double alpha = base_alpha;
          const bool analytic = mech.alpha.analytic && mech.mechanism != Mechanism::kPvisa &&
                                mech.mechanism != Mechanism::kSpa;
          if (analytic) {
            alpha = MarketSession::estimate_alpha_from_pool(scaled_pool, traffic_count, mech, session.alpha_seed(w));
          }
          const auto r = clear_offline_bids(s, scaled, alpha, mech.mechanism == Mechanism::kSpa);
          ++f.checks;
          const std::string what = "lambda=" + format_double(lambda);
          if (r.sim != base.sim) {
            detail::record(f, {config.master_seed, trial, "sim", r.sim.value_or(0), what + " changed the winner",
                               base.unit_price, r.unit_price, 1.0});
            continue;
          }
          const double expected = lambda * base.unit_price;
          const double err = std::abs(r.unit_price - expected) / std::max(1.0, std::abs(expected));
          detail::record(f, {config.master_seed, trial, "sim", r.sim.value_or(0), what + " unit price not scaled",
                             expected, r.unit_price, err});
        }
      });
}

// Bidding the selected deadlines is a best response against deadline
// deviations over the grid d * j / grid, changing one task at a time.
inline PropertyReport check_deadline_optimality(const ScenarioConfig& config, const MechanismConfig& mech,
                                                int trials, int grid = 16, std::uint64_t first_trial = 0,
                                                int jobs = 1) {
  return detail::run_trials(
      "deadline_optimality", config, mech, trials, first_trial, jobs,
      [&](const MarketSession& session, std::uint64_t trial, detail::TrialFindings& f) {
        const Scenario& s = session.scenario();
        const auto bids = session.truthful_bids();
        const auto online = session.clear_online(bids);
        auto deviant = bids;
        for (const auto& av : s.avs) {
          const double u0 = detail::av_utility(online, av.id, av.valuation);
          const auto considered = session.tasks_considered(av.id);
          for (std::size_t k = 0; k < considered.size(); ++k) {
            const double chosen = bids[av.id].deadlines[k];
            for (double d : deadline_grid(av.tasks[considered[k]].deadline_s, grid)) {
              if (d == chosen) continue;
              deviant[av.id].deadlines[k] = d;
              const double u = detail::av_utility(session.clear_online(deviant), av.id, av.valuation);
              ++f.checks;
              detail::record(f, {config.master_seed, trial, "av", av.id,
                                 "task=" + std::to_string(considered[k]) + " deadline=" + format_double(d), u0, u,
                                 u - u0});
            }
            deviant[av.id].deadlines[k] = chosen;
          }
        }
      });
}

// Marginal scores are non-negative and non-increasing for every AV's bid.
// With `reorder` false the tasks keep their submitted order.
inline PropertyReport check_assumption1(const ScenarioConfig& config, const MechanismConfig& mech, int trials,
                                        bool reorder = true, std::uint64_t first_trial = 0, int jobs = 1) {
  auto report = detail::run_trials(
      "assumption1", config, mech, trials, first_trial, jobs,
      [&](const MarketSession& session, std::uint64_t trial, detail::TrialFindings& f) {
        for (const auto& bid : session.truthful_bids()) {
          const auto phi = session.phi_values(bid.av_id, bid.deadlines);
          const auto sv = score(bid.price, phi, reorder);
          ++f.checks;
          if (assumption1_check(sv)) continue;
          double worst = 0.0;
          for (std::size_t n = 0; n < sv.marginals.size(); ++n) {
            worst = std::max(worst, -sv.marginals[n]);
            if (n + 1 < sv.marginals.size()) worst = std::max(worst, sv.marginals[n + 1] - sv.marginals[n]);
          }
          detail::record(f, {config.master_seed, trial, "av", bid.av_id, reorder ? "sorted" : "unsorted", 0.0,
                             worst, worst});
        }
      });
  if (!reorder) report.property = "assumption1_unsorted";
  return report;
}

}  // namespace dtmarket
