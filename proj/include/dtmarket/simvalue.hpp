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

// Simulation budget, match quality and surplus accounting.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "dtmarket/domain.hpp"
#include "dtmarket/network.hpp"

namespace dtmarket {

// Tolerance for the deadline constraint on windows built from closed-form
// latencies. Windows fill the residual deadline exactly up to rounding.
inline constexpr double kDeadlineSlack = 1e-9;

struct MatchResult {
  double q_count = 0.0;
  double match_quality = 0.0;
  double value = 0.0;
};

struct OfflineSurplus {
  double s_driving = 0.0;
  double s_traffic = 0.0;
  double window_sum_s = 0.0;
  double contribution = 0.0;
};

class InfeasibleOutcome : public std::runtime_error {
 public:
  InfeasibleOutcome(std::string constraint, const std::string& what)
      : std::runtime_error("constraint " + constraint + ": " + what), constraint_(std::move(constraint)) {}
  const std::string& constraint() const noexcept { return constraint_; }

 private:
  std::string constraint_;
};

// Number of simulations that fit in the residual deadline.
inline double simulation_budget(double deadline_s, double dt_total_s, double sim_rate_mbps,
                                double sim_data_size_mb, bool floor_count = false) {
  if (!(sim_data_size_mb > 0.0)) throw std::domain_error("simulation_budget: sim_data_size_mb must be > 0");
  const double residual = deadline_s - dt_total_s;
  if (!(residual > 0.0) || !(sim_rate_mbps > 0.0)) return 0.0;
  const double q = residual * sim_rate_mbps / (kBitsPerByte * sim_data_size_mb);
  return floor_count ? std::floor(q) : q;
}

inline double simulation_budget(const DtTask& task, double dt_total_s, double sim_rate_mbps,
                                double sim_data_size_mb, bool floor_count = false) {
  return simulation_budget(task.deadline_s, dt_total_s, sim_rate_mbps, sim_data_size_mb, floor_count);
}

inline double match_quality(GenerativeMode mode, double generative_score, double q_count, int pref_hits,
                            double relative_accuracy, double theta_floor = kDefaultThetaFloor) {
  if (relative_accuracy < theta_floor) {
    throw std::domain_error("match_quality: relative_accuracy below floor");
  }
  if (pref_hits < 0) throw std::domain_error("match_quality: pref_hits must be >= 0");
  const double h = static_cast<double>(pref_hits);
  if (mode == GenerativeMode::kBaseline) return h;
  return std::log2(1.0 + generative_score * q_count) * h / relative_accuracy;
}

inline double simulator_value(double valuation, double match_quality) {
  if (valuation < 0.0 || match_quality < 0.0) throw std::domain_error("simulator_value: inputs must be >= 0");
  return valuation * match_quality;
}

inline double dt_surplus(double r2_score, double valuation, bool won) {
  if (!(r2_score >= 0.0 && r2_score <= 1.0)) throw std::domain_error("dt_surplus: r2_score must be in [0, 1]");
  return won ? r2_score * valuation : 0.0;
}

inline OfflineSurplus offline_surplus(double gamma, std::optional<SimulatorKind> winner_kind, double winner_value,
                                      std::span<const double> windows_s) {
  if (gamma < 0.0) throw std::domain_error("offline_surplus: gamma must be >= 0");
  OfflineSurplus out;
  if (!winner_kind) return out;
  if (*winner_kind == SimulatorKind::kDriving) {
    out.s_driving = winner_value;
  } else {
    out.s_traffic = winner_value;
  }
  const double rate = gamma * out.s_driving + out.s_traffic;
  for (double w : windows_s) {
    if (w < 0.0) throw std::domain_error("offline_surplus: windows must be >= 0");
    out.window_sum_s += w;
    out.contribution += w * rate;
  }
  return out;
}

// Feasibility of an outcome against the allocation, pricing and deadline
// constraints; throws InfeasibleOutcome naming the first violated constraint.
inline void check_feasible(const MarketOutcome& o) {
  if (o.winner_sim && !o.winner_av) throw InfeasibleOutcome("single_simulator", "simulator allocated without a winning AV");
  if (o.s_driving != 0.0 && o.s_traffic != 0.0) {
    throw InfeasibleOutcome("single_simulator", "both driving and traffic surplus are nonzero");
  }
  if (o.dt_payment < 0.0) throw InfeasibleOutcome("dt_payment", "negative DT payment");
  if (o.sim_payment < 0.0) throw InfeasibleOutcome("sim_payment", "negative simulator payment");
  if (!o.winner_av && (o.s_dt != 0.0 || !o.per_task_windows.empty())) {
    throw InfeasibleOutcome("single_winner", "surplus recorded without a winning AV");
  }
  if (o.per_task_windows.size() != o.submitted_deadlines.size()) {
    throw InfeasibleOutcome("deadline", "windows and deadlines differ in length");
  }
  for (std::size_t n = 0; n < o.per_task_windows.size(); ++n) {
    if (o.per_task_windows[n] > o.submitted_deadlines[n] + kDeadlineSlack) {
      throw InfeasibleOutcome("deadline", "task " + std::to_string(n) + " window " +
                                        format_double(o.per_task_windows[n]) + " s exceeds deadline " +
                                        format_double(o.submitted_deadlines[n]) + " s");
    }
  }
}

// S^DT + sum_n T^total_n * (gamma * S_D + S_T).
inline double total_objective(const MarketOutcome& o, double gamma) {
  check_feasible(o);
  const double rate = gamma * o.s_driving + o.s_traffic;
  double total = o.s_dt;
  for (double w : o.per_task_windows) total += w * rate;
  return total;
}

}  // namespace dtmarket
