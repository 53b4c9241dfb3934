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

// Winner determination and pricing rules for the two submarkets.
//
// Online: AVs are ranked by score Phi = price + sum(phi). Offline: a traffic
// simulator wins only if its bid exceeds alpha times every other traffic bid;
// otherwise the driving simulator takes the window at its own rate. Ties are
// always broken towards the lowest id.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dtmarket/domain.hpp"
#include "dtmarket/util.hpp"

namespace dtmarket {

struct DtBid {
  std::size_t av_id = 0;
  double price = 0.0;
  std::vector<double> deadlines;
};

struct SimBid {
  std::size_t sim_id = 0;
  double price = 0.0;
};

// A DT bid after scoring.
struct ScoredBid {
  std::size_t av_id = 0;
  double price = 0.0;
  double phi_sum = 0.0;
  double score() const { return price + phi_sum; }
};

struct AuctionResult {
  std::optional<std::size_t> winner;
  double payment = 0.0;
  double critical_price = 0.0;  // per unit time in the offline submarket
  double alpha_used = 1.0;
  double first_value = 0.0;     // highest competing bid or score
  double second_value = 0.0;    // runner-up
};

inline AuctionResult run_online_auction(std::span<const ScoredBid> bids, OnlinePayment rule) {
  AuctionResult out;
  if (bids.empty()) return out;
  auto better = [](const ScoredBid& a, const ScoredBid& b) {
    return a.score() > b.score() || (a.score() == b.score() && a.av_id < b.av_id);
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < bids.size(); ++i) {
    if (better(bids[i], bids[best])) best = i;
  }
  std::optional<std::size_t> runner;
  for (std::size_t i = 0; i < bids.size(); ++i) {
    if (i == best) continue;
    if (!runner || better(bids[i], bids[*runner])) runner = i;
  }
  const auto& w = bids[best];
  out.winner = w.av_id;
  out.first_value = w.score();
  if (runner) {
    out.second_value = bids[*runner].score();
    out.critical_price = std::max(0.0, bids[*runner].score() - w.phi_sum);
  }
  switch (rule) {
    case OnlinePayment::kCriticalScore:
      out.payment = out.critical_price;
      break;
    case OnlinePayment::kRunnerUpBid:
      out.payment = runner ? bids[*runner].price : 0.0;
      break;
    case OnlinePayment::kFirstPrice:
      out.payment = w.price;
      break;
  }
  return out;
}

// Offline clearing in unit-time prices. `traffic` holds bids of simulators
// 1..K; the driving bid, when present, never enters the traffic threshold.
inline AuctionResult clear_offline(std::optional<double> driving_bid, std::span<const SimBid> traffic, double alpha) {
  if (alpha < 1.0) throw std::domain_error("clear_offline: alpha must be >= 1");
  AuctionResult out;
  out.alpha_used = alpha;
  std::optional<std::size_t> top;
  for (std::size_t i = 0; i < traffic.size(); ++i) {
    if (!top || traffic[i].price > traffic[*top].price ||
        (traffic[i].price == traffic[*top].price && traffic[i].sim_id < traffic[*top].sim_id)) {
      top = i;
    }
  }
  double second = 0.0;  // max over an empty competitor set
  for (std::size_t i = 0; i < traffic.size(); ++i) {
    if (i != *top) second = std::max(second, traffic[i].price);
  }
  if (top) {
    out.first_value = traffic[*top].price;
    out.second_value = second;
    const double threshold = alpha * second;
    if (traffic[*top].price > threshold) {
      out.winner = traffic[*top].sim_id;
      out.critical_price = threshold;
      return out;
    }
  }
  if (driving_bid) {
    out.winner = 0;
    out.critical_price = *driving_bid;
  }
  return out;
}

inline double window_sum(std::span<const double> windows_s) {
  double t = 0.0;
  for (double w : windows_s) {
    if (w < 0.0) throw std::domain_error("offline auction: windows must be >= 0");
    t += w;
  }
  return t;
}

// Winner pays its unit-time critical price over the whole window.
inline AuctionResult run_offline_auction(std::optional<SimBid> driving_bid, std::span<const SimBid> traffic_bids,
                                         double alpha, std::span<const double> windows_s) {
  std::optional<double> driving;
  if (driving_bid) driving = driving_bid->price;
  AuctionResult out = clear_offline(driving, traffic_bids, alpha);
  if (out.winner) out.payment = window_sum(windows_s) * out.critical_price;
  return out;
}

// Plain second-price clearing over every simulator, driving included.
inline AuctionResult clear_second_price(std::span<const SimBid> bids) {
  AuctionResult out;
  if (bids.empty()) return out;
  std::size_t top = 0;
  for (std::size_t i = 1; i < bids.size(); ++i) {
    if (bids[i].price > bids[top].price || (bids[i].price == bids[top].price && bids[i].sim_id < bids[top].sim_id)) {
      top = i;
    }
  }
  double second = 0.0;
  for (std::size_t i = 0; i < bids.size(); ++i) {
    if (i != top) second = std::max(second, bids[i].price);
  }
  out.winner = bids[top].sim_id;
  out.first_value = bids[top].price;
  out.second_value = second;
  out.critical_price = second;
  return out;
}

using ValueSampler = std::function<double(Rng&)>;

// alpha = max(1, gamma * E[U_0] / E[U_(2)]), where U_(2) is the second-highest
// traffic value. Expectations are Monte Carlo estimates over `samples` draws.
inline double price_scaling_factor(double gamma, const ValueSampler& driving_value,
                                   std::span<const ValueSampler> traffic_values, int samples, Rng& rng,
                                   double alpha_cap = 10.0) {
  if (samples < 1) throw std::domain_error("price_scaling_factor: samples must be >= 1");
  if (gamma < 0.0) throw std::domain_error("price_scaling_factor: gamma must be >= 0");
  double driving_sum = 0.0;
  double second_sum = 0.0;
  for (int s = 0; s < samples; ++s) {
    driving_sum += driving_value(rng);
    double first = 0.0;
    double second = 0.0;
    for (const auto& draw : traffic_values) {
      const double u = draw(rng);
      if (u > first) {
        second = first;
        first = u;
      } else if (u > second) {
        second = u;
      }
    }
    second_sum += second;
  }
  const double numerator = gamma * driving_sum / samples;
  const double expected_second = second_sum / samples;
  if (numerator <= 0.0) return 1.0;
  if (expected_second <= 0.0) return std::max(1.0, alpha_cap);
  return std::max(1.0, numerator / expected_second);
}

}  // namespace dtmarket
