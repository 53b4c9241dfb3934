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

#include <cmath>
#include <limits>
#include <stdexcept>

#include "dtmarket/domain.hpp"

namespace dtmarket {

inline constexpr double kBitsPerByte = 8.0;

struct LinkRates {
  double uplink_mbps = 0.0;
  double downlink_mbps = 0.0;
};

struct DtLatency {
  double upload_s = 0.0;
  double compute_s = 0.0;
  double total_s = 0.0;
  bool feasible = true;
};

struct SimLatency {
  double transmit_s = 0.0;
  double compute_s = 0.0;
};

// Shannon capacity in Mbit/s for a bandwidth in MHz.
inline double shannon_rate(double bandwidth_mhz, double gain, double tx_power_mw, double noise_power) {
  if (!(noise_power > 0.0)) throw std::domain_error("shannon_rate: noise_power must be > 0");
  if (bandwidth_mhz < 0.0 || gain < 0.0 || tx_power_mw < 0.0) {
    throw std::domain_error("shannon_rate: bandwidth, gain and power must be >= 0");
  }
  const double snr = gain * tx_power_mw / noise_power;
  if (snr == 0.0) return 0.0;
  return bandwidth_mhz * std::log2(1.0 + snr);
}

// Uplink uses the AV's power against RSU noise; downlink the RSU's power
// against the AV's noise.
inline LinkRates link_rates(const AvProfile& av, const RsuProfile& rsu, const ChannelState& ch) {
  return {shannon_rate(rsu.uplink_bw_mhz, ch.gain, av.transmit_power_mw, rsu.noise_power),
          shannon_rate(rsu.downlink_bw_mhz, ch.gain, rsu.transmit_power_mw, ch.av_noise_power)};
}

inline DtLatency dt_latency(const DtTask& task, double uplink_mbps, double cpu_ghz) {
  if (!(cpu_ghz > 0.0)) throw std::domain_error("dt_latency: cpu_ghz must be > 0");
  DtLatency out;
  if (task.data_size_mb > 0.0) {
    out.upload_s = uplink_mbps > 0.0 ? kBitsPerByte * task.data_size_mb / uplink_mbps
                                     : std::numeric_limits<double>::infinity();
  }
  out.compute_s = task.data_size_mb * task.cycles_per_mb / cpu_ghz;
  out.total_s = out.upload_s + out.compute_s;
  out.feasible = out.total_s <= task.deadline_s;
  return out;
}

inline SimLatency sim_latency(double q_count, const SimulatorProfile& sim, double downlink_mbps, double gpu_ghz) {
  if (!(gpu_ghz > 0.0)) throw std::domain_error("sim_latency: gpu_ghz must be > 0");
  if (q_count < 0.0) throw std::domain_error("sim_latency: q_count must be >= 0");
  if (q_count == 0.0) return {};
  if (!(downlink_mbps > 0.0)) throw std::domain_error("sim_latency: downlink_mbps must be > 0 when q_count > 0");
  return {q_count * kBitsPerByte * sim.sim_data_size_mb / downlink_mbps,
          q_count * sim.sim_data_size_mb * sim.gpu_cycles_per_mb / gpu_ghz};
}

// End-to-end simulation throughput in Mbit/s when every simulation is both
// rendered on the GPU and streamed on the downlink. A residual window of w
// seconds carries w * rate / (8 s^SIM) simulations, and the streaming plus
// GPU latency of exactly that many simulations is w.
inline double effective_sim_rate(double downlink_mbps, double gpu_cycles_per_mb, double gpu_ghz) {
  if (!(gpu_ghz > 0.0)) throw std::domain_error("effective_sim_rate: gpu_ghz must be > 0");
  if (!(downlink_mbps > 0.0)) return 0.0;
  return 1.0 / (1.0 / downlink_mbps + gpu_cycles_per_mb / (kBitsPerByte * gpu_ghz));
}

inline double total_latency(const DtLatency& dt, double sim_transmit_s, double sim_compute_s) {
  if (dt.upload_s < 0.0 || dt.compute_s < 0.0 || sim_transmit_s < 0.0 || sim_compute_s < 0.0) {
    throw std::domain_error("total_latency: components must be >= 0");
  }
  return (dt.upload_s + dt.compute_s) + (sim_transmit_s + sim_compute_s);
}

}  // namespace dtmarket
