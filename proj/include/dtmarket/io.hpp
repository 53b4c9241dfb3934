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

// File formats: strict JSON configs and scenarios, CSV result rows, JSON
// property reports, and atomic file replacement.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dtmarket/domain.hpp"
#include "dtmarket/engine.hpp"
#include "dtmarket/verify.hpp"

namespace dtmarket {

using Json = nlohmann::ordered_json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unknown content in a config or scenario document.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Settings shared by every mechanism in a run.
struct MechanismOptions {
  std::optional<double> fixed_alpha;
  double alpha_cap = 10.0;
  int alpha_samples = 64;
  double phi_grid_step_s = 1.0 / 64.0;
  int deadline_grid = 16;
  double theta_floor = kDefaultThetaFloor;
  bool floor_budget = false;
};

struct ConfigFile {
  ScenarioConfig scenario;
  MechanismOptions mechanism;
};

inline MechanismConfig make_mechanism(Mechanism m, double gamma, GenerativeMode mode, const MechanismOptions& o) {
  auto c = MechanismConfig::for_mechanism(m, gamma, mode);
  if (o.fixed_alpha && c.alpha.analytic) c.alpha = AlphaPolicy{false, *o.fixed_alpha};
  c.alpha_cap = o.alpha_cap;
  c.alpha_samples = o.alpha_samples;
  c.phi_grid_step_s = o.phi_grid_step_s;
  c.deadline_grid = o.deadline_grid;
  c.theta_floor = o.theta_floor;
  c.floor_budget = o.floor_budget;
  return c;
}

namespace detail {

// Walks one JSON object, rejecting keys nobody asked for.
class StrictObject {
 public:
  StrictObject(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw FormatError(path_ + ": expected an object");
  }

  const Json* find(const std::string& key) {
    seen_.push_back(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const Json& require(const std::string& key) {
    const Json* v = find(key);
    if (!v) throw FormatError(path_ + ": missing field '" + key + "'");
    return *v;
  }

  std::string at(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end()) {
        throw FormatError(path_ + ": unknown field '" + it.key() + "'");
      }
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::vector<std::string> seen_;
};

inline double as_number(const Json& v, const std::string& path) {
  if (!v.is_number()) throw FormatError(path + ": expected a number");
  return v.get<double>();
}

inline long long as_integer(const Json& v, const std::string& path) {
  if (!v.is_number_integer()) throw FormatError(path + ": expected an integer");
  return v.get<long long>();
}

inline bool as_bool(const Json& v, const std::string& path) {
  if (!v.is_boolean()) throw FormatError(path + ": expected true or false");
  return v.get<bool>();
}

inline std::uint64_t as_seed(const Json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
  throw FormatError(path + ": expected a non-negative integer");
}

inline Range as_range(const Json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2) throw FormatError(path + ": expected [lo, hi]");
  return {as_number(v[0], path + "[0]"), as_number(v[1], path + "[1]")};
}

template <class T, class Convert>
void read(StrictObject& o, const std::string& key, T& out, Convert convert) {
  if (const Json* v = o.find(key)) out = convert(*v, o.at(key));
}

inline void read_int(StrictObject& o, const std::string& key, int& out) {
  read(o, key, out, [](const Json& v, const std::string& p) { return static_cast<int>(as_integer(v, p)); });
}

inline void read_number(StrictObject& o, const std::string& key, double& out) {
  read(o, key, out, as_number);
}

inline void read_range(StrictObject& o, const std::string& key, Range& out) { read(o, key, out, as_range); }

inline Json range_json(const Range& r) { return Json::array({r.lo, r.hi}); }

}  // namespace detail

// Every field is optional and defaults to the built-in market parameters.
inline ConfigFile parse_config(const Json& j) {
  using namespace detail;
  ConfigFile f;
  auto& c = f.scenario;
  StrictObject o(j, "config");
  read_int(o, "num_avs", c.num_avs);
  read_int(o, "num_traffic_sims", c.num_traffic_sims);
  read_int(o, "num_tasks", c.num_tasks);
  read_number(o, "uplink_bw_mhz", c.uplink_bw_mhz);
  read_number(o, "downlink_bw_mhz", c.downlink_bw_mhz);
  read_number(o, "cpu_ghz", c.cpu_ghz);
  read_number(o, "gpu_ghz", c.gpu_ghz);
  read_range(o, "rsu_power_mw", c.rsu_power_mw);
  read_range(o, "channel_gain", c.channel_gain);
  read_range(o, "av_power_mw", c.av_power_mw);
  read_number(o, "noise_floor", c.noise_floor);
  read_range(o, "r2_score", c.r2_score);
  read_range(o, "dt_size_mb", c.dt_size_mb);
  read_range(o, "dt_cycles_per_mb", c.dt_cycles_per_mb);
  read_range(o, "deadline_s", c.deadline_s);
  read_range(o, "valuation", c.valuation);
  read_number(o, "zipf_exponent", c.zipf_exponent);
  read_int(o, "cache_max", c.cache_max);
  read_range(o, "sim_size_mb", c.sim_size_mb);
  read_range(o, "sim_gpu_cycles_per_mb", c.sim_gpu_cycles_per_mb);
  read_range(o, "generative_score", c.generative_score);
  read_number(o, "theta", c.theta);
  read_number(o, "gamma", c.gamma);
  read(o, "master_seed", c.master_seed, as_seed);
  read_int(o, "rounds", c.rounds);
  if (const Json* m = o.find("mechanism")) {
    auto& opt = f.mechanism;
    StrictObject mo(*m, "config.mechanism");
    if (const Json* a = mo.find("alpha")) {
      if (a->is_string() && a->get<std::string>() == "analytic") {
        opt.fixed_alpha.reset();
      } else {
        opt.fixed_alpha = as_number(*a, mo.at("alpha"));
      }
    }
    read_number(mo, "alpha_cap", opt.alpha_cap);
    read_int(mo, "alpha_samples", opt.alpha_samples);
    read_number(mo, "phi_grid_step_s", opt.phi_grid_step_s);
    read_int(mo, "deadline_grid", opt.deadline_grid);
    read_number(mo, "theta_floor", opt.theta_floor);
    read(mo, "floor_budget", opt.floor_budget, as_bool);
    mo.finish();
  }
  o.finish();
  return f;
}

inline std::vector<std::string> mechanism_option_problems(const MechanismOptions& o) {
  std::vector<std::string> out;
  if (o.fixed_alpha && !(*o.fixed_alpha >= 1.0)) out.push_back("mechanism.alpha: fixed alpha must be >= 1");
  if (!(o.alpha_cap >= 1.0)) out.push_back("mechanism.alpha_cap must be >= 1");
  if (o.alpha_samples < 1) out.push_back("mechanism.alpha_samples must be >= 1");
  if (!(o.phi_grid_step_s > 0.0)) out.push_back("mechanism.phi_grid_step_s must be > 0");
  if (o.deadline_grid < 1) out.push_back("mechanism.deadline_grid must be >= 1");
  if (!(o.theta_floor > 0.0 && o.theta_floor <= 1.0)) out.push_back("mechanism.theta_floor must be in (0, 1]");
  return out;
}

inline Json config_to_json(const ConfigFile& f) {
  using detail::range_json;
  const auto& c = f.scenario;
  Json j;
  j["num_avs"] = c.num_avs;
  j["num_traffic_sims"] = c.num_traffic_sims;
  j["num_tasks"] = c.num_tasks;
  j["uplink_bw_mhz"] = c.uplink_bw_mhz;
  j["downlink_bw_mhz"] = c.downlink_bw_mhz;
  j["cpu_ghz"] = c.cpu_ghz;
  j["gpu_ghz"] = c.gpu_ghz;
  j["rsu_power_mw"] = range_json(c.rsu_power_mw);
  j["channel_gain"] = range_json(c.channel_gain);
  j["av_power_mw"] = range_json(c.av_power_mw);
  j["noise_floor"] = c.noise_floor;
  j["r2_score"] = range_json(c.r2_score);
  j["dt_size_mb"] = range_json(c.dt_size_mb);
  j["dt_cycles_per_mb"] = range_json(c.dt_cycles_per_mb);
  j["deadline_s"] = range_json(c.deadline_s);
  j["valuation"] = range_json(c.valuation);
  j["zipf_exponent"] = c.zipf_exponent;
  j["cache_max"] = c.cache_max;
  j["sim_size_mb"] = range_json(c.sim_size_mb);
  j["sim_gpu_cycles_per_mb"] = range_json(c.sim_gpu_cycles_per_mb);
  j["generative_score"] = range_json(c.generative_score);
  j["theta"] = c.theta;
  j["gamma"] = c.gamma;
  j["master_seed"] = c.master_seed;
  j["rounds"] = c.rounds;
  const auto& m = f.mechanism;
  Json mj;
  if (m.fixed_alpha) {
    mj["alpha"] = *m.fixed_alpha;
  } else {
    mj["alpha"] = "analytic";
  }
  mj["alpha_cap"] = m.alpha_cap;
  mj["alpha_samples"] = m.alpha_samples;
  mj["phi_grid_step_s"] = m.phi_grid_step_s;
  mj["deadline_grid"] = m.deadline_grid;
  mj["theta_floor"] = m.theta_floor;
  mj["floor_budget"] = m.floor_budget;
  j["mechanism"] = std::move(mj);
  return j;
}

inline Json parse_json_text(std::string_view text, const std::string& origin) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw FormatError(origin + ": " + e.what());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path.string());
  return ss.str();
}

inline ConfigFile load_config(const std::filesystem::path& path) {
  return parse_config(parse_json_text(read_file(path), path.string()));
}

// ---- Scenario documents ----------------------------------------------------

inline Scenario parse_scenario(const Json& j) {
  using namespace detail;
  Scenario s;
  StrictObject o(j, "scenario");
  read(o, "seed", s.seed, as_seed);
  {
    StrictObject r(o.require("rsu"), "scenario.rsu");
    read_number(r, "uplink_bw_mhz", s.rsu.uplink_bw_mhz);
    read_number(r, "downlink_bw_mhz", s.rsu.downlink_bw_mhz);
    read_number(r, "cpu_ghz", s.rsu.cpu_ghz);
    read_number(r, "gpu_ghz", s.rsu.gpu_ghz);
    read_number(r, "transmit_power_mw", s.rsu.transmit_power_mw);
    read_number(r, "noise_power", s.rsu.noise_power);
    r.finish();
  }
  const Json& avs = o.require("avs");
  if (!avs.is_array()) throw FormatError("scenario.avs: expected an array");
  for (std::size_t i = 0; i < avs.size(); ++i) {
    const std::string path = "scenario.avs[" + std::to_string(i) + "]";
    StrictObject a(avs[i], path);
    AvProfile av;
    av.id = static_cast<std::size_t>(as_seed(a.require("id"), a.at("id")));
    read_number(a, "valuation", av.valuation);
    read_number(a, "transmit_power_mw", av.transmit_power_mw);
    read_int(a, "cache_size", av.cache_size);
    const Json& tasks = a.require("tasks");
    if (!tasks.is_array()) throw FormatError(a.at("tasks") + ": expected an array");
    for (std::size_t n = 0; n < tasks.size(); ++n) {
      StrictObject t(tasks[n], a.at("tasks") + "[" + std::to_string(n) + "]");
      DtTask task;
      read_number(t, "data_size_mb", task.data_size_mb);
      read_number(t, "cycles_per_mb", task.cycles_per_mb);
      read_number(t, "deadline_s", task.deadline_s);
      t.finish();
      av.tasks.push_back(task);
    }
    a.finish();
    s.avs.push_back(std::move(av));
  }
  const Json& channels = o.require("channels");
  if (!channels.is_array()) throw FormatError("scenario.channels: expected an array");
  for (std::size_t i = 0; i < channels.size(); ++i) {
    StrictObject c(channels[i], "scenario.channels[" + std::to_string(i) + "]");
    ChannelState ch;
    read_number(c, "gain", ch.gain);
    read_number(c, "av_noise_power", ch.av_noise_power);
    read_number(c, "r2_score", ch.r2_score);
    c.finish();
    s.channels.push_back(ch);
  }
  const Json& sims = o.require("sims");
  if (!sims.is_array()) throw FormatError("scenario.sims: expected an array");
  for (std::size_t k = 0; k < sims.size(); ++k) {
    StrictObject m(sims[k], "scenario.sims[" + std::to_string(k) + "]");
    SimulatorProfile p;
    p.id = static_cast<std::size_t>(as_seed(m.require("id"), m.at("id")));
    const Json& kind = m.require("kind");
    if (kind == "driving") {
      p.kind = SimulatorKind::kDriving;
    } else if (kind == "traffic") {
      p.kind = SimulatorKind::kTraffic;
    } else {
      throw FormatError(m.at("kind") + ": expected \"driving\" or \"traffic\"");
    }
    read_number(m, "sim_data_size_mb", p.sim_data_size_mb);
    read_number(m, "gpu_cycles_per_mb", p.gpu_cycles_per_mb);
    if (const Json* g = m.find("generative_score")) {
      if (g->is_array()) {
        for (std::size_t i = 0; i < g->size(); ++i) {
          p.generative_per_av.push_back(as_number((*g)[i], m.at("generative_score")));
        }
      } else {
        p.generative_score = as_number(*g, m.at("generative_score"));
      }
    }
    const Json& hits = m.require("pref_hits");
    if (!hits.is_array()) throw FormatError(m.at("pref_hits") + ": expected an array");
    for (const auto& h : hits) p.pref_hits.push_back(static_cast<int>(as_integer(h, m.at("pref_hits"))));
    read_number(m, "relative_accuracy", p.relative_accuracy);
    m.finish();
    s.sims.push_back(std::move(p));
  }
  o.finish();
  return s;
}

inline Json scenario_to_json(const Scenario& s) {
  Json j;
  j["seed"] = s.seed;
  j["rsu"] = {{"uplink_bw_mhz", s.rsu.uplink_bw_mhz},     {"downlink_bw_mhz", s.rsu.downlink_bw_mhz},
              {"cpu_ghz", s.rsu.cpu_ghz},                 {"gpu_ghz", s.rsu.gpu_ghz},
              {"transmit_power_mw", s.rsu.transmit_power_mw}, {"noise_power", s.rsu.noise_power}};
  j["avs"] = Json::array();
  for (const auto& av : s.avs) {
    Json tasks = Json::array();
    for (const auto& t : av.tasks) {
      tasks.push_back({{"data_size_mb", t.data_size_mb}, {"cycles_per_mb", t.cycles_per_mb}, {"deadline_s", t.deadline_s}});
    }
    j["avs"].push_back({{"id", av.id},
                        {"valuation", av.valuation},
                        {"transmit_power_mw", av.transmit_power_mw},
                        {"cache_size", av.cache_size},
                        {"tasks", std::move(tasks)}});
  }
  j["channels"] = Json::array();
  for (const auto& c : s.channels) {
    j["channels"].push_back({{"gain", c.gain}, {"av_noise_power", c.av_noise_power}, {"r2_score", c.r2_score}});
  }
  j["sims"] = Json::array();
  for (const auto& p : s.sims) {
    Json sim;
    sim["id"] = p.id;
    sim["kind"] = p.kind == SimulatorKind::kDriving ? "driving" : "traffic";
    sim["sim_data_size_mb"] = p.sim_data_size_mb;
    sim["gpu_cycles_per_mb"] = p.gpu_cycles_per_mb;
    if (p.generative_per_av.empty()) {
      sim["generative_score"] = p.generative_score;
    } else {
      sim["generative_score"] = p.generative_per_av;
    }
    sim["pref_hits"] = p.pref_hits;
    sim["relative_accuracy"] = p.relative_accuracy;
    j["sims"].push_back(std::move(sim));
  }
  return j;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(parse_json_text(read_file(path), path.string()));
}

// ---- Outcomes and reports --------------------------------------------------

inline Json outcome_to_json(const MarketOutcome& o) {
  auto opt = [](const std::optional<std::size_t>& v) { return v ? Json(*v) : Json(nullptr); };
  Json j;
  j["winner_av"] = opt(o.winner_av);
  j["dt_payment"] = o.dt_payment;
  j["winner_sim"] = opt(o.winner_sim);
  j["sim_payment"] = o.sim_payment;
  j["alpha_used"] = o.alpha_used;
  j["scores"] = o.scores;
  j["submitted_deadlines"] = o.submitted_deadlines;
  j["per_task_windows"] = o.per_task_windows;
  j["infeasible_tasks"] = o.infeasible_tasks;
  j["top_traffic_value"] = o.top_traffic_value;
  j["second_traffic_value"] = o.second_traffic_value;
  j["s_dt"] = o.s_dt;
  j["s_traffic"] = o.s_traffic;
  j["s_driving"] = o.s_driving;
  j["total"] = o.total;
  return j;
}

inline Json report_to_json(const PropertyReport& r) {
  Json j;
  j["property"] = r.property;
  j["mechanism"] = r.mechanism;
  j["ok"] = r.ok();
  j["master_seed"] = r.master_seed;
  j["first_trial"] = r.first_trial;
  j["trials"] = r.trials;
  j["checks"] = r.checks;
  j["violation_count"] = r.violation_count;
  j["max_violation_magnitude"] = r.max_violation_magnitude;
  j["violations"] = Json::array();
  for (const auto& c : r.violations) {
    j["violations"].push_back({{"master_seed", c.master_seed},
                               {"trial", c.trial},
                               {"agent", c.agent},
                               {"agent_id", c.agent_id},
                               {"deviation", c.deviation},
                               {"truthful_utility", c.truthful_utility},
                               {"deviant_utility", c.deviant_utility},
                               {"magnitude", c.magnitude}});
  }
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

// ---- CSV -------------------------------------------------------------------

inline constexpr std::string_view kCsvHeader =
    "mechanism,seed,round,num_avs,num_sims,num_tasks,generative_mode,alpha,winner_av,winner_sim,"
    "dt_payment,sim_payment,s_dt,s_traffic,s_driving,total";

// One row per (mechanism, round). num_sims counts traffic simulators; missing
// winners are left empty.
inline std::string csv_row(const ScenarioConfig& c, const MechanismConfig& m, std::size_t round,
                           const MarketOutcome& o) {
  auto opt = [](const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : std::string(); };
  std::string row;
  row += to_string(m.mechanism);
  row += ',' + std::to_string(c.master_seed);
  row += ',' + std::to_string(round);
  row += ',' + std::to_string(c.num_avs);
  row += ',' + std::to_string(c.num_traffic_sims);
  row += ',' + std::to_string(c.num_tasks);
  row += ',';
  row += to_string(m.generative_mode);
  row += ',' + format_double(o.alpha_used);
  row += ',' + opt(o.winner_av);
  row += ',' + opt(o.winner_sim);
  for (double x : {o.dt_payment, o.sim_payment, o.s_dt, o.s_traffic, o.s_driving, o.total}) {
    row += ',' + format_double(x);
  }
  return row;
}

inline void append_csv(std::string& out, const RunReport& report) {
  for (const auto& m : report.mechanisms) {
    for (std::size_t r = 0; r < m.outcomes.size(); ++r) {
      out += csv_row(report.config, m.config, r, m.outcomes[r]);
      out += '\n';
    }
  }
}

inline std::string run_csv(const RunReport& report) {
  std::string out(kCsvHeader);
  out += '\n';
  append_csv(out, report);
  return out;
}

// ---- Atomic output -----------------------------------------------------------

// Writes `content` to a sibling temporary file and renames it over `path`, so
// readers never observe a partially written file.
inline void atomic_write(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  fs::path tmp = dir / ("." + path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("error writing " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

}  // namespace dtmarket
