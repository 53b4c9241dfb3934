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

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dtmarket/engine.hpp"
#include "dtmarket/io.hpp"
#include "dtmarket/verify.hpp"

namespace dtmarket {

enum ExitCode : int { kExitOk = 0, kExitViolations = 1, kExitUsage = 2, kExitIo = 3 };

inline const std::vector<std::string>& sweep_parameters() {
  static const std::vector<std::string> names{"num_avs", "num_traffic_sims", "generative_score_mid", "num_tasks"};
  return names;
}

// Applies one sweep point to a config. Integer parameters reject fractional
// values; the generative-score midpoint keeps the configured width, clipped
// to [0, 1].
inline void apply_sweep_value(ScenarioConfig& c, const std::string& param, double value) {
  auto as_count = [&](int& field) {
    if (value != std::floor(value)) throw ConfigError({param + ": value " + format_double(value) + " is not an integer"});
    field = static_cast<int>(value);
  };
  if (param == "num_avs") {
    as_count(c.num_avs);
  } else if (param == "num_traffic_sims") {
    as_count(c.num_traffic_sims);
  } else if (param == "num_tasks") {
    as_count(c.num_tasks);
  } else if (param == "generative_score_mid") {
    const double half = 0.5 * (c.generative_score.hi - c.generative_score.lo);
    c.generative_score = {std::max(0.0, value - half), std::min(1.0, value + half)};
  } else {
    throw ConfigError({"unknown sweep parameter '" + param + "'"});
  }
}

namespace detail {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> mechanisms;
  std::optional<int> rounds;
  std::optional<std::uint64_t> seed;
  std::string out_path;
  int jobs = 1;
  bool no_generative = false;
};

inline void add_common(CLI::App& cmd, CommonArgs& a) {
  cmd.add_option("--config", a.config_path, "Scenario config JSON");
  cmd.add_option("--mechanism", a.mechanisms, "Mechanism (repeatable): mtepvisa, epvisa, pvisa, spa, first-price");
  cmd.add_option("--rounds", a.rounds, "Monte Carlo rounds (trials for verify)")->check(CLI::PositiveNumber);
  cmd.add_option("--seed", a.seed, "Master seed; overrides SIM_SEED and the config");
  cmd.add_option("--out", a.out_path, "Output file (default: standard output)");
  cmd.add_option("--jobs", a.jobs, "Worker threads")->check(CLI::PositiveNumber);
  cmd.add_flag("--no-generative", a.no_generative, "Use the baseline match quality");
}

struct Resolved {
  ConfigFile file;
  std::vector<Mechanism> mechanisms;
  GenerativeMode mode = GenerativeMode::kGenerative;
};

inline std::uint64_t parse_seed(const std::string& text, const std::string& origin) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) throw ConfigError({origin + ": not an unsigned integer"});
  return v;
}

inline Resolved resolve(const CommonArgs& a, std::vector<Mechanism> default_mechanisms) {
  Resolved r;
  if (!a.config_path.empty()) r.file = load_config(a.config_path);
  auto& c = r.file.scenario;
  if (const char* env = std::getenv("SIM_SEED"); env && *env) c.master_seed = parse_seed(env, "SIM_SEED");
  if (a.seed) c.master_seed = *a.seed;
  if (a.rounds) c.rounds = *a.rounds;
  auto problems = config_problems(c);
  for (auto& p : mechanism_option_problems(r.file.mechanism)) problems.push_back(std::move(p));
  for (const auto& name : a.mechanisms) {
    if (auto m = parse_mechanism(name)) {
      r.mechanisms.push_back(*m);
    } else {
      problems.push_back("unknown mechanism '" + name + "'");
    }
  }
  if (!problems.empty()) throw ConfigError(problems);
  if (r.mechanisms.empty()) r.mechanisms = std::move(default_mechanisms);
  r.mode = a.no_generative ? GenerativeMode::kBaseline : GenerativeMode::kGenerative;
  return r;
}

inline std::vector<MechanismConfig> mechanism_configs(const Resolved& r) {
  std::vector<MechanismConfig> out;
  for (auto m : r.mechanisms) out.push_back(make_mechanism(m, r.file.scenario.gamma, r.mode, r.file.mechanism));
  return out;
}

inline void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty()) {
    out << content;
  } else {
    atomic_write(path, content);
  }
}

inline const std::vector<Mechanism>& all_baselines() {
  static const std::vector<Mechanism> m{Mechanism::kMtepvisa, Mechanism::kEpvisa, Mechanism::kPvisa, Mechanism::kSpa};
  return m;
}

}  // namespace detail

// Entry point shared by the executable and the tests. Returns the exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-sided DT and simulator market simulator", "dtmarket"};
  app.require_subcommand(1);

  detail::CommonArgs run_args;
  std::string scenario_path;
  auto* run = app.add_subcommand("run", "Monte Carlo run; one CSV row per mechanism and round");
  detail::add_common(*run, run_args);
  run->add_option("--scenario", scenario_path, "Clear one scenario file and print outcomes as JSON");

  detail::CommonArgs sweep_args;
  std::string sweep_param;
  std::vector<std::string> sweep_values;
  auto* sweep = app.add_subcommand("sweep", "Monte Carlo run per parameter value, one CSV section each");
  detail::add_common(*sweep, sweep_args);
  sweep->add_option("--param", sweep_param, "num_avs, num_traffic_sims, generative_score_mid or num_tasks")
      ->required();
  sweep->add_option("--values", sweep_values, "Comma-separated values")->required()->delimiter(',');

  detail::CommonArgs verify_args;
  std::string property;
  int sp_grid = 20;
  int deadline_grid = 16;
  std::vector<double> lambdas{0.5, 1.0, 2.0};
  std::uint64_t first_trial = 0;
  bool unsorted = false;
  auto* verify = app.add_subcommand("verify", "Randomized property checks; JSON report");
  detail::add_common(*verify, verify_args);
  verify->add_option("property", property, "strategy-proofness, adverse-selection, deadline-optimality, assumption1, all")
      ->required();
  verify->add_option("--price-grid", sp_grid, "Deviation grid points per agent")->check(CLI::PositiveNumber);
  verify->add_option("--deadline-grid", deadline_grid, "Deadline grid points per task")->check(CLI::Range(2, 1 << 20));
  verify->add_option("--lambdas", lambdas, "Value scalings for adverse selection")->delimiter(',');
  verify->add_option("--first-trial", first_trial, "Index of the first trial (replays a reported counterexample)");
  verify->add_flag("--unsorted", unsorted, "Check Assumption 1 on unsorted marginal scores");

  detail::CommonArgs gen_args;
  std::uint64_t round_index = 0;
  auto* gen = app.add_subcommand("generate", "Print the scenario of one round as JSON");
  detail::add_common(*gen, gen_args);
  gen->add_option("--round", round_index, "Round index");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run) {
      const auto r = detail::resolve(run_args, detail::all_baselines());
      const auto mechs = detail::mechanism_configs(r);
      if (!scenario_path.empty()) {
        Scenario s = load_scenario(scenario_path);
        if (auto v = validate_scenario(s, r.file.mechanism.theta_floor); !v.ok()) {
          std::vector<std::string> msgs;
          for (const auto& x : v.violations) msgs.push_back(x.constraint + ": " + x.message);
          throw ConfigError(msgs);
        }
        Json j = Json::array();
        for (const auto& m : mechs) {
          Json entry;
          entry["mechanism"] = to_string(m.mechanism);
          entry["outcome"] = outcome_to_json(run_mechanism(s, m));
          j.push_back(std::move(entry));
        }
        detail::emit(run_args.out_path, j.dump(2) + "\n", out);
        return kExitOk;
      }
      const auto report = run_monte_carlo(r.file.scenario, mechs, r.file.scenario.rounds, run_args.jobs);
      detail::emit(run_args.out_path, run_csv(report), out);
      return kExitOk;
    }

    if (*sweep) {
      const auto r = detail::resolve(sweep_args, detail::all_baselines());
      const auto& allowed = sweep_parameters();
      if (std::find(allowed.begin(), allowed.end(), sweep_param) == allowed.end()) {
        throw ConfigError({"unknown sweep parameter '" + sweep_param + "'"});
      }
      std::vector<double> values;
      for (const auto& v : sweep_values) {
        try {
          std::size_t used = 0;
          values.push_back(std::stod(v, &used));
          if (used != v.size()) throw std::invalid_argument(v);
        } catch (const std::logic_error&) {
          throw ConfigError({"--values: '" + v + "' is not a number"});
        }
      }
      std::vector<ScenarioConfig> points;
      for (double v : values) {
        ScenarioConfig c = r.file.scenario;
        apply_sweep_value(c, sweep_param, v);
        validate_config(c);
        points.push_back(c);
      }
      const auto mechs = detail::mechanism_configs(r);
      std::string csv = "# sweep,param=" + sweep_param + ",values=";
      for (std::size_t i = 0; i < values.size(); ++i) csv += (i ? ";" : "") + format_double(values[i]);
      csv += ",rounds=" + std::to_string(r.file.scenario.rounds);
      csv += ",master_seed=" + std::to_string(r.file.scenario.master_seed);
      csv += ",cache_size_support=1.." + std::to_string(r.file.scenario.cache_max) + "\n";
      for (std::size_t i = 0; i < points.size(); ++i) {
        csv += "# section," + sweep_param + "=" + format_double(values[i]) + "\n";
        csv += std::string(kCsvHeader) + "\n";
        append_csv(csv, run_monte_carlo(points[i], mechs, points[i].rounds, sweep_args.jobs));
      }
      detail::emit(sweep_args.out_path, csv, out);
      return kExitOk;
    }

    if (*verify) {
      static const std::vector<std::string> properties{"strategy-proofness", "adverse-selection",
                                                       "deadline-optimality", "assumption1", "all"};
      if (std::find(properties.begin(), properties.end(), property) == properties.end()) {
        err << "unknown property '" << property << "'\n";
        return kExitUsage;
      }
      for (double l : lambdas) {
        if (!(l > 0.0)) throw ConfigError({"--lambdas: every lambda must be > 0"});
      }
      const auto r = detail::resolve(verify_args, {Mechanism::kMtepvisa});
      if (r.mechanisms.size() != 1) throw ConfigError({"verify takes exactly one --mechanism"});
      const auto mech = detail::mechanism_configs(r).front();
      const auto& c = r.file.scenario;
      const int trials = c.rounds;
      const int jobs = verify_args.jobs;
      std::vector<PropertyReport> reports;
      auto want = [&](const char* name) { return property == name || property == "all"; };
      auto timed = [&](auto&& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        reports.push_back(fn());
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
        const auto& rep = reports.back();
        err << rep.property << " [" << rep.mechanism << "]: " << rep.violation_count << " violations in "
            << rep.checks << " checks (" << format_double(std::round(dt.count() * 100) / 100) << " s)\n";
      };
      if (want("strategy-proofness")) {
        timed([&] { return check_strategy_proofness(c, mech, trials, sp_grid, first_trial, jobs); });
      }
      if (want("adverse-selection")) {
        timed([&] { return check_adverse_selection_free(c, mech, trials, lambdas, first_trial, jobs); });
      }
      if (want("deadline-optimality")) {
        timed([&] { return check_deadline_optimality(c, mech, trials, deadline_grid, first_trial, jobs); });
      }
      if (want("assumption1")) {
        timed([&] { return check_assumption1(c, mech, trials, !unsorted, first_trial, jobs); });
      }
      bool ok = true;
      for (const auto& rep : reports) ok = ok && rep.ok();
      Json j;
      if (reports.size() == 1) {
        j = report_to_json(reports.front());
      } else {
        j["ok"] = ok;
        j["reports"] = Json::array();
        for (const auto& rep : reports) j["reports"].push_back(report_to_json(rep));
      }
      detail::emit(verify_args.out_path, j.dump(2) + "\n", out);
      return ok ? kExitOk : kExitViolations;
    }

    if (*gen) {
      const auto r = detail::resolve(gen_args, {Mechanism::kMtepvisa});
      const Scenario s = generate_scenario(r.file.scenario, round_index);
      detail::emit(gen_args.out_path, scenario_to_json(s).dump(2) + "\n", out);
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    err << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::domain_error& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace dtmarket
