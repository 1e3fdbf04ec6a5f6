#pragma once

// Experiment pipelines behind the command-line tool. Every function writes
// its artifacts under a caller-given directory and returns what it computed.

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "routeshape/equilibrium.hpp"
#include "routeshape/io.hpp"
#include "routeshape/parallel.hpp"
#include "routeshape/report.hpp"
#include "routeshape/training.hpp"

namespace routeshape {

namespace fs = std::filesystem;

namespace detail {

inline void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  body(out);
  out.flush();
  if (!out) throw Error("write failed for " + path.string());
}

inline std::string reach_text(const std::optional<std::size_t>& r) { return r ? std::to_string(*r) : "never"; }

}  // namespace detail

// ---------------------------------------------------------------------------
// train

struct SeedResult {
  SeedRun run;
  JointAction optimum;
  std::vector<double> curve;  // train then eval
  GroupStats avs, humans;     // eval phase
  double eval_proportion = 0.0;
  std::optional<std::size_t> first_reach;  // training episode offset
};

struct TrainResult {
  RunConfig config;
  std::vector<SeedResult> seeds;
  std::vector<double> curve;  // mean over seeds
  GroupStats avs, humans;     // eval phase, pooled over seeds
  double eval_proportion = 0.0;
  std::optional<std::size_t> first_reach;  // of the mean curve
};

/// System-optimal joint action with the humans pinned to `profile`.
inline JointAction optimal_action(const Scenario& sc, const JointAction& profile, SimulationCache* cache = nullptr) {
  Scenario det = sc;
  det.noise_sigma = 0.0;
  return system_optimum(det, profile, Scope::System, cache).actions.front();
}

inline void finish_aggregate(TrainResult& res) {
  const auto& s = res.config.settings;
  const Scenario sc = s.effective_scenario();
  std::vector<std::vector<double>> curves;
  std::vector<EpisodeLog> eval;
  for (const auto& r : res.seeds) {
    curves.push_back(r.curve);
    eval.insert(eval.end(), r.run.eval.begin(), r.run.eval.end());
  }
  res.curve = mean_curve(curves);
  res.avs = group_stats(sc, eval, AgentKind::Av);
  res.humans = group_stats(sc, eval, AgentKind::Human);
  res.eval_proportion = mean_of(std::span(res.curve).subspan(s.train_episodes));
  res.first_reach = first_reach(std::span(res.curve).first(s.train_episodes));
}

inline SeedResult summarize_seed(const TrainSettings& s, SeedRun run, const JointAction& optimum) {
  SeedResult r;
  r.optimum = optimum;
  std::vector<EpisodeLog> all = run.train;
  all.insert(all.end(), run.eval.begin(), run.eval.end());
  r.curve = proportion_curve(run.scenario, all, optimum);
  r.avs = group_stats(run.scenario, run.eval, AgentKind::Av);
  r.humans = group_stats(run.scenario, run.eval, AgentKind::Human);
  r.eval_proportion = mean_of(std::span(r.curve).subspan(s.train_episodes));
  r.first_reach = first_reach(std::span(r.curve).first(s.train_episodes));
  r.run = std::move(run);
  return r;
}

/// Warm-up, training and evaluation for every seed, up to `jobs` at a time.
inline TrainResult run_training(const RunConfig& rc, std::size_t jobs = 1, SimulationCache* cache = nullptr) {
  rc.validate();
  SimulationCache local;
  if (!cache) cache = &local;
  TrainResult res;
  res.config = rc;
  res.seeds.resize(rc.seeds.size());
  parallel_for(rc.seeds.size(), jobs, [&](std::size_t k) {
    SeedRun run = train_seed(rc.settings, rc.seeds[k], cache);
    const JointAction opt = optimal_action(run.scenario, run.frozen_profile, cache);
    res.seeds[k] = summarize_seed(rc.settings, std::move(run), opt);
  });
  finish_aggregate(res);
  return res;
}

inline std::vector<Series> convergence_series(const TrainResult& res, const std::string& mean_label) {
  std::vector<double> x(res.curve.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(res.config.settings.warmup_days + i);
  return {{mean_label, x, res.curve}};
}

inline void write_seed_dir(const fs::path& dir, const TrainSettings& s, const SeedResult& r) {
  detail::write_file(dir / "episodes.csv", [&](std::ostream& os) {
    os << kEpisodeCsvHeader << '\n';
    for (const auto& log : r.run.warmup) write_episode_rows(os, r.run.warmup_scenario, log);
    for (const auto& log : r.run.train) write_episode_rows(os, r.run.scenario, log);
    for (const auto& log : r.run.eval) write_episode_rows(os, r.run.scenario, log);
  });
  detail::write_file(dir / "warmup.csv", [&](std::ostream& os) {
    os << "agent_id,frozen_action\n";
    for (std::size_t i = 0; i < r.run.scenario.size(); ++i)
      os << r.run.scenario.agents[i].id << ',' << r.run.frozen_profile[i] << '\n';
  });
  detail::write_file(dir / "summary.csv", [&](std::ostream& os) { write_summary_csv(os, r.avs, r.humans); });
  detail::write_file(dir / "convergence.csv",
                     [&](std::ostream& os) { write_convergence_csv(os, r.curve, s.warmup_days, s.train_episodes); });
}

inline void write_aggregate(const fs::path& dir, const TrainResult& res) {
  const auto& s = res.config.settings;
  detail::write_file(dir / "summary.csv", [&](std::ostream& os) { write_summary_csv(os, res.avs, res.humans); });
  detail::write_file(dir / "convergence.csv",
                     [&](std::ostream& os) { write_convergence_csv(os, res.curve, s.warmup_days, s.train_episodes); });
  std::vector<Series> series;
  for (const auto& r : res.seeds) {
    std::vector<double> x(r.curve.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(s.warmup_days + i);
    series.push_back({"seed " + std::to_string(r.run.seed), x, r.curve});
  }
  auto mean = convergence_series(res, "mean");
  series.insert(series.begin(), mean.front());
  detail::write_file(dir / "convergence.svg", [&](std::ostream& os) {
    write_line_svg(os, series, "AVs on the system-optimal route (beta " + format_number(s.reward.beta) + ", " +
                                   to_string(s.reward.scope) + ")",
                   "episode", "proportion", static_cast<double>(s.warmup_days + s.train_episodes));
  });
}

inline void write_training(const fs::path& dir, const TrainResult& res) {
  const auto& s = res.config.settings;
  Json meta = to_json(res.config);
  meta["out"] = dir.generic_string();
  Json per_seed = Json::array();
  for (const auto& r : res.seeds) {
    per_seed.push_back({{"seed", r.run.seed}, {"optimum", r.optimum}, {"frozen_profile", r.run.frozen_profile}});
    write_seed_dir(dir / ("seed_" + std::to_string(r.run.seed)), s, r);
  }
  meta["results"] = per_seed;
  detail::write_file(dir / "run.json", [&](std::ostream& os) { os << meta.dump(2) << '\n'; });
  write_aggregate(dir, res);
}

// ---------------------------------------------------------------------------
// sweep-beta

inline constexpr std::string_view kBetaSummaryCsvHeader =
    "beta,scope,av_mean,av_std,human_mean,human_std,eval_proportion,first_reach";

inline std::vector<TrainResult> run_sweep(const RunConfig& rc, const std::vector<double>& betas, const fs::path& dir,
                                          std::size_t jobs = 1) {
  if (betas.empty()) throw ConfigError("beta list must not be empty");
  std::vector<TrainResult> out;
  std::vector<Series> overlay;
  for (double b : betas) {
    RunConfig c = rc;
    c.settings.reward.beta = b;
    out.push_back(run_training(c, jobs));
    write_training(dir / ("beta_" + format_number(b)), out.back());
    overlay.push_back(convergence_series(out.back(), "beta " + format_number(b)).front());
  }
  detail::write_file(dir / "beta_summary.csv", [&](std::ostream& os) {
    os << kBetaSummaryCsvHeader << '\n';
    for (const auto& r : out)
      os << format_number(r.config.settings.reward.beta) << ',' << to_string(r.config.settings.reward.scope) << ','
         << format_number(r.avs.mean) << ',' << format_number(r.avs.std) << ',' << format_number(r.humans.mean) << ','
         << format_number(r.humans.std) << ',' << format_number(r.eval_proportion) << ','
         << detail::reach_text(r.first_reach) << '\n';
  });
  const auto& s = rc.settings;
  detail::write_file(dir / "convergence.svg", [&](std::ostream& os) {
    write_line_svg(os, overlay, "AVs on the system-optimal route by beta (" + std::string(to_string(s.reward.scope)) + ")",
                   "episode", "proportion", static_cast<double>(s.warmup_days + s.train_episodes));
  });
  return out;
}

// ---------------------------------------------------------------------------
// equilibria

struct GridPoint {
  double alpha = 1.0;
  double beta = 0.0;
};

/// Human routes for the analysis: the configured profile, else the
/// deterministic warm-up outcome for the first seed.
inline JointAction analysis_profile(const RunConfig& rc, SimulationCache* cache = nullptr) {
  if (rc.human_profile) return *rc.human_profile;
  Scenario det = rc.settings.scenario;
  det.noise_sigma = 0.0;
  JointAction p;
  for (const auto& h : run_warmup(det, rc.settings.human, rc.settings.warmup_days, rc.seeds.front(), nullptr, cache))
    p.push_back(*h.frozen_action);
  return p;
}

struct EquilibriaResult {
  JointAction profile;
  std::vector<EquilibriumReport> reports;
  SystemOptimum optimum;
};

inline EquilibriaResult run_equilibria(const RunConfig& rc, const std::vector<GridPoint>& grid, const fs::path& dir,
                                       std::size_t jobs = 1, bool deviations = false) {
  if (grid.empty()) throw ConfigError("alpha/beta grid must not be empty");
  Scenario sc = rc.settings.scenario;
  sc.noise_sigma = 0.0;
  SimulationCache cache;
  EquilibriaResult res;
  res.profile = analysis_profile(rc, &cache);
  EnumerationOptions opt;
  opt.jobs = jobs;
  for (const auto& g : grid) {
    RewardConfig cfg = rc.settings.reward;
    cfg.alpha = g.alpha;
    cfg.beta = g.beta;
    res.reports.push_back(enumerate_nash(sc, res.profile, cfg, &cache, opt));
  }
  res.optimum = system_optimum(sc, res.profile, Scope::System, &cache, opt);

  detail::write_file(dir / "equilibria.csv", [&](std::ostream& os) {
    os << kEquilibriaCsvHeader << '\n';
    for (const auto& r : res.reports) write_equilibria_row(os, sc, r);
  });
  detail::write_file(dir / "optimum.csv", [&](std::ostream& os) {
    os << "total_time,count,optima\n" << format_number(res.optimum.total_time) << ',' << res.optimum.actions.size() << ',';
    for (std::size_t k = 0; k < res.optimum.actions.size(); ++k)
      os << (k ? ";" : "") << encode_av_action(sc, res.optimum.actions[k]);
    os << '\n';
  });
  std::vector<std::string> labels;
  std::vector<double> counts;
  for (const auto& r : res.reports) {
    labels.push_back("a" + format_number(r.config.alpha) + " b" + format_number(r.config.beta));
    counts.push_back(static_cast<double>(r.count()));
  }
  detail::write_file(dir / "equilibria.svg", [&](std::ostream& os) {
    write_bar_svg(os, labels, counts, "Pure Nash equilibria (" + std::string(to_string(rc.settings.reward.scope)) + ")",
                  "count");
  });
  if (deviations) {
    detail::write_file(dir / "deviations.csv", [&](std::ostream& os) {
      bool header = true;
      for (const auto& r : res.reports) {
        std::ostringstream block;
        write_deviations_csv(block, sc, res.profile, r.config, &cache, opt);
        std::istringstream lines(block.str());
        std::string line;
        std::getline(lines, line);
        if (header) os << "alpha,beta,scope," << line << '\n', header = false;
        while (std::getline(lines, line))
          os << format_number(r.config.alpha) << ',' << format_number(r.config.beta) << ','
             << to_string(r.config.scope) << ',' << line << '\n';
      }
    });
  }
  return res;
}

// ---------------------------------------------------------------------------
// simulate / marginal

inline constexpr std::string_view kSimulateCsvHeader = "agent_id,kind,route,travel_time";

inline void write_simulation_csv(std::ostream& os, const Scenario& sc, const JointAction& u, const TravelTimeVector& t) {
  os << kSimulateCsvHeader << '\n';
  for (std::size_t i = 0; i < sc.size(); ++i)
    os << sc.agents[i].id << ',' << to_string(sc.agents[i].kind) << ',' << u[i] << ',' << format_number(t.at(i)) << '\n';
}

/// Scenario with the configured mode applied.
inline Scenario run_scenario(const RunConfig& rc) { return rc.settings.effective_scenario(); }

// ---------------------------------------------------------------------------
// report

/// Reads episodes.csv rows back into logs (action and times only).
inline std::vector<EpisodeLog> read_episode_logs(std::istream& in, const Scenario& sc) {
  std::string line;
  if (!std::getline(in, line) || line != kEpisodeCsvHeader) throw ConfigError("episodes.csv: unexpected header");
  std::map<std::size_t, EpisodeLog> by_episode;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 9) throw ConfigError("episodes.csv: bad row '" + line + "'");
    const auto ep = static_cast<std::size_t>(std::stoull(f[0]));
    auto& log = by_episode[ep];
    if (log.action.empty()) {
      log.episode = ep;
      log.action.assign(sc.size(), 0);
      log.times.times.assign(sc.size(), NAN);
      log.seed = std::stoull(f[8]);
      log.times.seed = log.seed;
    }
    const std::size_t pos = sc.position_of(std::stoi(f[1]));
    log.action[pos] = std::stoi(f[3]);
    log.times.times[pos] = parse_number(f[4]);
  }
  std::vector<EpisodeLog> out;
  for (auto& [_, log] : by_episode) out.push_back(std::move(log));
  return out;
}

/// Recomputes summary and convergence files of a train run directory from
/// its episodes.csv files, writing them under `out`.
inline TrainResult rebuild_report(const fs::path& run_dir, const fs::path& out) {
  const Json meta = read_json_file(run_dir / "run.json");
  Json cfg = meta;
  cfg.erase("results");
  TrainResult res;
  res.config = run_config_from_json(cfg);
  const auto& s = res.config.settings;
  const Scenario sc = s.effective_scenario();
  for (const Json& entry : meta.at("results")) {
    const auto seed = entry.at("seed").get<std::uint64_t>();
    const fs::path dir = run_dir / ("seed_" + std::to_string(seed));
    std::ifstream in(dir / "episodes.csv");
    if (!in) throw ConfigError("missing " + (dir / "episodes.csv").string());
    const auto logs = read_episode_logs(in, sc);
    SeedRun run;
    run.seed = seed;
    run.scenario = sc;
    run.frozen_profile = entry.at("frozen_profile").get<JointAction>();
    for (const auto& log : logs) {
      if (log.episode < s.warmup_days) continue;
      (log.episode < s.warmup_days + s.train_episodes ? run.train : run.eval).push_back(log);
    }
    res.seeds.push_back(summarize_seed(s, std::move(run), entry.at("optimum").get<JointAction>()));
    const SeedResult& r = res.seeds.back();
    const fs::path od = out / ("seed_" + std::to_string(seed));
    detail::write_file(od / "summary.csv", [&](std::ostream& os) { write_summary_csv(os, r.avs, r.humans); });
    detail::write_file(od / "convergence.csv",
                       [&](std::ostream& os) { write_convergence_csv(os, r.curve, s.warmup_days, s.train_episodes); });
  }
  finish_aggregate(res);
  write_aggregate(out, res);
  return res;
}

}  // namespace routeshape
