#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "routeshape/harness.hpp"

using namespace routeshape;

namespace {

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string cell; std::getline(ss, cell, ',');) {
    if (cell.empty()) continue;
    out.push_back(parse_number(cell));
  }
  if (out.empty()) throw ConfigError("empty list '" + text + "'");
  return out;
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  std::string out;
  std::string beta;
  std::string scope;

  RunConfig load() const {
    RunConfig rc = load_run_config(config);
    if (seed) rc.seeds = {*seed};
    if (!scope.empty()) rc.settings.reward.scope = parse_scope(scope);
    if (!out.empty()) rc.out = out;
    rc.validate();
    return rc;
  }
};

void add_common(CLI::App* cmd, Common& c, bool beta) {
  cmd->add_option("--config", c.config, "run config JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "single seed (replaces the seed list)");
  cmd->add_option("--jobs", c.jobs, "parallel workers")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, "output location");
  cmd->add_option("--scope", c.scope, "intrinsic reward scope")->check(CLI::IsMember({"av-group", "system", "none"}));
  if (beta) cmd->add_option("--beta", c.beta, "comma-separated beta values");
}

void emit(const std::string& path, const std::function<void(std::ostream&)>& body) {
  if (path.empty()) {
    body(std::cout);
  } else {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    body(f);
    if (!f) throw Error("write failed for " + path);
  }
}

void print_train(const TrainResult& r) {
  const auto& rw = r.config.settings.reward;
  std::printf("beta %s scope %s: eval proportion %.3f, first reach %s, AVs %.3f s, humans %.3f s\n",
              format_number(rw.beta).c_str(), to_string(rw.scope), r.eval_proportion,
              detail::reach_text(r.first_reach).c_str(), r.avs.mean, r.humans.mean);
  for (const auto& s : r.seeds) {
    std::string prof;
    for (RouteIndex a : s.run.frozen_profile) prof += std::to_string(a);
    std::printf("  seed %llu: warm-up profile %s, eval proportion %.3f\n", static_cast<unsigned long long>(s.run.seed),
                prof.c_str(), s.eval_proportion);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Route-choice learning with counterfactual reward shaping"};
  app.require_subcommand(1);

  Common sim_c, train_c, sweep_c, eq_c, marg_c;
  std::string action;
  std::string alphas = "1";
  bool deviations = false;
  std::string in_dir, report_out;

  auto* sim = app.add_subcommand("simulate", "simulate one episode with fixed routes");
  add_common(sim, sim_c, false);
  sim->add_option("--action", action, "routes per agent, or per AV with humans on route 0 (default all 0)");

  auto* train = app.add_subcommand("train", "warm-up, train and evaluate AVs");
  add_common(train, train_c, true);

  auto* sweep = app.add_subcommand("sweep-beta", "repeat training for several beta values");
  add_common(sweep, sweep_c, true);

  auto* eq = app.add_subcommand("equilibria", "enumerate pure Nash equilibria over an alpha x beta grid");
  add_common(eq, eq_c, true);
  eq->add_option("--alpha", alphas, "comma-separated alpha values");
  eq->add_flag("--deviations", deviations, "also write deviations.csv");

  auto* marg = app.add_subcommand("marginal", "marginal cost matrix for one joint action");
  add_common(marg, marg_c, false);
  marg->add_option("--action", action, "routes per agent, or per AV with humans on route 0")->required();

  auto* rep = app.add_subcommand("report", "rebuild summary and convergence files from a train run directory");
  rep->add_option("--in", in_dir, "train run directory")->required()->check(CLI::ExistingDirectory);
  rep->add_option("--out", report_out, "output directory (default: the run directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) {
      RunConfig rc = sim_c.load();
      const Scenario sc = run_scenario(rc);
      const JointAction u = action.empty() ? JointAction(sc.size(), 0) : expand_joint_action(sc, parse_joint_action(action));
      const auto t = simulate(sc, u, rc.seeds.front());
      emit(sim_c.out, [&](std::ostream& os) { write_simulation_csv(os, sc, u, t); });
    } else if (*train) {
      RunConfig rc = train_c.load();
      if (!train_c.beta.empty()) {
        const auto b = parse_list(train_c.beta);
        if (b.size() != 1) throw ConfigError("train takes a single --beta; use sweep-beta for lists");
        rc.settings.reward.beta = b.front();
      }
      const auto res = run_training(rc, train_c.jobs);
      write_training(rc.out, res);
      print_train(res);
    } else if (*sweep) {
      RunConfig rc = sweep_c.load();
      const auto betas = sweep_c.beta.empty() ? std::vector<double>{0.3, 10, 100, 200} : parse_list(sweep_c.beta);
      for (const auto& r : run_sweep(rc, betas, rc.out, sweep_c.jobs)) print_train(r);
    } else if (*eq) {
      RunConfig rc = eq_c.load();
      const auto betas = eq_c.beta.empty() ? std::vector<double>{-10, -1, 0, 0.3, 1, 10, 100, 200} : parse_list(eq_c.beta);
      std::vector<GridPoint> grid;
      for (double a : parse_list(alphas))
        for (double b : betas) grid.push_back({a, b});
      const auto res = run_equilibria(rc, grid, rc.out, eq_c.jobs, deviations);
      Scenario sc = rc.settings.scenario;
      for (const auto& r : res.reports) {
        std::printf("alpha %s beta %s: %zu equilibria", format_number(r.config.alpha).c_str(),
                    format_number(r.config.beta).c_str(), r.count());
        for (std::size_t k = 0; k < r.equilibria.size() && k < 8; ++k)
          std::printf(" %s", encode_av_action(sc, r.equilibria[k]).c_str());
        std::printf("%s\n", r.equilibria.size() > 8 ? " ..." : "");
      }
      std::printf("system optimum: %s total %s s (%zu minimizers)\n",
                  encode_av_action(sc, res.optimum.actions.front()).c_str(),
                  format_number(res.optimum.total_time).c_str(), res.optimum.actions.size());
    } else if (*marg) {
      RunConfig rc = marg_c.load();
      const Scenario sc = run_scenario(rc);
      const JointAction u = expand_joint_action(sc, parse_joint_action(action));
      const std::uint64_t seed = rc.seeds.front();
      const auto base = simulate(sc, u, seed);
      const auto m = compute_marginal_matrix(sc, u, base, seed);
      emit(marg_c.out, [&](std::ostream& os) { write_matrix_csv(os, sc, m, rc.settings.reward.scope); });
    } else if (*rep) {
      const auto res = rebuild_report(in_dir, report_out.empty() ? in_dir : report_out);
      print_train(res);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
