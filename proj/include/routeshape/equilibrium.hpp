#pragma once

// Exhaustive analysis over the AV joint-action space with humans held fixed:
// pure Nash equilibria of the shaped game, system optima, and the per-agent
// deviation terms behind the beta threshold.

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "routeshape/format.hpp"
#include "routeshape/marginal.hpp"
#include "routeshape/network.hpp"
#include "routeshape/parallel.hpp"

namespace routeshape {

inline constexpr double kDeviationTolerance = 1e-9;

struct EnumerationOptions {
  std::uint64_t bound = std::uint64_t{1} << 20;  // max AV joint actions
  std::size_t jobs = 1;
};

/// Mixed-radix walk over every AV joint action, humans pinned to `profile`.
class JointActionSpace {
 public:
  JointActionSpace(const Scenario& sc, const JointAction& profile, std::uint64_t bound) : sc_(sc), base_(profile) {
    if (base_.size() != sc.size())
      throw ConfigError("human profile has " + std::to_string(base_.size()) + " entries, scenario has " +
                        std::to_string(sc.size()) + " agents");
    avs_ = sc.av_positions();
    for (std::size_t p : avs_) base_[p] = sc.agents[p].action_space.front();
    sc.check_action(base_);
    size_ = 1;
    for (std::size_t p : avs_) {
      const auto k = static_cast<std::uint64_t>(sc.agents[p].action_space.size());
      if (size_ > bound / k)
        throw ConfigError("AV joint-action space exceeds the enumeration bound of " + std::to_string(bound) +
                          "; shrink the scenario (fewer AVs or routes)");
      size_ *= k;
    }
  }

  std::uint64_t size() const { return size_; }
  const std::vector<std::size_t>& avs() const { return avs_; }

  JointAction decode(std::uint64_t code) const {
    JointAction u = base_;
    for (std::size_t k = 0; k < avs_.size(); ++k) {
      const auto& space = sc_.agents[avs_[k]].action_space;
      u[avs_[k]] = space[code % space.size()];
      code /= space.size();
    }
    return u;
  }

  /// Code of `code` with AV number k switched to its `digit`-th action.
  std::uint64_t with_digit(std::uint64_t code, std::size_t k, std::size_t digit) const {
    std::uint64_t stride = 1;
    for (std::size_t q = 0; q < k; ++q) stride *= sc_.agents[avs_[q]].action_space.size();
    const std::uint64_t radix = sc_.agents[avs_[k]].action_space.size();
    const std::uint64_t current = (code / stride) % radix;
    return code - current * stride + digit * stride;
  }

 private:
  const Scenario& sc_;
  JointAction base_;
  std::vector<std::size_t> avs_;
  std::uint64_t size_ = 0;
};

/// AV routes in AV order, e.g. "0100000000".
inline std::string encode_av_action(const Scenario& sc, const JointAction& u) {
  std::string s;
  for (std::size_t p : sc.av_positions()) s += std::to_string(u.at(p));
  return s;
}

inline void require_deterministic(const Scenario& sc) {
  if (sc.noise_sigma != 0.0) throw ConfigError("equilibrium analysis needs a deterministic scenario (noise_sigma = 0)");
}

/// Shaped reward of every AV (in AV order) for one joint action.
inline std::vector<double> av_rewards(const Scenario& sc, const JointAction& u, const RewardConfig& cfg,
                                      SimulationCache* cache) {
  const Evaluation ev = cached_evaluate(sc, u, cfg, 0, cache);
  const auto avs = sc.av_positions();
  std::vector<double> r(avs.size());
  for (std::size_t k = 0; k < avs.size(); ++k) r[k] = shaped_reward(-ev.times.at(avs[k]), ev.intrinsic[k], cfg);
  return r;
}

/// Direct unilateral-deviation test for one joint action.
inline bool is_nash(const Scenario& sc, const JointAction& u, const RewardConfig& cfg,
                    SimulationCache* cache = nullptr) {
  require_deterministic(sc);
  const auto avs = sc.av_positions();
  const auto base = av_rewards(sc, u, cfg, cache);
  for (std::size_t k = 0; k < avs.size(); ++k) {
    for (RouteIndex a : sc.agents[avs[k]].action_space) {
      if (a == u[avs[k]]) continue;
      JointAction v = u;
      v[avs[k]] = a;
      if (av_rewards(sc, v, cfg, cache)[k] > base[k] + kDeviationTolerance) return false;
    }
  }
  return true;
}

struct EquilibriumReport {
  RewardConfig config;
  std::vector<JointAction> equilibria;  // full joint actions, enumeration order
  std::uint64_t profiles = 0;           // joint actions examined

  std::size_t count() const { return equilibria.size(); }
};

inline EquilibriumReport enumerate_nash(const Scenario& sc, const JointAction& humans_fixed_profile,
                                        const RewardConfig& cfg, SimulationCache* cache = nullptr,
                                        const EnumerationOptions& opt = {}) {
  sc.validate();
  cfg.validate();
  require_deterministic(sc);
  const JointActionSpace space(sc, humans_fixed_profile, opt.bound);
  const std::size_t n_avs = space.avs().size();
  std::vector<double> rewards(space.size() * n_avs);
  parallel_for(space.size(), opt.jobs, [&](std::size_t code) {
    const auto r = av_rewards(sc, space.decode(code), cfg, cache);
    std::copy(r.begin(), r.end(), rewards.begin() + static_cast<std::ptrdiff_t>(code * n_avs));
  });

  EquilibriumReport rep;
  rep.config = cfg;
  rep.profiles = space.size();
  for (std::uint64_t code = 0; code < space.size(); ++code) {
    bool stable = true;
    for (std::size_t k = 0; k < n_avs && stable; ++k) {
      const double mine = rewards[code * n_avs + k];
      const std::size_t radix = sc.agents[space.avs()[k]].action_space.size();
      for (std::size_t d = 0; d < radix && stable; ++d) {
        const std::uint64_t other = space.with_digit(code, k, d);
        if (other != code && rewards[other * n_avs + k] > mine + kDeviationTolerance) stable = false;
      }
    }
    if (stable) rep.equilibria.push_back(space.decode(code));
  }
  return rep;
}

struct SystemOptimum {
  std::vector<JointAction> actions;  // every minimizer
  double total_time = 0.0;
};

/// Joint actions minimizing total travel time over the scope (AvGroup: AVs
/// only; System or None: every driver).
inline SystemOptimum system_optimum(const Scenario& sc, const JointAction& humans_fixed_profile, Scope scope,
                                    SimulationCache* cache = nullptr, const EnumerationOptions& opt = {}) {
  sc.validate();
  require_deterministic(sc);
  const JointActionSpace space(sc, humans_fixed_profile, opt.bound);
  std::vector<double> totals(space.size());
  parallel_for(space.size(), opt.jobs, [&](std::size_t code) {
    const JointAction u = space.decode(code);
    const auto t = detail::run_maybe_cached(cache, sc, u, std::nullopt, 0);
    double sum = 0.0;
    for (std::size_t i = 0; i < sc.size(); ++i)
      if (scope != Scope::AvGroup || sc.agents[i].kind == AgentKind::Av) sum += t.at(i);
    totals[code] = sum;
  });
  SystemOptimum so;
  so.total_time = std::numeric_limits<double>::infinity();
  for (double t : totals) so.total_time = std::min(so.total_time, t);
  for (std::uint64_t code = 0; code < space.size(); ++code)
    if (totals[code] <= so.total_time + kDeviationTolerance) so.actions.push_back(space.decode(code));
  return so;
}

/// Effect of AV `j_pos` switching from route 0 to route 1 with everyone else
/// fixed. delta_time is in seconds; delta_extrinsic = -delta_time and
/// delta_intrinsic are in reward units, so the shaped difference is
/// alpha * delta_extrinsic + beta * delta_intrinsic.
struct DeviationTerms {
  double delta_time = 0.0;
  double delta_extrinsic = 0.0;
  double delta_intrinsic = 0.0;

  double delta_reward(double alpha, double beta) const { return alpha * delta_extrinsic + beta * delta_intrinsic; }
};

inline DeviationTerms deviation_terms(const Scenario& sc, const JointAction& u, std::size_t j_pos,
                                      const RewardConfig& cfg, SimulationCache* cache = nullptr) {
  require_deterministic(sc);
  const auto& agent = sc.agents.at(j_pos);
  if (agent.kind != AgentKind::Av) throw ConfigError("agent " + std::to_string(agent.id) + " is not an AV");
  if (agent.action_space.size() != 2 || !agent.allows(0) || !agent.allows(1))
    throw ConfigError("deviation terms need the two-route action space {0, 1} (agent " +
                      std::to_string(agent.id) + ")");
  const auto avs = sc.av_positions();
  std::size_t k = 0;
  while (avs[k] != j_pos) ++k;
  JointAction u0 = u, u1 = u;
  u0[j_pos] = 0;
  u1[j_pos] = 1;
  const Evaluation e0 = cached_evaluate(sc, u0, cfg, 0, cache);
  const Evaluation e1 = cached_evaluate(sc, u1, cfg, 0, cache);
  DeviationTerms d;
  d.delta_time = e1.times.at(j_pos) - e0.times.at(j_pos);
  d.delta_extrinsic = -d.delta_time;
  d.delta_intrinsic = e1.intrinsic[k] - e0.intrinsic[k];
  return d;
}

struct BetaMax {
  enum class Kind { Threshold, Unbounded, Indifferent };
  Kind kind = Kind::Unbounded;
  double value = std::numeric_limits<double>::infinity();
};

/// Largest beta >= 0 up to which the sign of d + beta * c stays that of d.
/// `d` is the reward-unit difference at beta = 0 and `c` the intrinsic
/// difference.
inline BetaMax beta_max(double d, double c) {
  if (d == 0.0 && c == 0.0) return {BetaMax::Kind::Indifferent, std::numeric_limits<double>::infinity()};
  if (c == 0.0 || (d > 0.0 && c > 0.0) || (d < 0.0 && c < 0.0)) return {};
  if (d == 0.0) return {BetaMax::Kind::Threshold, 0.0};
  return {BetaMax::Kind::Threshold, -d / c};
}

inline std::string to_string(const BetaMax& b) {
  switch (b.kind) {
    case BetaMax::Kind::Threshold: return format_number(b.value);
    case BetaMax::Kind::Unbounded: return "unbounded";
    case BetaMax::Kind::Indifferent: return "indifferent";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// CSV output

inline constexpr std::string_view kEquilibriaCsvHeader = "alpha,beta,scope,count,equilibria";
inline constexpr std::string_view kDeviationsCsvHeader =
    "joint_action,agent_id,delta_time,delta_extrinsic,delta_intrinsic,beta_max";

/// Equilibria as AV bitstrings joined by ';'.
inline void write_equilibria_row(std::ostream& os, const Scenario& sc, const EquilibriumReport& rep) {
  os << format_number(rep.config.alpha) << ',' << format_number(rep.config.beta) << ',' << to_string(rep.config.scope)
     << ',' << rep.count() << ',';
  for (std::size_t k = 0; k < rep.equilibria.size(); ++k) os << (k ? ";" : "") << encode_av_action(sc, rep.equilibria[k]);
  os << '\n';
}

/// Every (u, j) pair of the AV joint-action space.
inline void write_deviations_csv(std::ostream& os, const Scenario& sc, const JointAction& humans_fixed_profile,
                                 const RewardConfig& cfg, SimulationCache* cache = nullptr,
                                 const EnumerationOptions& opt = {}) {
  const JointActionSpace space(sc, humans_fixed_profile, opt.bound);
  os << kDeviationsCsvHeader << '\n';
  for (std::uint64_t code = 0; code < space.size(); ++code) {
    const JointAction u = space.decode(code);
    const std::string enc = encode_av_action(sc, u);
    for (std::size_t p : space.avs()) {
      const DeviationTerms d = deviation_terms(sc, u, p, cfg, cache);
      os << enc << ',' << sc.agents[p].id << ',' << format_number(d.delta_time) << ','
         << format_number(d.delta_extrinsic) << ',' << format_number(d.delta_intrinsic) << ','
         << to_string(beta_max(cfg.alpha * d.delta_extrinsic, d.delta_intrinsic)) << '\n';
    }
  }
}

}  // namespace routeshape
