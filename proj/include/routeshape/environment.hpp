#pragma once

// One-cycle sequential environment: each episode every agent acts once, in
// departure order, seeing only the route choices of earlier departures.

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "routeshape/format.hpp"
#include "routeshape/learners.hpp"
#include "routeshape/marginal.hpp"
#include "routeshape/network.hpp"

namespace routeshape {

/// Route histogram over `earlier_choices`, which must hold the routes of
/// exactly the agents departing before scenario position `pos`.
inline Observation build_observation(const Scenario& sc, std::span<const RouteIndex> earlier_choices,
                                     std::size_t pos, std::size_t episode = 0) {
  if (earlier_choices.size() != pos)
    throw ConfigError("observation for position " + std::to_string(pos) + " needs " + std::to_string(pos) +
                      " earlier choices, got " + std::to_string(earlier_choices.size()));
  Observation obs;
  obs.route_counts.assign(sc.network.routes.size(), 0);
  for (RouteIndex r : earlier_choices) ++obs.route_counts.at(static_cast<std::size_t>(r));
  obs.agent_id = sc.agents.at(pos).id;
  obs.episode = episode;
  return obs;
}

struct EpisodeLog {
  std::size_t episode = 0;
  JointAction action;
  TravelTimeVector times;
  std::vector<Observation> observations;  // by position
  std::vector<double> extrinsic;          // by position, -travel time
  std::vector<double> intrinsic;          // by position, 0 for humans
  std::vector<double> shaped;             // by position, equals extrinsic for humans
  std::uint64_t seed = 0;

  bool operator==(const EpisodeLog&) const = default;
};

/// Queries every policy once in departure order, simulates, and scores.
/// `policies` is indexed by scenario position.
inline EpisodeLog run_episode(const Scenario& sc, std::span<Policy* const> policies, const RewardConfig& cfg,
                              std::size_t episode, std::uint64_t seed, SimulationCache* cache = nullptr) {
  if (policies.size() != sc.size())
    throw ConfigError("need one policy per agent (" + std::to_string(sc.size()) + "), got " +
                      std::to_string(policies.size()));
  cfg.validate();
  EpisodeLog log;
  log.episode = episode;
  log.seed = seed;
  log.action.reserve(sc.size());
  for (std::size_t i = 0; i < sc.size(); ++i) {
    const auto& agent = sc.agents[i];
    if (!policies[i]) throw ConfigError("agent " + std::to_string(agent.id) + " has no policy");
    Observation obs = build_observation(sc, log.action, i, episode);
    const RouteIndex r = policies[i]->choose(obs);
    if (!agent.allows(r))
      throw Error("agent " + std::to_string(agent.id) + " chose route " + std::to_string(r) +
                  " outside its action space");
    log.action.push_back(r);
    log.observations.push_back(std::move(obs));
  }
  const Evaluation ev = cached_evaluate(sc, log.action, cfg, seed, cache);
  log.times = ev.times;
  log.extrinsic.assign(sc.size(), 0.0);
  log.intrinsic.assign(sc.size(), 0.0);
  log.shaped.assign(sc.size(), 0.0);
  for (std::size_t i = 0; i < sc.size(); ++i) {
    log.extrinsic[i] = -ev.times.at(i);
    log.shaped[i] = log.extrinsic[i];
  }
  const auto avs = sc.av_positions();
  for (std::size_t k = 0; k < avs.size(); ++k) {
    log.intrinsic[avs[k]] = ev.intrinsic[k];
    log.shaped[avs[k]] = shaped_reward(log.extrinsic[avs[k]], ev.intrinsic[k], cfg);
  }
  return log;
}

inline constexpr std::string_view kEpisodeCsvHeader =
    "episode,agent_id,kind,action,travel_time,extrinsic,intrinsic,shaped,seed";

inline void write_episode_rows(std::ostream& os, const Scenario& sc, const EpisodeLog& log) {
  for (std::size_t i = 0; i < sc.size(); ++i) {
    const auto& a = sc.agents[i];
    os << log.episode << ',' << a.id << ',' << to_string(a.kind) << ',' << log.action[i] << ','
       << format_number(log.times.at(i)) << ',' << format_number(log.extrinsic[i]) << ','
       << format_number(log.intrinsic[i]) << ',' << format_number(log.shaped[i]) << ',' << log.seed << '\n';
  }
}

}  // namespace routeshape
