#pragma once

// Warm-up -> freeze -> train -> evaluate pipeline for one seed.

#include <memory>
#include <vector>

#include "routeshape/environment.hpp"
#include "routeshape/human.hpp"
#include "routeshape/learners.hpp"
#include "routeshape/marginal.hpp"

namespace routeshape {

enum class Mode { Deterministic, Stochastic };

struct TrainSettings {
  Scenario scenario;
  LearnerSpec learner;
  RewardConfig reward;
  HumanParams human;
  std::size_t warmup_days = 200;
  std::size_t train_episodes = 1100;
  std::size_t eval_episodes = 100;
  Mode mode = Mode::Deterministic;

  /// Scenario as actually simulated: noise removed in deterministic mode.
  Scenario effective_scenario() const {
    Scenario sc = scenario;
    if (mode == Mode::Deterministic) sc.noise_sigma = 0.0;
    return sc;
  }
};

enum class EpisodePhase { Warmup, Train, Eval };

inline const char* to_string(EpisodePhase p) {
  switch (p) {
    case EpisodePhase::Warmup: return "warmup";
    case EpisodePhase::Train: return "train";
    case EpisodePhase::Eval: return "eval";
  }
  return "?";
}

struct SeedRun {
  std::uint64_t seed = 0;
  Scenario warmup_scenario;  // every agent relabelled human
  Scenario scenario;         // the effective scenario used after warm-up
  std::vector<EpisodeLog> warmup;
  std::vector<EpisodeLog> train;
  std::vector<EpisodeLog> eval;
  std::vector<RouteIndex> frozen_profile;  // warm-up end choice of every agent, by position
};

namespace stream {
inline constexpr std::uint64_t kHuman = 0x4855;
inline constexpr std::uint64_t kAv = 0x4156;
inline constexpr std::uint64_t kEpisode = 0x4550;
}  // namespace stream

inline std::uint64_t episode_seed(std::uint64_t run_seed, std::size_t episode) {
  return derive_seed(derive_seed(run_seed, stream::kEpisode), episode);
}

namespace detail {

class HumanPolicy final : public Policy {
 public:
  HumanPolicy(HumanState& state, Rng& rng) : state_(state), rng_(rng) {}
  RouteIndex choose(const Observation&) override { return human_choose(state_, rng_); }

 private:
  HumanState& state_;
  Rng& rng_;
};

}  // namespace detail

/// 200-day style warm-up with every agent driving as a human. Returns the
/// logs and the frozen end state of every driver (by position).
inline std::vector<HumanState> run_warmup(const Scenario& sc, const HumanParams& params, std::size_t days,
                                          std::uint64_t seed, std::vector<EpisodeLog>* logs = nullptr,
                                          SimulationCache* cache = nullptr) {
  params.validate();
  Scenario all_human = sc;
  for (auto& a : all_human.agents) a.kind = AgentKind::Human;
  all_human.validate();

  std::vector<HumanState> humans;
  std::vector<Rng> rngs;
  for (const auto& a : all_human.agents) {
    humans.push_back(make_human(a, all_human.network, params));
    rngs.emplace_back(derive_seed(derive_seed(seed, stream::kHuman), static_cast<std::uint64_t>(a.id)));
  }
  std::vector<detail::HumanPolicy> policies;
  for (std::size_t i = 0; i < humans.size(); ++i) policies.emplace_back(humans[i], rngs[i]);
  std::vector<Policy*> ptrs;
  for (auto& p : policies) ptrs.push_back(&p);

  RewardConfig selfish;
  selfish.scope = Scope::None;
  for (std::size_t day = 0; day < days; ++day) {
    for (auto& h : humans) h.epsilon = warmup_epsilon(params.epsilon_start, day, days);
    EpisodeLog log = run_episode(all_human, ptrs, selfish, day, episode_seed(seed, day), cache);
    for (std::size_t i = 0; i < humans.size(); ++i)
      humans[i] = human_update(std::move(humans[i]), log.action[i], log.times.at(i));
    if (logs) logs->push_back(std::move(log));
  }
  return freeze_all(std::move(humans));
}

/// Full pipeline for one seed.
inline SeedRun train_seed(const TrainSettings& s, std::uint64_t seed, SimulationCache* cache = nullptr) {
  s.reward.validate();
  s.learner.validate();
  SeedRun run;
  run.seed = seed;
  run.scenario = s.effective_scenario();
  run.scenario.validate();
  run.warmup_scenario = run.scenario;
  for (auto& a : run.warmup_scenario.agents) a.kind = AgentKind::Human;

  const auto humans = run_warmup(run.scenario, s.human, s.warmup_days, seed, &run.warmup, cache);
  for (const auto& h : humans) run.frozen_profile.push_back(*h.frozen_action);

  const Scenario& sc = run.scenario;
  std::vector<std::unique_ptr<Policy>> owned;
  std::vector<Learner*> learners(sc.size(), nullptr);
  std::vector<Policy*> policies;
  for (std::size_t i = 0; i < sc.size(); ++i) {
    const auto& a = sc.agents[i];
    if (a.kind == AgentKind::Human) {
      owned.push_back(std::make_unique<ConstantPolicy>(run.frozen_profile[i]));
    } else {
      auto l = make_learner(s.learner, a,
                            Rng(derive_seed(derive_seed(seed, stream::kAv), static_cast<std::uint64_t>(a.id))));
      learners[i] = l.get();
      owned.push_back(std::move(l));
    }
    policies.push_back(owned.back().get());
  }

  std::size_t episode = s.warmup_days;
  for (std::size_t t = 0; t < s.train_episodes; ++t, ++episode) {
    const double progress =
        s.train_episodes > 1 ? static_cast<double>(t) / static_cast<double>(s.train_episodes - 1) : 1.0;
    for (auto* l : learners)
      if (l) l->begin_episode(Phase::Train, progress);
    EpisodeLog log = run_episode(sc, policies, s.reward, episode, episode_seed(seed, episode), cache);
    for (std::size_t i = 0; i < sc.size(); ++i)
      if (learners[i]) learners[i]->update(log.observations[i], log.action[i], log.shaped[i]);
    run.train.push_back(std::move(log));
  }
  for (auto* l : learners)
    if (l) l->begin_episode(Phase::Eval, 1.0);
  for (std::size_t t = 0; t < s.eval_episodes; ++t, ++episode)
    run.eval.push_back(run_episode(sc, policies, s.reward, episode, episode_seed(seed, episode), cache));
  return run;
}

/// Fraction of AVs whose route matches `optimal` (indexed by position).
inline double optimal_proportion(const Scenario& sc, const EpisodeLog& log, const JointAction& optimal) {
  const auto avs = sc.av_positions();
  if (avs.empty()) return 1.0;
  std::size_t hits = 0;
  for (std::size_t p : avs) hits += log.action[p] == optimal[p] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(avs.size());
}

}  // namespace routeshape
