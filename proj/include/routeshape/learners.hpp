#pragma once

// Route-choice learners for AVs. Each learner picks an arm index into its
// agent's action space once per episode and is updated with that episode's
// shaped reward.
//
// The tabular Q learner and the softmax policy-gradient learner are small
// independent stand-ins for deep value-based and actor-critic methods: actions
// are a handful of routes and observations are short count tuples, so no
// function approximation is needed.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "routeshape/error.hpp"
#include "routeshape/network.hpp"
#include "routeshape/rng.hpp"

namespace routeshape {

/// What an agent sees before choosing: route histogram of vehicles that
/// departed earlier in the current episode.
struct Observation {
  std::vector<int> route_counts;
  AgentId agent_id = 0;
  std::size_t episode = 0;

  bool operator==(const Observation&) const = default;
};

namespace detail {

// First maximal element; ties go to the lowest index.
inline std::size_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] > v[best]) best = k;
  return best;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// UCB1

/// How the exploration bonus is put into reward units. `Std` multiplies it by
/// the running standard deviation of all observed rewards, `Range` by their
/// max - min, `None` leaves c in raw reward units. Both scaled modes make the
/// choices invariant to a positive rescaling of every reward.
enum class UcbScale { Std, Range, None };

inline UcbScale parse_ucb_scale(std::string_view s) {
  if (s == "std") return UcbScale::Std;
  if (s == "range") return UcbScale::Range;
  if (s == "none") return UcbScale::None;
  throw ConfigError("unknown ucb scale '" + std::string(s) + "' (expected std, range or none)");
}

inline const char* to_string(UcbScale s) {
  switch (s) {
    case UcbScale::Std: return "std";
    case UcbScale::Range: return "range";
    case UcbScale::None: return "none";
  }
  return "?";
}

struct UcbState {
  std::vector<std::uint64_t> counts;
  std::vector<double> means;
  double c = 2.0;
  std::uint64_t total = 0;

  UcbScale scale = UcbScale::Std;
  double reward_mean = 0.0;  // over all arms
  double reward_m2 = 0.0;
  double reward_min = std::numeric_limits<double>::infinity();
  double reward_max = -std::numeric_limits<double>::infinity();

  explicit UcbState(std::size_t arms = 2, double c_ = 2.0, UcbScale scale_ = UcbScale::Std)
      : counts(arms, 0), means(arms, 0.0), c(c_), scale(scale_) {}

  /// Reward-scale estimate; 1 until it is positive.
  double reward_scale() const {
    double s = 0.0;
    if (scale == UcbScale::Std && total > 1) s = std::sqrt(reward_m2 / static_cast<double>(total));
    if (scale == UcbScale::Range && reward_max > reward_min) s = reward_max - reward_min;
    return s > 0.0 ? s : 1.0;
  }

  double index(std::size_t arm) const {
    return means[arm] + c * reward_scale() *
                            std::sqrt(std::log(static_cast<double>(total)) / static_cast<double>(counts[arm]));
  }
};

/// Unpulled arms first (lowest index, or a random unpulled arm when `rng` is
/// given), then the arm with the highest upper confidence index.
inline std::size_t ucb_select(const UcbState& s, Rng* rng = nullptr) {
  std::vector<std::size_t> unpulled;
  for (std::size_t k = 0; k < s.counts.size(); ++k)
    if (s.counts[k] == 0) unpulled.push_back(k);
  if (!unpulled.empty()) return rng ? unpulled[uniform_index(*rng, unpulled.size())] : unpulled.front();
  std::vector<double> idx(s.counts.size());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = s.index(k);
  return detail::argmax(idx);
}

/// Greedy arm on the empirical means (evaluation phase).
inline std::size_t ucb_greedy(const UcbState& s) { return detail::argmax(s.means); }

inline void ucb_update(UcbState& s, std::size_t arm, double reward) {
  if (arm >= s.counts.size()) throw ConfigError("ucb_update: arm out of range");
  ++s.total;
  ++s.counts[arm];
  s.means[arm] += (reward - s.means[arm]) / static_cast<double>(s.counts[arm]);
  const double d = reward - s.reward_mean;
  s.reward_mean += d / static_cast<double>(s.total);
  s.reward_m2 += d * (reward - s.reward_mean);
  s.reward_min = std::min(s.reward_min, reward);
  s.reward_max = std::max(s.reward_max, reward);
}

// ---------------------------------------------------------------------------
// Tabular Q (single decision per episode, so the target is the reward itself)

struct QState {
  std::map<std::vector<int>, std::vector<double>> table;
  std::size_t arms = 2;
  double learning_rate = 0.1;
  double epsilon = 0.2;

  const std::vector<double>& row(const std::vector<int>& key) {
    auto [it, _] = table.try_emplace(key, std::vector<double>(arms, 0.0));
    return it->second;
  }
};

inline std::size_t q_greedy(QState& s, const Observation& obs) { return detail::argmax(s.row(obs.route_counts)); }

inline std::size_t q_select(QState& s, const Observation& obs, Rng& rng) {
  if (s.epsilon > 0.0 && uniform01(rng) < s.epsilon) return uniform_index(rng, s.arms);
  return q_greedy(s, obs);
}

inline void q_update(QState& s, const Observation& obs, std::size_t arm, double reward) {
  if (arm >= s.arms) throw ConfigError("q_update: arm out of range");
  s.row(obs.route_counts);
  double& q = s.table[obs.route_counts][arm];
  q += s.learning_rate * (reward - q);
}

// ---------------------------------------------------------------------------
// Softmax policy gradient with a running-mean baseline

struct PolicyGradState {
  std::map<std::vector<int>, std::vector<double>> preferences;
  std::size_t arms = 2;
  double temperature = 1.0;
  double learning_rate = 0.01;
  double baseline = 0.0;
  std::uint64_t baseline_n = 0;

  std::vector<double>& prefs(const std::vector<int>& key) {
    auto [it, _] = preferences.try_emplace(key, std::vector<double>(arms, 0.0));
    return it->second;
  }
};

inline std::vector<double> pg_probabilities(PolicyGradState& s, const Observation& obs) {
  if (!(s.temperature > 0.0)) throw ConfigError("policy temperature must be > 0");
  const auto& p = s.prefs(obs.route_counts);
  const double top = *std::max_element(p.begin(), p.end());
  std::vector<double> pi(p.size());
  double z = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) z += pi[k] = std::exp((p[k] - top) / s.temperature);
  for (double& x : pi) x /= z;
  return pi;
}

inline std::size_t pg_select(PolicyGradState& s, const Observation& obs, Rng& rng) {
  const auto pi = pg_probabilities(s, obs);
  double u = uniform01(rng);
  for (std::size_t k = 0; k < pi.size(); ++k) {
    if (u < pi[k]) return k;
    u -= pi[k];
  }
  return pi.size() - 1;
}

inline std::size_t pg_greedy(PolicyGradState& s, const Observation& obs) {
  if (!(s.temperature > 0.0)) throw ConfigError("policy temperature must be > 0");
  return detail::argmax(s.prefs(obs.route_counts));
}

inline void pg_update(PolicyGradState& s, const Observation& obs, std::size_t arm, double reward) {
  if (arm >= s.arms) throw ConfigError("pg_update: arm out of range");
  const auto pi = pg_probabilities(s, obs);
  const double advantage = reward - s.baseline;
  auto& p = s.prefs(obs.route_counts);
  for (std::size_t k = 0; k < p.size(); ++k)
    p[k] += k == arm ? s.learning_rate * advantage * (1.0 - pi[k]) : -s.learning_rate * advantage * pi[k];
  ++s.baseline_n;
  s.baseline += (reward - s.baseline) / static_cast<double>(s.baseline_n);
}

// ---------------------------------------------------------------------------
// Policy objects used by the episode loop

/// Anything that maps an observation to a route.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual RouteIndex choose(const Observation& obs) = 0;
};

class ConstantPolicy final : public Policy {
 public:
  explicit ConstantPolicy(RouteIndex route) : route_(route) {}
  RouteIndex choose(const Observation&) override { return route_; }

 private:
  RouteIndex route_;
};

enum class Phase { Train, Eval };

/// A policy that also learns from its own reward.
class Learner : public Policy {
 public:
  /// Called before each episode; `progress` runs from 0 to 1 over training.
  virtual void begin_episode(Phase phase, double progress) = 0;
  virtual void update(const Observation& obs, RouteIndex route, double reward) = 0;
};

enum class Algorithm { Ucb, Q, PolicyGradient, Constant };

inline Algorithm parse_algorithm(std::string_view s) {
  if (s == "ucb") return Algorithm::Ucb;
  if (s == "q") return Algorithm::Q;
  if (s == "pg") return Algorithm::PolicyGradient;
  if (s == "constant") return Algorithm::Constant;
  throw ConfigError("unknown learner algorithm '" + std::string(s) + "' (expected ucb, q, pg or constant)");
}

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Ucb: return "ucb";
    case Algorithm::Q: return "q";
    case Algorithm::PolicyGradient: return "pg";
    case Algorithm::Constant: return "constant";
  }
  return "?";
}

struct LearnerSpec {
  Algorithm algorithm = Algorithm::Ucb;
  // ucb
  double ucb_c = 2.0;
  UcbScale ucb_scale = UcbScale::Std;
  bool ucb_random_first_pulls = true;
  // q
  double q_learning_rate = 0.1;
  double q_epsilon_start = 0.2;
  double q_epsilon_end = 0.0;
  // pg
  double pg_learning_rate = 0.01;
  double pg_temperature = 1.0;
  // constant
  RouteIndex constant_route = 0;

  void validate() const {
    if (!(ucb_c >= 0.0)) throw ConfigError("ucb c must be >= 0");
    if (!(q_learning_rate > 0.0 && q_learning_rate <= 1.0)) throw ConfigError("q learning rate must be in (0, 1]");
    if (!(q_epsilon_start >= 0.0 && q_epsilon_start <= 1.0 && q_epsilon_end >= 0.0 && q_epsilon_end <= 1.0))
      throw ConfigError("q epsilon must be in [0, 1]");
    if (!(pg_temperature > 0.0)) throw ConfigError("policy temperature must be > 0");
    if (!(pg_learning_rate > 0.0)) throw ConfigError("pg learning rate must be > 0");
  }
};

namespace detail {

inline std::size_t arm_of(const std::vector<RouteIndex>& space, RouteIndex route) {
  for (std::size_t k = 0; k < space.size(); ++k)
    if (space[k] == route) return k;
  throw Error("route " + std::to_string(route) + " not in learner action space");
}

class UcbLearner final : public Learner {
 public:
  UcbLearner(std::vector<RouteIndex> space, const LearnerSpec& spec, Rng rng)
      : space_(std::move(space)), state_(space_.size(), spec.ucb_c, spec.ucb_scale),
        random_first_(spec.ucb_random_first_pulls), rng_(rng) {}
  void begin_episode(Phase phase, double) override { phase_ = phase; }
  RouteIndex choose(const Observation&) override {
    if (phase_ == Phase::Eval) return space_[ucb_greedy(state_)];
    return space_[ucb_select(state_, random_first_ ? &rng_ : nullptr)];
  }
  void update(const Observation&, RouteIndex route, double reward) override {
    ucb_update(state_, arm_of(space_, route), reward);
  }
  const UcbState& state() const { return state_; }

 private:
  std::vector<RouteIndex> space_;
  UcbState state_;
  bool random_first_;
  Rng rng_;
  Phase phase_ = Phase::Train;
};

class QLearner final : public Learner {
 public:
  QLearner(std::vector<RouteIndex> space, const LearnerSpec& spec, Rng rng)
      : space_(std::move(space)), eps_start_(spec.q_epsilon_start), eps_end_(spec.q_epsilon_end), rng_(rng) {
    state_.arms = space_.size();
    state_.learning_rate = spec.q_learning_rate;
    state_.epsilon = eps_start_;
  }
  void begin_episode(Phase phase, double progress) override {
    phase_ = phase;
    state_.epsilon = phase == Phase::Eval ? 0.0 : eps_start_ + (eps_end_ - eps_start_) * progress;
  }
  RouteIndex choose(const Observation& obs) override {
    return space_[phase_ == Phase::Eval ? q_greedy(state_, obs) : q_select(state_, obs, rng_)];
  }
  void update(const Observation& obs, RouteIndex route, double reward) override {
    q_update(state_, obs, arm_of(space_, route), reward);
  }

 private:
  std::vector<RouteIndex> space_;
  QState state_;
  double eps_start_, eps_end_;
  Rng rng_;
  Phase phase_ = Phase::Train;
};

class PolicyGradLearner final : public Learner {
 public:
  PolicyGradLearner(std::vector<RouteIndex> space, const LearnerSpec& spec, Rng rng)
      : space_(std::move(space)), rng_(rng) {
    state_.arms = space_.size();
    state_.temperature = spec.pg_temperature;
    state_.learning_rate = spec.pg_learning_rate;
  }
  void begin_episode(Phase phase, double) override { phase_ = phase; }
  RouteIndex choose(const Observation& obs) override {
    return space_[phase_ == Phase::Eval ? pg_greedy(state_, obs) : pg_select(state_, obs, rng_)];
  }
  void update(const Observation& obs, RouteIndex route, double reward) override {
    pg_update(state_, obs, arm_of(space_, route), reward);
  }

 private:
  std::vector<RouteIndex> space_;
  PolicyGradState state_;
  Rng rng_;
  Phase phase_ = Phase::Train;
};

class ConstantLearner final : public Learner {
 public:
  explicit ConstantLearner(RouteIndex route) : route_(route) {}
  void begin_episode(Phase, double) override {}
  RouteIndex choose(const Observation&) override { return route_; }
  void update(const Observation&, RouteIndex, double) override {}

 private:
  RouteIndex route_;
};

}  // namespace detail

inline std::unique_ptr<Learner> make_learner(const LearnerSpec& spec, const AgentSpec& agent, Rng rng) {
  spec.validate();
  switch (spec.algorithm) {
    case Algorithm::Ucb: return std::make_unique<detail::UcbLearner>(agent.action_space, spec, rng);
    case Algorithm::Q: return std::make_unique<detail::QLearner>(agent.action_space, spec, rng);
    case Algorithm::PolicyGradient:
      return std::make_unique<detail::PolicyGradLearner>(agent.action_space, spec, rng);
    case Algorithm::Constant:
      if (!agent.allows(spec.constant_route))
        throw ConfigError("constant route " + std::to_string(spec.constant_route) + " not allowed for agent " +
                          std::to_string(agent.id));
      return std::make_unique<detail::ConstantLearner>(spec.constant_route);
  }
  throw ConfigError("unhandled learner algorithm");
}

}  // namespace routeshape
