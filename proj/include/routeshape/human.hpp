#pragma once

// Day-to-day route adaptation for human drivers: exponentially smoothed cost
// estimates with epsilon-greedy choice, frozen once the warm-up ends.

#include <cmath>
#include <optional>
#include <vector>

#include "routeshape/error.hpp"
#include "routeshape/network.hpp"
#include "routeshape/rng.hpp"

namespace routeshape {

struct HumanState {
  std::vector<RouteIndex> routes;  // the driver's action space
  std::vector<double> estimates;   // seconds, one per entry of `routes`
  double smoothing = 0.1;          // lambda in (0, 1]
  double epsilon = 0.3;
  bool frozen = false;
  std::optional<RouteIndex> frozen_action;

  void validate() const {
    if (routes.empty() || routes.size() != estimates.size()) throw ConfigError("human state: bad route table");
    for (double e : estimates)
      if (!std::isfinite(e) || e < 0.0) throw ConfigError("human state: estimates must be finite and >= 0");
    if (!(smoothing > 0.0 && smoothing <= 1.0)) throw ConfigError("human smoothing must be in (0, 1]");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("human epsilon must be in [0, 1]");
    if (frozen && !frozen_action) throw ConfigError("frozen human without a frozen action");
  }

  /// Route with the lowest estimate; ties go to the first listed route.
  RouteIndex best_route() const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < estimates.size(); ++k)
      if (estimates[k] < estimates[best]) best = k;
    return routes[best];
  }
};

struct HumanParams {
  double smoothing = 0.1;
  double epsilon_start = 0.3;

  void validate() const {
    if (!(smoothing > 0.0 && smoothing <= 1.0)) throw ConfigError("human smoothing must be in (0, 1]");
    if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0)) throw ConfigError("human epsilon must be in [0, 1]");
  }
};

/// Fresh driver with optimistic free-flow estimates.
inline HumanState make_human(const AgentSpec& agent, const NetworkConfig& net, const HumanParams& p) {
  HumanState h;
  h.routes = agent.action_space;
  for (RouteIndex r : h.routes) h.estimates.push_back(net.free_flow_time(r));
  h.smoothing = p.smoothing;
  h.epsilon = p.epsilon_start;
  return h;
}

inline RouteIndex human_choose(const HumanState& h, Rng& rng) {
  if (h.frozen) return *h.frozen_action;
  if (h.epsilon > 0.0 && uniform01(rng) < h.epsilon) return h.routes[uniform_index(rng, h.routes.size())];
  return h.best_route();
}

inline HumanState human_update(HumanState h, RouteIndex chosen, double experienced_time) {
  if (h.frozen) throw Error("cannot update a frozen human");
  for (std::size_t k = 0; k < h.routes.size(); ++k) {
    if (h.routes[k] != chosen) continue;
    h.estimates[k] = (1.0 - h.smoothing) * h.estimates[k] + h.smoothing * experienced_time;
    return h;
  }
  throw Error("human_update: route " + std::to_string(chosen) + " not in action space");
}

inline std::vector<HumanState> freeze_all(std::vector<HumanState> humans) {
  for (auto& h : humans) {
    h.frozen_action = h.best_route();
    h.frozen = true;
    h.epsilon = 0.0;
  }
  return humans;
}

/// Linear decay from `start` on the first day to 0 on the last.
inline double warmup_epsilon(double start, std::size_t day, std::size_t days) {
  if (days <= 1) return 0.0;
  return start * (1.0 - static_cast<double>(day) / static_cast<double>(days - 1));
}

}  // namespace routeshape
