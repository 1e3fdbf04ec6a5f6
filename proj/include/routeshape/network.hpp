#pragma once

// Event-based merge simulator for parallel-route networks.
//
// Every route feeds a single merge point. Vehicles on priority routes are
// served first-come first-served with a minimum headway g. A vehicle on a
// non-priority route may only pass when no unserved priority vehicle reaches
// the merge within the yield window w of its candidate passage time.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "routeshape/error.hpp"
#include "routeshape/rng.hpp"

namespace routeshape {

using AgentId = int;
using RouteIndex = int;

enum class AgentKind { Human, Av };

inline const char* to_string(AgentKind k) { return k == AgentKind::Human ? "human" : "av"; }

struct RouteSpec {
  double pre_merge_time = 0.0;  // free-flow origin -> merge, seconds
  bool has_priority = false;
};

struct NetworkConfig {
  std::vector<RouteSpec> routes;
  double merge_gap_g = 2.0;
  double yield_window_w = 6.0;
  double post_merge_time = 10.0;

  void validate() const {
    if (routes.size() < 2) throw ConfigError("network needs at least 2 routes");
    for (std::size_t r = 0; r < routes.size(); ++r) {
      const double t = routes[r].pre_merge_time;
      if (!std::isfinite(t) || t <= 0.0)
        throw ConfigError("route " + std::to_string(r) + ": pre_merge_time must be finite and > 0");
    }
    if (!std::isfinite(merge_gap_g) || merge_gap_g <= 0.0)
      throw ConfigError("merge_gap_g must be finite and > 0");
    if (!std::isfinite(yield_window_w) || yield_window_w < 0.0)
      throw ConfigError("yield_window_w must be finite and >= 0");
    if (!std::isfinite(post_merge_time) || post_merge_time < 0.0)
      throw ConfigError("post_merge_time must be finite and >= 0");
  }

  double free_flow_time(RouteIndex r) const {
    return routes.at(static_cast<std::size_t>(r)).pre_merge_time + post_merge_time;
  }
};

struct AgentSpec {
  AgentId id = 0;
  AgentKind kind = AgentKind::Human;
  double departure_time = 0.0;
  std::vector<RouteIndex> action_space;

  bool allows(RouteIndex r) const {
    return std::find(action_space.begin(), action_space.end(), r) != action_space.end();
  }
};

/// Route index per agent, in scenario (departure) order.
using JointAction = std::vector<RouteIndex>;

/// The immutable world: agents in departure order plus the network.
struct Scenario {
  std::vector<AgentSpec> agents;
  NetworkConfig network;
  double noise_sigma = 0.0;

  void validate() const {
    network.validate();
    if (!std::isfinite(noise_sigma) || noise_sigma < 0.0)
      throw ConfigError("noise_sigma must be finite and >= 0");
    double min_free = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < network.routes.size(); ++r)
      min_free = std::min(min_free, network.free_flow_time(static_cast<RouteIndex>(r)));
    if (noise_sigma >= min_free)
      throw ConfigError("noise_sigma must be below the shortest free-flow time");
    std::unordered_set<AgentId> ids;
    for (std::size_t i = 0; i < agents.size(); ++i) {
      const auto& a = agents[i];
      if (!ids.insert(a.id).second) throw ConfigError("duplicate agent id " + std::to_string(a.id));
      if (!std::isfinite(a.departure_time) || a.departure_time < 0.0)
        throw ConfigError("agent " + std::to_string(a.id) + ": departure_time must be finite and >= 0");
      if (i > 0 && !(agents[i - 1].departure_time < a.departure_time))
        throw ConfigError("agents must be sorted by strictly increasing departure_time (agent " +
                          std::to_string(a.id) + ")");
      if (a.action_space.empty())
        throw ConfigError("agent " + std::to_string(a.id) + ": empty action_space");
      for (RouteIndex r : a.action_space)
        if (r < 0 || static_cast<std::size_t>(r) >= network.routes.size())
          throw ConfigError("agent " + std::to_string(a.id) + ": route " + std::to_string(r) +
                            " not in network");
    }
  }

  std::size_t size() const { return agents.size(); }

  std::size_t position_of(AgentId id) const {
    for (std::size_t i = 0; i < agents.size(); ++i)
      if (agents[i].id == id) return i;
    throw ConfigError("unknown agent id " + std::to_string(id));
  }

  std::vector<std::size_t> positions_of(AgentKind kind) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < agents.size(); ++i)
      if (agents[i].kind == kind) out.push_back(i);
    return out;
  }

  std::vector<std::size_t> av_positions() const { return positions_of(AgentKind::Av); }
  std::vector<std::size_t> human_positions() const { return positions_of(AgentKind::Human); }

  void check_action(std::span<const RouteIndex> action) const {
    if (action.size() != agents.size())
      throw ConfigError("joint action has " + std::to_string(action.size()) + " entries, scenario has " +
                        std::to_string(agents.size()) + " agents");
    for (std::size_t i = 0; i < agents.size(); ++i)
      if (!agents[i].allows(action[i]))
        throw ConfigError("agent " + std::to_string(agents[i].id) + ": route " +
                          std::to_string(action[i]) + " outside its action space");
  }
};

/// Per-agent travel times of one run, stored by scenario position.
/// Agents that were removed from the run hold no entry.
struct TravelTimeVector {
  std::vector<double> times;
  std::uint64_t seed = 0;

  bool has(std::size_t pos) const { return pos < times.size() && !std::isnan(times[pos]); }

  double at(std::size_t pos) const {
    if (!has(pos)) throw Error("no travel time for position " + std::to_string(pos));
    return times[pos];
  }

  friend bool operator==(const TravelTimeVector& a, const TravelTimeVector& b) {
    if (a.seed != b.seed || a.times.size() != b.times.size()) return false;
    for (std::size_t i = 0; i < a.times.size(); ++i) {
      const bool an = std::isnan(a.times[i]), bn = std::isnan(b.times[i]);
      if (an != bn || (!an && a.times[i] != b.times[i])) return false;
    }
    return true;
  }
};

/// Uniform merge-arrival jitter in [-sigma, sigma], keyed only by (seed, agent id)
/// so removing one vehicle leaves everyone else's draw untouched.
inline double arrival_jitter(double sigma, std::uint64_t seed, AgentId id) {
  if (sigma == 0.0) return 0.0;
  const auto bits = derive_seed(seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(id)));
  return sigma * (2.0 * uniform01(bits) - 1.0);
}

namespace detail {

struct MergeVehicle {
  double arrival;
  double departure;
  AgentId id;
  std::size_t pos;
};

inline bool arrives_before(const MergeVehicle& a, const MergeVehicle& b) {
  if (a.arrival != b.arrival) return a.arrival < b.arrival;
  if (a.departure != b.departure) return a.departure < b.departure;
  return a.id < b.id;
}

// `removed` may be empty or hold one position to leave out of the run.
inline TravelTimeVector run_merge(const Scenario& sc, std::span<const RouteIndex> action,
                                  std::optional<std::size_t> removed, std::uint64_t seed) {
  const auto& net = sc.network;
  std::vector<MergeVehicle> major, minor;
  major.reserve(sc.size());
  minor.reserve(sc.size());
  for (std::size_t i = 0; i < sc.size(); ++i) {
    if (removed && *removed == i) continue;
    const auto& ag = sc.agents[i];
    const auto& route = net.routes[static_cast<std::size_t>(action[i])];
    const double a = ag.departure_time + route.pre_merge_time + arrival_jitter(sc.noise_sigma, seed, ag.id);
    (route.has_priority ? major : minor).push_back({a, ag.departure_time, ag.id, i});
  }
  std::sort(major.begin(), major.end(), arrives_before);
  std::sort(minor.begin(), minor.end(), arrives_before);

  TravelTimeVector out;
  out.seed = seed;
  out.times.assign(sc.size(), std::numeric_limits<double>::quiet_NaN());

  const double g = net.merge_gap_g;
  const double w = net.yield_window_w;
  double last = -std::numeric_limits<double>::infinity();
  std::size_t pi = 0, ni = 0;
  auto pass = [&](const MergeVehicle& v, double t) {
    last = t;
    out.times[v.pos] = t + net.post_merge_time - v.departure;
  };
  while (pi < major.size() || ni < minor.size()) {
    if (ni == minor.size()) {
      pass(major[pi], std::max(major[pi].arrival, last + g));
      ++pi;
      continue;
    }
    const double candidate = std::max(minor[ni].arrival, last + g);
    if (pi < major.size() && major[pi].arrival <= candidate + w) {
      pass(major[pi], std::max(major[pi].arrival, last + g));
      ++pi;
    } else {
      pass(minor[ni], candidate);
      ++ni;
    }
  }
  return out;
}

}  // namespace detail

/// Travel times for every agent under `action`. Pure in (scenario, action, seed);
/// with noise_sigma == 0 the seed does not influence the result.
inline TravelTimeVector simulate(const Scenario& scenario, std::span<const RouteIndex> action,
                                 std::uint64_t seed) {
  scenario.validate();
  scenario.check_action(action);
  return detail::run_merge(scenario, action, std::nullopt, seed);
}

/// Counterfactual run with one AV deleted; same seed, so the remaining
/// vehicles keep their jitter draws.
inline TravelTimeVector simulate_without(const Scenario& scenario, std::span<const RouteIndex> action,
                                         AgentId removed_agent, std::uint64_t seed) {
  scenario.validate();
  scenario.check_action(action);
  const std::size_t pos = scenario.position_of(removed_agent);
  if (scenario.agents[pos].kind != AgentKind::Av)
    throw ConfigError("only AVs can be removed (agent " + std::to_string(removed_agent) + " is human)");
  return detail::run_merge(scenario, action, pos, seed);
}

/// Two-route yield network: route 0 short without priority, route 1 longer with priority.
/// Agents depart every `headway` seconds; odd positions below 2*n_avs are AVs.
inline Scenario make_try_scenario(std::size_t n_agents = 22, std::size_t n_avs = 10, double headway = 4.0,
                                  double noise_sigma = 0.0) {
  if (2 * n_avs > n_agents + 1) throw ConfigError("too many AVs for interleaved layout");
  Scenario sc;
  sc.network.routes = {{40.0, false}, {50.0, true}};
  sc.network.merge_gap_g = 2.0;
  sc.network.yield_window_w = 6.0;
  sc.network.post_merge_time = 10.0;
  sc.noise_sigma = noise_sigma;
  for (std::size_t i = 0; i < n_agents; ++i) {
    AgentSpec a;
    a.id = static_cast<AgentId>(i);
    a.kind = (i % 2 == 1 && i < 2 * n_avs) ? AgentKind::Av : AgentKind::Human;
    a.departure_time = headway * static_cast<double>(i);
    a.action_space = {0, 1};
    sc.agents.push_back(std::move(a));
  }
  return sc;
}

}  // namespace routeshape
