#pragma once

// Straight-line merge simulator used as a test oracle. It shares no code with
// the library's simulator: every step rescans the unpassed vehicles.

#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "routeshape/network.hpp"

namespace oracle {

using namespace routeshape;

struct Car {
  AgentId id;
  double dep;
  double arr;
  bool prio;
  bool done = false;
};

inline bool earlier(const Car& a, const Car& b) {
  if (a.arr != b.arr) return a.arr < b.arr;
  if (a.dep != b.dep) return a.dep < b.dep;
  return a.id < b.id;
}

/// Travel time by agent id.
inline std::map<AgentId, double> run(const Scenario& sc, const JointAction& u, std::uint64_t seed) {
  std::vector<Car> cars;
  for (std::size_t i = 0; i < sc.agents.size(); ++i) {
    const auto& a = sc.agents[i];
    const auto& r = sc.network.routes[u[i]];
    double jitter = 0.0;
    if (sc.noise_sigma > 0) {
      const double x = static_cast<double>(derive_seed(seed, static_cast<std::uint64_t>(a.id)) >> 11) / 9007199254740992.0;
      jitter = sc.noise_sigma * (2 * x - 1);
    }
    cars.push_back({a.id, a.departure_time, a.departure_time + r.pre_merge_time + jitter, r.has_priority});
  }
  std::map<AgentId, double> out;
  double last = -1e300;
  const double g = sc.network.merge_gap_g, w = sc.network.yield_window_w;
  for (std::size_t served = 0; served < cars.size(); ++served) {
    Car* p = nullptr;
    Car* n = nullptr;
    for (auto& c : cars) {
      if (c.done) continue;
      Car*& slot = c.prio ? p : n;
      if (!slot || earlier(c, *slot)) slot = &c;
    }
    Car* next = p;
    if (n) {
      const double cand = std::max(n->arr, last + g);
      bool blocked = false;
      for (auto& c : cars)
        if (!c.done && c.prio && c.arr <= cand + w) blocked = true;
      if (!blocked) next = n;
    }
    const double t = std::max(next->arr, last + g);
    last = t;
    next->done = true;
    out[next->id] = t + sc.network.post_merge_time - next->dep;
  }
  return out;
}

/// Same, with agent `id` deleted from the scenario.
inline std::map<AgentId, double> run_without(const Scenario& sc, const JointAction& u, AgentId id,
                                             std::uint64_t seed) {
  Scenario s = sc;
  JointAction v;
  s.agents.clear();
  for (std::size_t i = 0; i < sc.agents.size(); ++i) {
    if (sc.agents[i].id == id) continue;
    s.agents.push_back(sc.agents[i]);
    v.push_back(u[i]);
  }
  return run(s, v, seed);
}

}  // namespace oracle
