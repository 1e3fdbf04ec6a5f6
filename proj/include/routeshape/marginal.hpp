#pragma once

// Counterfactual marginal-cost matrix, tanh-bounded intrinsic reward, shaped
// reward, and a memoizing simulation cache shared by all of them.

#include <cmath>
#include <cstdint>
#include <list>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "routeshape/format.hpp"
#include "routeshape/network.hpp"

namespace routeshape {

/// Which drivers' externalities count toward an AV's intrinsic score.
/// `None` disables the intrinsic term (no counterfactual runs at all).
enum class Scope { None, AvGroup, System };

/// Tanh per entry then sum, or the plain column sum of raw seconds.
enum class IntrinsicForm { Tanh, RawSum };

inline Scope parse_scope(std::string_view s) {
  if (s == "av-group") return Scope::AvGroup;
  if (s == "system") return Scope::System;
  if (s == "none") return Scope::None;
  throw ConfigError("unknown scope '" + std::string(s) + "' (expected av-group, system or none)");
}

inline const char* to_string(Scope s) {
  switch (s) {
    case Scope::AvGroup: return "av-group";
    case Scope::System: return "system";
    case Scope::None: return "none";
  }
  return "?";
}

inline IntrinsicForm parse_form(std::string_view s) {
  if (s == "tanh") return IntrinsicForm::Tanh;
  if (s == "raw_sum") return IntrinsicForm::RawSum;
  throw ConfigError("unknown intrinsic form '" + std::string(s) + "' (expected tanh or raw_sum)");
}

inline const char* to_string(IntrinsicForm f) { return f == IntrinsicForm::Tanh ? "tanh" : "raw_sum"; }

struct RewardConfig {
  double alpha = 1.0;
  double beta = 0.0;
  Scope scope = Scope::AvGroup;
  double tanh_scale = 1.0;  // seconds
  IntrinsicForm form = IntrinsicForm::Tanh;

  void validate() const {
    if (!std::isfinite(alpha) || !std::isfinite(beta)) throw ConfigError("alpha and beta must be finite");
    if (!std::isfinite(tanh_scale) || tanh_scale <= 0.0) throw ConfigError("tanh_scale must be > 0");
  }
};

/// r = alpha * extrinsic + beta * m, where extrinsic is the negated travel time.
inline double shaped_reward(double extrinsic, double intrinsic, const RewardConfig& cfg) {
  return cfg.alpha * extrinsic + cfg.beta * intrinsic;
}

// ---------------------------------------------------------------------------
// Simulation cache

struct CacheStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t evictions = 0;
};

/// LRU memo of simulator runs keyed by (removed agent, joint action, seed).
/// A cache instance is bound to one scenario. When the scenario is noise-free
/// the seed is dropped from the key, since it cannot change the result.
/// Safe for concurrent use; a lookup never observes a partially built entry.
class SimulationCache {
 public:
  explicit SimulationCache(std::size_t capacity = std::size_t{1} << 20) : capacity_(capacity) {
    if (capacity_ == 0) throw ConfigError("cache capacity must be positive");
  }

  TravelTimeVector run(const Scenario& sc, std::span<const RouteIndex> action,
                       std::optional<std::size_t> removed, std::uint64_t seed) {
    Key key{removed ? static_cast<std::int64_t>(*removed) : -1,
            JointAction(action.begin(), action.end()), sc.noise_sigma == 0.0 ? 0 : seed};
    if (removed) key.action[*removed] = -1;
    {
      std::lock_guard lock(mu_);
      if (auto it = index_.find(key); it != index_.end()) {
        ++stats_.hits;
        lru_.splice(lru_.begin(), lru_, it->second);
        TravelTimeVector out;
        out.times = it->second->second;
        out.seed = seed;
        return out;
      }
      ++stats_.misses;
    }
    // Simulate outside the lock; concurrent misses on one key compute identical values.
    TravelTimeVector fresh = detail::run_merge(sc, action, removed, seed);
    std::lock_guard lock(mu_);
    if (index_.find(key) == index_.end()) {
      lru_.emplace_front(key, fresh.times);
      index_.emplace(std::move(key), lru_.begin());
      while (index_.size() > capacity_) {
        index_.erase(lru_.back().first);
        lru_.pop_back();
        ++stats_.evictions;
      }
    }
    return fresh;
  }

  CacheStats stats() const {
    std::lock_guard lock(mu_);
    return stats_;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return index_.size();
  }

  void clear() {
    std::lock_guard lock(mu_);
    lru_.clear();
    index_.clear();
    stats_ = {};
  }

 private:
  struct Key {
    std::int64_t removed;
    JointAction action;
    std::uint64_t seed;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::uint64_t h = splitmix64(static_cast<std::uint64_t>(k.removed) ^ (k.seed * 0x9e3779b97f4a7c15ULL));
      for (RouteIndex r : k.action) h = splitmix64(h ^ static_cast<std::uint64_t>(r + 2));
      return static_cast<std::size_t>(h);
    }
  };
  using Entry = std::pair<Key, std::vector<double>>;

  std::size_t capacity_;
  mutable std::mutex mu_;
  std::list<Entry> lru_;
  std::unordered_map<Key, std::list<Entry>::iterator, KeyHash> index_;
  CacheStats stats_;
};

namespace detail {

inline TravelTimeVector run_maybe_cached(SimulationCache* cache, const Scenario& sc,
                                         std::span<const RouteIndex> action,
                                         std::optional<std::size_t> removed, std::uint64_t seed) {
  if (cache) return cache->run(sc, action, removed, seed);
  return run_merge(sc, action, removed, seed);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Marginal cost matrix

/// entry(i, j) = e_i(u without j) - e_i(u), seconds. Rows cover every agent in
/// the scenario; columns are the AVs. Entries for i == j, and for agents
/// absent from either run, are 0.
struct MarginalCostMatrix {
  std::vector<std::size_t> rows;  // scenario positions
  std::vector<std::size_t> cols;  // AV positions
  std::vector<double> values;     // rows.size() x cols.size(), row-major
  JointAction action;
  std::uint64_t seed = 0;

  double at(std::size_t row_index, std::size_t col_index) const {
    return values.at(row_index * cols.size() + col_index);
  }

  /// Entry by scenario positions.
  double entry(std::size_t row_pos, std::size_t col_pos) const {
    return at(index_in(rows, row_pos), index_in(cols, col_pos));
  }

  std::size_t col_of(std::size_t pos) const { return index_in(cols, pos); }

 private:
  static std::size_t index_in(const std::vector<std::size_t>& v, std::size_t pos) {
    for (std::size_t k = 0; k < v.size(); ++k)
      if (v[k] == pos) return k;
    throw Error("position " + std::to_string(pos) + " not in marginal matrix");
  }
};

inline MarginalCostMatrix compute_marginal_matrix(const Scenario& sc, std::span<const RouteIndex> action,
                                                  const TravelTimeVector& base, std::uint64_t seed,
                                                  SimulationCache* cache = nullptr) {
  if (base.seed != seed)
    throw ConfigError("base travel times were simulated with seed " + std::to_string(base.seed) +
                      ", counterfactuals requested with seed " + std::to_string(seed));
  sc.check_action(action);
  MarginalCostMatrix m;
  for (std::size_t i = 0; i < sc.size(); ++i) m.rows.push_back(i);
  m.cols = sc.av_positions();
  m.values.assign(m.rows.size() * m.cols.size(), 0.0);
  m.action.assign(action.begin(), action.end());
  m.seed = seed;
  for (std::size_t c = 0; c < m.cols.size(); ++c) {
    const std::size_t j = m.cols[c];
    const TravelTimeVector without = detail::run_maybe_cached(cache, sc, action, j, seed);
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
      const std::size_t i = m.rows[r];
      if (i == j || !without.has(i) || !base.has(i)) continue;
      m.values[r * m.cols.size() + c] = without.at(i) - base.at(i);
    }
  }
  return m;
}

/// Intrinsic score of the AV at scenario position `av_pos`:
/// sum over scope rows i != j of tanh(M(i,j) / tau), or of raw M(i,j) for RawSum.
inline double intrinsic_reward(const Scenario& sc, const MarginalCostMatrix& m, std::size_t av_pos,
                               const RewardConfig& cfg) {
  if (cfg.scope == Scope::None) return 0.0;
  const std::size_t c = m.col_of(av_pos);
  double sum = 0.0;
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    const std::size_t i = m.rows[r];
    if (i == av_pos) continue;
    if (cfg.scope == Scope::AvGroup && sc.agents[i].kind != AgentKind::Av) continue;
    const double x = m.at(r, c);
    sum += cfg.form == IntrinsicForm::Tanh ? std::tanh(x / cfg.tanh_scale) : x;
  }
  return sum;
}

struct Evaluation {
  TravelTimeVector times;
  std::vector<double> intrinsic;  // per AV, in Scenario::av_positions() order
};

/// Base run plus (unless scope is None) one counterfactual run per AV, all
/// routed through `cache` when given.
inline Evaluation cached_evaluate(const Scenario& sc, std::span<const RouteIndex> action,
                                  const RewardConfig& cfg, std::uint64_t seed, SimulationCache* cache) {
  sc.check_action(action);
  Evaluation ev;
  ev.times = detail::run_maybe_cached(cache, sc, action, std::nullopt, seed);
  const auto avs = sc.av_positions();
  ev.intrinsic.assign(avs.size(), 0.0);
  if (cfg.scope == Scope::None) return ev;
  const MarginalCostMatrix m = compute_marginal_matrix(sc, action, ev.times, seed, cache);
  for (std::size_t k = 0; k < avs.size(); ++k) ev.intrinsic[k] = intrinsic_reward(sc, m, avs[k], cfg);
  return ev;
}

/// CSV with agent ids as headers. `scope` AvGroup gives the square AV x AV
/// block; System gives all drivers as rows.
inline void write_matrix_csv(std::ostream& os, const Scenario& sc, const MarginalCostMatrix& m, Scope scope) {
  os << "id";
  for (std::size_t c : m.cols) os << ",AV " << sc.agents[c].id;
  os << "\n";
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    const auto& agent = sc.agents[m.rows[r]];
    if (scope != Scope::System && agent.kind != AgentKind::Av) continue;
    os << (agent.kind == AgentKind::Av ? "AV " : "H ") << agent.id;
    for (std::size_t c = 0; c < m.cols.size(); ++c) os << "," << format_number(m.at(r, c));
    os << "\n";
  }
}

}  // namespace routeshape
