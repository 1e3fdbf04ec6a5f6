#pragma once

// JSON loading and saving for scenarios and run configs.

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "routeshape/training.hpp"

namespace routeshape {

using Json = nlohmann::json;

namespace detail {

inline void check_keys(const Json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected a JSON object");
  for (const auto& [k, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError(std::string(where) + ": unknown field '" + k + "'");
  }
}

template <class T>
T get(const Json& j, const char* key, std::string_view where) {
  if (!j.contains(key)) throw ConfigError(std::string(where) + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string(where) + ": field '" + key + "' has the wrong type");
  }
}

template <class T>
T get_or(const Json& j, const char* key, T fallback, std::string_view where) {
  return j.contains(key) ? get<T>(j, key, where) : fallback;
}

}  // namespace detail

inline Json to_json(const Scenario& sc) {
  Json routes = Json::array();
  for (const auto& r : sc.network.routes) routes.push_back({{"pre_merge_time", r.pre_merge_time}, {"has_priority", r.has_priority}});
  Json agents = Json::array();
  for (const auto& a : sc.agents)
    agents.push_back({{"id", a.id},
                      {"kind", to_string(a.kind)},
                      {"departure_time", a.departure_time},
                      {"action_space", a.action_space}});
  return {{"agents", agents},
          {"network",
           {{"routes", routes},
            {"merge_gap_g", sc.network.merge_gap_g},
            {"yield_window_w", sc.network.yield_window_w},
            {"post_merge_time", sc.network.post_merge_time}}},
          {"noise_sigma", sc.noise_sigma}};
}

inline Scenario scenario_from_json(const Json& j) {
  using detail::get;
  detail::check_keys(j, "scenario", {"agents", "network", "noise_sigma"});
  Scenario sc;
  const Json& net = get<Json>(j, "network", "scenario");
  detail::check_keys(net, "network", {"routes", "merge_gap_g", "yield_window_w", "post_merge_time"});
  for (const Json& r : get<Json>(net, "routes", "network")) {
    detail::check_keys(r, "route", {"pre_merge_time", "has_priority"});
    sc.network.routes.push_back({get<double>(r, "pre_merge_time", "route"), get<bool>(r, "has_priority", "route")});
  }
  sc.network.merge_gap_g = get<double>(net, "merge_gap_g", "network");
  sc.network.yield_window_w = get<double>(net, "yield_window_w", "network");
  sc.network.post_merge_time = get<double>(net, "post_merge_time", "network");
  for (const Json& a : get<Json>(j, "agents", "scenario")) {
    detail::check_keys(a, "agent", {"id", "kind", "departure_time", "action_space"});
    AgentSpec spec;
    spec.id = get<AgentId>(a, "id", "agent");
    const auto kind = get<std::string>(a, "kind", "agent");
    if (kind == "human") spec.kind = AgentKind::Human;
    else if (kind == "av") spec.kind = AgentKind::Av;
    else throw ConfigError("agent " + std::to_string(spec.id) + ": kind must be human or av");
    spec.departure_time = get<double>(a, "departure_time", "agent");
    spec.action_space = get<std::vector<RouteIndex>>(a, "action_space", "agent");
    sc.agents.push_back(std::move(spec));
  }
  sc.noise_sigma = detail::get_or<double>(j, "noise_sigma", 0.0, "scenario");
  sc.validate();
  return sc;
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline Scenario load_scenario(const std::filesystem::path& path) { return scenario_from_json(read_json_file(path)); }

// ---------------------------------------------------------------------------
// Learner / reward / human blocks

inline LearnerSpec learner_from_json(const Json& j) {
  using detail::get_or;
  LearnerSpec s;
  s.algorithm = parse_algorithm(detail::get<std::string>(j, "algorithm", "learner"));
  switch (s.algorithm) {
    case Algorithm::Ucb:
      detail::check_keys(j, "learner", {"algorithm", "c", "scale", "random_first_pulls"});
      s.ucb_c = get_or(j, "c", s.ucb_c, "learner");
      s.ucb_scale = parse_ucb_scale(get_or<std::string>(j, "scale", to_string(s.ucb_scale), "learner"));
      s.ucb_random_first_pulls = get_or(j, "random_first_pulls", s.ucb_random_first_pulls, "learner");
      break;
    case Algorithm::Q:
      detail::check_keys(j, "learner", {"algorithm", "learning_rate", "epsilon_start", "epsilon_end"});
      s.q_learning_rate = get_or(j, "learning_rate", s.q_learning_rate, "learner");
      s.q_epsilon_start = get_or(j, "epsilon_start", s.q_epsilon_start, "learner");
      s.q_epsilon_end = get_or(j, "epsilon_end", s.q_epsilon_end, "learner");
      break;
    case Algorithm::PolicyGradient:
      detail::check_keys(j, "learner", {"algorithm", "learning_rate", "temperature"});
      s.pg_learning_rate = get_or(j, "learning_rate", s.pg_learning_rate, "learner");
      s.pg_temperature = get_or(j, "temperature", s.pg_temperature, "learner");
      break;
    case Algorithm::Constant:
      detail::check_keys(j, "learner", {"algorithm", "route"});
      s.constant_route = get_or(j, "route", s.constant_route, "learner");
      break;
  }
  s.validate();
  return s;
}

inline Json to_json(const LearnerSpec& s) {
  switch (s.algorithm) {
    case Algorithm::Ucb:
      return {{"algorithm", "ucb"}, {"c", s.ucb_c}, {"scale", to_string(s.ucb_scale)},
              {"random_first_pulls", s.ucb_random_first_pulls}};
    case Algorithm::Q:
      return {{"algorithm", "q"}, {"learning_rate", s.q_learning_rate}, {"epsilon_start", s.q_epsilon_start},
              {"epsilon_end", s.q_epsilon_end}};
    case Algorithm::PolicyGradient:
      return {{"algorithm", "pg"}, {"learning_rate", s.pg_learning_rate}, {"temperature", s.pg_temperature}};
    case Algorithm::Constant: return {{"algorithm", "constant"}, {"route", s.constant_route}};
  }
  return {};
}

inline RewardConfig reward_from_json(const Json& j) {
  using detail::get_or;
  detail::check_keys(j, "reward", {"alpha", "beta", "scope", "tanh_scale", "form"});
  RewardConfig r;
  r.alpha = get_or(j, "alpha", r.alpha, "reward");
  r.beta = get_or(j, "beta", r.beta, "reward");
  r.scope = parse_scope(get_or<std::string>(j, "scope", to_string(r.scope), "reward"));
  r.tanh_scale = get_or(j, "tanh_scale", r.tanh_scale, "reward");
  r.form = parse_form(get_or<std::string>(j, "form", to_string(r.form), "reward"));
  r.validate();
  return r;
}

inline Json to_json(const RewardConfig& r) {
  return {{"alpha", r.alpha}, {"beta", r.beta}, {"scope", to_string(r.scope)}, {"tanh_scale", r.tanh_scale},
          {"form", to_string(r.form)}};
}

inline HumanParams human_from_json(const Json& j) {
  detail::check_keys(j, "human", {"smoothing", "epsilon_start"});
  HumanParams h;
  h.smoothing = detail::get_or(j, "smoothing", h.smoothing, "human");
  h.epsilon_start = detail::get_or(j, "epsilon_start", h.epsilon_start, "human");
  h.validate();
  return h;
}

inline Json to_json(const HumanParams& h) { return {{"smoothing", h.smoothing}, {"epsilon_start", h.epsilon_start}}; }

// ---------------------------------------------------------------------------
// Run config

struct RunConfig {
  std::filesystem::path scenario_path;  // as resolved; empty when given inline
  TrainSettings settings;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::filesystem::path out = "runs/out";
  std::optional<JointAction> human_profile;  // for equilibrium analysis; default is the warm-up result

  void validate() const {
    if (seeds.empty()) throw ConfigError("seed list must not be empty");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
      throw ConfigError("seed list has duplicates");
    settings.learner.validate();
    settings.reward.validate();
    settings.human.validate();
    settings.effective_scenario().validate();
    if (settings.mode == Mode::Stochastic && settings.scenario.noise_sigma == 0.0)
      throw ConfigError("stochastic mode needs noise_sigma > 0");
    if (human_profile) settings.scenario.check_action(*human_profile);
  }
};

inline const char* to_string(Mode m) { return m == Mode::Deterministic ? "deterministic" : "stochastic"; }

inline Mode parse_mode(std::string_view s) {
  if (s == "deterministic") return Mode::Deterministic;
  if (s == "stochastic") return Mode::Stochastic;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected deterministic or stochastic)");
}

/// `base_dir` resolves a relative scenario path.
inline RunConfig run_config_from_json(const Json& j, const std::filesystem::path& base_dir = {}) {
  using detail::get_or;
  detail::check_keys(j, "run config",
                     {"scenario", "learner", "reward", "human", "warmup_days", "train_episodes", "eval_episodes",
                      "seeds", "out", "mode", "noise_sigma", "human_profile"});
  RunConfig rc;
  const Json& sj = detail::get<Json>(j, "scenario", "run config");
  if (sj.is_string()) {
    rc.scenario_path = base_dir / sj.get<std::string>();
    rc.settings.scenario = load_scenario(rc.scenario_path);
  } else {
    rc.settings.scenario = scenario_from_json(sj);
  }
  if (j.contains("noise_sigma")) rc.settings.scenario.noise_sigma = detail::get<double>(j, "noise_sigma", "run config");
  if (j.contains("learner")) rc.settings.learner = learner_from_json(j.at("learner"));
  if (j.contains("reward")) rc.settings.reward = reward_from_json(j.at("reward"));
  if (j.contains("human")) rc.settings.human = human_from_json(j.at("human"));
  auto count = [&](const char* key, std::size_t fallback) {
    const auto v = get_or<std::int64_t>(j, key, static_cast<std::int64_t>(fallback), "run config");
    if (v < 0) throw ConfigError(std::string("run config: ") + key + " must be >= 0");
    return static_cast<std::size_t>(v);
  };
  rc.settings.warmup_days = count("warmup_days", rc.settings.warmup_days);
  rc.settings.train_episodes = count("train_episodes", rc.settings.train_episodes);
  rc.settings.eval_episodes = count("eval_episodes", rc.settings.eval_episodes);
  rc.seeds = get_or(j, "seeds", rc.seeds, "run config");
  rc.out = get_or<std::string>(j, "out", rc.out.string(), "run config");
  rc.settings.mode = parse_mode(get_or<std::string>(j, "mode", "deterministic", "run config"));
  if (j.contains("human_profile")) rc.human_profile = detail::get<JointAction>(j, "human_profile", "run config");
  rc.validate();
  return rc;
}

/// A bare scenario file is accepted as a run config with every other field defaulted.
inline RunConfig load_run_config(const std::filesystem::path& path) {
  Json j = read_json_file(path);
  if (j.is_object() && j.contains("agents")) j = Json{{"scenario", std::move(j)}};
  return run_config_from_json(j, path.parent_path());
}

/// Fully resolved config, scenario inlined.
inline Json to_json(const RunConfig& rc) {
  Json j = {{"scenario", to_json(rc.settings.scenario)},
            {"learner", to_json(rc.settings.learner)},
            {"reward", to_json(rc.settings.reward)},
            {"human", to_json(rc.settings.human)},
            {"warmup_days", rc.settings.warmup_days},
            {"train_episodes", rc.settings.train_episodes},
            {"eval_episodes", rc.settings.eval_episodes},
            {"seeds", rc.seeds},
            {"out", rc.out.string()},
            {"mode", to_string(rc.settings.mode)}};
  if (rc.human_profile) j["human_profile"] = *rc.human_profile;
  return j;
}

/// Joint action from "1,0,1", "[1, 0, 1]" or "101".
inline JointAction parse_joint_action(std::string_view text) {
  JointAction u;
  std::string digits;
  bool has_sep = text.find(',') != std::string_view::npos;
  auto flush = [&] {
    if (digits.empty() || digits.size() > 6) throw ConfigError("malformed joint action '" + std::string(text) + "'");
    u.push_back(std::stoi(digits));
    digits.clear();
  };
  for (char ch : text) {
    if (ch == '[' || ch == ']' || ch == ' ') continue;
    if (ch >= '0' && ch <= '9') {
      digits += ch;
      if (!has_sep) flush();
    } else if (ch == ',' && has_sep) {
      flush();
    } else {
      throw ConfigError("malformed joint action '" + std::string(text) + "'");
    }
  }
  if (has_sep) flush();
  if (u.empty()) throw ConfigError("empty joint action");
  return u;
}

/// Accepts one route per agent, or one per AV with humans on `human_route`.
inline JointAction expand_joint_action(const Scenario& sc, const JointAction& u, RouteIndex human_route = 0) {
  if (u.size() == sc.size()) {
    sc.check_action(u);
    return u;
  }
  const auto avs = sc.av_positions();
  if (u.size() != avs.size())
    throw ConfigError("joint action has " + std::to_string(u.size()) + " entries; expected " +
                      std::to_string(sc.size()) + " (all agents) or " + std::to_string(avs.size()) + " (AVs)");
  JointAction full(sc.size(), human_route);
  for (std::size_t k = 0; k < avs.size(); ++k) full[avs[k]] = u[k];
  sc.check_action(full);
  return full;
}

}  // namespace routeshape
