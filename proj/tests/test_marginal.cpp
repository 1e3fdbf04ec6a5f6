#include <gtest/gtest.h>

#include <random>
#include <sstream>
#include <thread>

#include "oracle.hpp"
#include "routeshape/marginal.hpp"

using namespace routeshape;

namespace {

Scenario avs_only(std::vector<double> deps) {
  Scenario sc = make_try_scenario(1, 0);
  sc.agents.clear();
  for (std::size_t i = 0; i < deps.size(); ++i)
    sc.agents.push_back({static_cast<AgentId>(i), AgentKind::Av, deps[i], {0, 1}});
  return sc;
}

JointAction try_action(const Scenario& sc, std::uint64_t bits) {
  JointAction u(sc.size(), 0);
  const auto avs = sc.av_positions();
  for (std::size_t k = 0; k < avs.size(); ++k) u[avs[k]] = static_cast<RouteIndex>((bits >> k) & 1);
  return u;
}

MarginalCostMatrix matrix(const Scenario& sc, const JointAction& u, std::uint64_t seed = 0,
                          SimulationCache* cache = nullptr) {
  return compute_marginal_matrix(sc, u, simulate(sc, u, seed), seed, cache);
}

}  // namespace

TEST(MarginalMatrix, SingleAvIsZero) {
  const Scenario sc = avs_only({0});
  const auto m = matrix(sc, {1});
  ASSERT_EQ(m.values.size(), 1u);
  EXPECT_EQ(m.values[0], 0.0);
}

TEST(MarginalMatrix, NonInteractingAvsGiveZeros) {
  const Scenario sc = avs_only({0, 100});
  const auto m = matrix(sc, {0, 1});
  for (double v : m.values) EXPECT_EQ(v, 0.0);
}

TEST(MarginalMatrix, PriorityVehicleForcingYieldIsNegative) {
  const Scenario sc = make_try_scenario();
  JointAction u(sc.size(), 0);
  u[1] = 1;
  const auto m = matrix(sc, u);
  EXPECT_LT(m.entry(3, 1), 0.0);
  EXPECT_LT(m.entry(2, 1), 0.0);
}

TEST(MarginalMatrix, SeedMismatchRejected) {
  const Scenario sc = make_try_scenario();
  const JointAction u(sc.size(), 0);
  EXPECT_THROW(compute_marginal_matrix(sc, u, simulate(sc, u, 1), 2), ConfigError);
}

TEST(MarginalMatrix, EntriesMatchIndependentPairs) {
  const Scenario det = make_try_scenario();
  const Scenario noisy = make_try_scenario(22, 10, 4.0, 1.0);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const Scenario& sc = trial % 2 ? noisy : det;
    const JointAction u = try_action(sc, rng() % 1024);
    const std::uint64_t seed = rng();
    const auto m = matrix(sc, u, seed);
    const auto with = oracle::run(sc, u, seed);
    for (std::size_t j : m.cols) {
      const auto without = oracle::run_without(sc, u, sc.agents[j].id, seed);
      for (std::size_t i : m.rows) {
        const double expect = i == j ? 0.0 : without.at(sc.agents[i].id) - with.at(sc.agents[i].id);
        ASSERT_EQ(m.entry(i, j), expect);
      }
    }
  }
}

TEST(MarginalMatrix, DeterministicEntriesNonPositiveWithZeroDiagonal) {
  const Scenario sc = make_try_scenario();
  SimulationCache cache;
  for (std::uint64_t bits = 0; bits < 1024; ++bits) {
    const auto m = matrix(sc, try_action(sc, bits), 0, &cache);
    for (std::size_t j : m.cols) {
      EXPECT_EQ(m.entry(j, j), 0.0);
      for (std::size_t i : m.rows) ASSERT_LE(m.entry(i, j), 0.0);
    }
  }
}

TEST(MarginalMatrix, LaterDepartureCanDelayEarlierOne) {
  // Search the 10-AV space for a nonzero entry above the diagonal: a vehicle
  // that departed later slows one that departed earlier.
  const Scenario sc = make_try_scenario();
  SimulationCache cache;
  bool found = false;
  for (std::uint64_t bits = 0; bits < 1024 && !found; ++bits) {
    const auto m = matrix(sc, try_action(sc, bits), 0, &cache);
    for (std::size_t j : m.cols)
      for (std::size_t i : m.cols)
        if (sc.agents[i].departure_time < sc.agents[j].departure_time && m.entry(i, j) != 0.0) found = true;
  }
  EXPECT_TRUE(found);
}

TEST(MarginalMatrix, TableLayoutCsv) {
  const Scenario sc = make_try_scenario();
  const JointAction u = try_action(sc, 0b1100010101);
  const auto m = matrix(sc, u);
  std::ostringstream os;
  write_matrix_csv(os, sc, m, Scope::AvGroup);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, "id,AV 1,AV 3,AV 5,AV 7,AV 9,AV 11,AV 13,AV 15,AV 17,AV 19");
  int rows = 0;
  for (std::string line; std::getline(is, line);) ++rows;
  EXPECT_EQ(rows, 10);
  std::ostringstream sys;
  write_matrix_csv(sys, sc, m, Scope::System);
  EXPECT_NE(sys.str().find("\nH 0,"), std::string::npos);
}

TEST(Intrinsic, ZeroMatrixGivesZero) {
  const Scenario sc = avs_only({0, 100, 200});
  const auto m = matrix(sc, {0, 1, 0});
  RewardConfig cfg;
  for (std::size_t j : m.cols) EXPECT_EQ(intrinsic_reward(sc, m, j, cfg), 0.0);
}

TEST(Intrinsic, SaturatesOnLargeDelay) {
  const Scenario sc = avs_only({0, 100});
  MarginalCostMatrix m = matrix(sc, {0, 0});
  m.values[m.col_of(1)] = -21;  // row 0, column of AV 1
  RewardConfig cfg;
  EXPECT_EQ(intrinsic_reward(sc, m, 1, cfg), std::tanh(-21.0));
  EXPECT_NEAR(intrinsic_reward(sc, m, 1, cfg), -1.0, 1e-15);
  cfg.form = IntrinsicForm::RawSum;
  EXPECT_EQ(intrinsic_reward(sc, m, 1, cfg), -21.0);
  cfg.tanh_scale = 10;
  cfg.form = IntrinsicForm::Tanh;
  EXPECT_EQ(intrinsic_reward(sc, m, 1, cfg), std::tanh(-2.1));
}

TEST(Intrinsic, BoundedAndSignPreservingOnRandomMatrices) {
  const Scenario sc = make_try_scenario();
  MarginalCostMatrix m = matrix(sc, JointAction(sc.size(), 0));
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-30, 30);
  for (int trial = 0; trial < 1000; ++trial) {
    const int mode = trial % 3;  // mixed, all <= 0, all >= 0
    for (double& v : m.values) {
      v = u(rng);
      if (mode == 1) v = -std::abs(v);
      if (mode == 2) v = std::abs(v);
    }
    for (Scope scope : {Scope::AvGroup, Scope::System}) {
      RewardConfig cfg;
      cfg.scope = scope;
      const double size = scope == Scope::AvGroup ? 10 : 22;
      for (std::size_t j : m.cols) {
        const double mj = intrinsic_reward(sc, m, j, cfg);
        ASSERT_LT(std::abs(mj), size);
        if (mode == 1) { EXPECT_LE(mj, 0.0); }
        if (mode == 2) { EXPECT_GE(mj, 0.0); }
      }
    }
  }
}

TEST(Intrinsic, ScopesAgreeWithoutHumanInteraction) {
  Scenario sc = avs_only({0, 4, 8, 200});
  sc.agents[3].kind = AgentKind::Human;
  const JointAction u{1, 0, 0, 0};
  const auto m = matrix(sc, u);
  RewardConfig a, s;
  s.scope = Scope::System;
  for (std::size_t j : m.cols) EXPECT_EQ(intrinsic_reward(sc, m, j, a), intrinsic_reward(sc, m, j, s));
  RewardConfig none;
  none.scope = Scope::None;
  EXPECT_EQ(intrinsic_reward(sc, m, 0, none), 0.0);
}

TEST(Shaped, Arithmetic) {
  RewardConfig cfg;
  EXPECT_EQ(shaped_reward(-50, -3, cfg), -50);
  cfg.beta = 200;
  EXPECT_EQ(shaped_reward(-50, -1, cfg), -250);
  cfg.alpha = 0;
  cfg.beta = 1;
  EXPECT_EQ(shaped_reward(-50, -0.37, cfg), -0.37);
  EXPECT_THROW(parse_scope("global"), ConfigError);
  EXPECT_THROW(parse_form("sum"), ConfigError);
}

TEST(Cache, SecondCallSimulatesNothing) {
  const Scenario sc = make_try_scenario();
  SimulationCache cache;
  const JointAction u = try_action(sc, 0b101);
  const auto a = cached_evaluate(sc, u, RewardConfig{}, 0, &cache);
  const auto misses = cache.stats().misses;
  EXPECT_EQ(misses, 11u);
  const auto b = cached_evaluate(sc, u, RewardConfig{}, 0, &cache);
  EXPECT_EQ(cache.stats().misses, misses);
  EXPECT_EQ(a.times, b.times);
  EXPECT_EQ(a.intrinsic, b.intrinsic);
  const auto cold = cached_evaluate(sc, u, RewardConfig{}, 0, nullptr);
  EXPECT_EQ(a.times, cold.times);
  EXPECT_EQ(a.intrinsic, cold.intrinsic);
}

TEST(Cache, ScopeNoneSkipsCounterfactuals) {
  const Scenario sc = make_try_scenario();
  SimulationCache cache;
  RewardConfig cfg;
  cfg.scope = Scope::None;
  cached_evaluate(sc, JointAction(sc.size(), 0), cfg, 0, &cache);
  EXPECT_EQ(cache.stats().misses, 1u);
}

TEST(Cache, SeedIsPartOfTheKeyOnlyWithNoise) {
  const Scenario det = make_try_scenario();
  const Scenario noisy = make_try_scenario(22, 10, 4.0, 1.0);
  const JointAction u(det.size(), 0);
  SimulationCache a, b;
  a.run(det, u, std::nullopt, 1);
  a.run(det, u, std::nullopt, 2);
  EXPECT_EQ(a.size(), 1u);
  b.run(noisy, u, std::nullopt, 1);
  const auto t2 = b.run(noisy, u, std::nullopt, 2);
  EXPECT_EQ(b.size(), 2u);
  EXPECT_EQ(t2, simulate(noisy, u, 2));
}

TEST(Cache, EvictionNeverChangesAnswers) {
  const Scenario sc = make_try_scenario();
  SimulationCache small(5);
  std::mt19937_64 rng(2);
  for (int k = 0; k < 200; ++k) {
    const JointAction u = try_action(sc, rng() % 1024);
    EXPECT_EQ(cached_evaluate(sc, u, RewardConfig{}, 0, &small).intrinsic,
              cached_evaluate(sc, u, RewardConfig{}, 0, nullptr).intrinsic);
  }
  EXPECT_LE(small.size(), 5u);
  EXPECT_GT(small.stats().evictions, 0u);
  EXPECT_THROW(SimulationCache(0), ConfigError);
}

TEST(Cache, ConcurrentUse) {
  const Scenario sc = make_try_scenario();
  SimulationCache cache;
  std::vector<std::thread> pool;
  std::atomic<int> bad{0};
  for (int t = 0; t < 8; ++t)
    pool.emplace_back([&, t] {
      for (std::uint64_t bits = 0; bits < 256; ++bits) {
        const JointAction u = try_action(sc, (bits * 7 + static_cast<std::uint64_t>(t)) % 256);
        if (cached_evaluate(sc, u, RewardConfig{}, 0, &cache).times != simulate(sc, u, 0)) ++bad;
      }
    });
  for (auto& th : pool) th.join();
  EXPECT_EQ(bad.load(), 0);
  EXPECT_LE(cache.size(), 256u + 10u * 256u);
}
