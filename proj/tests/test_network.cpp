#include <gtest/gtest.h>

#include <random>

#include "oracle.hpp"
#include "routeshape/network.hpp"

using namespace routeshape;

namespace {

Scenario tiny(std::vector<double> deps, std::vector<AgentKind> kinds = {}) {
  Scenario sc = make_try_scenario(1, 0);
  sc.agents.clear();
  for (std::size_t i = 0; i < deps.size(); ++i)
    sc.agents.push_back({static_cast<AgentId>(i), i < kinds.size() ? kinds[i] : AgentKind::Av, deps[i], {0, 1}});
  return sc;
}

Scenario random_scenario(std::mt19937_64& rng, std::size_t n, double sigma) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Scenario sc;
  const double pre0 = 20 + 30 * u(rng);
  sc.network.routes = {{pre0, false}, {pre0 + 1 + 15 * u(rng), true}};
  sc.network.merge_gap_g = 0.5 + 3 * u(rng);
  sc.network.yield_window_w = 8 * u(rng);
  sc.network.post_merge_time = 10 * u(rng);
  sc.noise_sigma = sigma;
  double t = 0;
  for (std::size_t i = 0; i < n; ++i) {
    t += 0.5 + 6 * u(rng);
    sc.agents.push_back({static_cast<AgentId>(i * 3 + 1), u(rng) < 0.5 ? AgentKind::Av : AgentKind::Human, t, {0, 1}});
  }
  return sc;
}

JointAction random_action(std::mt19937_64& rng, std::size_t n) {
  JointAction a(n);
  for (auto& x : a) x = static_cast<RouteIndex>(rng() % 2);
  return a;
}

JointAction from_bits(std::uint64_t bits, std::size_t n) {
  JointAction a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = static_cast<RouteIndex>((bits >> i) & 1);
  return a;
}

}  // namespace

TEST(Simulate, LoneVehicleOnShortRoute) {
  Scenario sc = tiny({0});
  EXPECT_EQ(simulate(sc, JointAction{0}, 0).at(0), 50.0);
}

TEST(Simulate, TwoPriorityVehiclesSpacedBeyondGap) {
  Scenario sc = tiny({0, 4});
  const auto t = simulate(sc, JointAction{1, 1}, 0);
  EXPECT_EQ(t.at(0), 60.0);
  EXPECT_EQ(t.at(1), 60.0);
}

TEST(Simulate, DeviatorHurtsItselfAndAnotherDriver) {
  const Scenario sc = make_try_scenario();
  JointAction base(sc.size(), 0), dev = base;
  dev[1] = 1;
  const auto t0 = simulate(sc, base, 0);
  const auto t1 = simulate(sc, dev, 0);
  EXPECT_GT(t1.at(1), t0.at(1));
  bool someone = false;
  for (std::size_t i = 0; i < sc.size(); ++i)
    if (dev[i] == 0 && t1.at(i) > t0.at(i)) someone = true;
  EXPECT_TRUE(someone);
  for (const auto* u : {&base, &dev}) {
    const auto lib = simulate(sc, *u, 0);
    const auto ref = oracle::run(sc, *u, 0);
    for (std::size_t i = 0; i < sc.size(); ++i) EXPECT_EQ(lib.at(i), ref.at(sc.agents[i].id)) << "agent " << i;
  }
}

TEST(Simulate, HandWorkedYield) {
  // Route-0 car at 0 reaches the merge at 40; route-1 car at 4 reaches it at 54.
  // Car at 8 on route 0 reaches it at 48, 54 <= 48 + 6, so it waits until 56.
  Scenario sc = tiny({0, 4, 8});
  const auto t = simulate(sc, JointAction{0, 1, 0}, 0);
  EXPECT_EQ(t.at(0), 50.0);
  EXPECT_EQ(t.at(1), 60.0);
  EXPECT_EQ(t.at(2), 58.0);
}

TEST(Simulate, MatchesOracleOnRandomScenarios) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 600; ++trial) {
    const double sigma = trial % 2 ? 0.0 : 1.5;
    const Scenario sc = random_scenario(rng, 1 + rng() % 9, sigma);
    const JointAction u = random_action(rng, sc.size());
    const std::uint64_t seed = rng();
    const auto lib = simulate(sc, u, seed);
    const auto ref = oracle::run(sc, u, seed);
    for (std::size_t i = 0; i < sc.size(); ++i) ASSERT_EQ(lib.at(i), ref.at(sc.agents[i].id)) << "trial " << trial;
    for (std::size_t j = 0; j < sc.size(); ++j) {
      if (sc.agents[j].kind != AgentKind::Av) continue;
      const auto without = simulate_without(sc, u, sc.agents[j].id, seed);
      const auto ref_w = oracle::run_without(sc, u, sc.agents[j].id, seed);
      EXPECT_FALSE(without.has(j));
      for (std::size_t i = 0; i < sc.size(); ++i)
        if (i != j) { ASSERT_EQ(without.at(i), ref_w.at(sc.agents[i].id)) << "trial " << trial; }
    }
  }
}

TEST(Simulate, RejectsBadInput) {
  Scenario sc = tiny({0, 4});
  EXPECT_THROW(simulate(sc, JointAction{0}, 0), ConfigError);
  EXPECT_THROW(simulate(sc, JointAction{0, 2}, 0), ConfigError);
  sc.network.merge_gap_g = NAN;
  EXPECT_THROW(simulate(sc, JointAction{0, 0}, 0), ConfigError);
  sc = tiny({4, 0});
  EXPECT_THROW(simulate(sc, JointAction{0, 0}, 0), ConfigError);
  sc = tiny({0, 4});
  sc.agents[1].id = 0;
  EXPECT_THROW(simulate(sc, JointAction{0, 0}, 0), ConfigError);
  sc = tiny({0, 4});
  sc.noise_sigma = 60;
  EXPECT_THROW(simulate(sc, JointAction{0, 0}, 0), ConfigError);
  sc = tiny({0});
  sc.network.routes.pop_back();
  EXPECT_THROW(simulate(sc, JointAction{0}, 0), ConfigError);
}

TEST(Simulate, DeterministicAndSeedIndependentWithoutNoise) {
  const Scenario sc = make_try_scenario();
  std::mt19937_64 rng(3);
  const JointAction u = random_action(rng, sc.size());
  EXPECT_EQ(simulate(sc, u, 1), simulate(sc, u, 1));
  EXPECT_EQ(simulate(sc, u, 1).times, simulate(sc, u, 99).times);
}

TEST(Simulate, SeedStabilityWithNoise) {
  const Scenario sc = make_try_scenario(22, 10, 4.0, 1.0);
  JointAction u(sc.size(), 0);
  EXPECT_EQ(simulate(sc, u, 5), simulate(sc, u, 5));
  EXPECT_NE(simulate(sc, u, 5).times, simulate(sc, u, 6).times);
}

TEST(Simulate, LowerBound) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const double sigma = trial % 2 ? 0.0 : 2.0;
    const Scenario sc = random_scenario(rng, 1 + rng() % 12, sigma);
    const JointAction u = random_action(rng, sc.size());
    const auto t = simulate(sc, u, rng());
    for (std::size_t i = 0; i < sc.size(); ++i) {
      const double floor = sc.network.free_flow_time(u[i]) - sigma - 1e-9;
      EXPECT_GE(t.at(i), floor);
      EXPECT_GT(t.at(i), 0.0);
    }
  }
}

TEST(SimulateWithout, SingleAvLeavesHumansAtFreeFlow) {
  Scenario sc = tiny({0, 4, 8}, {AgentKind::Human, AgentKind::Av, AgentKind::Human});
  const auto t = simulate_without(sc, JointAction{0, 1, 0}, 1, 0);
  EXPECT_FALSE(t.has(1));
  EXPECT_EQ(t.at(0), 50.0);
  EXPECT_EQ(t.at(2), 50.0);
}

TEST(SimulateWithout, NonInteractingAgentChangesNothing) {
  Scenario sc = tiny({0, 100, 200});
  const JointAction u{0, 1, 0};
  const auto full = simulate(sc, u, 0);
  const auto w = simulate_without(sc, u, 1, 0);
  EXPECT_EQ(w.at(0), full.at(0));
  EXPECT_EQ(w.at(2), full.at(2));
}

TEST(SimulateWithout, RemovingBlockingPriorityVehicleHelpsYielder) {
  const Scenario sc = make_try_scenario();
  JointAction u(sc.size(), 0);
  u[1] = 1;  // AV 1 reaches the merge at 54; AV 3 (route 0) arrives at 52 and queues behind it
  const auto full = simulate(sc, u, 0);
  const auto w = simulate_without(sc, u, 1, 0);
  EXPECT_LT(w.at(3), full.at(3));
}

TEST(SimulateWithout, HumanRemovalIsAnError) {
  const Scenario sc = make_try_scenario();
  EXPECT_THROW(simulate_without(sc, JointAction(sc.size(), 0), 0, 0), ConfigError);
  EXPECT_THROW(simulate_without(sc, JointAction(sc.size(), 0), 999, 0), ConfigError);
}

TEST(SimulateProperties, RemovalNeverHurtsExhaustive) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    Scenario sc = random_scenario(rng, 2 + trial % 5, 0.0);
    sc.network.yield_window_w += sc.network.merge_gap_g;  // a short window lets a released yielder delay later priority traffic
    for (auto& a : sc.agents) a.kind = AgentKind::Av;
    for (std::uint64_t bits = 0; bits < (1u << sc.size()); ++bits) {
      const JointAction u = from_bits(bits, sc.size());
      const auto full = simulate(sc, u, 0);
      for (std::size_t j = 0; j < sc.size(); ++j) {
        const auto w = simulate_without(sc, u, sc.agents[j].id, 0);
        for (std::size_t i = 0; i < sc.size(); ++i)
          if (i != j) { ASSERT_LE(w.at(i), full.at(i)) << "trial " << trial << " bits " << bits; }
      }
    }
  }
}

TEST(SimulateProperties, ExtraPriorityVehicleNeverSpeedsUpYieldersExhaustive) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    Scenario sc = random_scenario(rng, 2 + trial % 5, 0.0);
    sc.network.yield_window_w += sc.network.merge_gap_g;
    for (std::uint64_t bits = 0; bits < (1u << sc.size()); ++bits) {
      const JointAction u = from_bits(bits, sc.size());
      const auto before = simulate(sc, u, 0);
      for (std::size_t slot = 0; slot <= sc.size(); ++slot) {
        Scenario more = sc;
        const double lo = slot == 0 ? 0.0 : sc.agents[slot - 1].departure_time;
        const double hi = slot == sc.size() ? lo + 10.0 : sc.agents[slot].departure_time;
        more.agents.insert(more.agents.begin() + static_cast<std::ptrdiff_t>(slot),
                           {1000, AgentKind::Av, (lo + hi) / 2, {0, 1}});
        JointAction v = u;
        v.insert(v.begin() + static_cast<std::ptrdiff_t>(slot), 1);
        if (!(lo < (lo + hi) / 2 && (lo + hi) / 2 < hi)) continue;
        const auto after = simulate(more, v, 0);
        for (std::size_t i = 0; i < sc.size(); ++i) {
          if (u[i] != 0) continue;
          const std::size_t k = i < slot ? i : i + 1;
          ASSERT_GE(after.at(k), before.at(i)) << "trial " << trial << " bits " << bits;
        }
      }
    }
  }
}

TEST(TryScenario, Layout) {
  const Scenario sc = make_try_scenario();
  ASSERT_EQ(sc.size(), 22u);
  EXPECT_EQ(sc.av_positions().size(), 10u);
  EXPECT_EQ(sc.agents[1].kind, AgentKind::Av);
  EXPECT_EQ(sc.agents[19].kind, AgentKind::Av);
  EXPECT_EQ(sc.agents[20].kind, AgentKind::Human);
  EXPECT_EQ(sc.agents[21].departure_time, 84.0);
  const auto t = simulate(sc, JointAction(sc.size(), 0), 0);
  for (std::size_t i = 0; i < sc.size(); ++i) EXPECT_EQ(t.at(i), 50.0);
}
