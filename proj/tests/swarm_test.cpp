#include "privswarm/swarm.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "privswarm/errors.hpp"

using namespace privswarm;

namespace {

CommandAst move(Vec3 p, double speed, std::set<Modifier> mods = {}) {
  CommandAst c;
  c.verb = Verb::move_to;
  c.position = p;
  c.speed = speed;
  c.modifiers = std::move(mods);
  return c;
}

CommandAst hold() { return CommandAst{}; }

double dist(const Vec3& a, const Vec3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
}

}  // namespace

TEST(SwarmStep, HoldKeepsPositionAndBattery) {
  const SwarmState s = make_swarm(3, {1, 2, -20}, 5);
  const SwarmState n = swarm_step(s, {hold(), hold(), hold()}, 1.0);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(n.uavs[i].position, s.uavs[i].position);
    EXPECT_EQ(n.uavs[i].battery, s.uavs[i].battery);
  }
  EXPECT_EQ(n.time, 1.0);
}

TEST(SwarmStep, MoveAdvancesAtSpeed) {
  const SwarmState s = make_swarm(1, {0, 0, -20}, 5);
  SwarmParams p;
  const SwarmState n = swarm_step(s, {move({100, 0, -20}, 5)}, 1.0, p);
  EXPECT_DOUBLE_EQ(n.uavs[0].position.x, 5.0);
  EXPECT_DOUBLE_EQ(n.uavs[0].velocity.x, 5.0);
  EXPECT_DOUBLE_EQ(n.uavs[0].battery, 100 - 5 * p.battery_per_metre);
  EXPECT_DOUBLE_EQ(n.energy_used, 5 * p.battery_per_metre);
  // Stops at the target instead of overshooting.
  const SwarmState m = swarm_step(s, {move({3, 0, -20}, 5)}, 1.0);
  EXPECT_DOUBLE_EQ(m.uavs[0].position.x, 3.0);
}

TEST(SwarmStep, SpeedCaps) {
  const SwarmState s = make_swarm(1, {0, 0, -20}, 5);
  SwarmParams p;
  p.v_max = 4;
  EXPECT_DOUBLE_EQ(swarm_step(s, {move({100, 0, -20}, 10)}, 1.0, p).uavs[0].position.x, 4.0);
  EXPECT_DOUBLE_EQ(swarm_step(s, {move({100, 0, -20}, 10, {Modifier::low_power})}, 1.0, p).uavs[0].position.x,
                   2.0);
  // speed 0 means the default cruise speed
  EXPECT_DOUBLE_EQ(swarm_step(s, {move({100, 0, -20}, 0)}, 1.0).uavs[0].position.x, SwarmParams{}.default_speed);
}

TEST(SwarmStep, TargetInsideObstacleStopsAtFace) {
  const Box box{{10, -5, -30}, {20, 5, -10}};
  const SwarmState s = make_swarm(1, {0, 0, -20}, 5, {box});
  SwarmState n = s;
  for (int k = 0; k < 4; ++k) n = swarm_step(n, {move({15, 0, -20}, 5)}, 1.0);
  EXPECT_EQ(n.uavs[0].position, (Vec3{10, 0, -20}));
  EXPECT_FALSE(box.contains(n.uavs[0].position));
  EXPECT_TRUE(n.uavs[0].blocked);
  EXPECT_EQ(n.avoidance_events, 1u);  // one blocking episode
  EXPECT_EQ(n.nofly_violations, 0u);
  EXPECT_EQ(n.collisions, 0u);
}

TEST(SwarmStep, DiagonalClipHitsNearestFace) {
  // From (0,0) toward (12, 6): enters x = 10 face at t = 10/12, y = 5 there.
  const Box box{{10, -10, -30}, {20, 10, -10}};
  const SwarmState s = make_swarm(1, {0, 0, -20}, 5, {box});
  const SwarmState n = swarm_step(s, {move({12, 6, -20}, 100)}, 1.0, SwarmParams{100});
  EXPECT_DOUBLE_EQ(n.uavs[0].position.x, 10.0);
  EXPECT_NEAR(n.uavs[0].position.y, 5.0, 1e-12);
  EXPECT_EQ(n.avoidance_events, 1u);
}

TEST(SwarmStep, AvoidObstacleSlidesAlongFace) {
  const Box box{{10, -10, -30}, {20, 10, -10}};
  const SwarmState s = make_swarm(1, {0, 0, -20}, 5, {box});
  const SwarmState n =
      swarm_step(s, {move({12, 6, -20}, 100, {Modifier::avoid_obstacle})}, 1.0, SwarmParams{100});
  EXPECT_DOUBLE_EQ(n.uavs[0].position.x, 10.0);
  EXPECT_NEAR(n.uavs[0].position.y, 6.0, 1e-12);
}

TEST(SwarmStep, CollisionsCountedOnEntry) {
  SwarmState s = make_swarm(2, {0, 0, -20}, 5);
  SwarmParams p;
  const CommandAst meet = move({2.5, 0, -20}, 5);
  s = swarm_step(s, {meet, meet}, 1.0, p);
  EXPECT_EQ(s.collisions, 1u);
  s = swarm_step(s, {meet, meet}, 1.0, p);
  EXPECT_EQ(s.collisions, 1u);
}

TEST(SwarmStep, Errors) {
  const SwarmState s = make_swarm(2, {0, 0, -20}, 5);
  EXPECT_THROW(swarm_step(s, {hold()}, 1.0), ShapeError);
  EXPECT_THROW(swarm_step(s, {hold(), hold()}, 0.0), RangeError);
  EXPECT_THROW(make_swarm(2, {0, 0, 0}, 0), ValidationError);
}

TEST(SwarmStep, DisplacementBoundProperty) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Box> boxes;
    for (int b = 0; b < 3; ++b) {
      Vec3 lo{u(rng), u(rng), u(rng)};
      boxes.push_back({lo, {lo.x + 10, lo.y + 10, lo.z + 10}});
    }
    SwarmState s = make_swarm(4, {u(rng), u(rng), u(rng)}, 3, boxes);
    std::vector<CommandAst> cmds;
    for (int i = 0; i < 4; ++i) {
      std::set<Modifier> m;
      if (rng() % 2) m.insert(Modifier::avoid_obstacle);
      if (rng() % 2) m.insert(Modifier::low_power);
      cmds.push_back(move({u(rng), u(rng), u(rng)}, std::uniform_real_distribution<double>(0.5, 30)(rng), m));
    }
    const double dt = std::uniform_real_distribution<double>(0.05, 2)(rng);
    SwarmParams p;
    for (int k = 0; k < 10; ++k) {
      const SwarmState n = swarm_step(s, cmds, dt, p);
      for (std::size_t i = 0; i < 4; ++i) {
        const double cap = std::min(cmds[i].speed, cmds[i].modifiers.count(Modifier::low_power) ? p.v_max / 2 : p.v_max);
        ASSERT_LE(dist(n.uavs[i].position, s.uavs[i].position), cap * dt + 1e-9);
        for (const Box& b : boxes)
          if (!b.contains(s.uavs[i].position)) ASSERT_FALSE(b.contains(n.uavs[i].position));
      }
      s = n;
    }
  }
}

TEST(Formation, ExpandAddsSlots) {
  const SwarmState s = make_swarm(3, {0, 0, -20}, 4);
  const auto e = expand_command(move({10, 10, -25}, 5, {Modifier::maintain_formation}), s);
  ASSERT_EQ(e.size(), 3u);
  EXPECT_EQ(*e[2].position, (Vec3{18, 10, -25}));
  const auto same = expand_command(move({10, 10, -25}, 5), s);
  EXPECT_EQ(*same[2].position, (Vec3{10, 10, -25}));
}

TEST(Formation, ReturnHomeAndFollow) {
  const SwarmState s0 = make_swarm(3, {0, 0, -20}, 5);
  Trace t = simulate(s0, {{0, move({10, 0, -20}, 5, {Modifier::maintain_formation})},
                          {4, [] { CommandAst c; c.verb = Verb::return_home; c.speed = 5; return c; }()}},
                     0.5, 16);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(t.back().uavs[i].position, s0.uavs[i].position);

  SwarmState s = s0;
  CommandAst f;
  f.verb = Verb::follow;
  s.uavs[0].position = {20, 0, -20};
  s = swarm_step(s, {hold(), f, f}, 100);
  EXPECT_EQ(s.uavs[1].position, (Vec3{25, 0, -20}));
  EXPECT_EQ(s.uavs[2].position, (Vec3{30, 0, -20}));
}

TEST(FormationMetrics, AnalyticExamples) {
  EXPECT_DOUBLE_EQ(formation_rms({4, 6}, 5), 1.0);
  EXPECT_EQ(formation_rms({}, 5), 0.0);

  const SwarmState s0 = make_swarm(4, {0, 0, -25}, 5);
  const Trace perfect = simulate(s0, {{0, move({10, 10, -25}, 5, {Modifier::maintain_formation})}}, 0.5, 40);
  const FormationReport r = formation_metrics(perfect, plan_of(perfect));
  EXPECT_EQ(r.trajectory_error, 0.0);
  EXPECT_LE(r.formation_rms, 1e-9);
  EXPECT_EQ(r.avoidance_success, 1.0);

  Plan shifted = plan_of(perfect);
  for (auto& row : shifted)
    for (auto& p : row) p.y += 2;
  EXPECT_NEAR(formation_metrics(perfect, shifted).trajectory_error, 2.0, 1e-12);
}

TEST(FormationMetrics, Errors) {
  const Trace t = simulate(make_swarm(2, {0, 0, -20}, 5), {}, 1, 3);
  EXPECT_THROW(formation_metrics({}, {}), RangeError);
  Plan p = plan_of(t);
  p.pop_back();
  EXPECT_THROW(formation_metrics(t, p), ShapeError);
  p = plan_of(t);
  p[1].pop_back();
  EXPECT_THROW(formation_metrics(t, p), ShapeError);
}

TEST(FormationMetrics, AvoidanceSuccess) {
  SwarmState s = make_swarm(2, {0, 0, -20}, 5, {Box{{10, -5, -30}, {20, 5, -10}}});
  const Trace t = simulate(s, {{0, move({15, 0, -20}, 5)}}, 1, 6);
  const FormationReport r = formation_metrics(t, plan_of(t));
  // Both UAVs pile up on the same face point: 2 events, 1 collision.
  EXPECT_EQ(r.avoidance_events, 2u);
  EXPECT_EQ(r.collisions, 1u);
  EXPECT_DOUBLE_EQ(r.avoidance_success, 0.5);
}

// Relative noise between two UAVs is N(0, sigma^2 I3); for spacing s the
// distance is noncentral chi with E[d] = s + sigma^2/s up to e^{-s^2/(2
// sigma^2)}, so E[(d - s)^2] = 2s^2 + 3sigma^2 - 2sE[d] = sigma^2.
TEST(FormationMetrics, NoiseRmsMatchesOracle) {
  const double sigma = 0.5, spacing = 5;
  const SwarmState s0 = make_swarm(4, {0, 0, -25}, spacing);
  const Trace clean = simulate(s0, {}, 0.1, 1000);
  const Trace noisy = simulate(s0, {}, 0.1, 1000, {}, sigma, 42);
  const FormationReport r = formation_metrics(noisy, plan_of(clean));
  EXPECT_GE(r.formation_rms, 0.3);
  EXPECT_LE(r.formation_rms, 0.7);
  // 3003 pair samples: sampling sd of the RMS is about 0.008.
  EXPECT_NEAR(r.formation_rms, sigma, 0.04);
  // Direct Monte Carlo of the same statistic, independent of the simulator.
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0, sigma);
  double acc = 0;
  const int N = 200000;
  for (int i = 0; i < N; ++i) {
    const double dx = spacing + n(rng), dy = n(rng), dz = n(rng);
    const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
    acc += (d - spacing) * (d - spacing);
  }
  EXPECT_NEAR(std::sqrt(acc / N), sigma, 0.005);
  // Per-UAV trajectory noise is 3-D with per-axis sigma/sqrt(2).
  EXPECT_NEAR(r.trajectory_error, sigma / std::sqrt(2.0) * std::sqrt(8 / std::numbers::pi), 0.02);
  // Same seed, same trace.
  const Trace again = simulate(s0, {}, 0.1, 1000, {}, sigma, 42);
  EXPECT_EQ(again.back().uavs[3].position, noisy.back().uavs[3].position);
}

TEST(Reward, Examples) {
  RewardInputs perfect;
  EXPECT_DOUBLE_EQ(reward_score(perfect, RewardWeights{}), 1.0);
  EXPECT_DOUBLE_EQ(reward_score(perfect, RewardWeights{0, 0, 0, 0}), 0.0);
  RewardInputs half = perfect;
  half.trajectory_error = kRewardE0 / 2;
  EXPECT_DOUBLE_EQ(reward_score(half, RewardWeights{}), 0.875);
  RewardInputs crash = perfect;
  crash.collisions = 3;
  EXPECT_DOUBLE_EQ(reward_components(crash).safety, 0.0);
  EXPECT_THROW(reward_score(perfect, RewardWeights{-1, 0, 0, 0}), ValidationError);
}

TEST(Reward, MonotoneProperty) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 10);
  for (int i = 0; i < 1000; ++i) {
    RewardInputs a;
    a.trajectory_error = u(rng);
    a.formation_rms = u(rng);
    a.energy_used = u(rng) * 10;
    a.collisions = static_cast<double>(rng() % 2);
    RewardWeights w{u(rng), u(rng), u(rng), u(rng)};
    RewardInputs b = a;
    b.trajectory_error += u(rng);
    EXPECT_LE(reward_score(b, w), reward_score(a, w));
    RewardInputs c = a;
    c.formation_rms += u(rng);
    EXPECT_LE(reward_score(c, w), reward_score(a, w));
  }
}

TEST(Reward, TraceOverload) {
  const SwarmState s0 = make_swarm(4, {0, 0, -25}, 5);
  const Trace t = simulate(s0, {{0, move({10, 10, -25}, 5, {Modifier::maintain_formation})}}, 0.5, 40);
  const double r = reward_score(t, plan_of(t), RewardWeights{}, 50);
  const double eff = 1 - t.back().energy_used / 50;
  EXPECT_NEAR(r, 0.25 * (1 + 1 + eff + 1), 1e-9);
}
