#pragma once

#include <cstdint>
#include <vector>

#include "privswarm/command.hpp"

namespace privswarm {

struct Box {
  Vec3 lo, hi;

  bool contains(const Vec3& p) const noexcept;  // strict interior
};

struct Uav {
  Vec3 position;
  Vec3 velocity;
  double battery = 100;  // percent
  Vec3 home;
  bool blocked = false;  // clipped by an obstacle on the last step
};

// UAV i's formation slot is (i * spacing, 0, 0) relative to the anchor, so
// adjacent UAVs are `spacing` apart in line abreast.
struct SwarmState {
  std::vector<Uav> uavs;
  double spacing = 5;
  std::vector<Box> obstacles;
  double time = 0;
  // Cumulative counters.
  std::uint64_t avoidance_events = 0;
  std::uint64_t collisions = 0;
  std::uint64_t nofly_violations = 0;
  double energy_used = 0;  // battery percent, summed over UAVs
};

struct SwarmParams {
  double v_max = kDefaultVMax;
  double default_speed = 5;       // used when a command carries speed 0
  double battery_per_metre = 0.01;
  double collision_radius = 0.5;
};

// Line formation with UAVs at anchor + slot, home = initial position.
SwarmState make_swarm(std::size_t n, const Vec3& anchor, double spacing,
                      std::vector<Box> obstacles = {});

Vec3 formation_slot(std::size_t i, double spacing) noexcept;

// Per-UAV commands for a swarm-wide command: with maintain_formation each
// UAV's position is offset by its slot, otherwise all share the target.
std::vector<CommandAst> expand_command(const CommandAst& cmd, const SwarmState& state);

// One kinematic step. Targets: move_to/scan use the command position (scan
// without one holds), hold stays, return_home goes to the UAV's home, follow
// tracks UAV 0 plus the slot offset. Speed is min(speed or default, v_max),
// halved cap under low_power. Motion into a box stops at its face and logs
// an avoidance event; with avoid_obstacle the remainder slides along the
// face. Throws ShapeError on a command count mismatch, RangeError if dt <= 0.
SwarmState swarm_step(const SwarmState& state, const std::vector<CommandAst>& commands,
                      double dt, const SwarmParams& params = {});

struct ScriptEntry {
  double time = 0;
  CommandAst command;  // swarm-wide, expanded at issue time
};

// States at t = 0, dt, ..., steps*dt (steps + 1 entries).
using Trace = std::vector<SwarmState>;

// Runs the script; a command issued at time t applies from the first step
// starting at or after t. noise_sigma perturbs the recorded positions only:
// each axis gets N(0, sigma^2 / 2), so the difference of two UAVs' noise has
// per-axis standard deviation sigma.
Trace simulate(const SwarmState& initial, const std::vector<ScriptEntry>& script, double dt,
               std::size_t steps, const SwarmParams& params = {}, double noise_sigma = 0,
               std::uint64_t seed = 0);

// Planned waypoints: per timestamp, per UAV.
using Plan = std::vector<std::vector<Vec3>>;
Plan plan_of(const Trace& trace);

// RMS of (distance - target).
double formation_rms(const std::vector<double>& distances, double target);

struct FormationReport {
  double trajectory_error = 0;  // mean |actual - planned|
  double formation_rms = 0;     // adjacent-slot pairs, every timestamp
  double avoidance_success = 1; // 1 - collisions / avoidance events
  std::uint64_t collisions = 0;
  std::uint64_t avoidance_events = 0;
  double energy_used = 0;
};

// Throws RangeError on an empty trace, ShapeError on length mismatch.
FormationReport formation_metrics(const Trace& trace, const Plan& planned);

struct RewardWeights {
  double w1 = 0.25, w2 = 0.25, w3 = 0.25, w4 = 0.25;  // each >= 0
};

inline constexpr double kRewardE0 = 5.0;  // metres
inline constexpr double kRewardF0 = 2.0;  // metres

struct RewardInputs {
  double trajectory_error = 0;
  double collisions = 0;
  double nofly_violations = 0;
  double energy_used = 0;
  double energy_budget = 100;
  double formation_rms = 0;
};

struct RewardComponents {
  double navigation, safety, efficiency, formation;
};

RewardComponents reward_components(const RewardInputs& in);
// Throws ValidationError for a negative weight.
double reward_score(const RewardInputs& in, const RewardWeights& w);
double reward_score(const Trace& trace, const Plan& planned, const RewardWeights& w,
                    double energy_budget);

}  // namespace privswarm
