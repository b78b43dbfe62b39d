#include "privswarm/swarm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "privswarm/errors.hpp"

namespace privswarm {

namespace {

Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Vec3 operator*(double s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }
double norm(const Vec3& a) { return std::sqrt(a.x * a.x + a.y * a.y + a.z * a.z); }

double& axis(Vec3& v, int i) { return i == 0 ? v.x : i == 1 ? v.y : v.z; }
double axis(const Vec3& v, int i) { return i == 0 ? v.x : i == 1 ? v.y : v.z; }

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  int axis = -1;
  double face = 0;
};

// Earliest entry of the segment p + t*d, t in [0, 1], into a box interior.
Hit first_hit(const Vec3& p, const Vec3& d, const std::vector<Box>& boxes) {
  Hit best;
  for (const Box& b : boxes) {
    if (b.contains(p)) continue;  // already inside: counted as a violation, not clipped
    double t0 = -std::numeric_limits<double>::infinity(), t1 = std::numeric_limits<double>::infinity();
    int enter_axis = -1;
    double enter_face = 0;
    bool miss = false;
    for (int i = 0; i < 3 && !miss; ++i) {
      double pi = axis(p, i), di = axis(d, i), lo = axis(b.lo, i), hi = axis(b.hi, i);
      if (di == 0) {
        if (pi <= lo || pi >= hi) miss = true;
        continue;
      }
      double ta = (lo - pi) / di, tb = (hi - pi) / di;
      double face = di > 0 ? lo : hi;
      if (ta > tb) std::swap(ta, tb);
      if (ta > t0) {
        t0 = ta;
        enter_axis = i;
        enter_face = face;
      }
      t1 = std::min(t1, tb);
    }
    if (miss || enter_axis < 0 || t0 >= t1 || t0 < 0 || t0 >= 1) continue;
    if (t0 < best.t) best = {t0, enter_axis, enter_face};
  }
  return best;
}

Vec3 target_of(const CommandAst& c, const SwarmState& s, std::size_t i) {
  const Uav& u = s.uavs[i];
  switch (c.verb) {
    case Verb::move_to:
    case Verb::scan:
      return c.position ? *c.position : u.position;
    case Verb::hold:
      return u.position;
    case Verb::return_home:
      return u.home;
    case Verb::follow:
      if (i == 0) return u.position;
      return s.uavs[0].position + formation_slot(i, s.spacing);
  }
  return u.position;
}

}  // namespace

bool Box::contains(const Vec3& p) const noexcept {
  return p.x > lo.x && p.x < hi.x && p.y > lo.y && p.y < hi.y && p.z > lo.z && p.z < hi.z;
}

Vec3 formation_slot(std::size_t i, double spacing) noexcept {
  return {static_cast<double>(i) * spacing, 0, 0};
}

SwarmState make_swarm(std::size_t n, const Vec3& anchor, double spacing, std::vector<Box> obstacles) {
  if (!(spacing > 0) || !std::isfinite(spacing)) throw ValidationError("spacing must be > 0");
  SwarmState s;
  s.spacing = spacing;
  s.obstacles = std::move(obstacles);
  for (std::size_t i = 0; i < n; ++i) {
    Uav u;
    u.position = anchor + formation_slot(i, spacing);
    u.home = u.position;
    s.uavs.push_back(u);
  }
  return s;
}

std::vector<CommandAst> expand_command(const CommandAst& cmd, const SwarmState& state) {
  std::vector<CommandAst> out(state.uavs.size(), cmd);
  if (cmd.modifiers.count(Modifier::maintain_formation) && cmd.position) {
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i].position = *cmd.position + formation_slot(i, state.spacing);
  }
  return out;
}

SwarmState swarm_step(const SwarmState& state, const std::vector<CommandAst>& commands, double dt,
                      const SwarmParams& params) {
  if (!(dt > 0)) throw RangeError("dt must be > 0");
  if (commands.size() != state.uavs.size())
    throw ShapeError("expected " + std::to_string(state.uavs.size()) + " commands, got " +
                     std::to_string(commands.size()));
  SwarmState next = state;
  next.time = state.time + dt;
  for (std::size_t i = 0; i < state.uavs.size(); ++i) {
    const CommandAst& c = commands[i];
    const Uav& u = state.uavs[i];
    Uav& v = next.uavs[i];
    double cap = params.v_max;
    if (c.modifiers.count(Modifier::low_power)) cap *= 0.5;
    double speed = std::min(c.speed > 0 ? c.speed : params.default_speed, cap);

    Vec3 delta = target_of(c, state, i) - u.position;
    double dist = norm(delta);
    double reach = speed * dt;
    Vec3 d = dist > reach ? (reach / dist) * delta : delta;

    bool clipped = false;
    Vec3 p = u.position;
    Hit h = first_hit(p, d, state.obstacles);
    if (h.axis >= 0) {
      clipped = true;
      Vec3 rest = (1 - h.t) * d;
      p = p + h.t * d;
      axis(p, h.axis) = h.face;
      if (c.modifiers.count(Modifier::avoid_obstacle)) {
        axis(rest, h.axis) = 0;
        Hit h2 = first_hit(p, rest, state.obstacles);
        if (h2.axis >= 0) {
          p = p + h2.t * rest;
          axis(p, h2.axis) = h2.face;
        } else {
          p = p + rest;
        }
      }
    } else {
      p = p + d;
    }

    double flown = norm(p - u.position);
    double used = std::min(u.battery, flown * params.battery_per_metre);
    v.position = p;
    v.velocity = (1 / dt) * (p - u.position);
    v.battery = u.battery - used;
    v.blocked = clipped;
    next.energy_used += used;
    if (clipped && !u.blocked) ++next.avoidance_events;
    for (const Box& b : state.obstacles)
      if (b.contains(p)) ++next.nofly_violations;
  }
  // A collision is a pair entering the collision radius.
  for (std::size_t i = 0; i < next.uavs.size(); ++i)
    for (std::size_t j = i + 1; j < next.uavs.size(); ++j) {
      bool now = norm(next.uavs[i].position - next.uavs[j].position) < params.collision_radius;
      bool before = norm(state.uavs[i].position - state.uavs[j].position) < params.collision_radius;
      if (now && !before) ++next.collisions;
    }
  return next;
}

Trace simulate(const SwarmState& initial, const std::vector<ScriptEntry>& script, double dt,
               std::size_t steps, const SwarmParams& params, double noise_sigma, std::uint64_t seed) {
  if (!(dt > 0)) throw RangeError("dt must be > 0");
  if (noise_sigma < 0) throw RangeError("noise_sigma must be >= 0");
  std::vector<ScriptEntry> order = script;
  std::stable_sort(order.begin(), order.end(),
                   [](const ScriptEntry& a, const ScriptEntry& b) { return a.time < b.time; });

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, noise_sigma / std::sqrt(2.0));
  auto record = [&](const SwarmState& s) {
    SwarmState r = s;
    if (noise_sigma > 0)
      for (Uav& u : r.uavs) u.position = u.position + Vec3{noise(rng), noise(rng), noise(rng)};
    return r;
  };

  Trace trace;
  trace.reserve(steps + 1);
  SwarmState s = initial;
  trace.push_back(record(s));
  std::vector<CommandAst> active(s.uavs.size());  // default-constructed: hold
  std::size_t next_cmd = 0;
  for (std::size_t k = 0; k < steps; ++k) {
    double t = static_cast<double>(k) * dt;
    while (next_cmd < order.size() && order[next_cmd].time <= t + 1e-9)
      active = expand_command(order[next_cmd++].command, s);
    s = swarm_step(s, active, dt, params);
    trace.push_back(record(s));
  }
  return trace;
}

Plan plan_of(const Trace& trace) {
  Plan p;
  p.reserve(trace.size());
  for (const SwarmState& s : trace) {
    std::vector<Vec3> row;
    for (const Uav& u : s.uavs) row.push_back(u.position);
    p.push_back(std::move(row));
  }
  return p;
}

double formation_rms(const std::vector<double>& distances, double target) {
  if (distances.empty()) return 0;
  double acc = 0;
  for (double d : distances) acc += (d - target) * (d - target);
  return std::sqrt(acc / static_cast<double>(distances.size()));
}

FormationReport formation_metrics(const Trace& trace, const Plan& planned) {
  if (trace.empty()) throw RangeError("empty trace");
  if (planned.size() != trace.size())
    throw ShapeError("plan has " + std::to_string(planned.size()) + " timestamps, trace has " +
                     std::to_string(trace.size()));
  FormationReport r;
  double err = 0;
  std::size_t n_err = 0;
  std::vector<double> dists;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    const auto& uavs = trace[k].uavs;
    if (planned[k].size() != uavs.size())
      throw ShapeError("plan row " + std::to_string(k) + " has " + std::to_string(planned[k].size()) +
                       " UAVs, trace has " + std::to_string(uavs.size()));
    for (std::size_t i = 0; i < uavs.size(); ++i) {
      err += norm(uavs[i].position - planned[k][i]);
      ++n_err;
    }
    for (std::size_t i = 0; i + 1 < uavs.size(); ++i)
      dists.push_back(norm(uavs[i + 1].position - uavs[i].position));
  }
  const SwarmState& last = trace.back();
  r.trajectory_error = n_err ? err / static_cast<double>(n_err) : 0;
  r.formation_rms = formation_rms(dists, last.spacing);
  r.collisions = last.collisions;
  r.avoidance_events = last.avoidance_events;
  r.avoidance_success =
      last.avoidance_events ? 1.0 - static_cast<double>(last.collisions) /
                                        static_cast<double>(last.avoidance_events)
                            : 1.0;
  r.energy_used = last.energy_used;
  return r;
}

RewardComponents reward_components(const RewardInputs& in) {
  auto c01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
  RewardComponents c;
  c.navigation = 1 - c01(in.trajectory_error / kRewardE0);
  c.safety = 1 - c01(in.collisions + in.nofly_violations);
  c.efficiency = in.energy_budget > 0 ? 1 - c01(in.energy_used / in.energy_budget) : 0;
  c.formation = 1 - c01(in.formation_rms / kRewardF0);
  return c;
}

double reward_score(const RewardInputs& in, const RewardWeights& w) {
  if (w.w1 < 0 || w.w2 < 0 || w.w3 < 0 || w.w4 < 0)
    throw ValidationError("reward weights must be >= 0");
  RewardComponents c = reward_components(in);
  return w.w1 * c.navigation + w.w2 * c.safety + w.w3 * c.efficiency + w.w4 * c.formation;
}

double reward_score(const Trace& trace, const Plan& planned, const RewardWeights& w,
                    double energy_budget) {
  FormationReport r = formation_metrics(trace, planned);
  RewardInputs in;
  in.trajectory_error = r.trajectory_error;
  in.collisions = static_cast<double>(r.collisions);
  in.nofly_violations = static_cast<double>(trace.back().nofly_violations);
  in.energy_used = r.energy_used;
  in.energy_budget = energy_budget;
  in.formation_rms = r.formation_rms;
  return reward_score(in, w);
}

}  // namespace privswarm
