#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <numbers>
#include <utility>

#include "coplay/env/observation.hpp"
#include "coplay/env/types.hpp"

namespace coplay::env {

// ---------------------------------------------------------------------------
// Episode start

inline EnvState reset(std::uint64_t seed, const EnvConfig& cfg) {
  cfg.validate();
  EnvState s;
  s.rng.seed(seed);
  const double scale = uniform(s.rng, cfg.scale_min, cfg.scale_max);
  s.length = cfg.base_length * scale;
  s.width = cfg.base_width * scale;
  const double hl = 0.5 * s.length, hw = 0.5 * s.width;
  for (int i = 0; i < kNumPlayers; ++i) {
    auto& p = s.players[static_cast<std::size_t>(i)];
    p.team = team_of(i);
    p.pos = Vec2(uniform(s.rng, -hl, hl), uniform(s.rng, -hw, hw));
    p.heading = uniform(s.rng, -std::numbers::pi, std::numbers::pi);
  }
  s.ball.pos = Vec2(uniform(s.rng, -hl, hl), uniform(s.rng, -hw, hw));
  return s;
}

enum class ProbeSide { kLeft, kRight };

/// Fixed coordination probe: blue0 holds the ball in its own half facing
/// upfield, both opponents stand side by side at the centre spot, and blue1
/// waits on the chosen flank (left = +y from blue's point of view).
inline EnvState probe_reset(ProbeSide side, const EnvConfig& cfg) {
  cfg.validate();
  EnvState s;
  s.rng.seed(0x9e0be5eedULL);
  s.length = cfg.base_length;
  s.width = cfg.base_width;
  const double flank = side == ProbeSide::kLeft ? 1.0 : -1.0;
  for (int i = 0; i < kNumPlayers; ++i) s.players[static_cast<std::size_t>(i)].team = team_of(i);
  s.players[0].pos = Vec2(-0.2 * s.length, 0.0);
  s.players[0].heading = 0.0;
  s.players[1].pos = Vec2(-0.05 * s.length, flank * 0.3 * s.width);
  s.players[1].heading = 0.0;
  const double stagger = 2.0 * cfg.player_radius + 0.2;
  s.players[2].pos = Vec2(0.0, -stagger);
  s.players[3].pos = Vec2(0.0, stagger);
  s.players[2].heading = std::numbers::pi;
  s.players[3].heading = std::numbers::pi;
  s.ball.pos = s.players[0].pos + Vec2(cfg.player_radius + cfg.ball_radius + 0.05, 0.0);
  return s;
}

// ---------------------------------------------------------------------------
// Shaping rewards

struct ShapingRewards {
  double vel_to_ball = 0.0;
  double vel_ball_to_goal = 0.0;
};

inline ShapingRewards shaping_rewards(const EnvState& s, int player) {
  const auto& p = s.players[static_cast<std::size_t>(player)];
  ShapingRewards r;
  const Vec2 to_ball = s.ball.pos - p.pos;
  const double d = to_ball.norm();
  if (d > 0.0) r.vel_to_ball = std::max(0.0, p.vel.dot(to_ball / d));
  const Vec2 to_goal = s.goal_center(1 - team_of(player)) - s.ball.pos;
  const double g = to_goal.norm();
  if (g > 0.0) r.vel_ball_to_goal = s.ball.vel.dot(to_goal / g);
  return r;
}

// ---------------------------------------------------------------------------
// Contacts and throw-ins

struct ContactResult {
  bool contact = false;
  double ball_speed_change = 0.0;
};

/// Resolves a player-ball overlap: positional separation (mass weighted) and,
/// if the bodies approach, a restitution impulse along the contact normal.
/// The ball's share of the impulse is scaled by 1 + kick_gain * kick.
inline ContactResult resolve_player_ball(PlayerState& p, BallState& b, double kick,
                                         const EnvConfig& cfg) {
  ContactResult out;
  const double reach = cfg.player_radius + cfg.ball_radius;
  Vec2 d = b.pos - p.pos;
  double dist = d.norm();
  if (dist >= reach) return out;
  out.contact = true;
  const Vec2 n = dist > 1e-12 ? Vec2(d / dist) : Vec2(std::cos(p.heading), std::sin(p.heading));
  const double inv_mp = 1.0 / cfg.player_mass, inv_mb = 1.0 / cfg.ball_mass;
  const double overlap = reach - dist;
  p.pos -= n * (overlap * inv_mp / (inv_mp + inv_mb));
  b.pos += n * (overlap * inv_mb / (inv_mp + inv_mb));
  const Vec2 v_rel = b.vel - p.vel;
  const double vn = v_rel.dot(n);
  if (vn < 0.0) {
    const double j = -(1.0 + cfg.restitution_player_ball) * vn / (inv_mp + inv_mb);
    const double ball_j = j * (1.0 + cfg.kick_gain * kick);
    b.vel += n * (ball_j * inv_mb);
    p.vel -= n * (j * inv_mp);
    const Vec2 vt = v_rel - vn * n;
    b.spin += 0.5 * (n.x() * vt.y() - n.y() * vt.x()) / cfg.ball_radius;
    out.ball_speed_change = ball_j * inv_mb;
  }
  return out;
}

/// Point where the ball left the pitch: its centre clamped to the pitch lines.
inline Vec2 crossing_point(const EnvState& s) {
  return Vec2(std::clamp(s.ball.pos.x(), -0.5 * s.length, 0.5 * s.length),
              std::clamp(s.ball.pos.y(), -0.5 * s.width, 0.5 * s.width));
}

struct ThrowInResult {
  EnvState state;
  bool applied = false;     // false: ball was in bounds, state unchanged
  Vec2 crossing = Vec2::Zero();
  double displacement = 0.0;
};

/// Puts an out-of-bounds ball back a random distance in [throw_in_min,
/// throw_in_max] from its crossing point towards the pitch centre, at rest.
inline ThrowInResult throw_in(const EnvState& s, const EnvConfig& cfg) {
  ThrowInResult r{s};
  if (s.ball_in_bounds()) return r;
  r.applied = true;
  r.crossing = crossing_point(s);
  r.displacement = uniform(r.state.rng, cfg.throw_in_min, cfg.throw_in_max);
  const double cn = r.crossing.norm();
  const Vec2 dir = cn > 0.0 ? Vec2(-r.crossing / cn) : Vec2(1.0, 0.0);
  r.state.ball.pos = r.crossing + r.displacement * dir;
  r.state.ball.vel.setZero();
  r.state.ball.spin = 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Transition

struct StepResult {
  EnvState state;
  Observations obs;
  std::array<RewardVector, kNumPlayers> rewards{};
  StepEvents events;
  bool terminal = false;
};

namespace detail {

inline void confine_player(PlayerState& p, const EnvState& s, const EnvConfig& cfg) {
  const double lim_x = 0.5 * s.length + cfg.border - cfg.player_radius;
  const double lim_y = 0.5 * s.width + cfg.border - cfg.player_radius;
  if (p.pos.x() > lim_x) { p.pos.x() = lim_x; p.vel.x() = std::min(0.0, p.vel.x()); }
  if (p.pos.x() < -lim_x) { p.pos.x() = -lim_x; p.vel.x() = std::max(0.0, p.vel.x()); }
  if (p.pos.y() > lim_y) { p.pos.y() = lim_y; p.vel.y() = std::min(0.0, p.vel.y()); }
  if (p.pos.y() < -lim_y) { p.pos.y() = -lim_y; p.vel.y() = std::max(0.0, p.vel.y()); }
}

inline void bounce_ball(BallState& b, const EnvState& s, const EnvConfig& cfg) {
  const double e = cfg.restitution_ball_wall;
  const double lim_x = 0.5 * s.length + cfg.border - cfg.ball_radius;
  const double lim_y = 0.5 * s.width + cfg.border - cfg.ball_radius;
  if (std::abs(b.pos.x()) > lim_x) {
    b.pos.x() = std::copysign(lim_x, b.pos.x());
    if (b.vel.x() * b.pos.x() > 0) b.vel.x() = -e * b.vel.x();
  }
  if (std::abs(b.pos.y()) > lim_y) {
    b.pos.y() = std::copysign(lim_y, b.pos.y());
    if (b.vel.y() * b.pos.y() > 0) b.vel.y() = -e * b.vel.y();
  }
}

}  // namespace detail

/// Advances one control interval with semi-implicit Euler substeps.
/// Player-player contacts are ignored. Terminates on a goal or at max_steps.
inline StepResult step(const EnvState& prev, const Actions& actions, const EnvConfig& cfg) {
  StepResult r;
  r.state = prev;
  EnvState& s = r.state;
  if (prev.terminal) {
    r.terminal = true;
    r.obs = observe_all(s);
    return r;
  }
  Actions act;
  for (int i = 0; i < kNumPlayers; ++i) {
    const auto& a = actions[static_cast<std::size_t>(i)];
    if (!a.finite()) {
      r.events.invalid_action_players.push_back(i);
      act[static_cast<std::size_t>(i)] = Action{};
    } else {
      act[static_cast<std::size_t>(i)] = a.clamped();
    }
  }

  const double dt = cfg.substep_dt();
  const double p_damp = std::exp(-cfg.player_damping * dt);
  const double w_damp = std::exp(-cfg.player_ang_damping * dt);
  const double b_damp = std::exp(-cfg.ball_damping * dt);
  const double s_damp = std::exp(-cfg.ball_spin_damping * dt);
  const double goal_half = s.goal_half_width(cfg);

  std::array<double, kNumPlayers> touch_dv{};
  std::array<Vec2, kNumPlayers> touch_pos;
  std::array<bool, kNumPlayers> touched{};

  for (int sub = 0; sub < cfg.substeps && !s.terminal; ++sub) {
    for (int i = 0; i < kNumPlayers; ++i) {
      auto& p = s.players[static_cast<std::size_t>(i)];
      const auto& a = act[static_cast<std::size_t>(i)];
      const Vec2 fwd(std::cos(p.heading), std::sin(p.heading));
      p.vel = (p.vel + fwd * (a.drive * cfg.player_max_accel * dt)) * p_damp;
      p.ang_vel = (p.ang_vel + a.turn * cfg.player_max_ang_accel * dt) * w_damp;
      p.heading = wrap_angle(p.heading + p.ang_vel * dt);
      p.pos += p.vel * dt;
      detail::confine_player(p, s, cfg);
    }
    s.ball.vel *= b_damp;
    s.ball.spin *= s_damp;
    const Vec2 ball_before = s.ball.pos;
    s.ball.pos += s.ball.vel * dt;

    for (int i = 0; i < kNumPlayers; ++i) {
      auto& p = s.players[static_cast<std::size_t>(i)];
      const Vec2 at = s.ball.pos;
      const auto c = resolve_player_ball(p, s.ball, act[static_cast<std::size_t>(i)].kick, cfg);
      if (c.ball_speed_change > 0.0) {
        if (!touched[static_cast<std::size_t>(i)]) touch_pos[static_cast<std::size_t>(i)] = at;
        touched[static_cast<std::size_t>(i)] = true;
        touch_dv[static_cast<std::size_t>(i)] += c.ball_speed_change;
      }
    }
    detail::bounce_ball(s.ball, s, cfg);

    const double hl = 0.5 * s.length;
    if (std::abs(s.ball.pos.x()) > hl) {
      // Interpolate the line crossing to decide between goal mouth and byline.
      const double bx = ball_before.x(), by = ball_before.y();
      const double line = std::copysign(hl, s.ball.pos.x());
      const double t = std::abs(s.ball.pos.x() - bx) > 0 ? (line - bx) / (s.ball.pos.x() - bx) : 1.0;
      const double y_cross = by + std::clamp(t, 0.0, 1.0) * (s.ball.pos.y() - by);
      if (std::abs(y_cross) < goal_half && std::abs(bx) <= hl) {
        const int scorer = s.ball.pos.x() > 0 ? 0 : 1;
        s.terminal = true;
        s.score[static_cast<std::size_t>(scorer)] += 1;
        r.events.goal = GoalEvent{s.step + 1, (s.step + 1) * cfg.control_dt, scorer};
        break;
      }
    }
    if (!s.ball_in_bounds()) {
      auto t = throw_in(s, cfg);
      s = std::move(t.state);
      r.events.throw_ins += 1;
    }
  }

  s.step += 1;
  if (s.step >= cfg.max_steps) s.terminal = true;

  for (int i = 0; i < kNumPlayers; ++i) {
    if (touched[static_cast<std::size_t>(i)] &&
        touch_dv[static_cast<std::size_t>(i)] >= cfg.touch_speed_change) {
      r.events.touches.push_back(
          {s.step, s.step * cfg.control_dt, i, team_of(i), touch_pos[static_cast<std::size_t>(i)]});
    }
  }

  for (int i = 0; i < kNumPlayers; ++i) {
    auto& rw = r.rewards[static_cast<std::size_t>(i)];
    rw.fill(0.0);
    if (r.events.goal) {
      if (r.events.goal->scoring_team == team_of(i)) rw[kGoal] = 1.0;
      else rw[kConcede] = -1.0;
    }
    const auto sh = shaping_rewards(s, i);
    rw[kVelToBall] = sh.vel_to_ball;
    rw[kVelBallToGoal] = sh.vel_ball_to_goal;
  }
  r.terminal = s.terminal;
  r.obs = observe_all(s);
  return r;
}

// ---------------------------------------------------------------------------
// Symmetry helpers

/// Reflects the state across the halfway line (x -> -x) and swaps the teams,
/// so player i becomes player (i + 2) mod 4.
inline EnvState mirror_halfway(const EnvState& s) {
  EnvState m = s;
  for (int i = 0; i < kNumPlayers; ++i) {
    const auto& p = s.players[static_cast<std::size_t>(i)];
    auto& q = m.players[static_cast<std::size_t>((i + kPlayersPerTeam) % kNumPlayers)];
    q.pos = Vec2(-p.pos.x(), p.pos.y());
    q.vel = Vec2(-p.vel.x(), p.vel.y());
    q.heading = wrap_angle(std::numbers::pi - p.heading);
    q.ang_vel = -p.ang_vel;
    q.team = 1 - p.team;
  }
  m.ball.pos = Vec2(-s.ball.pos.x(), s.ball.pos.y());
  m.ball.vel = Vec2(-s.ball.vel.x(), s.ball.vel.y());
  m.ball.spin = -s.ball.spin;
  m.score = {s.score[1], s.score[0]};
  return m;
}

/// Reflects the state across the long axis (y -> -y); no relabelling.
inline EnvState reflect_long_axis(const EnvState& s) {
  EnvState m = s;
  for (auto& p : m.players) {
    p.pos.y() = -p.pos.y();
    p.vel.y() = -p.vel.y();
    p.heading = wrap_angle(-p.heading);
    p.ang_vel = -p.ang_vel;
  }
  m.ball.pos.y() = -m.ball.pos.y();
  m.ball.vel.y() = -m.ball.vel.y();
  m.ball.spin = -m.ball.spin;
  return m;
}

inline bool states_bitwise_equal(const EnvState& a, const EnvState& b) {
  auto same = [](double x, double y) { return std::memcmp(&x, &y, sizeof(double)) == 0; };
  for (int i = 0; i < kNumPlayers; ++i) {
    const auto& p = a.players[static_cast<std::size_t>(i)];
    const auto& q = b.players[static_cast<std::size_t>(i)];
    if (!same(p.pos.x(), q.pos.x()) || !same(p.pos.y(), q.pos.y()) || !same(p.vel.x(), q.vel.x()) ||
        !same(p.vel.y(), q.vel.y()) || !same(p.heading, q.heading) || !same(p.ang_vel, q.ang_vel) ||
        p.team != q.team)
      return false;
  }
  return same(a.ball.pos.x(), b.ball.pos.x()) && same(a.ball.pos.y(), b.ball.pos.y()) &&
         same(a.ball.vel.x(), b.ball.vel.x()) && same(a.ball.vel.y(), b.ball.vel.y()) &&
         same(a.ball.spin, b.ball.spin) && same(a.length, b.length) && same(a.width, b.width) &&
         a.step == b.step && a.terminal == b.terminal && a.score == b.score && a.rng == b.rng;
}

}  // namespace coplay::env
