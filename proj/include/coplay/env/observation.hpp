#pragma once

#include <array>
#include <cmath>

#include "coplay/env/types.hpp"

namespace coplay::env {

// Raw observation layout (40 values), all egocentric:
//   [0, 5)    proprioception: velocity in own frame (2), sin/cos of heading
//             relative to the attack direction (2), angular velocity (1)
//   [5, 10)   ball: position (2), velocity relative to self (2), spin (1)
//   [10, 22)  task: own goal centre (2), opponent goal centre (2), corners
//             opp-left, opp-right, own-left, own-right (8)
//   [22, 28)  teammate block
//   [28, 34)  opponent 0 block
//   [34, 40)  opponent 1 block
// Each player block: position (2), velocity relative to self (2), sin/cos of
// heading relative to own heading (2).
inline constexpr int kObsDim = 40;
inline constexpr int kProprioOffset = 0;
inline constexpr int kBallOffset = 5;
inline constexpr int kTaskOffset = 10;
inline constexpr int kNonPlayerDim = 22;
inline constexpr int kPlayerBlockDim = 6;
inline constexpr int kTeammateOffset = 22;
inline constexpr int kOpponentOffset = 28;
inline constexpr int kNumOtherPlayers = 3;

using Observation = Eigen::Matrix<double, kObsDim, 1>;
using Observations = std::array<Observation, kNumPlayers>;

/// Geometric snapshot used to build observations. Unlike EnvState it carries
/// explicit landmark positions so a rigid motion of the whole scene can be
/// expressed (observations must not change under one).
struct Scene {
  struct Body {
    Vec2 pos = Vec2::Zero();
    Vec2 vel = Vec2::Zero();
    double heading = 0.0;
    double ang_vel = 0.0;
  };
  std::array<Body, kNumPlayers> players;
  Body ball;  // heading unused, ang_vel holds spin
  std::array<Vec2, 2> goal_centers;  // goal defended by team t
  // Pitch-frame order: (+L/2,+W/2), (+L/2,-W/2), (-L/2,+W/2), (-L/2,-W/2).
  std::array<Vec2, 4> corners;

  /// Applies a proper rigid motion p -> R(angle) p + shift.
  [[nodiscard]] Scene transformed(double angle, const Vec2& shift) const {
    const Eigen::Rotation2Dd r(angle);
    Scene out = *this;
    auto move = [&](Body& b) {
      b.pos = r * b.pos + shift;
      b.vel = r * b.vel;
      b.heading = wrap_angle(b.heading + angle);
    };
    for (auto& p : out.players) move(p);
    move(out.ball);
    for (auto& g : out.goal_centers) g = r * g + shift;
    for (auto& c : out.corners) c = r * c + shift;
    return out;
  }
};

inline Scene make_scene(const EnvState& s) {
  Scene sc;
  for (int i = 0; i < kNumPlayers; ++i) {
    const auto& p = s.players[static_cast<std::size_t>(i)];
    sc.players[static_cast<std::size_t>(i)] = {p.pos, p.vel, p.heading, p.ang_vel};
  }
  sc.ball = {s.ball.pos, s.ball.vel, 0.0, s.ball.spin};
  sc.goal_centers = {s.goal_center(0), s.goal_center(1)};
  const double hl = 0.5 * s.length, hw = 0.5 * s.width;
  sc.corners = {Vec2(hl, hw), Vec2(hl, -hw), Vec2(-hl, hw), Vec2(-hl, -hw)};
  return sc;
}

/// Indices of the teammate followed by the two opponents (ascending).
inline std::array<int, kNumOtherPlayers> others_of(int player) {
  const int team = team_of(player);
  const int mate = team * kPlayersPerTeam + (1 - player % kPlayersPerTeam);
  const int opp = (1 - team) * kPlayersPerTeam;
  return {mate, opp, opp + 1};
}

inline Observation observe(const Scene& sc, int player) {
  const int team = team_of(player);
  const auto& self = sc.players[static_cast<std::size_t>(player)];
  const Eigen::Rotation2Dd to_self(-self.heading);
  auto rel_pos = [&](const Vec2& p) -> Vec2 { return to_self * (p - self.pos); };
  auto rel_vel = [&](const Vec2& v) -> Vec2 { return to_self * (v - self.vel); };

  const Vec2 axis = sc.goal_centers[static_cast<std::size_t>(1 - team)] -
                    sc.goal_centers[static_cast<std::size_t>(team)];
  const double attack_angle = std::atan2(axis.y(), axis.x());

  Observation o;
  const Vec2 v_self = to_self * self.vel;
  const double rel_heading = self.heading - attack_angle;
  o.segment<5>(kProprioOffset) << v_self.x(), v_self.y(), std::sin(rel_heading),
      std::cos(rel_heading), self.ang_vel;

  const Vec2 bp = rel_pos(sc.ball.pos), bv = rel_vel(sc.ball.vel);
  o.segment<5>(kBallOffset) << bp.x(), bp.y(), bv.x(), bv.y(), sc.ball.ang_vel;

  static constexpr std::array<std::array<int, 4>, 2> corner_order = {{{0, 1, 2, 3}, {3, 2, 1, 0}}};
  const Vec2 own = rel_pos(sc.goal_centers[static_cast<std::size_t>(team)]);
  const Vec2 opp = rel_pos(sc.goal_centers[static_cast<std::size_t>(1 - team)]);
  o.segment<4>(kTaskOffset) << own.x(), own.y(), opp.x(), opp.y();
  for (int k = 0; k < 4; ++k) {
    const Vec2 c = rel_pos(sc.corners[static_cast<std::size_t>(
        corner_order[static_cast<std::size_t>(team)][static_cast<std::size_t>(k)])]);
    o.segment<2>(kTaskOffset + 4 + 2 * k) = c;
  }

  const auto others = others_of(player);
  for (int k = 0; k < kNumOtherPlayers; ++k) {
    const auto& b = sc.players[static_cast<std::size_t>(others[static_cast<std::size_t>(k)])];
    const Vec2 p = rel_pos(b.pos), v = rel_vel(b.vel);
    const double dh = b.heading - self.heading;
    o.segment<6>(kTeammateOffset + kPlayerBlockDim * k) << p.x(), p.y(), v.x(), v.y(),
        std::sin(dh), std::cos(dh);
  }
  return o;
}

inline Observations observe_all(const EnvState& s) {
  const Scene sc = make_scene(s);
  Observations out;
  for (int i = 0; i < kNumPlayers; ++i) out[static_cast<std::size_t>(i)] = observe(sc, i);
  return out;
}

}  // namespace coplay::env
