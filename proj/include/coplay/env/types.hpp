#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "coplay/core/random.hpp"

namespace coplay::env {

using Vec2 = Eigen::Vector2d;

inline constexpr int kNumPlayers = 4;
inline constexpr int kPlayersPerTeam = 2;
inline constexpr int kActionDim = 3;
inline constexpr int kNumChannels = 4;

inline constexpr int team_of(int player) { return player / kPlayersPerTeam; }

/// Reward channel indices.
enum Channel : int { kGoal = 0, kConcede = 1, kVelToBall = 2, kVelBallToGoal = 3 };

inline const char* channel_name(int c) {
  static constexpr const char* names[kNumChannels] = {"goal", "concede", "vel_to_ball",
                                                      "vel_ball_to_goal"};
  return names[c];
}

/// Physical and episode constants. Lengths in metres, times in seconds.
struct EnvConfig {
  double base_length = 24.0;  // x extent
  double base_width = 18.0;   // y extent
  double scale_min = 20.0 / 24.0;
  double scale_max = 28.0 / 24.0;
  double control_dt = 0.05;
  int substeps = 10;
  int max_steps = 900;
  double border = 1.5;
  double goal_width_fraction = 0.3;

  double player_radius = 0.4;
  double player_mass = 10.0;
  double player_max_accel = 8.0;      // m/s^2 at |drive| = 1
  double player_damping = 2.0;        // 1/s, linear
  double player_max_ang_accel = 40.0; // rad/s^2 at |turn| = 1
  double player_ang_damping = 8.0;    // 1/s

  double ball_radius = 0.2;
  double ball_mass = 0.5;
  double ball_damping = 0.4;       // 1/s
  double ball_spin_damping = 1.0;  // 1/s
  double restitution_player_ball = 0.6;
  double restitution_ball_wall = 0.7;
  double kick_gain = 2.0;  // ball impulse multiplier is 1 + kick_gain * kick

  double throw_in_min = 0.5;
  double throw_in_max = 1.5;
  double possession_margin = 0.3;    // possession radius = r_player + r_ball + margin
  double touch_speed_change = 0.5;   // m/s of ball velocity change per control step

  [[nodiscard]] double substep_dt() const { return control_dt / substeps; }
  [[nodiscard]] double possession_radius() const {
    return player_radius + ball_radius + possession_margin;
  }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument(std::string("EnvConfig: ") + name + " must be positive");
      }
    };
    positive(base_length, "base_length");
    positive(base_width, "base_width");
    positive(scale_min, "scale_min");
    positive(scale_max, "scale_max");
    positive(control_dt, "control_dt");
    positive(border, "border");
    positive(goal_width_fraction, "goal_width_fraction");
    positive(player_radius, "player_radius");
    positive(player_mass, "player_mass");
    positive(player_max_accel, "player_max_accel");
    positive(player_max_ang_accel, "player_max_ang_accel");
    positive(ball_radius, "ball_radius");
    positive(ball_mass, "ball_mass");
    positive(throw_in_min, "throw_in_min");
    positive(throw_in_max, "throw_in_max");
    positive(touch_speed_change, "touch_speed_change");
    if (player_damping < 0 || player_ang_damping < 0 || ball_damping < 0 || ball_spin_damping < 0 ||
        kick_gain < 0 || possession_margin < 0) {
      throw std::invalid_argument("EnvConfig: damping, kick gain and margins must be non-negative");
    }
    if (restitution_player_ball < 0 || restitution_player_ball > 1 || restitution_ball_wall < 0 ||
        restitution_ball_wall > 1) {
      throw std::invalid_argument("EnvConfig: restitution must lie in [0, 1]");
    }
    if (substeps < 1 || max_steps < 1) {
      throw std::invalid_argument("EnvConfig: substeps and max_steps must be >= 1");
    }
    if (scale_min > scale_max || throw_in_min > throw_in_max) {
      throw std::invalid_argument("EnvConfig: min must not exceed max");
    }
    if (std::abs(base_length * 3.0 - base_width * 4.0) > 1e-9 * base_length) {
      throw std::invalid_argument("EnvConfig: pitch aspect ratio must be 4:3");
    }
    if (goal_width_fraction >= 1.0) {
      throw std::invalid_argument("EnvConfig: goal_width_fraction must be < 1");
    }
  }
};

/// Per-player command. Clamped to [-1,1], [-1,1], [0,1] before integration.
struct Action {
  double drive = 0.0;
  double turn = 0.0;
  double kick = 0.0;

  [[nodiscard]] bool finite() const {
    return std::isfinite(drive) && std::isfinite(turn) && std::isfinite(kick);
  }
  [[nodiscard]] Action clamped() const {
    return {std::clamp(drive, -1.0, 1.0), std::clamp(turn, -1.0, 1.0), std::clamp(kick, 0.0, 1.0)};
  }
};

using Actions = std::array<Action, kNumPlayers>;

struct PlayerState {
  Vec2 pos = Vec2::Zero();
  Vec2 vel = Vec2::Zero();
  double heading = 0.0;  // rad, pitch frame
  double ang_vel = 0.0;
  int team = 0;
};

struct BallState {
  Vec2 pos = Vec2::Zero();
  Vec2 vel = Vec2::Zero();
  double spin = 0.0;
};

/// Complete simulator state. Team 0 ("blue", players 0-1) defends the goal at
/// x = -length/2 and attacks +x; team 1 ("red", players 2-3) the reverse.
struct EnvState {
  std::array<PlayerState, kNumPlayers> players;
  BallState ball;
  double length = 24.0;
  double width = 18.0;
  int step = 0;
  bool terminal = false;
  std::array<int, 2> score = {0, 0};
  Rng rng;

  [[nodiscard]] double time(const EnvConfig& cfg) const { return step * cfg.control_dt; }
  [[nodiscard]] double goal_half_width(const EnvConfig& cfg) const {
    return 0.5 * cfg.goal_width_fraction * width;
  }
  /// Centre of the goal defended by `team`.
  [[nodiscard]] Vec2 goal_center(int team) const {
    return Vec2(team == 0 ? -0.5 * length : 0.5 * length, 0.0);
  }
  [[nodiscard]] bool ball_in_bounds() const {
    return std::abs(ball.pos.x()) <= 0.5 * length && std::abs(ball.pos.y()) <= 0.5 * width;
  }
};

/// Reward channels for one player at one control step.
using RewardVector = std::array<double, kNumChannels>;

struct TouchEvent {
  int step = 0;
  double time = 0.0;
  int player = 0;
  int team = 0;
  Vec2 ball_pos = Vec2::Zero();
};

struct GoalEvent {
  int step = 0;
  double time = 0.0;
  int scoring_team = 0;
};

struct StepEvents {
  std::vector<TouchEvent> touches;
  std::optional<GoalEvent> goal;
  int throw_ins = 0;
  std::vector<int> invalid_action_players;
};

inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  return a;
}

}  // namespace coplay::env
