#pragma once

#include <memory>
#include <string>

#include "coplay/agent/nets.hpp"
#include "coplay/env/soccer.hpp"

namespace coplay::agent {

/// Drives one player for the length of an episode. A controller instance is
/// owned by one player slot; recurrent controllers keep their state here.
class Controller {
 public:
  virtual ~Controller() = default;

  virtual void begin_episode(int /*player*/) {}

  /// Raw action (drive, turn, kick); the environment clamps it.
  virtual Eigen::Vector3d act(const env::EnvState& state, int player, const env::Observation& obs, Rng& rng) = 0;

  /// Outcome of the last act(): reward, next observation, whether the next
  /// state is terminal and whether the episode is over (terminal or time cap).
  virtual void observe(const env::RewardVector& /*reward*/, const env::Observation& /*next*/, bool /*terminal*/,
                       bool /*episode_over*/) {}
};

using ControllerPtr = std::unique_ptr<Controller>;

inline env::Action to_env_action(const Eigen::Vector3d& a) { return {a(0), a(1), a(2)}; }

/// Stands still.
class PassiveController : public Controller {
 public:
  Eigen::Vector3d act(const env::EnvState&, int, const env::Observation&, Rng&) override {
    return Eigen::Vector3d::Zero();
  }
};

/// Uniform over the valid action box.
class RandomController : public Controller {
 public:
  Eigen::Vector3d act(const env::EnvState&, int, const env::Observation&, Rng& rng) override {
    return {uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0), uniform01(rng)};
  }
};

/// Hand-written dribbler: runs to a point behind the ball on the line from
/// the target through the ball, then pushes through it with a full kick.
/// The target is the opponent goal or, in passing mode, the teammate.
class ScriptedController : public Controller {
 public:
  enum class Target { kGoal, kTeammate };
  explicit ScriptedController(Target target = Target::kGoal, env::EnvConfig cfg = {}) : target_(target), cfg_(cfg) {}

  Eigen::Vector3d act(const env::EnvState& s, int player, const env::Observation&, Rng&) override {
    const auto& me = s.players[static_cast<std::size_t>(player)];
    const int team = env::team_of(player);
    const env::Vec2 aim = target_ == Target::kGoal
                              ? s.goal_center(1 - team)
                              : s.players[static_cast<std::size_t>(player ^ 1)].pos;
    env::Vec2 dir = aim - s.ball.pos;
    if (dir.norm() < 1e-9) dir = env::Vec2(team == 0 ? 1.0 : -1.0, 0.0);
    dir.normalize();
    const double contact = cfg_.player_radius + cfg_.ball_radius;
    const env::Vec2 behind = s.ball.pos - dir * (contact + 0.3);
    const env::Vec2 to_behind = behind - me.pos;
    // Approach from behind; once lined up, run through the ball.
    const env::Vec2 to_ball = s.ball.pos - me.pos;
    const bool lined_up = to_ball.norm() < contact + 0.6 && to_ball.normalized().dot(dir) > 0.8;
    const env::Vec2 go = lined_up ? dir : (to_behind.norm() > 0.2 ? to_behind.normalized() : dir);
    const double want = std::atan2(go.y(), go.x());
    const double err = env::wrap_angle(want - me.heading);
    const double turn = std::clamp(3.0 * err - 0.3 * me.ang_vel, -1.0, 1.0);
    const double drive = std::abs(err) < 0.6 ? 1.0 : 0.1;
    return {drive, turn, lined_up ? 1.0 : 0.0};
  }

 private:
  Target target_;
  env::EnvConfig cfg_;
};

/// Acts with a policy network. Samples from the Gaussian head unless
/// `greedy`, in which case it plays the mean.
class PolicyController : public Controller {
 public:
  PolicyController(std::shared_ptr<const PolicyNet> policy, bool greedy = false)
      : policy_(std::move(policy)), greedy_(greedy) {
    if (!policy_) throw std::invalid_argument("PolicyController: null policy");
  }

  void begin_episode(int) override { state_ = policy_->initial_state(1); }

  Eigen::Vector3d act(const env::EnvState&, int, const env::Observation& obs, Rng& rng) override {
    if (state_.empty() && policy_->recurrent()) state_ = policy_->initial_state(1);
    state_before_ = state_;
    auto out = policy_->forward(obs, state_);
    state_ = std::move(out.next_state);
    last_mean_ = out.dist.mean.col(0);
    last_stddev_ = out.dist.stddev.col(0);
    if (greedy_) return last_mean_;
    Eigen::Vector3d a;
    for (int i = 0; i < 3; ++i) a(i) = last_mean_(i) + last_stddev_(i) * normal(rng);
    return a;
  }

  [[nodiscard]] const PolicyNet& policy() const { return *policy_; }

 protected:
  std::shared_ptr<const PolicyNet> policy_;
  bool greedy_;
  nn::StackState state_, state_before_;
  Eigen::Vector3d last_mean_ = Eigen::Vector3d::Zero(), last_stddev_ = Eigen::Vector3d::Ones();
};

/// Named controller kinds usable as tournament entrants without a
/// checkpoint: "passive", "random", "scripted", "passer".
inline ControllerPtr make_stub_controller(const std::string& kind, const env::EnvConfig& cfg) {
  if (kind == "passive") return std::make_unique<PassiveController>();
  if (kind == "random") return std::make_unique<RandomController>();
  if (kind == "scripted") return std::make_unique<ScriptedController>(ScriptedController::Target::kGoal, cfg);
  if (kind == "passer") return std::make_unique<ScriptedController>(ScriptedController::Target::kTeammate, cfg);
  throw std::invalid_argument("unknown stub controller '" + kind + "'");
}

inline bool is_stub_kind(const std::string& kind) {
  return kind == "passive" || kind == "random" || kind == "scripted" || kind == "passer";
}

}  // namespace coplay::agent
