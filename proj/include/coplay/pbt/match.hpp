#pragma once

#include <functional>
#include <memory>
#include <string>

#include "coplay/agent/episode.hpp"
#include "coplay/learner/replay.hpp"
#include "coplay/pbt/config.hpp"

namespace coplay::pbt {

/// Everything a worker needs to play one training match. The networks are
/// read-only snapshots taken when the match was scheduled.
struct MatchJob {
  std::uint64_t id = 0;
  std::uint64_t round = 0;
  MatchTeams teams;
  std::uint64_t env_seed = 0;
  std::uint64_t act_seed = 0;
  std::array<std::shared_ptr<const agent::PolicyNet>, env::kNumPlayers> policies;
  std::array<std::shared_ptr<const agent::CriticNet>, env::kNumPlayers> critics;
  std::array<std::uint64_t, env::kNumPlayers> versions{};
};

struct MatchOutcome {
  std::array<int, 2> score{};
  int steps = 0;
  std::array<std::vector<learner::SnippetPtr>, env::kNumPlayers> snippets;
  std::array<double, env::kNumPlayers> vel_to_ball{};  // mean per step
  std::string error;  // non-empty: the match failed and is discarded
};

using MatchRunner = std::function<MatchOutcome(const MatchJob&, const TrainConfig&)>;

/// Acts with the agent's policy and cuts its experience into snippets. A
/// recurrent critic is stepped along the taken actions so that its state at
/// each snippet start can be stored.
class LearningController : public agent::PolicyController {
 public:
  LearningController(std::shared_ptr<const agent::PolicyNet> policy, std::shared_ptr<const agent::CriticNet> critic,
                     int agent_id, int unroll, std::uint64_t version, std::vector<learner::SnippetPtr>& sink)
      : PolicyController(std::move(policy)), critic_(std::move(critic)), builder_(agent_id, unroll),
        version_(version), sink_(sink) {}

  void begin_episode(int player) override {
    PolicyController::begin_episode(player);
    critic_state_ = critic_->initial_state(1);
  }

  Eigen::Vector3d act(const env::EnvState& s, int player, const env::Observation& obs, Rng& rng) override {
    action_ = PolicyController::act(s, player, obs, rng);
    if (!builder_.open()) builder_.begin(obs, state_before_, critic_state_, version_);
    if (critic_->recurrent()) critic_state_ = critic_->forward(obs, action_, critic_state_).next_state;
    return action_;
  }

  void observe(const env::RewardVector& reward, const env::Observation& next, bool terminal, bool over) override {
    if (auto s = builder_.add(action_, reward, last_mean_, last_stddev_, next, terminal, over)) sink_.push_back(s);
  }

 private:
  std::shared_ptr<const agent::CriticNet> critic_;
  learner::SnippetBuilder builder_;
  std::uint64_t version_;
  std::vector<learner::SnippetPtr>& sink_;
  nn::StackState critic_state_;
  Eigen::Vector3d action_ = Eigen::Vector3d::Zero();
};

/// Plays one episode of the training environment with all four players
/// learning.
inline MatchOutcome play_training_match(const MatchJob& job, const TrainConfig& cfg) {
  MatchOutcome out;
  const auto ids = job.teams.players();
  std::array<std::unique_ptr<LearningController>, env::kNumPlayers> ctl;
  std::array<agent::Controller*, env::kNumPlayers> raw{};
  for (int p = 0; p < env::kNumPlayers; ++p) {
    const auto u = static_cast<std::size_t>(p);
    ctl[u] = std::make_unique<LearningController>(job.policies[u], job.critics[u], ids[u], cfg.learner.unroll,
                                                  job.versions[u], out.snippets[u]);
    raw[u] = ctl[u].get();
  }
  Rng rng(job.act_seed);
  const auto ep = agent::play_episode(cfg.env, env::reset(job.env_seed, cfg.env), raw, rng);
  out.score = ep.score;
  out.steps = ep.steps;
  for (std::size_t p = 0; p < env::kNumPlayers; ++p) out.vel_to_ball[p] = ep.vel_to_ball_sum[p] / std::max(1, ep.steps);
  return out;
}

}  // namespace coplay::pbt
