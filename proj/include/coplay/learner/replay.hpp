#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <vector>

#include "coplay/core/random.hpp"
#include "coplay/env/observation.hpp"
#include "coplay/learner/hyperparams.hpp"
#include "coplay/netcore/layers.hpp"

namespace coplay::learner {

using nn::Matrix;
using nn::StackState;

/// Up to k consecutive steps of one player's experience within one episode.
/// Columns of `obs` are x_0..x_len (the last one is the bootstrap
/// observation); the other per-step matrices have `len` columns.
struct TrajectorySnippet {
  int agent_id = -1;
  std::uint64_t behavior_version = 0;  // policy parameter version that acted
  Matrix obs;          // 40 x (len + 1)
  Matrix actions;      // 3 x len
  Matrix rewards;      // 4 x len
  Matrix behavior_mean, behavior_stddev;  // 3 x len
  bool terminal = false;  // x_len is a terminal state
  StackState policy_state;  // recurrent state before step 0 (one column)
  StackState critic_state;
  std::uint64_t sequence = 0;  // assigned by the replay buffer

  [[nodiscard]] int length() const { return static_cast<int>(actions.cols()); }

  void validate() const {
    const auto len = actions.cols();
    if (len < 1) throw std::invalid_argument("snippet: empty");
    if (obs.rows() != env::kObsDim || obs.cols() != len + 1 || actions.rows() != env::kActionDim ||
        rewards.rows() != env::kNumChannels || rewards.cols() != len || behavior_mean.cols() != len ||
        behavior_stddev.cols() != len || behavior_mean.rows() != env::kActionDim ||
        behavior_stddev.rows() != env::kActionDim) {
      throw std::invalid_argument("snippet: inconsistent shapes");
    }
  }
};

using SnippetPtr = std::shared_ptr<const TrajectorySnippet>;

/// Accumulates one player's steps and cuts them into snippets of length k.
/// Each snippet starts where the previous one ended, so consecutive snippets
/// share their boundary observation.
class SnippetBuilder {
 public:
  SnippetBuilder(int agent_id, int k) : agent_id_(agent_id), k_(k) {
    if (k < 1) throw std::invalid_argument("SnippetBuilder: k must be >= 1");
  }

  /// Must be called before the first step of a snippet with the state the
  /// networks had before observing `obs`.
  void begin(const env::Observation& obs, const StackState& policy_state, const StackState& critic_state,
             std::uint64_t behavior_version) {
    obs_.clear();
    actions_.clear();
    rewards_.clear();
    mean_.clear();
    std_.clear();
    obs_.push_back(obs);
    policy_state_ = policy_state;
    critic_state_ = critic_state;
    version_ = behavior_version;
    open_ = true;
  }

  [[nodiscard]] bool open() const { return open_; }
  [[nodiscard]] int steps() const { return static_cast<int>(actions_.size()); }

  /// Records a_t, r_t and the behavior density, then x_{t+1}. Returns a
  /// finished snippet when k steps were collected or the episode ended;
  /// the builder is then closed and must be re-opened with begin().
  SnippetPtr add(const Eigen::Vector3d& action, const env::RewardVector& reward, const Eigen::Vector3d& mean,
                 const Eigen::Vector3d& stddev, const env::Observation& next_obs, bool terminal,
                 bool episode_over) {
    if (!open_) throw std::logic_error("SnippetBuilder: add() before begin()");
    actions_.push_back(action);
    rewards_.push_back(Eigen::Map<const Eigen::Vector4d>(reward.data()));
    mean_.push_back(mean);
    std_.push_back(stddev);
    obs_.push_back(next_obs);
    if (steps() < k_ && !episode_over) return nullptr;
    auto s = std::make_shared<TrajectorySnippet>();
    const auto len = static_cast<Eigen::Index>(actions_.size());
    s->agent_id = agent_id_;
    s->behavior_version = version_;
    s->obs.resize(env::kObsDim, len + 1);
    s->actions.resize(env::kActionDim, len);
    s->rewards.resize(env::kNumChannels, len);
    s->behavior_mean.resize(env::kActionDim, len);
    s->behavior_stddev.resize(env::kActionDim, len);
    for (Eigen::Index t = 0; t <= len; ++t) s->obs.col(t) = obs_[static_cast<std::size_t>(t)];
    for (Eigen::Index t = 0; t < len; ++t) {
      const auto u = static_cast<std::size_t>(t);
      s->actions.col(t) = actions_[u];
      s->rewards.col(t) = rewards_[u];
      s->behavior_mean.col(t) = mean_[u];
      s->behavior_stddev.col(t) = std_[u];
    }
    s->terminal = terminal;
    s->policy_state = policy_state_;
    s->critic_state = critic_state_;
    open_ = false;
    return s;
  }

 private:
  int agent_id_;
  int k_;
  bool open_ = false;
  std::uint64_t version_ = 0;
  std::vector<env::Observation> obs_;
  std::vector<Eigen::Vector3d> actions_, mean_, std_;
  std::vector<Eigen::Vector4d> rewards_;
  StackState policy_state_, critic_state_;
};

/// Bounded FIFO of snippets. Sampling is uniform over the `recency` most
/// recently inserted snippets still held. All members are thread-safe.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity, std::size_t recency = 0)
      : capacity_(capacity), recency_(recency == 0 ? capacity : recency) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  }

  void add(SnippetPtr s) {
    std::lock_guard lock(mu_);
    auto copy = std::make_shared<TrajectorySnippet>(*s);
    copy->sequence = inserted_++;
    items_.push_back(std::move(copy));
    while (items_.size() > capacity_) items_.pop_front();
  }

  [[nodiscard]] std::vector<SnippetPtr> sample(std::size_t n, Rng& rng) const {
    std::lock_guard lock(mu_);
    std::vector<SnippetPtr> out;
    const std::size_t window = std::min(items_.size(), recency_);
    if (window == 0) return out;
    const std::size_t first = items_.size() - window;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(items_[first + uniform_index(rng, window)]);
    return out;
  }

  void clear() {
    std::lock_guard lock(mu_);
    items_.clear();
  }

  [[nodiscard]] std::size_t size() const {
    std::lock_guard lock(mu_);
    return items_.size();
  }
  [[nodiscard]] std::size_t capacity() const { return capacity_; }
  [[nodiscard]] std::size_t recency() const { return recency_; }
  /// Total snippets ever inserted.
  [[nodiscard]] std::uint64_t inserted() const {
    std::lock_guard lock(mu_);
    return inserted_;
  }
  /// Oldest sequence number that sampling may return.
  [[nodiscard]] std::uint64_t oldest_servable() const {
    std::lock_guard lock(mu_);
    return inserted_ - std::min<std::uint64_t>(inserted_, std::min(items_.size(), recency_));
  }

 private:
  std::size_t capacity_;
  std::size_t recency_;
  mutable std::mutex mu_;
  std::deque<SnippetPtr> items_;
  std::uint64_t inserted_ = 0;
};

}  // namespace coplay::learner
