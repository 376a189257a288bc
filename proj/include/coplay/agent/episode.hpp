#pragma once

#include <array>
#include <optional>

#include "coplay/agent/controller.hpp"
#include "coplay/env/trace.hpp"

namespace coplay::agent {

struct EpisodeOptions {
  int max_steps = 0;        // 0: run to the environment's own cap
  bool record_trace = false;
  int episode_index = 0;    // stamped into trace records
};

struct EpisodeResult {
  std::array<int, 2> score{};
  int steps = 0;
  bool goal = false;
  std::vector<env::TouchEvent> touches;
  std::array<double, env::kNumPlayers> vel_to_ball_sum{};  // summed shaping reward per player
  env::Trace trace;

  /// +1 blue win, -1 red win, 0 draw.
  [[nodiscard]] int outcome() const { return (score[0] > score[1]) - (score[0] < score[1]); }
  [[nodiscard]] int goal_difference() const { return score[0] - score[1]; }
};

/// Plays one episode from `start`. Player i is driven by `players[i]`;
/// `rng` feeds the controllers' action sampling.
inline EpisodeResult play_episode(const env::EnvConfig& cfg, env::EnvState start,
                                  const std::array<Controller*, env::kNumPlayers>& players, Rng& rng,
                                  const EpisodeOptions& opt = {}) {
  EpisodeResult res;
  for (int i = 0; i < env::kNumPlayers; ++i) players[static_cast<std::size_t>(i)]->begin_episode(i);
  env::EnvState s = std::move(start);
  env::Observations obs = env::observe_all(s);
  while (!s.terminal && (opt.max_steps <= 0 || res.steps < opt.max_steps)) {
    env::Actions acts;
    for (int i = 0; i < env::kNumPlayers; ++i) {
      const auto u = static_cast<std::size_t>(i);
      acts[u] = to_env_action(players[u]->act(s, i, obs[u], rng));
    }
    auto r = env::step(s, acts, cfg);
    ++res.steps;
    const bool over = r.terminal || (opt.max_steps > 0 && res.steps >= opt.max_steps);
    const bool terminal = r.events.goal.has_value();
    for (int i = 0; i < env::kNumPlayers; ++i) {
      const auto u = static_cast<std::size_t>(i);
      players[u]->observe(r.rewards[u], r.obs[u], terminal, over);
      res.vel_to_ball_sum[u] += r.rewards[u][env::kVelToBall];
    }
    res.touches.insert(res.touches.end(), r.events.touches.begin(), r.events.touches.end());
    if (r.events.goal) res.goal = true;
    if (opt.record_trace) res.trace.push_back(env::make_trace_record(opt.episode_index, s, acts, r, cfg));
    s = std::move(r.state);
    obs = r.obs;
  }
  res.score = s.score;
  return res;
}

}  // namespace coplay::agent
