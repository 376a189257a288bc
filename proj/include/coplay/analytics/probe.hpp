#pragma once

#include <vector>

#include "coplay/analytics/behavior.hpp"
#include "coplay/eval/tournament.hpp"

namespace coplay::analytics {

struct ProbeOptions {
  int episodes = 100;
  int horizon = 100;  // control steps
  std::uint64_t seed = 0;
  env::EnvConfig env = eval::EvalOptions::fixed_pitch();
  bool greedy = false;
};

struct ProbeResult {
  env::ProbeSide side = env::ProbeSide::kLeft;
  int passes = 0;
  int interceptions = 0;
  std::vector<TouchCounts> per_episode;

  [[nodiscard]] io::Json to_json() const {
    io::Json eps = io::Json::array();
    for (const auto& e : per_episode) eps.push_back({{"passes", e.passes}, {"interceptions", e.interceptions}});
    return {{"side", side == env::ProbeSide::kLeft ? "left" : "right"},
            {"passes", passes},
            {"interceptions", interceptions},
            {"episodes", eps}};
  }
};

/// Plays `episodes` probe episodes of `horizon` steps from the fixed probe
/// position, `team` in blue against `opponents`, and counts passes and
/// interceptions by either team.
inline ProbeResult run_probe(const eval::Team& team, const eval::Team& opponents, env::ProbeSide side,
                             const ProbeOptions& opt = {}) {
  if (opt.episodes < 1 || opt.horizon < 1) throw std::invalid_argument("probe: episodes and horizon must be >= 1");
  ProbeResult res;
  res.side = side;
  const auto start = env::probe_reset(side, opt.env);
  for (int e = 0; e < opt.episodes; ++e) {
    std::array<agent::ControllerPtr, env::kNumPlayers> ctl;
    std::array<agent::Controller*, env::kNumPlayers> raw{};
    for (int p = 0; p < env::kNumPlayers; ++p) {
      const auto& t = env::team_of(p) == 0 ? team : opponents;
      const auto u = static_cast<std::size_t>(p);
      ctl[u] = eval::make_controller(t.members[static_cast<std::size_t>(p % 2)], opt.env, opt.greedy);
      raw[u] = ctl[u].get();
    }
    Rng rng(derive_seed(opt.seed, {0x9b0e, static_cast<std::uint64_t>(e)}));
    auto s = start;
    s.rng.seed(derive_seed(opt.seed, {0x9b0f, static_cast<std::uint64_t>(e)}));
    agent::EpisodeOptions eo;
    eo.max_steps = opt.horizon;
    const auto ep = agent::play_episode(opt.env, s, raw, rng, eo);
    const auto c = count_touch_events(ep.touches);
    res.passes += c.passes;
    res.interceptions += c.interceptions;
    res.per_episode.push_back(c);
  }
  return res;
}

}  // namespace coplay::analytics
