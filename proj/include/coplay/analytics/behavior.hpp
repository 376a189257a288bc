#pragma once

#include <array>
#include <vector>

#include "coplay/env/trace.hpp"

namespace coplay::analytics {

inline constexpr double kSpreadDistance = 5.0;   // m
inline constexpr double kLongEventDistance = 10.0;  // m

/// Passes and interceptions from a time-ordered touch sequence. Consecutive
/// touches by distinct players of one team are a pass, by players of
/// opposing teams an interception (credited to the team that took the
/// ball). The long variants need more than 10 m of ball travel between the
/// two touches. Repeated touches by the same player are not events.
struct TouchCounts {
  int touches = 0;
  int passes = 0;
  int interceptions = 0;
  int passes_10m = 0;
  int interceptions_10m = 0;
  std::array<int, 2> team_passes{};
  std::array<int, 2> team_interceptions{};

  TouchCounts& operator+=(const TouchCounts& o) {
    touches += o.touches;
    passes += o.passes;
    interceptions += o.interceptions;
    passes_10m += o.passes_10m;
    interceptions_10m += o.interceptions_10m;
    for (std::size_t t = 0; t < 2; ++t) {
      team_passes[t] += o.team_passes[t];
      team_interceptions[t] += o.team_interceptions[t];
    }
    return *this;
  }
};

inline TouchCounts count_touch_events(const std::vector<env::TouchEvent>& touches) {
  TouchCounts c;
  c.touches = static_cast<int>(touches.size());
  for (std::size_t i = 1; i < touches.size(); ++i) {
    const auto& a = touches[i - 1];
    const auto& b = touches[i];
    if (a.player == b.player) continue;
    const bool long_range = (b.ball_pos - a.ball_pos).norm() > kLongEventDistance;
    if (a.team == b.team) {
      ++c.passes;
      ++c.team_passes[static_cast<std::size_t>(b.team)];
      c.passes_10m += long_range;
    } else {
      ++c.interceptions;
      ++c.team_interceptions[static_cast<std::size_t>(b.team)];
      c.interceptions_10m += long_range;
    }
  }
  return c;
}

struct BehaviorStats {
  int episodes = 0;
  int steps = 0;
  bool empty = true;
  double vel_to_ball = 0.0;     // mean over steps and players
  double spread_fraction = 0.0; // share of (step, team) pairs with teammates >= 5 m apart
  TouchCounts events;

  [[nodiscard]] io::Json to_json() const {
    return {{"episodes", episodes},
            {"steps", steps},
            {"empty", empty},
            {"vel_to_ball", vel_to_ball},
            {"spread_fraction", spread_fraction},
            {"touches", events.touches},
            {"passes", events.passes},
            {"interceptions", events.interceptions},
            {"passes_10m", events.passes_10m},
            {"interceptions_10m", events.interceptions_10m},
            {"team_passes", events.team_passes},
            {"team_interceptions", events.team_interceptions}};
  }
};

struct TraceStats {
  BehaviorStats total;
  std::vector<BehaviorStats> per_episode;
};

/// Behaviour statistics of a trace, per episode and aggregated. Touch
/// sequences restart at episode boundaries.
inline TraceStats extract_stats(const env::Trace& trace) {
  TraceStats out;
  if (trace.empty()) return out;
  struct Acc {
    int episode = 0;
    int steps = 0;
    double vel = 0.0;
    int spread = 0;
    std::vector<env::TouchEvent> touches;
  };
  std::vector<Acc> eps;
  for (const auto& r : trace) {
    if (eps.empty() || eps.back().episode != r.episode) {
      eps.emplace_back();
      eps.back().episode = r.episode;
    }
    auto& a = eps.back();
    ++a.steps;
    for (const auto& rw : r.rewards) a.vel += rw[env::kVelToBall];
    for (int t = 0; t < 2; ++t) {
      const auto& p0 = r.players[static_cast<std::size_t>(2 * t)];
      const auto& p1 = r.players[static_cast<std::size_t>(2 * t + 1)];
      a.spread += (p0.pos - p1.pos).norm() >= kSpreadDistance;
    }
    a.touches.insert(a.touches.end(), r.touches.begin(), r.touches.end());
  }
  double vel = 0.0;
  int spread = 0;
  for (const auto& a : eps) {
    BehaviorStats s;
    s.episodes = 1;
    s.steps = a.steps;
    s.empty = false;
    s.vel_to_ball = a.vel / (env::kNumPlayers * a.steps);
    s.spread_fraction = static_cast<double>(a.spread) / (2 * a.steps);
    s.events = count_touch_events(a.touches);
    out.per_episode.push_back(s);
    out.total.steps += a.steps;
    out.total.events += s.events;
    vel += a.vel;
    spread += a.spread;
  }
  out.total.episodes = static_cast<int>(eps.size());
  out.total.empty = false;
  out.total.vel_to_ball = vel / (env::kNumPlayers * out.total.steps);
  out.total.spread_fraction = static_cast<double>(spread) / (2 * out.total.steps);
  return out;
}

}  // namespace coplay::analytics
