#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <vector>

#include "coplay/learner/hyperparams.hpp"
#include "coplay/pbt/elo.hpp"

namespace coplay::pbt {

using learner::AgentHyperparams;
using learner::HyperBounds;

struct PbtConfig {
  int population = 4;
  double elo_k = 0.1;
  double select_threshold = 0.47;
  double p_mutate = 0.1;
  double p_perturb = 0.2;   // multiplicative scale: factors 1 - p and 1 + p
  double p_keep = 0.5;      // cross-over: chance a knob keeps the child's value
  double eligible_total = 2e5;
  double eligible_increment = 4e4;
  double burn_in = 4e4;
  double initial_rating = kInitialRating;
  HyperBounds bounds = HyperBounds::defaults();

  void validate() const {
    if (population < 4) throw std::invalid_argument("PbtConfig: population must be >= 4");
    if (!(select_threshold > 0.0 && select_threshold < 0.5)) {
      throw std::invalid_argument("PbtConfig: select_threshold must lie in (0, 0.5)");
    }
    for (double p : {p_mutate, p_keep}) {
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("PbtConfig: probabilities must lie in [0, 1]");
    }
    if (!(p_perturb >= 0.0 && p_perturb < 1.0)) throw std::invalid_argument("PbtConfig: p_perturb must lie in [0, 1)");
    if (!(elo_k >= 0.0) || !std::isfinite(initial_rating)) throw std::invalid_argument("PbtConfig: bad Elo constants");
    if (eligible_total < 0 || eligible_increment < 0 || burn_in < 0) {
      throw std::invalid_argument("PbtConfig: thresholds must be non-negative");
    }
  }
};

/// Rating and frame counters of one population member.
struct AgentRecord {
  double rating = kInitialRating;
  double frames = 0;                // learning frames since the start
  double frames_since_eligible = 0;
  double frames_since_evolved = 0;
  bool in_grace = false;            // after inheritance, until replay refills

  void add_frames(double n) {
    frames += n;
    frames_since_eligible += n;
    frames_since_evolved += n;
  }
};

struct RatingBook {
  std::vector<AgentRecord> agents;

  RatingBook() = default;
  RatingBook(int n, double initial_rating) : agents(static_cast<std::size_t>(n)) {
    for (auto& a : agents) a.rating = initial_rating;
  }

  AgentRecord& operator[](int i) { return agents.at(static_cast<std::size_t>(i)); }
  const AgentRecord& operator[](int i) const { return agents.at(static_cast<std::size_t>(i)); }
  [[nodiscard]] int size() const { return static_cast<int>(agents.size()); }

  [[nodiscard]] double total_rating() const {
    double s = 0.0;
    for (const auto& a : agents) s += a.rating;
    return s;
  }
};

/// Two agents per team; blue = players 0-1, red = players 2-3.
struct MatchTeams {
  std::array<int, 2> blue{};
  std::array<int, 2> red{};

  [[nodiscard]] std::array<int, 4> players() const { return {blue[0], blue[1], red[0], red[1]}; }
};

/// Team Elo update: each side is rated by its members' average, and every
/// member moves by the team's delta.
inline void update_team_ratings(RatingBook& book, const MatchTeams& t, int blue_goals, int red_goals, double k) {
  const double rb = 0.5 * (book[t.blue[0]].rating + book[t.blue[1]].rating);
  const double rr = 0.5 * (book[t.red[0]].rating + book[t.red[1]].rating);
  const auto [nb, nr] = update_rating(rb, rr, blue_goals, red_goals, k);
  const double db = nb - rb, dr = nr - rr;
  for (int i : t.blue) book[i].rating += db;
  for (int i : t.red) book[i].rating += dr;
}

inline bool eligible(const AgentRecord& a, const PbtConfig& cfg) {
  return a.frames >= cfg.eligible_total && a.frames_since_eligible >= cfg.eligible_increment;
}

inline bool parent_ready(const AgentRecord& a, const PbtConfig& cfg) {
  return a.frames_since_evolved >= cfg.burn_in;
}

/// Draws one parent-ready candidate uniformly among the others and returns it
/// if agent i's predicted win rate against it is below the threshold.
inline std::optional<int> select(int i, const RatingBook& book, const PbtConfig& cfg, Rng& rng) {
  std::vector<int> pool;
  for (int j = 0; j < book.size(); ++j)
    if (j != i && parent_ready(book[j], cfg)) pool.push_back(j);
  if (pool.empty()) return std::nullopt;
  const int j = pool[uniform_index(rng, pool.size())];
  if (predicted_winrate(book[i].rating, book[j].rating) < cfg.select_threshold) return j;
  return std::nullopt;
}

using KnobMask = std::array<bool, AgentHyperparams::kNumKnobs>;

/// Cross-over: knob k keeps the child's value where mask[k] is true and takes
/// the parent's otherwise.
inline AgentHyperparams crossover(const AgentHyperparams& child, const AgentHyperparams& parent, const KnobMask& keep) {
  AgentHyperparams out = child;
  for (int k = 0; k < AgentHyperparams::kNumKnobs; ++k)
    if (!keep[static_cast<std::size_t>(k)]) out.knob(k) = parent.knob(k);
  return out;
}

inline KnobMask draw_keep_mask(double p_keep, Rng& rng) {
  KnobMask m{};
  for (auto& b : m) b = bernoulli(rng, p_keep);
  return m;
}

struct Mutation {
  int knob = 0;
  double factor = 1.0;
  double before = 0.0;
  double after = 0.0;
};

/// Each knob not frozen is multiplied by 1 - p_perturb or 1 + p_perturb
/// (equally likely) with probability p_mutate, then clamped into bounds.
inline std::vector<Mutation> mutate(AgentHyperparams& h, const PbtConfig& cfg, Rng& rng,
                                    const KnobMask& frozen = KnobMask{}) {
  std::vector<Mutation> out;
  for (int k = 0; k < AgentHyperparams::kNumKnobs; ++k) {
    if (frozen[static_cast<std::size_t>(k)]) continue;
    if (!bernoulli(rng, cfg.p_mutate)) continue;
    const double factor = bernoulli(rng, 0.5) ? 1.0 + cfg.p_perturb : 1.0 - cfg.p_perturb;
    const double before = h.knob(k);
    h.knob(k) = std::clamp(before * factor, cfg.bounds.lo[static_cast<std::size_t>(k)],
                           cfg.bounds.hi[static_cast<std::size_t>(k)]);
    out.push_back({k, factor, before, h.knob(k)});
  }
  return out;
}

/// Four distinct agents drawn uniformly without replacement; the first two
/// play blue.
inline MatchTeams schedule_match(int population, Rng& rng) {
  if (population < 4) throw std::invalid_argument("schedule_match: population must be >= 4");
  std::vector<int> ids(static_cast<std::size_t>(population));
  for (int i = 0; i < population; ++i) ids[static_cast<std::size_t>(i)] = i;
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t j = i + uniform_index(rng, ids.size() - i);
    std::swap(ids[i], ids[j]);
  }
  return {{ids[0], ids[1]}, {ids[2], ids[3]}};
}

}  // namespace coplay::pbt
