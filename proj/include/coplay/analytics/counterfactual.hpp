#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "coplay/agent/nets.hpp"
#include "coplay/env/trace.hpp"

namespace coplay::analytics {

/// Observation parts that can be replaced, relative to the acting player.
enum class FeatureSubset { kBallPosition, kTeammatePosition, kOpponent0Position, kOpponent1Position };

inline const std::vector<FeatureSubset>& all_feature_subsets() {
  static const std::vector<FeatureSubset> all = {FeatureSubset::kBallPosition, FeatureSubset::kTeammatePosition,
                                                 FeatureSubset::kOpponent0Position,
                                                 FeatureSubset::kOpponent1Position};
  return all;
}

inline const char* subset_name(FeatureSubset f) {
  switch (f) {
    case FeatureSubset::kBallPosition: return "ball";
    case FeatureSubset::kTeammatePosition: return "teammate";
    case FeatureSubset::kOpponent0Position: return "opponent0";
    case FeatureSubset::kOpponent1Position: return "opponent1";
  }
  return "?";
}

inline FeatureSubset parse_subset(const std::string& s) {
  for (auto f : all_feature_subsets())
    if (s == subset_name(f)) return f;
  throw std::invalid_argument("unknown feature subset '" + s + "' (ball, teammate, opponent0, opponent1)");
}

/// Copy of `s` with the chosen object moved to `pos`.
inline env::EnvState with_position(env::EnvState s, int player, FeatureSubset f, const env::Vec2& pos) {
  const auto others = env::others_of(player);
  switch (f) {
    case FeatureSubset::kBallPosition: s.ball.pos = pos; break;
    case FeatureSubset::kTeammatePosition: s.players[static_cast<std::size_t>(others[0])].pos = pos; break;
    case FeatureSubset::kOpponent0Position: s.players[static_cast<std::size_t>(others[1])].pos = pos; break;
    case FeatureSubset::kOpponent1Position: s.players[static_cast<std::size_t>(others[2])].pos = pos; break;
  }
  return s;
}

/// KL(N(m1, diag s1^2) || N(m2, diag s2^2)).
inline double gaussian_kl(const Eigen::VectorXd& m1, const Eigen::VectorXd& s1, const Eigen::VectorXd& m2,
                          const Eigen::VectorXd& s2) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < m1.size(); ++i) {
    const double d = m1(i) - m2(i);
    kl += std::log(s2(i) / s1(i)) + (s1(i) * s1(i) + d * d) / (2.0 * s2(i) * s2(i)) - 0.5;
  }
  return kl;
}

struct CounterfactualOptions {
  int alternatives = 10;
  std::uint64_t seed = 0;
  int player = 0;
  bool reverse = false;  // KL(counterfactual || true) instead
};

/// Divergence between the policy at `s` and at `s` with the subset moved to `pos`.
inline double counterfactual_kl(const agent::PolicyNet& policy, const env::EnvState& s, int player, FeatureSubset f,
                                const env::Vec2& pos, bool reverse = false) {
  const auto a = policy.forward(env::observe(env::make_scene(s), player), {});
  const auto b = policy.forward(env::observe(env::make_scene(with_position(s, player, f, pos)), player), {});
  const Eigen::VectorXd m0 = a.dist.mean.col(0), s0 = a.dist.stddev.col(0);
  const Eigen::VectorXd m1 = b.dist.mean.col(0), s1 = b.dist.stddev.col(0);
  return reverse ? gaussian_kl(m1, s1, m0, s0) : gaussian_kl(m0, s0, m1, s1);
}

struct CounterfactualResult {
  double mean = 0.0;
  std::vector<double> per_step;  // mean over alternatives at each trace record
};

/// Mean KL(pi(.|x) || pi(.|x')) over trace steps and `alternatives` uniform
/// relocations of the subset within the pitch.
inline CounterfactualResult counterfactual_divergence(const agent::PolicyNet& policy, const env::Trace& trace,
                                                      FeatureSubset f, const CounterfactualOptions& opt = {}) {
  if (policy.recurrent()) {
    throw std::invalid_argument("counterfactual divergence is undefined for a recurrent policy");
  }
  if (opt.alternatives < 1) throw std::invalid_argument("alternatives must be >= 1");
  if (opt.player < 0 || opt.player >= env::kNumPlayers) throw std::invalid_argument("player out of range");
  CounterfactualResult res;
  if (trace.empty()) return res;
  const auto k = static_cast<Eigen::Index>(opt.alternatives);
  double total = 0.0;
  for (std::size_t t = 0; t < trace.size(); ++t) {
    const auto s = env::state_from_record(trace[t]);
    Rng rng(derive_seed(opt.seed, {static_cast<std::uint64_t>(trace[t].episode),
                                   static_cast<std::uint64_t>(trace[t].step)}));
    // One forward pass per observation: batched products are not bitwise
    // column-independent, and ignored features must give exactly zero.
    const auto base = policy.forward(env::observe(env::make_scene(s), opt.player), {});
    const Eigen::VectorXd m0 = base.dist.mean.col(0), s0 = base.dist.stddev.col(0);
    const double hl = 0.5 * s.length, hw = 0.5 * s.width;
    double step = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      const env::Vec2 pos(uniform(rng, -hl, hl), uniform(rng, -hw, hw));
      const auto out =
          policy.forward(env::observe(env::make_scene(with_position(s, opt.player, f, pos)), opt.player), {});
      const Eigen::VectorXd m1 = out.dist.mean.col(0), s1 = out.dist.stddev.col(0);
      step += opt.reverse ? gaussian_kl(m1, s1, m0, s0) : gaussian_kl(m0, s0, m1, s1);
    }
    res.per_step.push_back(step / static_cast<double>(k));
    total += res.per_step.back();
  }
  res.mean = total / static_cast<double>(trace.size());
  return res;
}

}  // namespace coplay::analytics
