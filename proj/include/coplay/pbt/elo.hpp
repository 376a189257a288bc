#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

namespace coplay::pbt {

inline constexpr double kInitialRating = 1000.0;

/// Logistic win probability of a player rated r_i against r_j.
inline double predicted_winrate(double r_i, double r_j) {
  return 1.0 / (1.0 + std::pow(10.0, (r_j - r_i) / 400.0));
}

/// Match score from the two sides' results: 1 win, 0.5 draw, 0 loss.
inline double match_score(double s_i, double s_j) {
  return (static_cast<double>((s_i > s_j) - (s_i < s_j)) + 1.0) / 2.0;
}

/// One iterative Elo step. Returns the updated pair; the sum is unchanged.
inline std::pair<double, double> update_rating(double r_i, double r_j, double s_i, double s_j, double k) {
  if (!std::isfinite(r_i) || !std::isfinite(r_j) || !std::isfinite(s_i) || !std::isfinite(s_j) || !std::isfinite(k)) {
    throw std::invalid_argument("update_rating: non-finite input");
  }
  const double delta = k * (match_score(s_i, s_j) - predicted_winrate(r_i, r_j));
  return {r_i + delta, r_j - delta};
}

}  // namespace coplay::pbt
