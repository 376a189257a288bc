#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "coplay/eval/tournament.hpp"

namespace coplay::eval {

struct EloFitOptions {
  double anchor = 1000.0;
  double gradient_tolerance = 1e-8;
  int max_iterations = 200;
};

struct EloFit {
  Eigen::VectorXd ratings;
  std::vector<int> component;  // connected component of each team
  int num_components = 0;
  bool converged = true;
  int iterations = 0;
  double gradient_norm = 0.0;
  std::vector<std::string> warnings;
};

/// Maximum-likelihood Elo ratings: P(i beats j) = 1 / (1 + 10^((r_j - r_i) / 400)),
/// draws count as half a win for each side. Each connected component of the
/// comparison graph is fitted separately with its mean anchored. Solved by
/// Newton's method with backtracking on the log-likelihood.
inline EloFit fit_tournament_elo(const std::vector<MatchRecord>& matches, int n, const EloFitOptions& opt = {}) {
  if (n < 1) throw std::invalid_argument("fit_tournament_elo: need at least one team");
  const double c = std::log(10.0) / 400.0;
  Eigen::MatrixXd games = Eigen::MatrixXd::Zero(n, n), score = Eigen::MatrixXd::Zero(n, n);
  for (const auto& m : matches) {
    if (m.a < 0 || m.b < 0 || m.a >= n || m.b >= n || m.a == m.b) throw std::invalid_argument("bad match record");
    games(m.a, m.b) += 1;
    games(m.b, m.a) += 1;
    score(m.a, m.b) += m.score_a();
    score(m.b, m.a) += 1.0 - m.score_a();
  }

  EloFit fit;
  fit.ratings = Eigen::VectorXd::Constant(n, opt.anchor);
  fit.component.assign(static_cast<std::size_t>(n), -1);
  for (int s = 0; s < n; ++s) {
    if (fit.component[static_cast<std::size_t>(s)] >= 0) continue;
    std::vector<int> stack{s}, members;
    fit.component[static_cast<std::size_t>(s)] = fit.num_components;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      members.push_back(i);
      for (int j = 0; j < n; ++j) {
        if (games(i, j) > 0 && fit.component[static_cast<std::size_t>(j)] < 0) {
          fit.component[static_cast<std::size_t>(j)] = fit.num_components;
          stack.push_back(j);
        }
      }
    }
    ++fit.num_components;
    std::sort(members.begin(), members.end());
    const auto k = static_cast<Eigen::Index>(members.size());
    if (k == 1) continue;

    Eigen::MatrixXd g(k, k), w(k, k);
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index b = 0; b < k; ++b) {
        g(a, b) = games(members[static_cast<std::size_t>(a)], members[static_cast<std::size_t>(b)]);
        w(a, b) = score(members[static_cast<std::size_t>(a)], members[static_cast<std::size_t>(b)]);
      }
    auto log_lik = [&](const Eigen::VectorXd& r) {
      double l = 0.0;
      for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = 0; b < k; ++b) {
          if (a == b || w(a, b) == 0.0) continue;
          const double x = c * (r(a) - r(b));  // log P(a beats b) = -softplus(-x)
          l -= w(a, b) * (x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x)));
        }
      return l;
    };
    auto win_prob = [&](const Eigen::VectorXd& r, Eigen::Index a, Eigen::Index b) {
      return 1.0 / (1.0 + std::exp(-c * (r(a) - r(b))));
    };
    Eigen::VectorXd r = Eigen::VectorXd::Constant(k, opt.anchor);
    bool ok = false;
    double gnorm = 0.0;
    int it = 0;
    for (; it < opt.max_iterations; ++it) {
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(k);
      Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(k, k);  // negative of the Hessian
      for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = 0; b < k; ++b) {
          if (a == b || g(a, b) == 0.0) continue;
          const double p = win_prob(r, a, b);
          grad(a) += c * (w(a, b) - g(a, b) * p);
          const double h = c * c * g(a, b) * p * (1.0 - p);
          hess(a, b) -= h;
          hess(a, a) += h;
        }
      gnorm = grad.norm();
      if (gnorm <= opt.gradient_tolerance) {
        ok = true;
        break;
      }
      // The likelihood is flat along the all-ones direction; pin it.
      hess.array() += hess.diagonal().mean() / static_cast<double>(k);
      const Eigen::VectorXd step = hess.ldlt().solve(grad);
      const double l0 = log_lik(r);
      double t = 1.0;
      while (t > 1e-10 && log_lik(r + t * step) < l0 + 1e-4 * t * grad.dot(step)) t *= 0.5;
      r += t * step;
      r.array() += opt.anchor - r.mean();
      if (t <= 1e-10) break;
    }
    // A finite maximum exists only if every team can reach every other along
    // "took points from" edges.
    auto reach = [&](bool forward) {
      std::vector<bool> seen(static_cast<std::size_t>(k), false);
      std::vector<Eigen::Index> st{0};
      seen[0] = true;
      while (!st.empty()) {
        const auto a = st.back();
        st.pop_back();
        for (Eigen::Index b = 0; b < k; ++b) {
          if (!seen[static_cast<std::size_t>(b)] && (forward ? w(a, b) : w(b, a)) > 0.0) {
            seen[static_cast<std::size_t>(b)] = true;
            st.push_back(b);
          }
        }
      }
      return std::all_of(seen.begin(), seen.end(), [](bool x) { return x; });
    };
    if (!reach(true) || !reach(false)) ok = false;
    fit.iterations = std::max(fit.iterations, it);
    fit.gradient_norm = std::max(fit.gradient_norm, gnorm);
    if (!ok) {
      fit.converged = false;
      fit.warnings.push_back("component " + std::to_string(fit.num_components - 1) +
                             ": no finite maximum-likelihood fit (a team wins or loses every game?)");
    }
    for (Eigen::Index a = 0; a < k; ++a) fit.ratings(members[static_cast<std::size_t>(a)]) = r(a);
  }
  if (fit.num_components > 1) {
    fit.warnings.push_back("comparison graph has " + std::to_string(fit.num_components) +
                           " components; ratings are only comparable within a component");
  }
  return fit;
}

}  // namespace coplay::eval
