#pragma once

#include <Eigen/Dense>
#include <limits>
#include <stdexcept>
#include <vector>

namespace coplay::eval {

/// maximize c.x  subject to  a_ub x <= b_ub,  a_eq x = b_eq,  x >= 0.
struct LinearProgram {
  Eigen::VectorXd c;
  Eigen::MatrixXd a_ub;
  Eigen::VectorXd b_ub;
  Eigen::MatrixXd a_eq;
  Eigen::VectorXd b_eq;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

struct LpResult {
  LpStatus status = LpStatus::kIterationLimit;
  Eigen::VectorXd x;
  double objective = 0.0;
  int pivots = 0;
};

namespace detail {

class Tableau {
 public:
  Tableau(int rows, int cols) : t_(Eigen::MatrixXd::Zero(rows + 1, cols + 1)), basis_(static_cast<std::size_t>(rows)) {}

  double& at(int r, int c) { return t_(r, c); }
  double& rhs(int r) { return t_(r, t_.cols() - 1); }
  double& cost(int c) { return t_(t_.rows() - 1, c); }
  double& objective() { return t_(t_.rows() - 1, t_.cols() - 1); }
  [[nodiscard]] int rows() const { return static_cast<int>(t_.rows()) - 1; }
  [[nodiscard]] int cols() const { return static_cast<int>(t_.cols()) - 1; }
  std::vector<int>& basis() { return basis_; }

  void pivot(int r, int c) {
    t_.row(r) /= t_(r, c);
    for (int i = 0; i < t_.rows(); ++i) {
      if (i != r && t_(i, c) != 0.0) t_.row(i) -= t_(i, c) * t_.row(r);
    }
    basis_[static_cast<std::size_t>(r)] = c;
  }

  /// Minimises the cost row over columns < `usable` with Bland's rule.
  LpStatus run(int usable, double tol, int max_pivots, int& pivots) {
    while (pivots < max_pivots) {
      int enter = -1;
      for (int c = 0; c < usable; ++c) {
        if (cost(c) < -tol) {
          enter = c;
          break;
        }
      }
      if (enter < 0) return LpStatus::kOptimal;
      int leave = -1;
      int leave_var = 0;
      double best = std::numeric_limits<double>::infinity();
      const auto nr = static_cast<std::size_t>(rows());
      for (std::size_t r = 0; r < nr; ++r) {
        const double a = t_(static_cast<Eigen::Index>(r), enter);
        if (a <= 1e-9) continue;  // tiny pivots amplify rounding error
        const double ratio = t_(static_cast<Eigen::Index>(r), t_.cols() - 1) / a;
        if (ratio < best - tol || (ratio <= best + tol && basis_[r] < leave_var)) {
          best = std::min(best, ratio);
          leave = static_cast<int>(r);
          leave_var = basis_[r];
        }
      }
      if (leave < 0) return LpStatus::kUnbounded;
      pivot(leave, enter);
      ++pivots;
    }
    return LpStatus::kIterationLimit;
  }

 private:
  Eigen::MatrixXd t_;
  std::vector<int> basis_;
};

}  // namespace detail

/// Dense two-phase simplex with Bland's anti-cycling rule. Sized for
/// meta-games of a few dozen agents.
inline LpResult solve_lp(const LinearProgram& lp, double tol = 1e-11, int max_pivots = 100000) {
  const int n = static_cast<int>(lp.c.size());
  const int mu = static_cast<int>(lp.a_ub.rows());
  const int me = static_cast<int>(lp.a_eq.rows());
  if ((mu > 0 && (lp.a_ub.cols() != n || lp.b_ub.size() != mu)) ||
      (me > 0 && (lp.a_eq.cols() != n || lp.b_eq.size() != me))) {
    throw std::invalid_argument("solve_lp: inconsistent dimensions");
  }
  const int m = mu + me;
  // Columns: x (n), slacks (mu), artificials (m).
  const int art0 = n + mu;
  detail::Tableau t(m, n + mu + m);
  for (int r = 0; r < m; ++r) {
    const bool ub = r < mu;
    const double sign = (ub ? lp.b_ub(r) : lp.b_eq(r - mu)) < 0.0 ? -1.0 : 1.0;
    for (int c = 0; c < n; ++c) t.at(r, c) = sign * (ub ? lp.a_ub(r, c) : lp.a_eq(r - mu, c));
    if (ub) t.at(r, n + r) = sign;
    t.at(r, art0 + r) = 1.0;
    t.rhs(r) = sign * (ub ? lp.b_ub(r) : lp.b_eq(r - mu));
    t.basis()[static_cast<std::size_t>(r)] = art0 + r;
  }
  LpResult res;
  // Phase 1: minimise the sum of artificials.
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < art0; ++c) t.cost(c) -= t.at(r, c);
    t.objective() -= t.rhs(r);
  }
  auto st = t.run(art0, tol, max_pivots, res.pivots);
  if (st == LpStatus::kIterationLimit) return res;
  if (-t.objective() > 1e3 * tol * std::max(1.0, static_cast<double>(m))) {
    res.status = LpStatus::kInfeasible;
    return res;
  }
  // Drive remaining artificials out of the basis; rows that cannot pivot are
  // redundant and stay inert.
  for (int r = 0; r < m; ++r) {
    if (t.basis()[static_cast<std::size_t>(r)] < art0) continue;
    for (int c = 0; c < art0; ++c) {
      if (std::abs(t.at(r, c)) > 1e3 * tol) {
        t.pivot(r, c);
        break;
      }
    }
  }
  // Phase 2 with the real cost, minimising -c.x.
  for (int c = 0; c <= t.cols(); ++c) t.cost(c) = 0.0;
  for (int c = 0; c < n; ++c) t.cost(c) = -lp.c(c);
  for (int r = 0; r < m; ++r) {
    const int b = t.basis()[static_cast<std::size_t>(r)];
    if (b < art0 && t.cost(b) != 0.0) {
      const double f = t.cost(b);
      for (int c = 0; c <= t.cols(); ++c) t.cost(c) -= f * (c == t.cols() ? t.rhs(r) : t.at(r, c));
    }
  }
  st = t.run(art0, tol, max_pivots, res.pivots);
  res.status = st;
  if (st != LpStatus::kOptimal) return res;
  res.x = Eigen::VectorXd::Zero(n);
  for (int r = 0; r < m; ++r) {
    const int b = t.basis()[static_cast<std::size_t>(r)];
    if (b < n) res.x(b) = t.rhs(r);
  }
  res.x = res.x.cwiseMax(0.0);
  res.objective = lp.c.dot(res.x);
  return res;
}

}  // namespace coplay::eval
