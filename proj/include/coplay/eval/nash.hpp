#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "coplay/eval/lp.hpp"

namespace coplay::eval {

struct NashOptions {
  double tolerance = 1e-6;         // on exploitability
  double support_threshold = 1e-3;
  double face_tolerance = 1e-7;    // relative, for identifying the equilibrium face
  int max_newton = 200;
};

struct NashResult {
  Eigen::VectorXd p;
  std::vector<int> support;
  double exploitability = 0.0;
  double entropy = 0.0;
  bool converged = true;
  std::string note;
};

inline double exploitability(const Eigen::MatrixXd& a, const Eigen::VectorXd& p) { return (a * p).maxCoeff(); }

inline double entropy(const Eigen::VectorXd& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p(i) > 0.0) h -= p(i) * std::log(p(i));
  return h;
}

inline void check_antisymmetric(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() == 0) throw std::invalid_argument("payoff matrix must be square and non-empty");
  if (!a.allFinite()) throw std::invalid_argument("payoff matrix has non-finite entries");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a + a.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw std::invalid_argument("payoff matrix is not antisymmetric");
  }
}

namespace detail {

/// Equilibria of the symmetric zero-sum game: {p in simplex : A p <= slack}.
inline LinearProgram equilibrium_lp(const Eigen::MatrixXd& a, double slack) {
  const auto n = a.rows();
  LinearProgram lp;
  lp.a_ub = a;
  lp.b_ub = Eigen::VectorXd::Constant(n, slack);
  lp.a_eq = Eigen::MatrixXd::Ones(1, n);
  lp.b_eq = Eigen::VectorXd::Ones(1);
  lp.c = Eigen::VectorXd::Zero(n);
  return lp;
}

/// min v s.t. A p <= v, p in simplex, with v = v+ - v-.
inline LpResult minimax_lp(const Eigen::MatrixXd& a) {
  const auto n = a.rows();
  LinearProgram lp;
  lp.a_ub = Eigen::MatrixXd::Zero(n, n + 2);
  lp.a_ub.leftCols(n) = a;
  lp.a_ub.col(n).setConstant(-1.0);
  lp.a_ub.col(n + 1).setConstant(1.0);
  lp.b_ub = Eigen::VectorXd::Zero(n);
  lp.a_eq = Eigen::MatrixXd::Zero(1, n + 2);
  lp.a_eq.leftCols(n).setOnes();
  lp.b_eq = Eigen::VectorXd::Ones(1);
  lp.c = Eigen::VectorXd::Zero(n + 2);
  lp.c(n) = -1.0;
  lp.c(n + 1) = 1.0;
  return solve_lp(lp);
}

/// Maximises entropy over {p >= 0 : E p = 0, sum p = 1, R p <= 0} starting
/// from a point `p0` that is strictly positive and strictly satisfies R.
/// Newton's method in the null space of the equalities on the barrier
/// objective  H(p) + mu sum_j log(-(R p)_j),  with mu decayed geometrically
/// until it is negligible against the requested tolerance.
inline Eigen::VectorXd barrier_max_entropy(const Eigen::MatrixXd& e, const Eigen::MatrixXd& r,
                                           const Eigen::VectorXd& p0, double mu_final, bool& converged) {
  const auto k = p0.size();
  Eigen::MatrixXd c(e.rows() + 1, k);
  c.topRows(e.rows()) = e;
  c.row(e.rows()).setOnes();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(c, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-10 * sv(0)) ++rank;
  const Eigen::MatrixXd z = svd.matrixV().rightCols(k - rank);
  Eigen::VectorXd p = p0;
  converged = true;
  if (z.cols() == 0) return p;

  auto feasible = [&](const Eigen::VectorXd& q) { return q.minCoeff() > 0.0 && (r.rows() == 0 || (r * q).maxCoeff() < 0.0); };
  auto objective = [&](const Eigen::VectorXd& q, double mu) {
    double f = -(q.array() * q.array().log()).sum();
    if (r.rows() > 0) f += mu * (-(r * q)).array().log().sum();
    return f;
  };
  for (double mu = 1.0; mu >= mu_final; mu *= 0.1) {
    for (int it = 0; it < 100; ++it) {
      Eigen::VectorXd g = -(p.array().log() + 1.0).matrix();
      Eigen::MatrixXd h = Eigen::MatrixXd(p.cwiseInverse().asDiagonal());  // negated Hessian
      if (r.rows() > 0) {
        const Eigen::VectorXd slack = -(r * p);
        const Eigen::VectorXd inv = slack.cwiseInverse();
        g -= mu * r.transpose() * inv;
        h += mu * r.transpose() * inv.cwiseAbs2().asDiagonal() * r;
      }
      const Eigen::VectorXd gy = z.transpose() * g;
      const Eigen::MatrixXd hy = z.transpose() * h * z;
      const Eigen::VectorXd dy = hy.ldlt().solve(gy);
      const double decrement = gy.dot(dy);
      if (!(decrement > 1e-24)) break;
      const Eigen::VectorXd dp = z * dy;
      double t = 1.0;
      while (t > 1e-16 && !feasible(p + t * dp)) t *= 0.5;
      const double f0 = objective(p, mu);
      while (t > 1e-16 && objective(p + t * dp, mu) < f0 + 1e-4 * t * decrement) t *= 0.5;
      if (t <= 1e-16) break;
      p += t * dp;
      if (decrement < 1e-20) break;
    }
  }
  converged = feasible(p) || r.rows() == 0;
  return p;
}

}  // namespace detail

/// Maximum-entropy Nash equilibrium of the symmetric zero-sum meta-game with
/// antisymmetric payoff `a` (row player's payoff).
///
/// The equilibrium set is the polytope {p in simplex : A p <= 0}. Linear
/// programs find the strategies that appear in some equilibrium and the rows
/// of A that vanish on all of them; the entropy is then maximised over that
/// face by an interior-point method whose barrier weight decays
/// geometrically below the tolerance.
inline NashResult nash_average(const Eigen::MatrixXd& a, const NashOptions& opt = {}) {
  check_antisymmetric(a);
  const auto n = a.rows();
  NashResult res;
  const double scale = a.cwiseAbs().maxCoeff();
  if (scale == 0.0) {
    res.p = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  } else {
    // Exact antisymmetry keeps every row and column on the same footing.
    const Eigen::MatrixXd as = 0.5 * (a - a.transpose()) / scale;
    const auto mm = detail::minimax_lp(as);
    if (mm.status != LpStatus::kOptimal) throw std::runtime_error("nash_average: minimax LP failed");
    const Eigen::VectorXd p_lp = mm.x.head(n);
    const double value = mm.x(n) - mm.x(n + 1);
    const double slack = std::max(value, 0.0);
    const double ftol = opt.face_tolerance;

    // Strategies played in some equilibrium, and equilibria witnessing them.
    std::vector<Eigen::VectorXd> witnesses{p_lp};
    std::vector<bool> in_support(static_cast<std::size_t>(n), false);
    for (Eigen::Index i = 0; i < n; ++i) in_support[static_cast<std::size_t>(i)] = p_lp(i) > ftol;
    auto lp = detail::equilibrium_lp(as, slack);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_support[static_cast<std::size_t>(i)]) continue;
      lp.c.setZero();
      lp.c(i) = 1.0;
      const auto r = solve_lp(lp);
      if (r.status != LpStatus::kOptimal || r.x(i) <= ftol) continue;
      witnesses.push_back(r.x);
      for (Eigen::Index j = 0; j < n; ++j)
        if (r.x(j) > ftol) in_support[static_cast<std::size_t>(j)] = true;
    }
    // Rows that vanish on every equilibrium are equalities of the face;
    // the others can be strictly negative.
    std::vector<int> support, equal_rows, ineq_rows;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (in_support[static_cast<std::size_t>(j)]) {
        support.push_back(static_cast<int>(j));
        equal_rows.push_back(static_cast<int>(j));
        continue;
      }
      lp.c = -as.row(j).transpose();
      const auto r = solve_lp(lp);
      if (r.status == LpStatus::kOptimal && r.objective > ftol) {
        ineq_rows.push_back(static_cast<int>(j));
        witnesses.push_back(r.x);
      } else {
        equal_rows.push_back(static_cast<int>(j));
      }
    }
    auto restrict = [&](const std::vector<int>& rows) {
      Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(support.size()));
      for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < support.size(); ++c)
          m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = as(rows[r], support[c]);
      return m;
    };
    // The mean of the witnesses is strictly inside the face.
    Eigen::VectorXd start = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(support.size()));
    for (const auto& w : witnesses)
      for (std::size_t c = 0; c < support.size(); ++c) start(static_cast<Eigen::Index>(c)) += w(support[c]);
    start /= start.sum();
    bool newton_ok = false;
    const Eigen::VectorXd q =
        detail::barrier_max_entropy(restrict(equal_rows), restrict(ineq_rows), start, 1e-3 * opt.tolerance, newton_ok);
    res.p = Eigen::VectorXd::Zero(n);
    for (std::size_t c = 0; c < support.size(); ++c) res.p(support[c]) = q(static_cast<Eigen::Index>(c));
    if (!newton_ok || exploitability(a, res.p) > opt.tolerance) {
      // Keep an exact equilibrium even if the entropy selection failed.
      res.p = p_lp.cwiseMax(0.0) / p_lp.cwiseMax(0.0).sum();
      res.converged = false;
      res.note = "maximum-entropy selection did not converge; returning an LP equilibrium";
    }
  }
  res.exploitability = exploitability(a, res.p);
  res.entropy = entropy(res.p);
  for (Eigen::Index i = 0; i < n; ++i)
    if (res.p(i) > opt.support_threshold) res.support.push_back(static_cast<int>(i));
  if (res.exploitability > opt.tolerance) {
    res.converged = false;
    res.note = "exploitability above tolerance";
  }
  return res;
}

}  // namespace coplay::eval
