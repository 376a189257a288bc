#pragma once

#include <cmath>
#include <vector>

#include "coplay/learner/batch.hpp"
#include "coplay/learner/hyperparams.hpp"

namespace coplay::learner {

/// Retrace targets for one channel of one snippet of length T, by backward
/// recursion:
///   G_{T-1} = r_{T-1} + gamma * v_next_{T-1}
///   G_t     = r_t + gamma * v_next_t + gamma * c_{t+1} * (G_{t+1} - q_{t+1})
/// where q_t = Qhat(x_t, a_t), v_next_t = E_{a~pihat} Qhat(x_{t+1}, a) (zero if
/// x_{t+1} is terminal) and c_t = min(1, pi/beta) at step t (c_0 is unused).
inline Eigen::VectorXd retrace_recursive(const Eigen::VectorXd& r, const Eigen::VectorXd& q,
                                         const Eigen::VectorXd& v_next, const Eigen::VectorXd& c, double gamma) {
  const Eigen::Index T = r.size();
  if (T < 1 || q.size() != T || v_next.size() != T || c.size() != T) {
    throw std::invalid_argument("retrace: inputs must share a positive length");
  }
  Eigen::VectorXd g(T);
  g(T - 1) = r(T - 1) + gamma * v_next(T - 1);
  for (Eigen::Index t = T - 1; t-- > 0;) {
    g(t) = r(t) + gamma * v_next(t) + gamma * c(t + 1) * (g(t + 1) - q(t + 1));
  }
  return g;
}

/// Truncated importance weight min(1, exp(log_pi - log_beta)). A zero or
/// non-finite behavior density yields 1 and sets `flagged`.
inline double truncated_weight(double log_pi, double log_beta, bool& flagged) {
  if (!std::isfinite(log_beta)) {
    flagged = true;
    return 1.0;
  }
  const double w = std::exp(log_pi - log_beta);
  if (std::isnan(w)) {
    flagged = true;
    return 1.0;
  }
  return std::min(1.0, w);
}

/// Monte-Carlo estimate of E_{a~dist}[f(a)] with m reparameterized samples.
/// `f` maps a 3 x (m * B) action matrix to a heads x (m * B) value matrix.
template <class F>
Matrix mc_expectation(const nn::Gaussian& dist, int m, Rng& rng, F&& f) {
  if (m < 1) throw std::invalid_argument("mc_expectation: need at least one sample");
  const Eigen::Index B = dist.batch();
  Matrix noise(dist.dim(), m * B);
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = normal(rng);
  const Matrix a = repeat_cols(dist.mean, m) + repeat_cols(dist.stddev, m).cwiseProduct(noise);
  return block_mean(f(a), B, m);
}

/// Per-head reward and discount. A decomposed critic has one head per
/// channel; a single-head critic learns the alpha-weighted reward with the
/// goal channel's discount.
inline Matrix head_rewards(const Matrix& rewards, int heads, const AgentHyperparams& hp) {
  if (heads == env::kNumChannels) return rewards;
  Eigen::Map<const Eigen::Matrix<double, 1, env::kNumChannels>> a(hp.reward_weights.data());
  return a * rewards;
}

inline double head_discount(int head, int heads, const AgentHyperparams& hp) {
  return heads == env::kNumChannels ? hp.discounts[static_cast<std::size_t>(head)] : hp.discounts[env::kGoal];
}

struct RetraceResult {
  std::vector<Matrix> targets;  // T entries, heads x B (zero on padding)
  std::vector<Matrix> q_hat;    // target-critic values at taken actions
  std::vector<Matrix> v_next;   // E Qhat(x_{t+1}), zero past a terminal state
  std::vector<Matrix> c;        // T entries, 1 x B
  int zero_density = 0;
};

/// Retrace targets for every step of every snippet in the batch.
inline RetraceResult retrace_targets(const Batch& batch, const agent::CriticNet& target_q,
                                     const agent::PolicyNet& target_pi, const agent::PolicyNet& online_pi,
                                     const AgentHyperparams& hp, int samples, Rng& rng) {
  const std::size_t T = static_cast<std::size_t>(batch.steps);
  const Eigen::Index B = batch.size;
  const int H = target_q.num_heads();
  RetraceResult out;

  // Truncated importance weights from the online policy.
  const auto online = policy_unroll(online_pi, batch.obs, 0, T, batch.policy_state, false);
  out.c.assign(T, Matrix::Ones(1, B));
  for (std::size_t t = 0; t < T; ++t) {
    const Matrix lp = nn::log_prob(online.dist[t], batch.actions[t]);
    const Matrix lb = nn::log_prob({batch.behavior_mean[t], batch.behavior_stddev[t]}, batch.actions[t]);
    for (Eigen::Index b = 0; b < B; ++b) {
      if (batch.mask[t](0, b) == 0.0) continue;
      bool flagged = false;
      out.c[t](0, b) = truncated_weight(lp(0, b), lb(0, b), flagged);
      out.zero_density += flagged ? 1 : 0;
    }
  }

  // Target critic along the taken actions and expected values under pihat.
  const auto tgt_pi = policy_unroll(target_pi, batch.obs, 0, T + 1, batch.policy_state, false);
  const auto critic = critic_unroll(target_q, batch.obs, batch.actions, batch.critic_state, false);
  out.q_hat = critic.q;
  std::vector<Matrix> v(T + 1);
  const int m = samples;
  if (critic.flat) {
    std::vector<Matrix> obs_rep, act;
    for (std::size_t t = 1; t <= T; ++t) {
      const auto& d = tgt_pi.dist[t];
      Matrix noise(env::kActionDim, m * B);
      for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = normal(rng);
      act.push_back(repeat_cols(d.mean, m) + repeat_cols(d.stddev, m).cwiseProduct(noise));
      obs_rep.push_back(repeat_cols(batch.obs[t], m));
    }
    const Matrix q_all = target_q.forward(hcat(obs_rep, 0, T), hcat(act, 0, T), {}).q;
    for (std::size_t t = 1; t <= T; ++t) {
      v[t] = block_mean(q_all.middleCols(static_cast<Eigen::Index>(t - 1) * m * B, m * B), B, m);
    }
  } else {
    for (std::size_t t = 1; t <= T; ++t) {
      const Matrix obs_rep = repeat_cols(batch.obs[t], m);
      const StackState s_rep = repeat_state(critic.state_before[t], m);
      v[t] = mc_expectation(tgt_pi.dist[t], m, rng,
                            [&](const Matrix& a) { return target_q.forward(obs_rep, a, s_rep).q; });
    }
  }

  out.targets.assign(T, Matrix::Zero(H, B));
  out.v_next.assign(T, Matrix::Zero(H, B));
  for (Eigen::Index b = 0; b < B; ++b) {
    const int len = batch.length[static_cast<std::size_t>(b)];
    for (int t = 0; t < len; ++t) {
      const auto u = static_cast<std::size_t>(t);
      if (!(t == len - 1 && batch.terminal[static_cast<std::size_t>(b)])) out.v_next[u].col(b) = v[u + 1].col(b);
    }
  }
  for (int h = 0; h < H; ++h) {
    const double gamma = head_discount(h, H, hp);
    for (Eigen::Index b = 0; b < B; ++b) {
      const int len = batch.length[static_cast<std::size_t>(b)];
      Eigen::VectorXd r(len), q(len), vn(len), c(len);
      for (int t = 0; t < len; ++t) {
        const auto u = static_cast<std::size_t>(t);
        r(t) = head_rewards(batch.rewards[u].col(b), H, hp)(h, 0);
        q(t) = critic.q[u](h, b);
        vn(t) = out.v_next[u](h, b);
        c(t) = out.c[u](0, b);
      }
      const Eigen::VectorXd g = retrace_recursive(r, q, vn, c, gamma);
      for (int t = 0; t < len; ++t) out.targets[static_cast<std::size_t>(t)](h, b) = g(t);
    }
  }
  return out;
}

}  // namespace coplay::learner
