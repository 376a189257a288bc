#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "coplay/learner/agent.hpp"
#include "coplay/learner/batch.hpp"
#include "coplay/learner/retrace.hpp"

namespace coplay::learner {

// ---------------------------------------------------------------------------
// Critic regression

/// Mean over valid steps of sum_h (Q_h - G_h)^2. Accumulates the gradient
/// into `grads` when non-null.
inline double critic_loss(const agent::CriticNet& critic, const Batch& batch, const std::vector<Matrix>& targets,
                          nn::ParamSet* grads) {
  const double n = batch.valid_steps();
  if (n <= 0.0) throw std::invalid_argument("critic_loss: batch has no valid steps");
  const auto seq = critic_unroll(critic, batch.obs, batch.actions, batch.critic_state, grads != nullptr);
  double loss = 0.0;
  std::vector<Matrix> dq(seq.q.size());
  for (std::size_t t = 0; t < seq.q.size(); ++t) {
    Matrix diff = seq.q[t] - targets[t];
    for (Eigen::Index b = 0; b < diff.cols(); ++b) diff.col(b) *= batch.mask[t](0, b);
    loss += diff.squaredNorm();
    dq[t] = diff * (2.0 / n);
  }
  if (grads != nullptr) critic_unroll_backward(critic, seq, dq, *grads);
  return loss / n;
}

struct UpdateStats {
  double loss = 0.0;
  bool applied = false;  // false: non-finite loss or gradient, step skipped
};

inline UpdateStats critic_update(Agent& a, const Batch& batch, const std::vector<Matrix>& targets,
                                 const LearnerConfig& cfg) {
  UpdateStats st;
  nn::ParamSet g = a.critic.params().zeros_like();
  st.loss = critic_loss(a.critic, batch, targets, &g);
  if (!std::isfinite(st.loss)) return st;
  st.applied = nn::adam_step(a.critic.params(), g, a.critic_adam, a.hp.critic_lr, cfg.adam);
  return st;
}

// ---------------------------------------------------------------------------
// Reparameterized policy gradient

/// Standard-normal noise for the policy surrogate: one 3 x (samples * B)
/// matrix per step.
inline std::vector<Matrix> draw_policy_noise(const Batch& batch, int samples, Rng& rng) {
  std::vector<Matrix> noise(static_cast<std::size_t>(batch.steps));
  for (auto& n : noise) {
    n.resize(env::kActionDim, samples * batch.size);
    for (Eigen::Index i = 0; i < n.size(); ++i) n.data()[i] = normal(rng);
  }
  return noise;
}

struct PolicyLoss {
  double loss = 0.0;     // negated surrogate objective
  double q_term = 0.0;   // mean combined Q at the sampled actions
  double entropy = 0.0;  // mean policy entropy
};

/// Combined action value sum_j alpha_j Q_j at (obs, act) columns, 1 x N. If
/// `weight` is non-null, `d_act` receives d(sum weight * Q)/d act.
using ActionValueFn = std::function<Matrix(const Matrix& obs, const Matrix& act, const StackState& state,
                                           const Matrix* weight, Matrix* d_act)>;

inline ActionValueFn critic_action_value(const agent::CriticNet& critic, const ChannelArray& alpha) {
  return [&critic, alpha](const Matrix& obs, const Matrix& act, const StackState& state, const Matrix* weight,
                          Matrix* d_act) {
    agent::CriticCache cache;
    const Matrix q = critic.forward(obs, act, state, weight != nullptr ? &cache : nullptr).q;
    if (weight != nullptr) {
      *d_act = critic.backward(cache, agent::combine_q_grad(critic.num_heads(), alpha, *weight), nullptr, nullptr);
    }
    return agent::combine_q(q, alpha);
  };
}

/// Surrogate loss with frozen noise:
///   L = -mean_valid [ mean_s Qc(x_t, mu + sigma * eta_s) + c_ent * H(pi(.|x_t)) ]
/// Qc is held fixed. For a recurrent critic `critic_states[t]` is its state
/// before step t, following the taken actions. Accumulates the policy
/// gradient into `grads` when non-null.
inline PolicyLoss policy_loss_generic(const agent::PolicyNet& policy, const ActionValueFn& qc_fn,
                                      const std::vector<StackState>& critic_states, const Batch& batch,
                                      const std::vector<Matrix>& noise, double entropy_cost, nn::ParamSet* grads) {
  const double n = batch.valid_steps();
  if (n <= 0.0) throw std::invalid_argument("policy_loss: batch has no valid steps");
  const std::size_t T = static_cast<std::size_t>(batch.steps);
  const Eigen::Index B = batch.size;
  const int S = static_cast<int>(noise.front().cols() / B);
  const bool stepwise = !critic_states.empty();

  const auto pseq = policy_unroll(policy, batch.obs, 0, T, batch.policy_state, grads != nullptr);
  std::vector<Matrix> d_mean(T), d_std(T);
  PolicyLoss out;
  auto evaluate = [&](std::size_t t0, std::size_t t1) {
    const Eigen::Index span = static_cast<Eigen::Index>(t1 - t0);
    Matrix obs(env::kObsDim, span * S * B), act(env::kActionDim, span * S * B);
    Matrix w(1, span * S * B);
    for (std::size_t t = t0; t < t1; ++t) {
      const auto off = static_cast<Eigen::Index>(t - t0) * S * B;
      const auto& d = pseq.dist[t];
      obs.middleCols(off, S * B) = repeat_cols(batch.obs[t], S);
      act.middleCols(off, S * B) = repeat_cols(d.mean, S) + repeat_cols(d.stddev, S).cwiseProduct(noise[t]);
      w.middleCols(off, S * B) = repeat_cols(batch.mask[t], S) / (n * S);
    }
    const StackState state = stepwise ? repeat_state(critic_states[t0], S) : StackState{};
    const Matrix neg_w = -w;
    Matrix da;
    const Matrix qc = qc_fn(obs, act, state, grads != nullptr ? &neg_w : nullptr, &da);
    out.q_term += qc.cwiseProduct(w).sum();
    if (grads == nullptr) return;
    for (std::size_t t = t0; t < t1; ++t) {
      const auto off = static_cast<Eigen::Index>(t - t0) * S * B;
      const Matrix dat = da.middleCols(off, S * B);
      d_mean[t] = block_mean(dat, B, S) * S;
      d_std[t] = block_mean(dat.cwiseProduct(noise[t]), B, S) * S;
    }
  };
  if (stepwise) {
    for (std::size_t t = 0; t < T; ++t) evaluate(t, t + 1);
  } else {
    evaluate(0, T);
  }

  for (std::size_t t = 0; t < T; ++t) {
    const auto& d = pseq.dist[t];
    const Matrix wt = batch.mask[t] / n;
    out.entropy += nn::entropy(d).cwiseProduct(wt).sum();
    if (grads != nullptr) {
      // dH/dsigma = 1/sigma per dimension.
      Matrix de = d.stddev.cwiseInverse();
      for (Eigen::Index b = 0; b < B; ++b) de.col(b) *= wt(0, b);
      d_std[t] -= entropy_cost * de;
    }
  }
  out.loss = -(out.q_term + entropy_cost * out.entropy);
  if (grads != nullptr) policy_unroll_backward(policy, pseq, d_mean, d_std, *grads);
  return out;
}

inline PolicyLoss policy_loss(const agent::PolicyNet& policy, const agent::CriticNet& critic, const Batch& batch,
                              const std::vector<Matrix>& noise, const AgentHyperparams& hp, nn::ParamSet* grads) {
  std::vector<StackState> states;
  if (critic.recurrent()) {
    states = critic_unroll(critic, batch.obs, batch.actions, batch.critic_state, false).state_before;
  }
  return policy_loss_generic(policy, critic_action_value(critic, hp.reward_weights), states, batch, noise,
                             hp.entropy_cost, grads);
}

struct PolicyStats {
  UpdateStats update;
  double entropy = 0.0;
  double q_term = 0.0;
};

inline PolicyStats policy_update(Agent& a, const Batch& batch, const LearnerConfig& cfg, Rng& rng) {
  PolicyStats st;
  const auto noise = draw_policy_noise(batch, cfg.policy_samples, rng);
  nn::ParamSet g = a.policy.params().zeros_like();
  const auto pl = policy_loss(a.policy, a.critic, batch, noise, a.hp, &g);
  st.update.loss = pl.loss;
  st.entropy = pl.entropy;
  st.q_term = pl.q_term;
  if (!std::isfinite(pl.loss)) return st;
  st.update.applied = nn::adam_step(a.policy.params(), g, a.policy_adam, a.hp.actor_lr, cfg.adam);
  return st;
}

// ---------------------------------------------------------------------------
// One learner step

struct LearnStepMetrics {
  double critic_loss = 0.0;
  double policy_loss = 0.0;
  double entropy = 0.0;
  ChannelArray target_abs_mean{};  // per head; unused heads stay zero
  int zero_density = 0;
  bool critic_applied = false;
  bool policy_applied = false;
  bool synced = false;

  [[nodiscard]] io::Json to_json(int agent_id, std::uint64_t frames, std::uint64_t grad_step) const {
    io::Json j;
    j["agent"] = agent_id;
    j["frames"] = frames;
    j["grad_step"] = grad_step;
    j["critic_loss"] = critic_loss;
    j["policy_loss"] = policy_loss;
    j["entropy"] = entropy;
    j["target_abs_mean"] = target_abs_mean;
    j["zero_density"] = zero_density;
    j["critic_applied"] = critic_applied;
    j["policy_applied"] = policy_applied;
    j["synced"] = synced;
    return j;
  }
};

/// Retrace targets, one critic step, one policy step, target sync check.
inline LearnStepMetrics learn_from_batch(Agent& a, const Batch& batch, const LearnerConfig& cfg, Rng& rng) {
  LearnStepMetrics m;
  const auto rt = retrace_targets(batch, a.critic_target, a.policy_target, a.policy, a.hp, cfg.expectation_samples,
                                  rng);
  m.zero_density = rt.zero_density;
  const double n = batch.valid_steps();
  for (std::size_t t = 0; t < rt.targets.size(); ++t) {
    for (Eigen::Index h = 0; h < rt.targets[t].rows(); ++h)
      m.target_abs_mean[static_cast<std::size_t>(h)] += rt.targets[t].row(h).cwiseAbs().sum() / n;
  }
  const auto cs = critic_update(a, batch, rt.targets, cfg);
  m.critic_loss = cs.loss;
  m.critic_applied = cs.applied;
  const auto ps = policy_update(a, batch, cfg, rng);
  m.policy_loss = ps.update.loss;
  m.policy_applied = ps.update.applied;
  m.entropy = ps.entropy;
  m.synced = a.count_step(cfg.sync_period);
  return m;
}

inline std::optional<LearnStepMetrics> learn_step(Agent& a, const ReplayBuffer& replay, const LearnerConfig& cfg,
                                                  Rng& rng) {
  if (replay.size() == 0) return std::nullopt;
  const auto snippets = replay.sample(static_cast<std::size_t>(cfg.batch_size), rng);
  return learn_from_batch(a, make_batch(snippets, a.policy, a.critic), cfg, rng);
}

}  // namespace coplay::learner
