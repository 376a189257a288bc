#pragma once

#include <vector>

#include "coplay/agent/nets.hpp"
#include "coplay/learner/replay.hpp"

namespace coplay::learner {

/// Time-major view of B snippets padded to the longest length T. Column b of
/// every matrix belongs to snippet b; mask[t](0, b) is 1 while t < len_b.
struct Batch {
  Eigen::Index size = 0;
  int steps = 0;
  std::vector<Matrix> obs;                       // T + 1 entries, 40 x B
  std::vector<Matrix> actions;                   // T entries, 3 x B
  std::vector<Matrix> rewards;                   // T entries, 4 x B
  std::vector<Matrix> behavior_mean, behavior_stddev;
  std::vector<Matrix> mask;                      // T entries, 1 x B
  std::vector<int> length;
  std::vector<bool> terminal;
  StackState policy_state, critic_state;          // B columns; empty if feedforward

  [[nodiscard]] double valid_steps() const {
    double n = 0.0;
    for (const auto& m : mask) n += m.sum();
    return n;
  }
};

namespace detail {

inline StackState gather_states(const std::vector<SnippetPtr>& snippets, bool policy, const StackState& zero) {
  if (zero.empty()) return {};
  StackState out = zero;
  const auto batch = static_cast<Eigen::Index>(snippets.size());
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto& s = policy ? snippets[static_cast<std::size_t>(b)]->policy_state
                           : snippets[static_cast<std::size_t>(b)]->critic_state;
    if (s.size() != out.size()) continue;  // missing state: primed with zeros
    for (std::size_t l = 0; l < out.size(); ++l) {
      if (s[l].hidden.rows() != out[l].hidden.rows()) continue;
      out[l].hidden.col(b) = s[l].hidden.col(0);
      out[l].cell.col(b) = s[l].cell.col(0);
    }
  }
  return out;
}

}  // namespace detail

inline Batch make_batch(const std::vector<SnippetPtr>& snippets, const agent::PolicyNet& policy,
                        const agent::CriticNet& critic) {
  if (snippets.empty()) throw std::invalid_argument("make_batch: no snippets");
  Batch b;
  b.size = static_cast<Eigen::Index>(snippets.size());
  for (const auto& s : snippets) {
    s->validate();
    b.steps = std::max(b.steps, s->length());
    b.length.push_back(s->length());
    b.terminal.push_back(s->terminal);
  }
  const auto B = b.size;
  const auto T = static_cast<std::size_t>(b.steps);
  b.obs.assign(T + 1, Matrix(env::kObsDim, B));
  b.actions.assign(T, Matrix::Zero(env::kActionDim, B));
  b.rewards.assign(T, Matrix::Zero(env::kNumChannels, B));
  b.behavior_mean.assign(T, Matrix::Zero(env::kActionDim, B));
  b.behavior_stddev.assign(T, Matrix::Ones(env::kActionDim, B));
  b.mask.assign(T, Matrix::Zero(1, B));
  for (Eigen::Index j = 0; j < B; ++j) {
    const auto& s = *snippets[static_cast<std::size_t>(j)];
    const auto len = static_cast<std::size_t>(s.length());
    for (std::size_t t = 0; t <= T; ++t) {
      b.obs[t].col(j) = s.obs.col(static_cast<Eigen::Index>(std::min(t, len)));
    }
    for (std::size_t t = 0; t < len; ++t) {
      const auto c = static_cast<Eigen::Index>(t);
      b.actions[t].col(j) = s.actions.col(c);
      b.rewards[t].col(j) = s.rewards.col(c);
      b.behavior_mean[t].col(j) = s.behavior_mean.col(c);
      b.behavior_stddev[t].col(j) = s.behavior_stddev.col(c);
      b.mask[t](0, j) = 1.0;
    }
  }
  b.policy_state = detail::gather_states(snippets, true, policy.initial_state(B));
  b.critic_state = detail::gather_states(snippets, false, critic.initial_state(B));
  return b;
}

// ---------------------------------------------------------------------------
// Sequence evaluation. Feedforward networks are evaluated once on all time
// steps side by side; recurrent ones step through time carrying state.

inline Matrix hcat(const std::vector<Matrix>& parts, std::size_t begin, std::size_t end) {
  Eigen::Index cols = 0;
  for (std::size_t i = begin; i < end; ++i) cols += parts[i].cols();
  Matrix out(parts[begin].rows(), cols);
  Eigen::Index c = 0;
  for (std::size_t i = begin; i < end; ++i) {
    out.middleCols(c, parts[i].cols()) = parts[i];
    c += parts[i].cols();
  }
  return out;
}

/// [M M ... M] with `times` copies.
inline Matrix repeat_cols(const Matrix& m, int times) { return m.replicate(1, times); }

inline StackState repeat_state(const StackState& s, int times) {
  StackState out = s;
  for (auto& l : out) {
    l.hidden = l.hidden.replicate(1, times).eval();
    l.cell = l.cell.replicate(1, times).eval();
  }
  return out;
}

/// Mean of `times` column blocks of width `width`.
inline Matrix block_mean(const Matrix& m, Eigen::Index width, int times) {
  Matrix out = Matrix::Zero(m.rows(), width);
  for (int k = 0; k < times; ++k) out += m.middleCols(k * width, width);
  return out / times;
}

struct PolicySeq {
  std::vector<nn::Gaussian> dist;
  std::vector<agent::PolicyCache> caches;
  bool flat = false;
  Eigen::Index batch = 0;
};

/// Evaluates the policy on obs[begin, end).
inline PolicySeq policy_unroll(const agent::PolicyNet& pi, const std::vector<Matrix>& obs, std::size_t begin,
                               std::size_t end, const StackState& init, bool keep_cache) {
  PolicySeq seq;
  seq.batch = obs[begin].cols();
  seq.flat = !pi.recurrent();
  if (seq.flat) {
    seq.caches.resize(keep_cache ? 1 : 0);
    const auto out = pi.forward(hcat(obs, begin, end), {}, keep_cache ? &seq.caches[0] : nullptr);
    for (std::size_t t = begin; t < end; ++t) {
      const auto c = static_cast<Eigen::Index>(t - begin) * seq.batch;
      seq.dist.push_back({out.dist.mean.middleCols(c, seq.batch), out.dist.stddev.middleCols(c, seq.batch)});
    }
    return seq;
  }
  StackState s = init;
  seq.caches.resize(keep_cache ? end - begin : 0);
  for (std::size_t t = begin; t < end; ++t) {
    auto out = pi.forward(obs[t], s, keep_cache ? &seq.caches[t - begin] : nullptr);
    seq.dist.push_back(std::move(out.dist));
    s = std::move(out.next_state);
  }
  return seq;
}

inline void policy_unroll_backward(const agent::PolicyNet& pi, const PolicySeq& seq,
                                   const std::vector<Matrix>& d_mean, const std::vector<Matrix>& d_stddev,
                                   nn::ParamSet& grads) {
  if (seq.flat) {
    pi.backward(seq.caches[0], hcat(d_mean, 0, d_mean.size()), hcat(d_stddev, 0, d_stddev.size()), nullptr,
                grads);
    return;
  }
  StackState d;
  for (std::size_t t = seq.caches.size(); t-- > 0;) {
    d = pi.backward(seq.caches[t], d_mean[t], d_stddev[t], d.empty() ? nullptr : &d, grads);
  }
}

struct CriticSeq {
  std::vector<Matrix> q;                // per step, heads x B
  std::vector<StackState> state_before;  // T + 1 entries for recurrent critics
  std::vector<agent::CriticCache> caches;
  bool flat = false;
  Eigen::Index batch = 0;
};

/// Evaluates Q(x_t, a_t) along the taken actions for t < T.
inline CriticSeq critic_unroll(const agent::CriticNet& q, const std::vector<Matrix>& obs,
                               const std::vector<Matrix>& actions, const StackState& init, bool keep_cache) {
  CriticSeq seq;
  const std::size_t T = actions.size();
  seq.batch = actions.front().cols();
  seq.flat = !q.recurrent();
  if (seq.flat) {
    seq.caches.resize(keep_cache ? 1 : 0);
    const auto out = q.forward(hcat(obs, 0, T), hcat(actions, 0, T), {}, keep_cache ? &seq.caches[0] : nullptr);
    for (std::size_t t = 0; t < T; ++t)
      seq.q.push_back(out.q.middleCols(static_cast<Eigen::Index>(t) * seq.batch, seq.batch));
    return seq;
  }
  seq.caches.resize(keep_cache ? T : 0);
  StackState s = init;
  for (std::size_t t = 0; t < T; ++t) {
    seq.state_before.push_back(s);
    auto out = q.forward(obs[t], actions[t], s, keep_cache ? &seq.caches[t] : nullptr);
    seq.q.push_back(std::move(out.q));
    s = std::move(out.next_state);
  }
  seq.state_before.push_back(std::move(s));
  return seq;
}

inline void critic_unroll_backward(const agent::CriticNet& q, const CriticSeq& seq, const std::vector<Matrix>& d_q,
                                   nn::ParamSet& grads) {
  if (seq.flat) {
    q.backward(seq.caches[0], hcat(d_q, 0, d_q.size()), nullptr, &grads);
    return;
  }
  StackState d;
  for (std::size_t t = seq.caches.size(); t-- > 0;) {
    StackState prev;
    q.backward(seq.caches[t], d_q[t], d.empty() ? nullptr : &d, &grads, &prev);
    d = std::move(prev);
  }
}

}  // namespace coplay::learner
