#pragma once

// Random snippets, networks and an independent retrace oracle shared by the
// unit and acceptance suites.

#include <numbers>

#include "coplay/env/soccer.hpp"
#include "coplay/learner/learner.hpp"
#include "support/gradcheck.hpp"

namespace coplay::testing {

using agent::ArchSpec;
using agent::CriticNet;
using agent::PolicyNet;
using learner::AgentHyperparams;
using learner::Batch;
using learner::SnippetPtr;
using learner::TrajectorySnippet;
using nn::Matrix;
using nn::StackState;


inline ArchSpec small_arch(const std::string& variant) {
  ArchSpec a = ArchSpec::for_variant(variant);
  a.trunk = {12, 10};
  a.core = 8;
  return a;
}

inline env::Observation random_observation(Rng& rng) {
  auto s = env::reset(uniform_index(rng, 1000000), env::EnvConfig{});
  for (auto& p : s.players) p.vel = env::Vec2(normal(rng), normal(rng));
  s.ball.vel = env::Vec2(normal(rng), normal(rng));
  return env::observe_all(s)[uniform_index(rng, 4)];
}

inline SnippetPtr random_snippet(Rng& rng, int len, bool terminal) {
  auto s = std::make_shared<TrajectorySnippet>();
  s->agent_id = 0;
  s->obs.resize(env::kObsDim, len + 1);
  for (int t = 0; t <= len; ++t) s->obs.col(t) = random_observation(rng);
  s->actions = random_matrix(rng, env::kActionDim, len);
  s->rewards = random_matrix(rng, env::kNumChannels, len);
  s->behavior_mean = random_matrix(rng, env::kActionDim, len);
  s->behavior_stddev = random_matrix(rng, env::kActionDim, len).cwiseAbs().array() + 0.3;
  s->terminal = terminal;
  return s;
}

inline AgentHyperparams random_hp(Rng& rng) {
  AgentHyperparams hp;
  for (int j = 0; j < env::kNumChannels; ++j) {
    hp.reward_weights[static_cast<std::size_t>(j)] = uniform(rng, 0.1, 2.0);
    hp.discounts[static_cast<std::size_t>(j)] = uniform(rng, 0.9, 0.99);
  }
  return hp;
}

// Independent Gaussian log density.
inline double log_density(const Eigen::VectorXd& mean, const Eigen::VectorXd& stddev, const Eigen::VectorXd& a) {
  double lp = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double z = (a(i) - mean(i)) / stddev(i);
    lp += -0.5 * z * z - std::log(stddev(i)) - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  return lp;
}

// Retrace as an explicit double sum:
//   G_t = q_t + sum_{s>=t} gamma^{s-t} (prod_{i=t+1..s} c_i) (r_s + gamma v_s - q_s)
inline Eigen::VectorXd retrace_double_sum(const Eigen::VectorXd& r, const Eigen::VectorXd& q, const Eigen::VectorXd& v,
                                   const Eigen::VectorXd& c, double gamma) {
  const Eigen::Index T = r.size();
  Eigen::VectorXd g(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    double sum = q(t);
    for (Eigen::Index s = t; s < T; ++s) {
      double w = std::pow(gamma, static_cast<double>(s - t));
      for (Eigen::Index i = t + 1; i <= s; ++i) w *= c(i);
      sum += w * (r(s) + gamma * v(s) - q(s));
    }
    g(t) = sum;
  }
  return g;
}

struct OracleSnippet {
  std::vector<Eigen::VectorXd> targets;  // per head, length len
  std::vector<Eigen::VectorXd> q;
  Eigen::VectorXd c;
};

// Recomputes the retrace targets of snippet `b` on its own, column by column,
// replaying the noise stream that retrace_targets draws (per t = 1..T, one
// 3 x (m * B) block, sample k of snippet b in column k * B + b).
inline OracleSnippet oracle_targets(const Batch& batch, Eigen::Index b, const CriticNet& tq, const PolicyNet& tpi,
                             const PolicyNet& pi, const AgentHyperparams& hp, int m, Rng rng) {
  const int T = batch.steps;
  const Eigen::Index B = batch.size;
  std::vector<Matrix> noise;
  for (int t = 1; t <= T; ++t) {
    Matrix n(env::kActionDim, m * B);
    for (Eigen::Index i = 0; i < n.size(); ++i) n.data()[i] = normal(rng);
    noise.push_back(n);
  }
  const int len = batch.length[static_cast<std::size_t>(b)];
  const int H = tq.num_heads();
  auto pick = [&](const StackState& s) {
    StackState out = s;
    for (auto& l : out) {
      l.hidden = s[&l - out.data()].hidden.col(b);
      l.cell = s[&l - out.data()].cell.col(b);
    }
    return out;
  };
  StackState ps = pick(batch.policy_state), tps = ps, cs = pick(batch.critic_state);
  OracleSnippet o;
  o.c = Eigen::VectorXd::Ones(len);
  std::vector<Eigen::VectorXd> q(H, Eigen::VectorXd(len)), v(H, Eigen::VectorXd::Zero(len)),
      r(H, Eigen::VectorXd(len));
  std::vector<nn::Gaussian> tdist;
  for (int t = 0; t <= len; ++t) {
    auto out = tpi.forward(batch.obs[static_cast<std::size_t>(t)].col(b), tps);
    tdist.push_back(out.dist);
    tps = out.next_state;
  }
  for (int t = 0; t < len; ++t) {
    const auto u = static_cast<std::size_t>(t);
    const Matrix x = batch.obs[u].col(b);
    const Matrix a = batch.actions[u].col(b);
    auto po = pi.forward(x, ps);
    ps = po.next_state;
    const double lp = log_density(po.dist.mean, po.dist.stddev, a);
    const double lb = log_density(batch.behavior_mean[u].col(b), batch.behavior_stddev[u].col(b), a);
    o.c(t) = std::min(1.0, std::exp(lp - lb));
    auto co = tq.forward(x, a, cs);
    cs = co.next_state;
    const bool last_terminal = t == len - 1 && batch.terminal[static_cast<std::size_t>(b)];
    Eigen::VectorXd vn = Eigen::VectorXd::Zero(H);
    if (!last_terminal) {
      for (int k = 0; k < m; ++k) {
        const Matrix eta = noise[u].col(k * B + b);
        const Matrix act = tdist[u + 1].mean + tdist[u + 1].stddev.cwiseProduct(eta);
        vn += tq.forward(batch.obs[u + 1].col(b), act, cs).q / m;
      }
    }
    double ra = 0.0;
    for (int j = 0; j < env::kNumChannels; ++j) ra += hp.reward_weights[static_cast<std::size_t>(j)] * batch.rewards[u](j, b);
    for (int h = 0; h < H; ++h) {
      q[static_cast<std::size_t>(h)](t) = co.q(h, 0);
      v[static_cast<std::size_t>(h)](t) = vn(h);
      r[static_cast<std::size_t>(h)](t) = H == 1 ? ra : batch.rewards[u](h, b);
    }
  }
  for (int h = 0; h < H; ++h) {
    const double gamma = H == 1 ? hp.discounts[env::kGoal] : hp.discounts[static_cast<std::size_t>(h)];
    const auto k = static_cast<std::size_t>(h);
    o.targets.push_back(retrace_double_sum(r[k], q[k], v[k], o.c, gamma));
  }
  o.q = q;
  return o;
}

struct Fixture {
  ArchSpec arch;
  PolicyNet pi, tpi;
  CriticNet q, tq;
  Batch batch;
};

inline Fixture make_fixture(const std::string& variant, Rng& rng, const std::vector<int>& lengths,
                     const std::vector<bool>& terminal) {
  Fixture f;
  f.arch = small_arch(variant);
  f.pi = PolicyNet(f.arch, rng);
  f.tpi = PolicyNet(f.arch, rng);
  f.q = CriticNet(f.arch, rng);
  f.tq = CriticNet(f.arch, rng);
  std::vector<SnippetPtr> snippets;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    auto s = std::const_pointer_cast<TrajectorySnippet>(random_snippet(rng, lengths[i], terminal[i]));
    // Behavior close to the online policy so that c_t varies inside (0, 1].
    StackState st = f.pi.initial_state(1);
    for (auto& l : st) {
      l.hidden = random_matrix(rng, l.hidden.rows(), 1) * 0.5;
      l.cell = random_matrix(rng, l.cell.rows(), 1) * 0.5;
    }
    s->policy_state = st;
    StackState cst = f.q.initial_state(1);
    for (auto& l : cst) l.hidden.setConstant(0.1);
    s->critic_state = cst;
    for (int t = 0; t < lengths[i]; ++t) {
      const auto d = f.pi.forward(s->obs.col(t), f.pi.initial_state(1)).dist;
      s->behavior_mean.col(t) = d.mean + 0.2 * random_matrix(rng, env::kActionDim, 1);
      s->behavior_stddev.col(t) = d.stddev * uniform(rng, 0.7, 1.5);
      s->actions.col(t) = d.mean + d.stddev.cwiseProduct(random_matrix(rng, env::kActionDim, 1));
    }
    snippets.push_back(s);
  }
  f.batch = learner::make_batch(snippets, f.pi, f.q);
  return f;
}

}  // namespace coplay::testing
