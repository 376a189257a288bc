// Acceptance suite: one [PASS]/[FAIL] line per criterion.
//
//   acceptance            run all criteria
//   acceptance 1 5 9      run a subset
//
// Exit status is 0 only if every selected criterion passes.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include "coplay/analytics/analytics.hpp"
#include "coplay/cli/cli.hpp"
#include "coplay/eval/eval.hpp"
#include "coplay/pbt/pbt.hpp"
#include "support/gradcheck.hpp"
#include "support/learner_fixtures.hpp"

using namespace coplay;
using namespace coplay::testing;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  // Records a named check; failures are listed first in the detail line.
  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "FAILED " << what << "; ";
    }
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double three_sigma(double p, double n) { return 3.0 * std::sqrt(p * (1.0 - p) / n); }

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("coplay_acceptance_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

// ---------------------------------------------------------------------------
// 1. Elo

void elo(Verdict& v) {
  const auto t0 = Clock::now();
  v.check(pbt::predicted_winrate(1000, 1000) == 0.5, "equal ratings give 0.5");
  v.check(pbt::predicted_winrate(1500, 1500) == 0.5, "equal ratings give 0.5 at 1500");
  const double p400 = pbt::predicted_winrate(1400, 1000);
  v.check(std::abs(p400 - 10.0 / 11.0) <= 1e-15, "400 point gap gives 10/11");
  // Closed form of one update: r' = r + k (s - p).
  Rng rng(1);
  double worst_sum = 0.0, worst_form = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double ri = uniform(rng, 0, 3000), rj = uniform(rng, 0, 3000), k = uniform(rng, 0, 50);
    const double gi = static_cast<double>(uniform_index(rng, 4)), gj = static_cast<double>(uniform_index(rng, 4));
    const auto [a, b] = pbt::update_rating(ri, rj, gi, gj, k);
    const double s = gi > gj ? 1.0 : gi < gj ? 0.0 : 0.5;
    const double p = 1.0 / (1.0 + std::pow(10.0, (rj - ri) / 400.0));
    worst_sum = std::max(worst_sum, std::abs((a + b) - (ri + rj)));
    worst_form = std::max(worst_form, std::abs(a - (ri + k * (s - p))));
  }
  pbt::RatingBook book(4, 1000);
  for (int i = 0; i < 4; ++i) book[i].rating = uniform(rng, 800, 1200);
  const double total = book.total_rating();
  for (int m = 0; m < 10000; ++m) {
    const auto t = pbt::schedule_match(4, rng);
    pbt::update_team_ratings(book, t, static_cast<int>(uniform_index(rng, 3)), static_cast<int>(uniform_index(rng, 3)),
                             0.1);
  }
  const double team_drift = std::abs(book.total_rating() - total);
  v.check(worst_sum <= 1e-12, "pairwise sum conserved to 1e-12");
  v.check(worst_form <= 1e-9, "update matches closed form");
  v.check(team_drift <= 1e-9, "team updates conserve the population total");
  const double secs = seconds_since(t0);
  v.check(secs < 1.0, "runtime < 1 s");
  v.detail << "p(400)-10/11=" << p400 - 10.0 / 11.0 << " max|sum drift|=" << worst_sum
           << " team drift=" << team_drift << " " << secs << " s";
}

// ---------------------------------------------------------------------------
// 2. Retrace oracle

void retrace(Verdict& v) {
  const auto t0 = Clock::now();
  Rng rng(2);
  const std::vector<std::string> variants = {"ff", "lstm_q", "lstm", "channels"};
  int snippets = 0;
  double worst = 0.0;
  for (int f_i = 0; snippets < 1000; ++f_i) {
    std::vector<int> lengths(4, 5);
    std::vector<bool> terminal;
    for (int i = 0; i < 4; ++i) terminal.push_back(uniform(rng, 0, 1) < 0.3);
    auto f = make_fixture(variants[static_cast<std::size_t>(f_i) % variants.size()], rng, lengths, terminal);
    const auto hp = random_hp(rng);
    const int m = 2;
    const std::uint64_t seed = rng();
    Rng stream(seed);
    const auto rt = learner::retrace_targets(f.batch, f.tq, f.tpi, f.pi, hp, m, stream);
    for (Eigen::Index b = 0; b < f.batch.size; ++b, ++snippets) {
      const auto o = oracle_targets(f.batch, b, f.tq, f.tpi, f.pi, hp, m, Rng(seed));
      for (int t = 0; t < 5; ++t) {
        for (std::size_t h = 0; h < o.targets.size(); ++h) {
          worst = std::max(worst, std::abs(rt.targets[static_cast<std::size_t>(t)](static_cast<Eigen::Index>(h), b) -
                                           o.targets[h](t)));
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  v.check(worst <= 1e-10, "targets within 1e-10");
  v.check(secs < 10.0, "runtime < 10 s");
  v.detail << snippets << " snippets, max|diff|=" << worst << " " << secs << " s";
}

// ---------------------------------------------------------------------------
// 3. Gradient checks

void gradients(Verdict& v) {
  const auto t0 = Clock::now();
  Rng rng(3);
  double policy = 0.0, critic = 0.0;
  for (const std::string var : {"ff", "lstm_q", "lstm", "channels"}) {
    auto f = make_fixture(var, rng, {3, 2}, {false, true});
    const auto hp = random_hp(rng);
    const auto noise = learner::draw_policy_noise(f.batch, 2, rng);
    nn::ParamSet g = f.pi.params().zeros_like();
    learner::policy_loss(f.pi, f.q, f.batch, noise, hp, &g);
    policy = std::max(policy, check_param_grads(
                                  f.pi.params(), g,
                                  [&] { return learner::policy_loss(f.pi, f.q, f.batch, noise, hp, nullptr).loss; },
                                  rng, 300)
                                  .max_rel_error);
    std::vector<Matrix> targets;
    for (int t = 0; t < f.batch.steps; ++t)
      targets.push_back(random_matrix(rng, f.q.num_heads(), f.batch.size));
    nn::ParamSet gq = f.q.params().zeros_like();
    learner::critic_loss(f.q, f.batch, targets, &gq);
    critic = std::max(critic, check_param_grads(
                                  f.q.params(), gq,
                                  [&] { return learner::critic_loss(f.q, f.batch, targets, nullptr); }, rng, 300)
                                  .max_rel_error);
  }

  double encoder = 0.0;
  {
    agent::ArchSpec a;
    nn::ParamSet p;
    const auto spec = agent::encoder_spec("x.", a);
    nn::init_stack(spec, p, rng);
    Matrix obs(env::kObsDim, 3);
    for (Eigen::Index j = 0; j < 3; ++j) obs.col(j) = random_observation(rng);
    const Matrix w = random_matrix(rng, a.feature_dim(), 3);
    auto loss = [&] { return agent::encode(spec, p, obs, nullptr).cwiseProduct(w).sum(); };
    agent::EncoderCache cache;
    agent::encode(spec, p, obs, &cache);
    nn::ParamSet g = p.zeros_like();
    agent::encode_backward(spec, p, cache, w, g);
    encoder = check_param_grads(p, g, loss, rng).max_rel_error;
  }

  double lstm = 0.0;
  {
    const nn::StackSpec spec{"rnn.", {{nn::LayerKind::kDense, 3, 4, nn::Activation::kElu},
                                      {nn::LayerKind::kLstm, 4, 5, nn::Activation::kLinear},
                                      {nn::LayerKind::kDense, 5, 2, nn::Activation::kLinear}}};
    nn::ParamSet p;
    nn::init_stack(spec, p, rng);
    const int steps = 5, batch = 2;
    std::vector<Matrix> xs, ws;
    for (int t = 0; t < steps; ++t) {
      xs.push_back(random_matrix(rng, 3, batch));
      ws.push_back(random_matrix(rng, 2, batch));
    }
    const StackState init = {nn::LstmState{random_matrix(rng, 5, batch, 0.5), random_matrix(rng, 5, batch, 0.5)}};
    auto loss = [&] {
      StackState s = init;
      double total = 0.0;
      for (int t = 0; t < steps; ++t) {
        StackState next;
        total += nn::stack_forward(spec, p, xs[static_cast<std::size_t>(t)], &s, &next, nullptr)
                     .cwiseProduct(ws[static_cast<std::size_t>(t)])
                     .sum();
        s = std::move(next);
      }
      return total;
    };
    std::vector<nn::StackCache> caches(steps);
    StackState s = init;
    for (int t = 0; t < steps; ++t) {
      StackState next;
      nn::stack_forward(spec, p, xs[static_cast<std::size_t>(t)], &s, &next, &caches[static_cast<std::size_t>(t)]);
      s = std::move(next);
    }
    nn::ParamSet g = p.zeros_like();
    StackState d_next;
    for (int t = steps - 1; t >= 0; --t) {
      StackState d_prev;
      nn::stack_backward(spec, p, caches[static_cast<std::size_t>(t)], ws[static_cast<std::size_t>(t)], &d_next, g,
                         &d_prev);
      d_next = std::move(d_prev);
    }
    lstm = check_param_grads(p, g, loss, rng).max_rel_error;
  }

  const double secs = seconds_since(t0);
  v.check(policy <= 1e-4, "SVG0 policy gradient");
  v.check(critic <= 1e-4, "critic gradient");
  v.check(encoder <= 1e-4, "encoder gradient");
  v.check(lstm <= 1e-4, "5-step LSTM BPTT");
  v.check(secs < 60.0, "runtime < 60 s");
  v.detail << "rel err policy=" << policy << " critic=" << critic << " encoder=" << encoder << " lstm=" << lstm << " "
           << secs << " s";
}

// ---------------------------------------------------------------------------
// 4. Channel consistency

void channels(Verdict& v) {
  Rng rng(4);
  double worst = 0.0;
  int snippets = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> lengths;
    std::vector<bool> terminal;
    for (int i = 0; i < 3; ++i) {
      lengths.push_back(1 + static_cast<int>(uniform_index(rng, 8)));
      terminal.push_back(uniform(rng, 0, 1) < 0.3);
    }
    auto f = make_fixture("channels", rng, lengths, terminal);
    auto hp = random_hp(rng);
    const double gamma = uniform(rng, 0.9, 0.999);
    hp.discounts.fill(gamma);
    Rng s(rng());
    const auto rt = learner::retrace_targets(f.batch, f.tq, f.tpi, f.pi, hp, 3, s);
    const Eigen::Map<const Eigen::Vector4d> alpha(hp.reward_weights.data());
    for (Eigen::Index b = 0; b < f.batch.size; ++b, ++snippets) {
      const int len = f.batch.length[static_cast<std::size_t>(b)];
      Eigen::VectorXd r(len), q(len), vn(len), c(len), combined(len);
      for (int t = 0; t < len; ++t) {
        const auto u = static_cast<std::size_t>(t);
        r(t) = alpha.dot(f.batch.rewards[u].col(b));
        q(t) = alpha.dot(rt.q_hat[u].col(b));
        vn(t) = alpha.dot(rt.v_next[u].col(b));
        c(t) = rt.c[u](0, b);
        combined(t) = alpha.dot(rt.targets[u].col(b));
      }
      worst = std::max(worst, (retrace_double_sum(r, q, vn, c, gamma) - combined).cwiseAbs().maxCoeff());
    }
  }
  v.check(worst <= 1e-10, "weighted sum within 1e-10");
  v.detail << snippets << " snippets, max|diff|=" << worst;
}

// ---------------------------------------------------------------------------
// 5. Nash averaging

Eigen::MatrixXd random_antisymmetric(int n, Rng& rng) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      a(i, j) = normal(rng);
      a(j, i) = -a(i, j);
    }
  return a;
}

double best_reply(const Eigen::MatrixXd& a, const Eigen::VectorXd& p) {
  double best = -1e300;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) s += a(i, j) * p(j);
    best = std::max(best, s);
  }
  return best;
}

void nash(Verdict& v) {
  double worst_expl = 0.0;
  auto solve = [&](const Eigen::MatrixXd& a) {
    auto r = eval::nash_average(a);
    worst_expl = std::max({worst_expl, r.exploitability, best_reply(a, r.p)});
    return r;
  };
  Eigen::MatrixXd rps(3, 3);
  rps << 0, -1, 1, 1, 0, -1, -1, 1, 0;
  const auto u = solve(rps);
  v.check((u.p.array() - 1.0 / 3.0).abs().maxCoeff() <= 1e-6, "RPS uniform");

  Eigen::MatrixXd chain(4, 4);
  chain << 0, 1, 1, 1, -1, 0, 1, 1, -1, -1, 0, 1, -1, -1, -1, 0;
  const auto d = solve(chain);
  v.check(d.support == std::vector<int>{0} && std::abs(d.p(0) - 1.0) <= 1e-6, "dominant chain degenerate");

  Rng rng(5);
  double worst_dup = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + static_cast<int>(uniform_index(rng, 6));
    const auto a = random_antisymmetric(n, rng);
    const int k = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n)));
    Eigen::MatrixXd b(n + 1, n + 1);
    b.topLeftCorner(n, n) = a;
    b.row(n).head(n) = a.row(k);
    b.col(n).head(n) = a.col(k);
    b(n, n) = 0.0;
    const auto base = solve(a);
    const auto ext = solve(b);
    for (int i = 0; i < n; ++i) {
      const double w = i == k ? ext.p(i) + ext.p(n) : ext.p(i);
      worst_dup = std::max(worst_dup, std::abs(w - base.p(i)));
    }
  }
  for (int t = 0; t < 200; ++t) solve(random_antisymmetric(2 + static_cast<int>(uniform_index(rng, 7)), rng));
  v.check(worst_dup <= 1e-6, "redundancy invariance within 1e-6");
  v.check(worst_expl <= 1e-6, "exploitability <= 1e-6");
  v.detail << "RPS max|p-1/3|=" << (u.p.array() - 1.0 / 3.0).abs().maxCoeff() << " dup max|diff|=" << worst_dup
           << " max exploitability=" << worst_expl;
}

// ---------------------------------------------------------------------------
// 6. Environment

env::EnvState quiet_state(const env::EnvConfig& cfg) {
  env::EnvState s;
  s.length = cfg.base_length;
  s.width = cfg.base_width;
  for (int i = 0; i < env::kNumPlayers; ++i) {
    auto& p = s.players[static_cast<std::size_t>(i)];
    p.team = env::team_of(i);
    p.pos = env::Vec2(-6.0 + 4.0 * i, -7.0);
  }
  return s;
}

void environment(Verdict& v) {
  const env::EnvConfig cfg;
  Rng rng(6);

  bool bitwise = true;
  for (std::uint64_t seed : {1, 7, 123}) {
    auto run = [&] {
      env::EnvState s = env::reset(seed, cfg);
      Rng arng(seed + 1);
      std::vector<std::array<env::RewardVector, env::kNumPlayers>> rewards;
      for (int t = 0; t < 300 && !s.terminal; ++t) {
        env::Actions a;
        for (auto& x : a) x = {uniform(arng, -1, 1), uniform(arng, -1, 1), uniform(arng, 0, 1)};
        auto r = env::step(s, a, cfg);
        rewards.push_back(r.rewards);
        s = r.state;
      }
      return std::make_pair(s, rewards);
    };
    const auto a = run(), b = run();
    bitwise = bitwise && env::states_bitwise_equal(a.first, b.first) && a.second.size() == b.second.size() &&
              std::memcmp(a.second.data(), b.second.data(), a.second.size() * sizeof(a.second[0])) == 0;
  }
  v.check(bitwise, "bitwise reproducible trajectories");

  double iso = 0.0;
  for (int k = 0; k < 200; ++k) {
    env::EnvState s = env::reset(static_cast<std::uint64_t>(k), cfg);
    for (auto& p : s.players) {
      p.vel = env::Vec2(uniform(rng, -3, 3), uniform(rng, -3, 3));
      p.ang_vel = uniform(rng, -2, 2);
    }
    s.ball.vel = env::Vec2(uniform(rng, -5, 5), uniform(rng, -5, 5));
    const env::Scene sc = env::make_scene(s);
    const env::Scene moved =
        sc.transformed(uniform(rng, -4, 4), env::Vec2(uniform(rng, -50, 50), uniform(rng, -50, 50)));
    for (int i = 0; i < env::kNumPlayers; ++i)
      iso = std::max(iso, (env::observe(sc, i) - env::observe(moved, i)).cwiseAbs().maxCoeff());
  }
  v.check(iso <= 1e-9, "isometry invariance <= 1e-9");

  double perm = 0.0;
  {
    agent::ArchSpec a;
    nn::ParamSet p;
    const auto spec = agent::encoder_spec("x.", a);
    nn::init_stack(spec, p, rng);
    Matrix obs(env::kObsDim, 32);
    for (Eigen::Index j = 0; j < obs.cols(); ++j) obs.col(j) = random_observation(rng);
    const Matrix before = agent::encode(spec, p, obs, nullptr);
    for (Eigen::Index j = 0; j < obs.cols(); ++j)
      for (int r = 0; r < env::kPlayerBlockDim; ++r)
        std::swap(obs(env::kOpponentOffset + r, j), obs(env::kOpponentOffset + env::kPlayerBlockDim + r, j));
    perm = (before - agent::encode(spec, p, obs, nullptr)).cwiseAbs().maxCoeff();
  }
  v.check(perm <= 1e-9, "encoder permutation invariance <= 1e-9");

  bool goals = true;
  for (int scorer = 0; scorer < 2; ++scorer) {
    env::EnvState s = quiet_state(cfg);
    const double sign = scorer == 0 ? 1.0 : -1.0;
    s.ball.pos = env::Vec2(sign * (0.5 * s.length - 0.1), 0.5);
    s.ball.vel = env::Vec2(sign * 6.0, 0.0);
    const auto r = env::step(s, env::Actions{}, cfg);
    goals = goals && r.terminal && r.events.goal.has_value() && r.events.goal->scoring_team == scorer &&
            r.state.score[static_cast<std::size_t>(scorer)] == 1;
    for (int i = 0; goals && i < env::kNumPlayers; ++i) {
      const auto& rw = r.rewards[static_cast<std::size_t>(i)];
      goals = env::team_of(i) == scorer ? rw[env::kGoal] == 1.0 && rw[env::kConcede] == 0.0
                                        : rw[env::kGoal] == 0.0 && rw[env::kConcede] == -1.0;
    }
    goals = goals && env::step(r.state, env::Actions{}, cfg).terminal;
  }
  v.check(goals, "goal terminates with goal/concede rewards");

  bool throw_ins = true;
  {
    env::EnvState s = quiet_state(cfg);
    s.ball.pos = env::Vec2(0.5 * s.length - 0.1, 0.4 * s.width);
    s.ball.vel = env::Vec2(6.0, 0.0);
    const auto r = env::step(s, env::Actions{}, cfg);
    throw_ins = !r.terminal && !r.events.goal && r.events.throw_ins == 1 && r.state.ball_in_bounds();
    for (int k = 0; k < 1000; ++k) {
      env::EnvState q = quiet_state(cfg);
      q.rng.seed(static_cast<std::uint64_t>(k));
      const double hl = 0.5 * q.length, hw = 0.5 * q.width;
      switch (k % 4) {
        case 0: q.ball.pos = env::Vec2(hl + 0.3, uniform(rng, -hw, hw)); break;
        case 1: q.ball.pos = env::Vec2(-hl - 0.3, uniform(rng, -hw, hw)); break;
        case 2: q.ball.pos = env::Vec2(uniform(rng, -hl, hl), hw + 0.3); break;
        default: q.ball.pos = env::Vec2(uniform(rng, -hl, hl), -hw - 0.3); break;
      }
      q.ball.vel = env::Vec2(2.0, -1.0);
      const auto t = env::throw_in(q, cfg);
      throw_ins = throw_ins && t.applied && std::abs(t.state.ball.pos.x()) < hl &&
                  std::abs(t.state.ball.pos.y()) < hw && t.state.ball.vel.norm() == 0.0;
    }
  }
  v.check(throw_ins, "throw-in semantics");
  v.detail << "isometry max|diff|=" << iso << " permutation max|diff|=" << perm;
}

// ---------------------------------------------------------------------------
// 7. PBT mechanics

pbt::AgentHyperparams hp_a() {
  pbt::AgentHyperparams h;
  h.actor_lr = 1e-4;
  h.critic_lr = 2e-4;
  h.entropy_cost = 1e-3;
  h.reward_weights = {1, 1, 0.01, 0.02};
  h.discounts = {0.99, 0.98, 0.97, 0.96};
  return h;
}

pbt::AgentHyperparams hp_b() {
  pbt::AgentHyperparams h;
  h.actor_lr = 3e-4;
  h.critic_lr = 4e-4;
  h.entropy_cost = 5e-3;
  h.reward_weights = {2, 3, 0.05, 0.06};
  h.discounts = {0.95, 0.94, 0.93, 0.92};
  return h;
}

void population(Verdict& v) {
  constexpr int kKnobs = pbt::AgentHyperparams::kNumKnobs;
  Rng rng(7);
  const int keep_trials = 10000;
  std::array<int, kKnobs> kept{};
  for (int t = 0; t < keep_trials; ++t) {
    const auto h = pbt::crossover(hp_a(), hp_b(), pbt::draw_keep_mask(0.5, rng));
    for (int k = 0; k < kKnobs; ++k) kept[static_cast<std::size_t>(k)] += h.knob(k) == hp_a().knob(k);
  }
  double keep_dev = 0.0;
  for (int k : kept) keep_dev = std::max(keep_dev, std::abs(k / double(keep_trials) - 0.5));
  v.check(keep_dev <= three_sigma(0.5, keep_trials), "keep rate 0.5 +- 3 sigma");

  pbt::PbtConfig wide;
  for (std::size_t k = 0; k < wide.bounds.lo.size(); ++k) {
    wide.bounds.lo[k] = 0.0;
    wide.bounds.hi[k] = 1e9;
  }
  const int mut_trials = 100000;
  std::array<int, kKnobs> hits{};
  for (int t = 0; t < mut_trials; ++t) {
    auto h = hp_a();
    for (const auto& m : pbt::mutate(h, wide, rng)) ++hits[static_cast<std::size_t>(m.knob)];
  }
  double mut_dev = 0.0;
  for (int k : hits) mut_dev = std::max(mut_dev, std::abs(k / double(mut_trials) - 0.1));
  v.check(mut_dev <= three_sigma(0.1, mut_trials), "mutation rate 0.1 +- 3 sigma");

  pbt::PbtConfig cfg;
  cfg.p_mutate = 0.5;
  bool bounded = true;
  auto h = hp_a();
  for (int t = 0; t < 10000; ++t) {
    h = pbt::crossover(h, hp_b(), pbt::draw_keep_mask(0.5, rng));
    pbt::mutate(h, cfg, rng);
    bounded = bounded && cfg.bounds.contains(h);
  }
  v.check(bounded, "hyperparameters stay in bounds");

  // Rigged population: agent 0's team always wins.
  auto tc = pbt::TrainConfig::desk();
  tc.variant = "ff+evo";
  tc.net.embed_hidden = 8;
  tc.net.embed_out = 4;
  tc.net.trunk = {8};
  tc.net.core = 8;
  tc.pbt.eligible_total = 30000;
  tc.pbt.eligible_increment = 1000;
  tc.pbt.burn_in = 1000;
  tc.frame_budget = 60000;
  pbt::MatchRunner rigged = [](const pbt::MatchJob& job, const pbt::TrainConfig&) {
    pbt::MatchOutcome o;
    o.steps = 100;
    const bool blue = job.teams.blue[0] == 0 || job.teams.blue[1] == 0;
    o.score = blue ? std::array<int, 2>{1, 0} : std::array<int, 2>{0, 1};
    return o;
  };
  pbt::Trainer t(tc, fresh_dir("rigged"), rigged);
  bool increasing = true;
  double prev = t.book()[0].rating;
  while (!t.done() && t.frames() < tc.pbt.eligible_total) {
    t.step_round();
    increasing = increasing && t.book()[0].rating > prev;
    prev = t.book()[0].rating;
  }
  while (!t.done() && t.inheritances() == 0) t.step_round();
  for (const auto& a : t.agents()) bounded = bounded && tc.pbt.bounds.contains(a.hp);
  v.check(increasing, "dominant Elo strictly increases");
  v.check(t.inheritances() >= 1, "at least one inheritance");
  v.check(bounded, "population hyperparameters stay in bounds");
  v.detail << "keep dev=" << keep_dev << " (3 sigma " << three_sigma(0.5, keep_trials) << ") mutate dev=" << mut_dev
           << " (3 sigma " << three_sigma(0.1, mut_trials) << ") inheritances=" << t.inheritances()
           << " at frames=" << t.frames() << " elo0=" << t.book()[0].rating;
}

// ---------------------------------------------------------------------------
// 8. Learning smoke test

// Mean per-step vel-to-ball reward of the players of `team` (0 blue, 1 red).
double team_vel_to_ball(const agent::EpisodeResult& r, int team) {
  double s = 0.0;
  for (int p = 0; p < env::kNumPlayers; ++p)
    if (env::team_of(p) == team) s += r.vel_to_ball_sum[static_cast<std::size_t>(p)];
  return r.steps > 0 ? s / (env::kPlayersPerTeam * r.steps) : 0.0;
}

struct Head2Head {
  double vel = 0.0;  // of the team under test
  int wins = 0, draws = 0, losses = 0;
};

// `matches` matches against `other`, alternating sides.
Head2Head play_series(const eval::Team& team, const eval::Team& other, int matches, std::uint64_t seed,
                      const eval::EvalOptions& opt) {
  Head2Head h;
  for (int m = 0; m < matches; ++m) {
    const bool blue = m % 2 == 0;
    const auto s = derive_seed(seed, {static_cast<std::uint64_t>(m)});
    const auto r = blue ? eval::play_team_match(team, other, s, opt) : eval::play_team_match(other, team, s, opt);
    const int side = blue ? 0 : 1;
    h.vel += team_vel_to_ball(r, side) / matches;
    const int o = blue ? r.outcome() : -r.outcome();
    h.wins += o > 0;
    h.draws += o == 0;
    h.losses += o < 0;
  }
  return h;
}

void learning(Verdict& v) {
  const auto t0 = Clock::now();
  auto cfg = pbt::TrainConfig::desk();
  cfg.frame_budget = 2e5;
  const auto dir = fresh_dir("learning");
  auto trainer = pbt::run_training(cfg, dir);
  const double train_secs = seconds_since(t0);

  eval::EvalOptions opt;
  opt.env = cfg.env;
  opt.env.scale_min = opt.env.scale_max = 1.0;
  const auto random = eval::stub_team("random");
  const int n = 200;

  const auto baseline = play_series(random, random, n, 81, opt);
  double trained_vel = 0.0;
  int best = 0;
  for (int i = 0; i < cfg.pbt.population; ++i) {
    auto pi = std::make_shared<const agent::PolicyNet>(trainer.agents()[static_cast<std::size_t>(i)].policy);
    trained_vel += play_series(eval::policy_team("agent", pi), random, n / cfg.pbt.population,
                               derive_seed(82, {static_cast<std::uint64_t>(i)}), opt)
                       .vel /
                   cfg.pbt.population;
    if (trainer.book()[i].rating > trainer.book()[best].rating) best = i;
  }
  auto top = std::make_shared<const agent::PolicyNet>(trainer.agents()[static_cast<std::size_t>(best)].policy);
  const auto h = play_series(eval::policy_team("top", top), random, n, 83, opt);
  const double not_lost = (h.wins + h.draws) / static_cast<double>(n);
  const double secs = seconds_since(t0);

  v.check(trained_vel > baseline.vel && trained_vel - baseline.vel >= 0.5 * std::abs(baseline.vel),
          "vel-to-ball >= 1.5x random baseline");
  v.check(not_lost >= 0.8, "win-or-draw >= 0.8 vs random");
  v.check(secs <= 1800.0, "runtime <= 30 min");
  v.detail << "frames=" << trainer.frames() << " vel trained=" << trained_vel << " random=" << baseline.vel
           << " vs random W/D/L=" << h.wins << "/" << h.draws << "/" << h.losses << " (" << not_lost << ")"
           << " train " << train_secs << " s, total " << secs << " s on " << std::thread::hardware_concurrency()
           << " core(s)";
}

// ---------------------------------------------------------------------------
// 9. Counterfactual divergence

void counterfactual(Verdict& v) {
  Eigen::VectorXd m1(3), s1(3), m2(3), s2(3);
  m1 << 0.1, -0.4, 0.7;
  s1 << 0.5, 1.2, 0.3;
  m2 << -0.2, 0.1, 0.5;
  s2 << 0.8, 0.9, 0.6;
  const double kl = analytics::gaussian_kl(m1, s1, m2, s2);
  Rng rng(9);
  const int n = 100000;
  double mc = 0.0;
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < 3; ++i) {
      const double x = m1(i) + s1(i) * normal(rng);
      const double z1 = (x - m1(i)) / s1(i), z2 = (x - m2(i)) / s2(i);
      mc += -std::log(s1(i)) - 0.5 * z1 * z1 + std::log(s2(i)) + 0.5 * z2 * z2;
    }
  }
  mc /= n;
  const double mc_rel = std::abs(mc - kl) / kl;
  v.check(mc_rel <= 0.01, "closed-form KL within 1% of Monte Carlo");

  auto arch = agent::ArchSpec::for_variant("ff");
  arch.embed_hidden = 8;
  arch.embed_out = 4;
  arch.trunk = {16};
  arch.core = 8;
  agent::PolicyNet pi(arch, rng);
  eval::EvalOptions eo;
  eo.max_steps = 40;
  const auto trace = eval::play_team_match(eval::stub_team("scripted"), eval::stub_team("random"), 3, eo, true).trace;

  double identity = 0.0;
  for (const auto& r : trace) {
    const auto s = env::state_from_record(r);
    const auto others = env::others_of(0);
    for (auto f : analytics::all_feature_subsets()) {
      const env::Vec2 pos = f == analytics::FeatureSubset::kBallPosition ? s.ball.pos
                            : f == analytics::FeatureSubset::kTeammatePosition
                                ? s.players[static_cast<std::size_t>(others[0])].pos
                            : f == analytics::FeatureSubset::kOpponent0Position
                                ? s.players[static_cast<std::size_t>(others[1])].pos
                                : s.players[static_cast<std::size_t>(others[2])].pos;
      identity = std::max(identity, std::abs(analytics::counterfactual_kl(pi, s, 0, f, pos)));
    }
  }
  v.check(identity == 0.0, "identity replacement is exactly zero");

  analytics::CounterfactualOptions co;
  co.seed = 4;
  const double ball_before = analytics::counterfactual_divergence(pi, trace, analytics::FeatureSubset::kBallPosition, co).mean;
  // Cut the ball-position inputs of the first trunk layer.
  auto& w = pi.params().at("pi.trunkL0.w");
  const Eigen::Index pooled = 3 * arch.embed_out;
  w.col(pooled + env::kBallOffset).setZero();
  w.col(pooled + env::kBallOffset + 1).setZero();
  pi.params().touch();
  const double ball_after = analytics::counterfactual_divergence(pi, trace, analytics::FeatureSubset::kBallPosition, co).mean;
  // Cut the player-position inputs of the embedding.
  auto& e = pi.params().at("pi.encL0.w");
  e.col(0).setZero();
  e.col(1).setZero();
  pi.params().touch();
  double players_after = 0.0;
  for (auto f : {analytics::FeatureSubset::kTeammatePosition, analytics::FeatureSubset::kOpponent0Position,
                 analytics::FeatureSubset::kOpponent1Position})
    players_after = std::max(players_after, analytics::counterfactual_divergence(pi, trace, f, co).mean);
  v.check(ball_before > 0.0, "ball divergence positive before the cut");
  v.check(ball_after == 0.0 && players_after == 0.0, "ignored features give exactly zero");
  v.detail << "KL=" << kl << " MC=" << mc << " rel=" << mc_rel << " ball " << ball_before << " -> " << ball_after
           << " players -> " << players_after;
}

// ---------------------------------------------------------------------------
// 10. End-to-end pipeline

void pipeline(Verdict& v) {
  const auto root = fresh_dir("pipeline");
  setenv(cli::kOutputRootVar, root.c_str(), 1);
  std::ostringstream log;
  auto call = [&](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (code != cli::kOk) log << args[0] << " exited " << code << ": " << err.str();
    return code == cli::kOk;
  };
  const std::vector<std::string> train = {"train", "--preset", "desk", "--set", "frame_budget=5000"};
  auto with_out = [](std::vector<std::string> a, const std::string& out) {
    a.insert(a.begin() + 1, {"--out", out});
    return a;
  };
  bool ok = call(with_out(train, "a")) && call(with_out(train, "b"));
  v.check(ok, "train");

  bool same = ok;
  for (const char* f : {"learner.jsonl", "ratings.jsonl", "evolution.jsonl", "state.json", "config.json"})
    same = same && slurp(root / "a" / f) == slurp(root / "b" / f);
  auto matches = [&](const char* run) {
    auto recs = io::read_jsonl_file((root / run / "matches.jsonl").string());
    for (auto& r : recs) {
      r.erase("started_ms");
      r.erase("finished_ms");
    }
    return recs;
  };
  same = same && matches("a") == matches("b");
  for (int i = 0; same && i < 4; ++i) {
    const auto ck = "checkpoints/agent_" + std::to_string(i) + ".bin";
    same = slurp(root / "a" / ck) == slurp(root / "b" / ck);
  }
  v.check(same, "deterministic repeat gives identical metric logs and checkpoints");

  ok = ok && call({"tournament", "random", "--run", (root / "a").string(), "--matches", "30", "--max-steps", "300",
                   "--out", "tournament"});
  v.check(ok, "tournament");
  bool round_trip = ok;
  if (ok) {
    const auto text = slurp(root / "tournament" / "payoff.json");
    const auto m = eval::PayoffMatrix::from_json(io::Json::parse(text));
    round_trip = m.to_json().dump(2) + "\n" == text && m.names().size() == 5;
    for (const auto& r : io::read_jsonl_file((root / "tournament" / "matches.jsonl").string())) {
      auto stripped = r;
      stripped.erase("started_ms");
      stripped.erase("finished_ms");
      auto again = eval::to_json(eval::match_record_from_json(r));
      again.erase("started_ms");
      again.erase("finished_ms");
      round_trip = round_trip && again == stripped;
    }
  }
  ok = ok && call({"nash", (root / "tournament" / "payoff.json").string(), "--out", "nash"});
  v.check(ok, "nash");
  if (ok) {
    const auto j = io::Json::parse(slurp(root / "nash" / "nash.json"));
    double sum = 0.0;
    for (const auto& p : j.at("p")) sum += p.get<double>();
    round_trip = round_trip && std::abs(sum - 1.0) <= 1e-9 && j.at("exploitability").get<double>() <= 1e-6;
  }
  const auto agent0 = (root / "a" / "checkpoints" / "agent_0.bin").string();
  ok = ok && call({"export-traces", "--blue", agent0, "--episodes", "2", "--max-steps", "150", "--out",
                   "traces/trace.jsonl"});
  if (ok) {
    const auto path = root / "traces" / "trace.jsonl";
    const auto trace = env::read_trace_file(path.string());
    std::ostringstream os;
    env::write_trace(os, trace);
    round_trip = round_trip && os.str() == slurp(path);
  }
  ok = ok && call({"analyze", "--trace", (root / "traces" / "trace.jsonl").string(), "--policy", agent0,
                   "--alternatives", "3", "--out", "analysis"});
  ok = ok && call({"analyze", "--checkpoint", agent0, "--checkpoint", (root / "a" / "checkpoints" / "agent_1.bin").string(),
                   "--episodes", "1", "--max-steps", "100", "--alternatives", "2", "--out", "series"});
  v.check(ok, "export-traces and analyze");
  if (ok) {
    const auto j = io::Json::parse(slurp(root / "analysis" / "analysis.json"));
    round_trip = round_trip && j.at("kl").at("ball").is_number() && !j.at("stats").at("empty").get<bool>() &&
                 io::read_jsonl_file((root / "series" / "series.jsonl").string()).size() == 2;
  }
  v.check(round_trip, "artifacts round-trip");
  unsetenv(cli::kOutputRootVar);
  v.detail << log.str() << "artifacts under " << root.string();
}

struct Criterion {
  int id;
  const char* name;
  std::function<void(Verdict&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "Elo exactness", elo},
      {2, "Retrace oracle", retrace},
      {3, "Gradient checks", gradients},
      {4, "Channel consistency", channels},
      {5, "Nash averaging", nash},
      {6, "Environment determinism and symmetry", environment},
      {7, "PBT mechanics", population},
      {8, "Learning smoke test", learning},
      {9, "Counterfactual divergence", counterfactual},
      {10, "End-to-end pipeline", pipeline},
  };
  std::vector<int> chosen;
  for (int i = 1; i < argc; ++i) chosen.push_back(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!chosen.empty() && std::find(chosen.begin(), chosen.end(), c.id) == chosen.end()) continue;
    Verdict v;
    const auto t0 = Clock::now();
    try {
      c.run(v);
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << "exception: " << e.what();
    }
    failed += !v.pass;
    std::printf("[%s] %2d %s: %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.str().c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
