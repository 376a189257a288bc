#pragma once

#include <Eigen/Dense>
#include <functional>
#include <iomanip>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "coplay/agent/episode.hpp"
#include "coplay/core/parallel.hpp"
#include "coplay/learner/agent.hpp"

namespace coplay::eval {

// ---------------------------------------------------------------------------
// Teams

/// One player slot: either a named stub controller or a policy network.
struct TeamMember {
  std::string stub;
  std::shared_ptr<const agent::PolicyNet> policy;
};

/// A team plays both seats of one side.
struct Team {
  std::string name;
  std::array<TeamMember, env::kPlayersPerTeam> members;
};

inline Team stub_team(const std::string& kind) {
  if (!agent::is_stub_kind(kind)) throw std::invalid_argument("unknown stub controller '" + kind + "'");
  Team t;
  t.name = kind;
  for (auto& m : t.members) m.stub = kind;
  return t;
}

inline Team policy_team(std::string name, std::shared_ptr<const agent::PolicyNet> a,
                        std::shared_ptr<const agent::PolicyNet> b = nullptr) {
  Team t;
  t.name = std::move(name);
  t.members[0].policy = a;
  t.members[1].policy = b ? std::move(b) : std::move(a);
  return t;
}

/// Team from a command-line spec: a stub kind ("random", "passive",
/// "scripted", "passer"), a checkpoint path, or two of either joined by '+'.
inline Team load_team(const std::string& spec) {
  auto member = [](const std::string& s) {
    TeamMember m;
    if (agent::is_stub_kind(s)) {
      m.stub = s;
    } else {
      m.policy = std::make_shared<const agent::PolicyNet>(learner::load_policy(s));
    }
    return m;
  };
  Team t;
  t.name = spec;
  const auto plus = spec.find('+', 1);
  if (plus == std::string::npos) {
    t.members[0] = member(spec);
    t.members[1] = t.members[0];
  } else {
    t.members[0] = member(spec.substr(0, plus));
    t.members[1] = member(spec.substr(plus + 1));
  }
  return t;
}

inline agent::ControllerPtr make_controller(const TeamMember& m, const env::EnvConfig& cfg, bool greedy) {
  if (m.policy) return std::make_unique<agent::PolicyController>(m.policy, greedy);
  return agent::make_stub_controller(m.stub, cfg);
}

// ---------------------------------------------------------------------------
// Matches

struct EvalOptions {
  env::EnvConfig env = fixed_pitch();
  int workers = 1;
  bool greedy = false;
  int max_steps = 0;  // 0: environment cap

  /// The 24 m x 18 m evaluation pitch without size randomisation.
  static env::EnvConfig fixed_pitch() {
    env::EnvConfig c;
    c.scale_min = c.scale_max = 1.0;
    return c;
  }
};

inline agent::EpisodeResult play_team_match(const Team& blue, const Team& red, std::uint64_t seed,
                                            const EvalOptions& opt, bool record_trace = false, int episode = 0) {
  std::array<agent::ControllerPtr, env::kNumPlayers> ctl;
  std::array<agent::Controller*, env::kNumPlayers> raw{};
  for (int p = 0; p < env::kNumPlayers; ++p) {
    const auto& team = env::team_of(p) == 0 ? blue : red;
    const auto u = static_cast<std::size_t>(p);
    ctl[u] = make_controller(team.members[static_cast<std::size_t>(p % env::kPlayersPerTeam)], opt.env, opt.greedy);
    raw[u] = ctl[u].get();
  }
  Rng rng(derive_seed(seed, {0xac7}));
  agent::EpisodeOptions eo;
  eo.max_steps = opt.max_steps;
  eo.record_trace = record_trace;
  eo.episode_index = episode;
  return agent::play_episode(opt.env, env::reset(seed, opt.env), raw, rng, eo);
}

/// Plays one match and returns {blue goals, red goals}.
using PairRunner = std::function<std::array<int, 2>(const Team& blue, const Team& red, std::uint64_t seed)>;

inline PairRunner default_runner(const EvalOptions& opt) {
  return [opt](const Team& blue, const Team& red, std::uint64_t seed) {
    return play_team_match(blue, red, seed, opt).score;
  };
}

/// One tournament match from the point of view of the pair (a, b).
struct MatchRecord {
  int a = 0;
  int b = 0;
  int goals_a = 0;
  int goals_b = 0;
  bool a_blue = true;
  std::uint64_t seed = 0;

  /// Score of team a counting a draw as half a win.
  [[nodiscard]] double score_a() const { return goals_a > goals_b ? 1.0 : goals_a == goals_b ? 0.5 : 0.0; }
};

inline io::Json to_json(const MatchRecord& m) {
  return {{"a", m.a}, {"b", m.b}, {"goals_a", m.goals_a}, {"goals_b", m.goals_b}, {"a_blue", m.a_blue},
          {"seed", m.seed}};
}

inline MatchRecord match_record_from_json(const io::Json& j) {
  MatchRecord m;
  m.a = j.at("a").get<int>();
  m.b = j.at("b").get<int>();
  m.goals_a = j.at("goals_a").get<int>();
  m.goals_b = j.at("goals_b").get<int>();
  m.a_blue = j.value("a_blue", true);
  m.seed = j.value("seed", std::uint64_t{0});
  return m;
}

// ---------------------------------------------------------------------------
// Payoff matrix

inline constexpr const char* kPayoffSchema = "coplay.payoff/1";

enum class MetaPayoff { kGoalDifference, kWinRate };

/// Aggregated head-to-head results. Only integer tallies are stored, so
/// means are exact functions of the data and files round-trip bit for bit.
class PayoffMatrix {
 public:
  PayoffMatrix() = default;
  explicit PayoffMatrix(std::vector<std::string> names)
      : names_(std::move(names)), n_(static_cast<Eigen::Index>(names_.size())),
        counts_(Eigen::MatrixXi::Zero(n_, n_)), gd_sum_(Eigen::MatrixXi::Zero(n_, n_)),
        wins_(Eigen::MatrixXi::Zero(n_, n_)), draws_(Eigen::MatrixXi::Zero(n_, n_)) {}

  void add(const MatchRecord& m) {
    if (m.a < 0 || m.b < 0 || m.a >= n_ || m.b >= n_ || m.a == m.b) {
      throw std::invalid_argument("match record team index out of range");
    }
    const int d = m.goals_a - m.goals_b;
    counts_(m.a, m.b) += 1;
    counts_(m.b, m.a) += 1;
    gd_sum_(m.a, m.b) += d;
    gd_sum_(m.b, m.a) -= d;
    if (d > 0) wins_(m.a, m.b) += 1;
    if (d < 0) wins_(m.b, m.a) += 1;
    if (d == 0) {
      draws_(m.a, m.b) += 1;
      draws_(m.b, m.a) += 1;
    }
  }

  [[nodiscard]] int size() const { return static_cast<int>(n_); }
  [[nodiscard]] const std::vector<std::string>& names() const { return names_; }
  [[nodiscard]] const Eigen::MatrixXi& counts() const { return counts_; }

  /// Mean goal difference of row vs column; antisymmetric, zero where no
  /// match was played.
  [[nodiscard]] Eigen::MatrixXd goal_difference() const { return mean(gd_sum_); }
  [[nodiscard]] Eigen::MatrixXd win_rate() const { return mean(wins_); }
  [[nodiscard]] Eigen::MatrixXd draw_rate() const { return mean(draws_); }
  [[nodiscard]] Eigen::MatrixXd win_or_draw() const { return mean(wins_ + draws_); }

  [[nodiscard]] Eigen::MatrixXd meta_game(MetaPayoff kind = MetaPayoff::kGoalDifference) const {
    if (kind == MetaPayoff::kGoalDifference) return goal_difference();
    const Eigen::MatrixXd w = win_rate();
    return w - w.transpose();
  }

  [[nodiscard]] io::Json to_json() const {
    auto mat = [this](const Eigen::MatrixXi& m) {
      io::Json rows = io::Json::array();
      for (Eigen::Index i = 0; i < n_; ++i) {
        io::Json r = io::Json::array();
        for (Eigen::Index j = 0; j < n_; ++j) r.push_back(m(i, j));
        rows.push_back(std::move(r));
      }
      return rows;
    };
    return {{"schema", kPayoffSchema}, {"names", names_},        {"counts", mat(counts_)},
            {"goal_diff_sum", mat(gd_sum_)}, {"wins", mat(wins_)}, {"draws", mat(draws_)}};
  }

  static PayoffMatrix from_json(const io::Json& j) {
    if (j.value("schema", std::string()) != kPayoffSchema) throw std::invalid_argument("not a coplay.payoff/1 document");
    PayoffMatrix p(j.at("names").get<std::vector<std::string>>());
    auto read = [&](const char* key, Eigen::MatrixXi& m) {
      const auto& rows = j.at(key);
      if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != p.n_) {
        throw std::invalid_argument(std::string(key) + ": expected " + std::to_string(p.n_) + " rows");
      }
      for (Eigen::Index i = 0; i < p.n_; ++i) {
        const auto& r = rows.at(static_cast<std::size_t>(i));
        if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != p.n_) {
          throw std::invalid_argument(std::string(key) + ": row " + std::to_string(i) + " has wrong length");
        }
        for (Eigen::Index k = 0; k < p.n_; ++k) m(i, k) = r.at(static_cast<std::size_t>(k)).get<int>();
      }
    };
    read("counts", p.counts_);
    read("goal_diff_sum", p.gd_sum_);
    read("wins", p.wins_);
    read("draws", p.draws_);
    if (p.counts_ != p.counts_.transpose() || p.gd_sum_ != -p.gd_sum_.transpose() ||
        p.draws_ != p.draws_.transpose() || p.counts_ != p.wins_ + p.wins_.transpose() + p.draws_ ||
        p.counts_.diagonal().any()) {
      throw std::invalid_argument("inconsistent payoff tallies");
    }
    return p;
  }

 private:
  [[nodiscard]] Eigen::MatrixXd mean(const Eigen::MatrixXi& m) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_, n_);
    for (Eigen::Index i = 0; i < n_; ++i)
      for (Eigen::Index j = 0; j < n_; ++j)
        if (counts_(i, j) > 0) out(i, j) = static_cast<double>(m(i, j)) / counts_(i, j);
    return out;
  }

  std::vector<std::string> names_;
  Eigen::Index n_ = 0;
  Eigen::MatrixXi counts_, gd_sum_, wins_, draws_;
};

/// Fixed-width text table with row and column labels.
inline std::string format_table(const std::vector<std::string>& names, const Eigen::MatrixXd& m, int precision = 3) {
  std::size_t w = 8;
  for (const auto& n : names) w = std::max(w, n.size() + 2);
  std::ostringstream os;
  os << std::setw(static_cast<int>(w)) << "";
  for (const auto& n : names) os << std::setw(static_cast<int>(w)) << n;
  os << '\n' << std::fixed << std::setprecision(precision);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    os << std::setw(static_cast<int>(w)) << names[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << std::setw(static_cast<int>(w)) << m(i, j);
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Tournament

struct TournamentResult {
  PayoffMatrix matrix;
  std::vector<MatchRecord> matches;
  std::vector<std::pair<std::string, std::string>> excluded;  // spec, reason
};

/// Plays `num_matches` matches, each between a uniformly drawn pair of
/// distinct teams with a fair coin for the sides. Per-match seeds derive from
/// `seed` and the match index, so the result does not depend on `workers`.
inline TournamentResult run_tournament(const std::vector<Team>& teams, int num_matches, std::uint64_t seed,
                                       const EvalOptions& opt = {}, PairRunner runner = nullptr) {
  if (teams.size() < 2) throw std::invalid_argument("a tournament needs at least two teams");
  if (num_matches < 0) throw std::invalid_argument("num_matches must be >= 0");
  if (!runner) runner = default_runner(opt);
  const auto n = teams.size();
  const std::uint64_t pairs = n * (n - 1) / 2;
  std::vector<MatchRecord> schedule(static_cast<std::size_t>(num_matches));
  for (std::size_t m = 0; m < schedule.size(); ++m) {
    Rng rng(derive_seed(seed, {0x70a, m}));
    auto k = uniform_index(rng, pairs);
    int a = 0;
    while (k >= n - 1 - static_cast<std::uint64_t>(a)) k -= n - 1 - static_cast<std::uint64_t>(a++);
    auto& r = schedule[m];
    r.a = a;
    r.b = a + 1 + static_cast<int>(k);
    r.a_blue = bernoulli(rng, 0.5);
    r.seed = rng();
  }
  auto scores = parallel_map<std::array<int, 2>>(schedule.size(), opt.workers, [&](std::size_t m) {
    const auto& r = schedule[m];
    const auto& ta = teams[static_cast<std::size_t>(r.a)];
    const auto& tb = teams[static_cast<std::size_t>(r.b)];
    return r.a_blue ? runner(ta, tb, r.seed) : runner(tb, ta, r.seed);
  });
  std::vector<std::string> names;
  for (const auto& t : teams) names.push_back(t.name);
  TournamentResult res{PayoffMatrix(names), {}, {}};
  for (std::size_t m = 0; m < schedule.size(); ++m) {
    auto r = schedule[m];
    r.goals_a = r.a_blue ? scores[m][0] : scores[m][1];
    r.goals_b = r.a_blue ? scores[m][1] : scores[m][0];
    res.matrix.add(r);
    res.matches.push_back(r);
  }
  return res;
}

/// Loads each spec with load_team; unloadable entries are left out and
/// reported in `excluded`.
inline TournamentResult run_tournament(const std::vector<std::string>& specs, int num_matches, std::uint64_t seed,
                                       const EvalOptions& opt = {}) {
  std::vector<Team> teams;
  std::vector<std::pair<std::string, std::string>> excluded;
  for (const auto& s : specs) {
    try {
      teams.push_back(load_team(s));
    } catch (const std::exception& e) {
      excluded.emplace_back(s, e.what());
    }
  }
  if (teams.size() < 2) {
    std::string why = "fewer than two loadable teams";
    for (const auto& [s, e] : excluded) why += "; " + s + ": " + e;
    throw std::runtime_error(why);
  }
  auto res = run_tournament(teams, num_matches, seed, opt);
  res.excluded = std::move(excluded);
  return res;
}

// ---------------------------------------------------------------------------
// Weighted expected goal difference

struct WeightedGoalDifference {
  double value = 0.0;
  std::vector<double> head_to_head;  // mean goal difference vs each evaluator
};

/// sum_k w_k * (mean goal difference of `agent` against evaluator k). Each
/// evaluator with positive weight is played `matches` times with alternating
/// sides.
inline WeightedGoalDifference weighted_goal_difference(const Team& agent, const std::vector<Team>& evaluators,
                                                       const Eigen::VectorXd& weights, int matches,
                                                       std::uint64_t seed, const EvalOptions& opt = {},
                                                       PairRunner runner = nullptr) {
  if (evaluators.empty() || static_cast<Eigen::Index>(evaluators.size()) != weights.size()) {
    throw std::invalid_argument("weighted_goal_difference: need one weight per evaluator");
  }
  if (matches < 1) throw std::invalid_argument("weighted_goal_difference: matches must be >= 1");
  if (!runner) runner = default_runner(opt);
  WeightedGoalDifference out;
  out.head_to_head.assign(evaluators.size(), 0.0);
  for (std::size_t k = 0; k < evaluators.size(); ++k) {
    const double w = weights(static_cast<Eigen::Index>(k));
    if (!(w > 0.0)) continue;
    const auto gds = parallel_map<int>(static_cast<std::size_t>(matches), opt.workers, [&](std::size_t m) {
      const auto s = derive_seed(seed, {0x3e1, k, m});
      if (m % 2 == 0) {
        const auto g = runner(agent, evaluators[k], s);
        return g[0] - g[1];
      }
      const auto g = runner(evaluators[k], agent, s);
      return g[1] - g[0];
    });
    long total = 0;
    for (int d : gds) total += d;
    out.head_to_head[k] = static_cast<double>(total) / matches;
    out.value += w * out.head_to_head[k];
  }
  return out;
}

}  // namespace coplay::eval
