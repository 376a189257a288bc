#pragma once

// Command-line front end. Exit codes: 0 ok, 1 usage error, 2 data error
// (malformed or unreadable input, invalid configuration), 3 internal error.
// Relative output paths are placed under $COPLAY_OUTPUT_ROOT (default: the
// working directory); input paths are taken as given.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "coplay/analytics/analytics.hpp"
#include "coplay/eval/eval.hpp"
#include "coplay/pbt/pbt.hpp"

namespace coplay::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kInternal = 3 };

inline constexpr const char* kOutputRootVar = "COPLAY_OUTPUT_ROOT";

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline fs::path output_root() {
  const char* r = std::getenv(kOutputRootVar);
  return r != nullptr && *r != '\0' ? fs::path(r) : fs::current_path();
}

inline fs::path resolve_output(const std::string& p) {
  const fs::path q(p);
  return q.is_absolute() ? q : output_root() / q;
}

inline void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + p.string() + "' for writing");
  os << text;
}

inline void write_json(const fs::path& p, const io::Json& j) { write_text(p, j.dump(2) + "\n"); }

inline void write_jsonl_file(const fs::path& p, const std::vector<io::Json>& records) {
  std::ostringstream os;
  for (const auto& r : records) io::write_jsonl(os, r);
  write_text(p, os.str());
}

inline io::Json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw io::DataError(path, 0, "cannot open file");
  try {
    return io::Json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw io::DataError(path, 1, std::string("invalid JSON: ") + e.what());
  }
}

inline io::Json manifest(const std::string& command, const std::vector<std::string>& args) {
  return {{"version", kVersion}, {"command", command}, {"args", args}};
}

/// Agent checkpoints of a run directory, in agent order.
inline std::vector<std::string> run_checkpoints(const std::string& dir) {
  const pbt::RunPaths paths{fs::path(dir)};
  std::vector<std::string> out;
  for (int i = 0; fs::exists(paths.agent(i)); ++i) out.push_back(paths.agent(i).string());
  if (out.empty()) throw io::DataError(dir, 0, "no agent checkpoints in run directory");
  return out;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string preset = "default";
  std::string config;
  std::vector<std::string> set;
  std::string out = "run";
  std::string resume;
  int workers = 0;
  double snapshot_every = 0.0;
  bool force = false;
};

inline pbt::TrainConfig build_config(const TrainArgs& a) {
  pbt::TrainConfig cfg;
  if (a.preset == "desk") {
    cfg = pbt::TrainConfig::desk();
  } else if (a.preset != "default") {
    throw UsageError("unknown preset '" + a.preset + "' (default, desk)");
  }
  if (!a.config.empty()) {
    io::Json f = read_json_file(a.config);
    // A run directory's config.json wraps the configuration.
    if (f.is_object() && f.contains("config") && f.contains("version")) f = f.at("config");
    try {
      cfg = pbt::train_config_from_json(f, cfg);
    } catch (const io::ConfigError& e) {
      throw io::ConfigError(a.config + ": " + e.what());
    }
  }
  io::Json ov = io::Json::object();
  for (const auto& s : a.set) io::apply_override(ov, s);
  if (a.workers > 0) ov["workers"] = a.workers;
  return pbt::train_config_from_json(ov, cfg);
}

inline void snapshot(const pbt::Trainer& t) {
  t.checkpoint();
  const auto frames = static_cast<long long>(std::llround(t.frames()));
  const auto dir = t.paths().root / "snapshots" / ("frames_" + std::to_string(frames));
  fs::create_directories(dir);
  for (int i = 0; i < t.config().pbt.population; ++i) {
    fs::copy_file(t.paths().agent(i), dir / t.paths().agent(i).filename(), fs::copy_options::overwrite_existing);
  }
}

inline int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  if (a.snapshot_every < 0.0) throw UsageError("--snapshot-every must be >= 0");
  std::optional<pbt::Trainer> t;
  if (!a.resume.empty()) {
    if (!a.config.empty()) throw UsageError("--config cannot be combined with --resume; use --set");
    io::Json ov = io::Json::object();
    for (const auto& s : a.set) io::apply_override(ov, s);
    if (a.workers > 0) ov["workers"] = a.workers;
    const auto dir = resolve_output(a.resume);
    if (!fs::exists(pbt::RunPaths{dir}.state())) throw io::DataError(dir.string(), 0, "not a run directory");
    t.emplace(pbt::Trainer::resume(dir, ov));
  } else {
    const auto cfg = build_config(a);
    const auto dir = resolve_output(a.out);
    if (fs::exists(pbt::RunPaths{dir}.state()) && !a.force) {
      throw UsageError(dir.string() + " already holds a run; use --resume or --force");
    }
    t.emplace(cfg, dir);
  }
  const double budget = t->config().frame_budget;
  double next_snap = a.snapshot_every > 0.0 ? (std::floor(t->frames() / a.snapshot_every) + 1.0) * a.snapshot_every
                                            : std::numeric_limits<double>::infinity();
  int reported = budget > 0.0 ? static_cast<int>(10.0 * t->frames() / budget) : 10;
  while (!t->done()) {
    t->step_round();
    if (t->frames() >= next_snap) {
      snapshot(*t);
      while (next_snap <= t->frames()) next_snap += a.snapshot_every;
    }
    const int tenth = static_cast<int>(10.0 * t->frames() / budget);
    if (tenth > reported) {
      reported = tenth;
      err << "train: " << std::min(100, 10 * tenth) << "% (" << static_cast<long long>(t->frames())
          << " frames, round " << t->rounds() << ")\n";
    }
  }
  t->checkpoint();
  if (a.snapshot_every > 0.0) snapshot(*t);
  io::Json ratings = io::Json::array();
  for (const auto& r : t->book().agents) ratings.push_back(r.rating);
  out << io::Json{{"run_dir", t->paths().root.string()},
                  {"rounds", t->rounds()},
                  {"matches", t->matches_played()},
                  {"frames", t->frames()},
                  {"inheritances", t->inheritances()},
                  {"ratings", ratings}}
             .dump()
      << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// tournament

/// Matrix with numbered rows and columns; names are listed separately.
inline std::string indexed_table(const Eigen::MatrixXd& m) {
  std::ostringstream os;
  os << "    ";
  for (Eigen::Index j = 0; j < m.cols(); ++j) os << std::setw(8) << j;
  os << '\n' << std::fixed << std::setprecision(3);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    os << std::setw(4) << i;
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << std::setw(8) << m(i, j);
    os << '\n';
  }
  return os.str();
}

struct TournamentArgs {
  std::vector<std::string> teams;
  std::vector<std::string> runs;
  int matches = 100;
  std::uint64_t seed = 1;
  int workers = 1;
  bool greedy = false;
  int max_steps = 0;
  std::string out = "tournament";
};

inline int cmd_tournament(const TournamentArgs& a, const std::vector<std::string>& argv, std::ostream& out,
                          std::ostream& err) {
  auto specs = a.teams;
  for (const auto& r : a.runs) {
    const auto c = run_checkpoints(r);
    specs.insert(specs.end(), c.begin(), c.end());
  }
  if (specs.size() < 2) throw UsageError("a tournament needs at least two teams");
  if (a.matches < 1 || a.workers < 1 || a.max_steps < 0) {
    throw UsageError("--matches and --workers must be >= 1, --max-steps >= 0");
  }
  eval::EvalOptions opt;
  opt.workers = a.workers;
  opt.greedy = a.greedy;
  opt.max_steps = a.max_steps;
  const auto res = eval::run_tournament(specs, a.matches, a.seed, opt);
  for (const auto& [s, why] : res.excluded) err << "tournament: skipped '" << s << "': " << why << '\n';

  const auto dir = resolve_output(a.out);
  auto man = manifest("tournament", argv);
  man["seed"] = a.seed;
  io::Json excl = io::Json::array();
  for (const auto& [s, why] : res.excluded) excl.push_back({{"spec", s}, {"reason", why}});
  man["excluded"] = excl;
  write_json(dir / "manifest.json", man);
  write_json(dir / "payoff.json", res.matrix.to_json());
  std::vector<io::Json> recs;
  for (const auto& m : res.matches) recs.push_back(eval::to_json(m));
  write_jsonl_file(dir / "matches.jsonl", recs);

  const auto& names = res.matrix.names();
  const auto n = static_cast<int>(names.size());
  const auto fit = eval::fit_tournament_elo(res.matches, n);
  io::Json elo = {{"schema", "coplay.elo/1"},
                  {"names", names},
                  {"ratings", std::vector<double>(fit.ratings.data(), fit.ratings.data() + n)},
                  {"component", fit.component},
                  {"converged", fit.converged},
                  {"iterations", fit.iterations},
                  {"warnings", fit.warnings}};
  write_json(dir / "elo.json", elo);
  for (const auto& w : fit.warnings) err << "tournament: elo: " << w << '\n';

  std::ostringstream txt;
  txt << "teams\n";
  for (int i = 0; i < n; ++i) {
    txt << std::setw(4) << i << "  " << std::fixed << std::setprecision(1) << std::setw(8) << fit.ratings(i) << "  "
        << names[static_cast<std::size_t>(i)] << '\n';
  }
  txt << "\nexpected goal difference (row vs column)\n" << indexed_table(res.matrix.goal_difference())
      << "\nwin rate (row vs column)\n" << indexed_table(res.matrix.win_rate());
  write_text(dir / "payoff.txt", txt.str());
  out << txt.str();
  return kOk;
}

// ---------------------------------------------------------------------------
// nash

struct NashArgs {
  std::string input;
  std::string meta = "goal_difference";
  double tolerance = 1e-6;
  std::string out = "nash";
};

/// Reads either a tournament payoff file or {"payoff": [[...]], "names": [...]}.
inline std::pair<std::vector<std::string>, Eigen::MatrixXd> read_meta_game(const std::string& path,
                                                                           const std::string& meta) {
  const auto j = read_json_file(path);
  if (!j.is_object()) throw io::DataError(path, 1, "expected a JSON object");
  if (j.contains("schema")) {
    if (j.at("schema") != eval::kPayoffSchema) throw io::DataError(path, 1, "unsupported schema");
    eval::PayoffMatrix pm;
    try {
      pm = eval::PayoffMatrix::from_json(j);
    } catch (const std::exception& e) {
      throw io::DataError(path, 1, e.what());
    }
    const auto kind = meta == "win_rate" ? eval::MetaPayoff::kWinRate : eval::MetaPayoff::kGoalDifference;
    return {pm.names(), pm.meta_game(kind)};
  }
  if (!j.contains("payoff") || !j.at("payoff").is_array()) {
    throw io::DataError(path, 1, "expected a payoff file or an object with a \"payoff\" matrix");
  }
  const auto& rows = j.at("payoff");
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n == 0) throw io::DataError(path, 1, "payoff matrix is empty");
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows.at(static_cast<std::size_t>(i));
    if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != n) {
      throw io::DataError(path, static_cast<std::size_t>(i) + 1, "payoff row must hold " + std::to_string(n) + " numbers");
    }
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto& x = r.at(static_cast<std::size_t>(k));
      if (!x.is_number()) throw io::DataError(path, static_cast<std::size_t>(i) + 1, "non-numeric entry");
      a(i, k) = x.get<double>();
    }
  }
  std::vector<std::string> names;
  if (j.contains("names")) {
    names = j.at("names").get<std::vector<std::string>>();
    if (static_cast<Eigen::Index>(names.size()) != n) throw io::DataError(path, 1, "names do not match the matrix");
  } else {
    for (Eigen::Index i = 0; i < n; ++i) names.push_back(std::to_string(i));
  }
  return {names, a};
}

inline int cmd_nash(const NashArgs& a, std::ostream& out) {
  if (a.meta != "goal_difference" && a.meta != "win_rate") {
    throw UsageError("--meta must be goal_difference or win_rate");
  }
  const auto [names, m] = read_meta_game(a.input, a.meta);
  try {
    eval::check_antisymmetric(m);
  } catch (const std::invalid_argument& e) {
    throw io::DataError(a.input, 1, e.what());
  }
  eval::NashOptions opt;
  opt.tolerance = a.tolerance;
  const auto r = eval::nash_average(m, opt);
  io::Json support = io::Json::array();
  for (int i : r.support) support.push_back(names[static_cast<std::size_t>(i)]);
  const Eigen::VectorXd ratings = m * r.p;
  io::Json rep = {{"schema", "coplay.nash/1"},
                  {"source", a.input},
                  {"meta_game", a.meta},
                  {"names", names},
                  {"p", std::vector<double>(r.p.data(), r.p.data() + r.p.size())},
                  {"nash_ratings", std::vector<double>(ratings.data(), ratings.data() + ratings.size())},
                  {"support", support},
                  {"exploitability", r.exploitability},
                  {"entropy", r.entropy},
                  {"converged", r.converged},
                  {"note", r.note}};
  const auto dir = resolve_output(a.out);
  write_json(dir / "nash.json", rep);
  std::ostringstream txt;
  txt << "nash averaging over " << names.size() << " agents (" << a.meta << ")\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    txt << std::fixed << std::setprecision(6) << std::setw(10) << r.p(static_cast<Eigen::Index>(i)) << std::setw(12)
        << ratings(static_cast<Eigen::Index>(i)) << "  " << names[i] << '\n';
  }
  txt << std::scientific << std::setprecision(3) << "exploitability " << r.exploitability << ", entropy "
      << std::fixed << std::setprecision(6) << r.entropy << (r.converged ? "" : ", not converged: " + r.note) << '\n';
  write_text(dir / "nash.txt", txt.str());
  out << txt.str();
  return kOk;
}

// ---------------------------------------------------------------------------
// probe

struct ProbeArgs {
  std::string team;
  std::string opponents;
  std::string side = "both";
  int episodes = 100;
  int horizon = 100;
  std::uint64_t seed = 1;
  bool greedy = false;
  std::string out = "probe";
};

inline int cmd_probe(const ProbeArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  std::vector<env::ProbeSide> sides;
  if (a.side == "left" || a.side == "both") sides.push_back(env::ProbeSide::kLeft);
  if (a.side == "right" || a.side == "both") sides.push_back(env::ProbeSide::kRight);
  if (sides.empty()) throw UsageError("--side must be left, right or both");
  if (a.episodes < 1 || a.horizon < 1) throw UsageError("--episodes and --horizon must be >= 1");
  const auto team = eval::load_team(a.team);
  const auto opp = a.opponents.empty() ? team : eval::load_team(a.opponents);
  analytics::ProbeOptions opt;
  opt.episodes = a.episodes;
  opt.horizon = a.horizon;
  opt.seed = a.seed;
  opt.greedy = a.greedy;
  io::Json results = io::Json::array();
  std::ostringstream txt;
  txt << "side    passes  interceptions\n";
  for (auto s : sides) {
    const auto r = analytics::run_probe(team, opp, s, opt);
    results.push_back(r.to_json());
    txt << std::left << std::setw(6) << (s == env::ProbeSide::kLeft ? "left" : "right") << std::right << std::setw(8)
        << r.passes << std::setw(15) << r.interceptions << '\n';
  }
  auto rep = manifest("probe", argv);
  rep["schema"] = "coplay.probe/1";
  rep["team"] = team.name;
  rep["opponents"] = opp.name;
  rep["episodes"] = a.episodes;
  rep["horizon"] = a.horizon;
  rep["seed"] = a.seed;
  rep["results"] = results;
  const auto dir = resolve_output(a.out);
  write_json(dir / "probe.json", rep);
  out << txt.str();
  return kOk;
}

// ---------------------------------------------------------------------------
// export-traces

struct ExportArgs {
  std::string blue;
  std::string red = "random";
  int episodes = 1;
  std::uint64_t seed = 1;
  int max_steps = 0;
  bool greedy = false;
  std::vector<std::string> set;  // env configuration overrides
  std::string out = "traces/trace.jsonl";
};

inline env::Trace play_traces(const eval::Team& blue, const eval::Team& red, int episodes, std::uint64_t seed,
                              const eval::EvalOptions& opt) {
  env::Trace all;
  for (int e = 0; e < episodes; ++e) {
    auto ep = eval::play_team_match(blue, red, derive_seed(seed, {0x7ace, static_cast<std::uint64_t>(e)}), opt, true, e);
    all.insert(all.end(), std::make_move_iterator(ep.trace.begin()), std::make_move_iterator(ep.trace.end()));
  }
  return all;
}

inline int cmd_export(const ExportArgs& a, std::ostream& out) {
  if (a.episodes < 1 || a.max_steps < 0) throw UsageError("--episodes must be >= 1 and --max-steps >= 0");
  eval::EvalOptions opt;
  opt.greedy = a.greedy;
  opt.max_steps = a.max_steps;
  io::Json ov = io::Json::object();
  for (const auto& s : a.set) io::apply_override(ov, s);
  io::fields_from_json(ov, opt.env);
  opt.env.validate();
  const auto trace = play_traces(eval::load_team(a.blue), eval::load_team(a.red), a.episodes, a.seed, opt);
  std::ostringstream os;
  env::write_trace(os, trace);
  const auto path = resolve_output(a.out);
  write_text(path, os.str());
  out << io::Json{{"trace", path.string()}, {"episodes", a.episodes}, {"records", trace.size()}}.dump() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeArgs {
  std::vector<std::string> traces;
  std::string policy;
  std::vector<std::string> checkpoints;
  std::string opponent;
  std::vector<std::string> subsets;
  int alternatives = 10;
  int player = 0;
  int episodes = 4;
  int max_steps = 0;
  std::uint64_t seed = 1;
  bool reverse = false;
  std::string out = "analysis";
};

inline io::Json stats_record(const analytics::BehaviorStats& s) { return s.to_json(); }

inline std::vector<analytics::FeatureSubset> chosen_subsets(const AnalyzeArgs& a) {
  if (a.subsets.empty()) return analytics::all_feature_subsets();
  std::vector<analytics::FeatureSubset> out;
  for (const auto& s : a.subsets) {
    try {
      out.push_back(analytics::parse_subset(s));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  return out;
}

inline int cmd_analyze(const AnalyzeArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  if (a.alternatives < 1) throw UsageError("--alternatives must be >= 1");
  if (a.player < 0 || a.player >= env::kNumPlayers) throw UsageError("--player must be in [0, 3]");
  if (a.episodes < 1 || a.max_steps < 0) throw UsageError("--episodes must be >= 1 and --max-steps >= 0");
  if (!a.checkpoints.empty() && !a.traces.empty()) throw UsageError("give either --trace or --checkpoint");
  const auto subsets = chosen_subsets(a);
  const auto dir = resolve_output(a.out);
  analytics::CounterfactualOptions copt;
  copt.alternatives = a.alternatives;
  copt.player = a.player;
  copt.seed = a.seed;
  copt.reverse = a.reverse;

  if (!a.checkpoints.empty()) {
    // Plot series: behaviour of each checkpoint against frames trained.
    eval::EvalOptions opt;
    opt.max_steps = a.max_steps;
    std::vector<io::Json> series;
    for (const auto& c : a.checkpoints) {
      const auto loaded = learner::load_agent(c);
      const double frames = loaded.metadata.at("extra").value("frames", 0.0);
      auto pol = std::make_shared<const agent::PolicyNet>(loaded.agent.policy);
      const auto team = eval::policy_team(c, pol);
      const auto opp = a.opponent.empty() ? team : eval::load_team(a.opponent);
      const auto trace = play_traces(team, opp, a.episodes, a.seed, opt);
      const auto st = analytics::extract_stats(trace).total;
      io::Json row = {{"checkpoint", c}, {"frames", frames}};
      row.update(st.to_json());
      for (auto f : subsets) {
        const std::string key = std::string("kl_") + analytics::subset_name(f);
        row[key] = pol->recurrent() ? io::Json(nullptr)
                                    : io::Json(analytics::counterfactual_divergence(*pol, trace, f, copt).mean);
      }
      series.push_back(row);
    }
    std::stable_sort(series.begin(), series.end(), [](const io::Json& x, const io::Json& y) {
      return x.at("frames").get<double>() < y.at("frames").get<double>();
    });
    write_jsonl_file(dir / "series.jsonl", series);
    write_json(dir / "manifest.json", manifest("analyze", argv));
    for (const auto& r : series) out << r.dump() << '\n';
    return kOk;
  }

  std::optional<agent::PolicyNet> policy;
  if (!a.policy.empty()) {
    policy = learner::load_policy(a.policy);
    if (policy->recurrent()) {
      throw io::DataError(a.policy, 0, "counterfactual divergence cannot be measured for a recurrent policy");
    }
  }
  std::vector<io::Json> stats_lines, kl_lines;
  env::Trace all;
  io::Json kl_summary = io::Json::object();
  std::vector<double> kl_sum(subsets.size(), 0.0);
  std::size_t kl_steps = 0;
  for (const auto& path : a.traces) {
    const auto trace = env::read_trace_file(path);
    const auto st = analytics::extract_stats(trace);
    for (std::size_t e = 0; e < st.per_episode.size(); ++e) {
      io::Json rec = {{"source", path}, {"episode", e}};
      rec.update(st.per_episode[e].to_json());
      stats_lines.push_back(rec);
    }
    if (policy) {
      for (std::size_t k = 0; k < subsets.size(); ++k) {
        const auto cf = analytics::counterfactual_divergence(*policy, trace, subsets[k], copt);
        for (std::size_t t = 0; t < trace.size(); ++t) {
          kl_lines.push_back({{"source", path},
                              {"subset", analytics::subset_name(subsets[k])},
                              {"episode", trace[t].episode},
                              {"step", trace[t].step},
                              {"kl", cf.per_step[t]}});
          kl_sum[k] += cf.per_step[t];
        }
      }
      kl_steps += trace.size();
    }
    all.insert(all.end(), trace.begin(), trace.end());
  }
  // Episode indices restart per file; keep the touch sequences apart.
  int offset = 0, last = -1;
  for (auto& r : all) {
    if (r.step == 0 && r.episode <= last) offset = last + 1;
    r.episode += offset;
    last = r.episode;
  }
  const auto total = analytics::extract_stats(all).total;
  if (policy) {
    for (std::size_t k = 0; k < subsets.size(); ++k) {
      kl_summary[analytics::subset_name(subsets[k])] =
          kl_steps > 0 ? kl_sum[k] / static_cast<double>(kl_steps) : 0.0;
    }
  }
  io::Json rep = {{"schema", "coplay.analysis/1"},
                  {"traces", a.traces},
                  {"stats", stats_record(total)},
                  {"kl_direction", a.reverse ? "counterfactual||true" : "true||counterfactual"},
                  {"kl", policy ? kl_summary : io::Json(nullptr)}};
  write_json(dir / "analysis.json", rep);
  write_jsonl_file(dir / "stats.jsonl", stats_lines);
  if (policy) write_jsonl_file(dir / "kl.jsonl", kl_lines);
  out << rep.dump(2) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

/// Parses `argv` and runs one subcommand.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"coplay: population-based co-play training and evaluation for 2v2 simulated soccer"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  app.footer(std::string("Relative output paths are placed under $") + kOutputRootVar +
             ".\nExit codes: 0 ok, 1 usage error, 2 data error, 3 internal error.");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Run (or resume) population-based training");
  train->add_option("--preset", ta.preset, "Base configuration: default or desk")->capture_default_str();
  train->add_option("--config", ta.config, "JSON configuration file overlaid on the preset");
  train->add_option("--set", ta.set, "Override a configuration key, e.g. --set pbt.population=8")->take_all();
  train->add_option("--out", ta.out, "Run directory")->capture_default_str();
  train->add_option("--resume", ta.resume, "Continue the run in this directory");
  train->add_option("--workers", ta.workers, "Worker threads (ignored in deterministic mode)");
  train->add_option("--snapshot-every", ta.snapshot_every, "Keep agent checkpoints every this many frames");
  train->add_flag("--force", ta.force, "Start over in a directory that already holds a run");

  TournamentArgs tt;
  auto* tour = app.add_subcommand("tournament", "Round-robin evaluation tournament");
  tour->add_option("teams", tt.teams, "Teams: stub kind, checkpoint path, or a+b");
  tour->add_option("--run", tt.runs, "Add every agent checkpoint of a run directory");
  tour->add_option("--matches", tt.matches, "Number of matches")->capture_default_str();
  tour->add_option("--seed", tt.seed)->capture_default_str();
  tour->add_option("--workers", tt.workers)->capture_default_str();
  tour->add_option("--max-steps", tt.max_steps, "Episode length cap (0: environment default)");
  tour->add_flag("--greedy", tt.greedy, "Act with the policy mean");
  tour->add_option("--out", tt.out)->capture_default_str();

  NashArgs na;
  auto* nash = app.add_subcommand("nash", "Maximum-entropy Nash averaging of a meta-game");
  nash->add_option("input", na.input, "payoff.json from a tournament, or {\"payoff\": [[...]]}")->required();
  nash->add_option("--meta", na.meta, "goal_difference or win_rate")->capture_default_str();
  nash->add_option("--tolerance", na.tolerance, "Exploitability tolerance")->capture_default_str();
  nash->add_option("--out", na.out)->capture_default_str();

  ProbeArgs pa;
  auto* probe = app.add_subcommand("probe", "Pass/interception probe from the fixed start position");
  probe->add_option("--team", pa.team, "Team under test")->required();
  probe->add_option("--opponents", pa.opponents, "Opposing team (default: the same team)");
  probe->add_option("--side", pa.side, "left, right or both")->capture_default_str();
  probe->add_option("--episodes", pa.episodes)->capture_default_str();
  probe->add_option("--horizon", pa.horizon, "Control steps per episode")->capture_default_str();
  probe->add_option("--seed", pa.seed)->capture_default_str();
  probe->add_flag("--greedy", pa.greedy);
  probe->add_option("--out", pa.out)->capture_default_str();

  AnalyzeArgs aa;
  auto* analyze = app.add_subcommand("analyze", "Behaviour statistics and counterfactual policy divergence");
  analyze->add_option("--trace", aa.traces, "Trace files written by export-traces");
  analyze->add_option("--policy", aa.policy, "Feedforward checkpoint for counterfactual divergence");
  analyze->add_option("--checkpoint", aa.checkpoints, "Checkpoints to play and plot against frames");
  analyze->add_option("--opponent", aa.opponent, "Opponent for --checkpoint (default: self-play)");
  analyze->add_option("--subset", aa.subsets, "ball, teammate, opponent0, opponent1 (default: all)");
  analyze->add_option("--alternatives", aa.alternatives)->capture_default_str();
  analyze->add_option("--player", aa.player, "Acting player for divergence")->capture_default_str();
  analyze->add_option("--episodes", aa.episodes, "Episodes per checkpoint")->capture_default_str();
  analyze->add_option("--max-steps", aa.max_steps);
  analyze->add_option("--seed", aa.seed)->capture_default_str();
  analyze->add_flag("--reverse", aa.reverse, "KL(counterfactual || true) instead of KL(true || counterfactual)");
  analyze->add_option("--out", aa.out)->capture_default_str();

  ExportArgs ea;
  auto* exp = app.add_subcommand("export-traces", "Play episodes and write per-step trace records");
  exp->add_option("--blue", ea.blue, "Blue team")->required();
  exp->add_option("--red", ea.red, "Red team")->capture_default_str();
  exp->add_option("--episodes", ea.episodes)->capture_default_str();
  exp->add_option("--seed", ea.seed)->capture_default_str();
  exp->add_option("--max-steps", ea.max_steps);
  exp->add_option("--set", ea.set, "Environment override, e.g. --set base_length=14")->take_all();
  exp->add_flag("--greedy", ea.greedy);
  exp->add_option("--out", ea.out, "Trace file")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }
  const std::vector<std::string> args(argv + std::min(argc, 1), argv + argc);
  try {
    if (train->parsed()) return cmd_train(ta, out, err);
    if (tour->parsed()) return cmd_tournament(tt, args, out, err);
    if (nash->parsed()) return cmd_nash(na, out);
    if (probe->parsed()) return cmd_probe(pa, args, out);
    if (analyze->parsed()) return cmd_analyze(aa, args, out);
    if (exp->parsed()) return cmd_export(ea, out);
    return kUsage;
  } catch (const UsageError& e) {
    err << "coplay: " << e.what() << '\n';
    return kUsage;
  } catch (const io::DataError& e) {
    err << "coplay: data error: " << e.what() << '\n';
    return kDataError;
  } catch (const io::ConfigError& e) {
    err << "coplay: invalid configuration: " << e.what() << '\n';
    return kDataError;
  } catch (const nlohmann::json::exception& e) {
    err << "coplay: data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::runtime_error& e) {
    // Unreadable checkpoints and files, too few loadable teams.
    err << "coplay: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "coplay: internal error: " << e.what() << '\n';
    return kInternal;
  }
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("coplay");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace coplay::cli
