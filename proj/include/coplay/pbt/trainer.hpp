#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "coplay/core/parallel.hpp"
#include "coplay/core/version.hpp"
#include "coplay/learner/learner.hpp"
#include "coplay/pbt/match.hpp"

namespace coplay::pbt {

namespace fs = std::filesystem;

/// Run directory layout.
struct RunPaths {
  fs::path root;
  [[nodiscard]] fs::path config() const { return root / "config.json"; }
  [[nodiscard]] fs::path state() const { return root / "state.json"; }
  [[nodiscard]] fs::path matches() const { return root / "matches.jsonl"; }
  [[nodiscard]] fs::path evolution() const { return root / "evolution.jsonl"; }
  [[nodiscard]] fs::path learner() const { return root / "learner.jsonl"; }
  [[nodiscard]] fs::path ratings() const { return root / "ratings.jsonl"; }
  [[nodiscard]] fs::path checkpoints() const { return root / "checkpoints"; }
  [[nodiscard]] fs::path agent(int i) const { return checkpoints() / ("agent_" + std::to_string(i) + ".bin"); }
};

inline std::string rng_to_string(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline Rng rng_from_string(const std::string& s) {
  Rng rng;
  std::istringstream is(s);
  is >> rng;
  if (!is) throw std::runtime_error("corrupt random engine state");
  return rng;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count();
  return std::to_string(ms);
}

/// Population-based co-play training. Each round schedules a batch of
/// matches, plays them against frozen snapshots, then, in match order,
/// stores experience, updates Elo and frame counters, runs evolution and
/// finally the learners. Every random draw derives from the root seed, the
/// round and the match or agent index, so the logs are reproducible for a
/// given configuration regardless of the worker count.
class Trainer {
 public:
  Trainer(TrainConfig cfg, const fs::path& run_dir, MatchRunner runner = play_training_match)
      : cfg_(std::move(cfg)), paths_{run_dir}, runner_(std::move(runner)) {
    cfg_.validate();
    Rng init(derive_seed(cfg_.seed, {0x1417}));
    book_ = RatingBook(cfg_.pbt.population, cfg_.pbt.initial_rating);
    for (int i = 0; i < cfg_.pbt.population; ++i) {
      auto hp = cfg_.init.sample(init);
      if (!cfg_.shaping()) {
        hp.reward_weights[env::kVelToBall] = 0.0;
        hp.reward_weights[env::kVelBallToGoal] = 0.0;
      }
      agents_.emplace_back(i, cfg_.arch(), hp, init);
    }
    make_replays();
    orchestrator_ = Rng(derive_seed(cfg_.seed, {0x0c4e}));
    credit_.assign(agents_.size(), 0.0);
    next_checkpoint_ = cfg_.checkpoint_every;
    fs::create_directories(paths_.checkpoints());
    for (const auto& p : {paths_.matches(), paths_.evolution(), paths_.learner(), paths_.ratings()}) fs::remove(p);
    write_config();
    checkpoint();
  }

  /// Reopens a run directory written by a previous Trainer. Replay contents
  /// are not persisted; learning restarts once `replay.min_size` snippets
  /// have been collected again.
  static Trainer resume(const fs::path& run_dir, const io::Json& overrides = io::Json::object(),
                        MatchRunner runner = play_training_match) {
    const RunPaths paths{run_dir};
    io::Json cj;
    {
      std::ifstream is(paths.config());
      if (!is) throw std::runtime_error(paths.config().string() + ": cannot open");
      cj = io::Json::parse(is);
    }
    TrainConfig cfg = train_config_from_json(cj.at("config"));
    if (!overrides.empty()) cfg = train_config_from_json(overrides, cfg);
    io::Json st;
    {
      std::ifstream is(paths.state());
      if (!is) throw std::runtime_error(paths.state().string() + ": cannot open");
      st = io::Json::parse(is);
    }
    return Trainer(std::move(cfg), paths, st, std::move(runner));
  }

  [[nodiscard]] const TrainConfig& config() const { return cfg_; }
  [[nodiscard]] const RunPaths& paths() const { return paths_; }
  [[nodiscard]] const RatingBook& book() const { return book_; }
  [[nodiscard]] const std::vector<learner::Agent>& agents() const { return agents_; }
  [[nodiscard]] const learner::ReplayBuffer& replay(int i) const { return *replays_.at(static_cast<std::size_t>(i)); }
  [[nodiscard]] std::uint64_t rounds() const { return round_; }
  [[nodiscard]] std::uint64_t matches_played() const { return match_id_; }
  [[nodiscard]] std::uint64_t inheritances() const { return inheritances_; }

  /// Mean learning frames per agent.
  [[nodiscard]] double frames() const {
    double s = 0.0;
    for (const auto& a : book_.agents) s += a.frames;
    return s / static_cast<double>(book_.size());
  }
  [[nodiscard]] bool done() const { return frames() >= cfg_.frame_budget; }

  /// Plays rounds until the frame budget is used up, then writes the final
  /// checkpoint.
  void run() {
    while (!done()) step_round();
    checkpoint();
  }

  void step_round() {
    const int N = cfg_.pbt.population;
    std::vector<MatchJob> jobs;
    std::vector<std::shared_ptr<const agent::PolicyNet>> pol(static_cast<std::size_t>(N));
    std::vector<std::shared_ptr<const agent::CriticNet>> cri(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) {
      pol[static_cast<std::size_t>(i)] = std::make_shared<agent::PolicyNet>(agents_[static_cast<std::size_t>(i)].policy);
      cri[static_cast<std::size_t>(i)] = std::make_shared<agent::CriticNet>(agents_[static_cast<std::size_t>(i)].critic);
    }
    for (int m = 0; m < cfg_.matches_per_round; ++m) {
      MatchJob job;
      job.id = match_id_++;
      job.round = round_;
      job.teams = schedule_match(N, orchestrator_);
      job.env_seed = derive_seed(cfg_.seed, {0xe5, job.id});
      job.act_seed = derive_seed(cfg_.seed, {0xac, job.id});
      const auto ids = job.teams.players();
      for (std::size_t p = 0; p < env::kNumPlayers; ++p) {
        const auto a = static_cast<std::size_t>(ids[p]);
        job.policies[p] = pol[a];
        job.critics[p] = cri[a];
        job.versions[p] = pol[a]->params().version();
      }
      jobs.push_back(std::move(job));
    }

    const auto started = utc_timestamp();
    auto outcomes = parallel_map<MatchOutcome>(jobs.size(), cfg_.effective_workers(), [&](std::size_t k) {
      try {
        return runner_(jobs[k], cfg_);
      } catch (const std::exception& e) {
        MatchOutcome o;
        o.error = e.what();
        return o;
      }
    });
    const auto finished = utc_timestamp();

    std::vector<bool> played(static_cast<std::size_t>(N), false);
    for (std::size_t k = 0; k < jobs.size(); ++k) record_match(jobs[k], outcomes[k], started, finished, played);
    if (cfg_.evolution()) {
      for (int i = 0; i < N; ++i)
        if (played[static_cast<std::size_t>(i)]) evolve(i);
    }
    learn();
    log_ratings();
    ++round_;
    if (cfg_.checkpoint_every > 0.0 && frames() >= next_checkpoint_) {
      checkpoint();
      while (next_checkpoint_ <= frames()) next_checkpoint_ += cfg_.checkpoint_every;
    }
  }

  /// Writes all agent checkpoints and the orchestration state.
  void checkpoint() const {
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      learner::save_agent(paths_.agent(static_cast<int>(i)).string(), agents_[i],
                          {{"rating", book_.agents[i].rating}, {"frames", book_.agents[i].frames}});
    }
    io::Json st;
    st["round"] = round_;
    st["match_id"] = match_id_;
    st["inheritances"] = inheritances_;
    st["next_checkpoint"] = next_checkpoint_;
    st["orchestrator_rng"] = rng_to_string(orchestrator_);
    st["credit"] = credit_;
    io::Json agents = io::Json::array();
    for (const auto& a : book_.agents) {
      agents.push_back({{"rating", a.rating},
                        {"frames", a.frames},
                        {"frames_since_eligible", a.frames_since_eligible},
                        {"frames_since_evolved", a.frames_since_evolved},
                        {"in_grace", a.in_grace}});
    }
    st["agents"] = agents;
    const auto tmp = paths_.state().string() + ".tmp";
    {
      std::ofstream os(tmp);
      os << st.dump(2) << '\n';
    }
    fs::rename(tmp, paths_.state());
  }

 private:
  Trainer(TrainConfig cfg, const RunPaths& paths, const io::Json& st, MatchRunner runner)
      : cfg_(std::move(cfg)), paths_(paths), runner_(std::move(runner)) {
    cfg_.validate();
    const auto& agents = st.at("agents");
    if (static_cast<int>(agents.size()) != cfg_.pbt.population) {
      throw std::runtime_error("state.json: population size does not match the configuration");
    }
    book_ = RatingBook(cfg_.pbt.population, cfg_.pbt.initial_rating);
    for (int i = 0; i < cfg_.pbt.population; ++i) {
      const auto& a = agents.at(static_cast<std::size_t>(i));
      auto& r = book_[i];
      r.rating = a.at("rating").get<double>();
      r.frames = a.at("frames").get<double>();
      r.frames_since_eligible = a.at("frames_since_eligible").get<double>();
      r.frames_since_evolved = a.at("frames_since_evolved").get<double>();
      r.in_grace = false;
      agents_.push_back(learner::load_agent(paths_.agent(i).string()).agent);
    }
    round_ = st.at("round").get<std::uint64_t>();
    match_id_ = st.at("match_id").get<std::uint64_t>();
    inheritances_ = st.at("inheritances").get<std::uint64_t>();
    next_checkpoint_ = st.at("next_checkpoint").get<double>();
    orchestrator_ = rng_from_string(st.at("orchestrator_rng").get<std::string>());
    credit_ = st.at("credit").get<std::vector<double>>();
    make_replays();
  }

  void make_replays() {
    replays_.clear();
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      replays_.push_back(std::make_unique<learner::ReplayBuffer>(cfg_.replay.capacity, cfg_.replay.recency));
    }
  }

  void write_config() const {
    io::Json j;
    j["version"] = kVersion;
    j["config"] = to_json(cfg_);
    io::Json hp = io::Json::array();
    for (const auto& a : agents_) hp.push_back(a.hp.to_json());
    j["initial_hyperparams"] = hp;
    std::ofstream os(paths_.config());
    os << j.dump(2) << '\n';
  }

  void append(const fs::path& p, const io::Json& rec) const {
    std::ofstream os(p, std::ios::app);
    io::write_jsonl(os, rec);
  }

  void record_match(const MatchJob& job, const MatchOutcome& o, const std::string& started,
                    const std::string& finished, std::vector<bool>& played) {
    io::Json rec;
    rec["match"] = job.id;
    rec["round"] = job.round;
    rec["blue"] = job.teams.blue;
    rec["red"] = job.teams.red;
    rec["started_ms"] = started;
    rec["finished_ms"] = finished;
    if (!o.error.empty()) {
      rec["error"] = o.error;
      append(paths_.matches(), rec);
      return;
    }
    rec["goals"] = o.score;
    rec["steps"] = o.steps;
    rec["vel_to_ball"] = o.vel_to_ball;
    const auto ids = job.teams.players();
    for (std::size_t p = 0; p < env::kNumPlayers; ++p) {
      const auto a = static_cast<std::size_t>(ids[p]);
      played[a] = true;
      for (const auto& s : o.snippets[p]) replays_[a]->add(s);
      credit_[a] += cfg_.replay.updates_per_snippet * static_cast<double>(o.snippets[p].size());
      book_.agents[a].add_frames(o.steps);
      if (book_.agents[a].in_grace &&
          static_cast<double>(replays_[a]->size()) >= cfg_.replay.grace_fill * static_cast<double>(cfg_.replay.capacity)) {
        book_.agents[a].in_grace = false;
      }
    }
    update_team_ratings(book_, job.teams, o.score[0], o.score[1], cfg_.pbt.elo_k);
    rec["frames"] = o.steps;
    append(paths_.matches(), rec);
  }

  void evolve(int i) {
    auto& me = book_[i];
    if (!eligible(me, cfg_.pbt)) return;
    me.frames_since_eligible = 0;
    Rng rng(derive_seed(cfg_.seed, {0xe7, round_, static_cast<std::uint64_t>(i)}));
    const auto parent = select(i, book_, cfg_.pbt, rng);
    io::Json rec;
    rec["round"] = round_;
    rec["child"] = i;
    rec["child_rating"] = me.rating;
    if (!parent) {
      rec["parent"] = nullptr;
      append(paths_.evolution(), rec);
      return;
    }
    const int j = *parent;
    auto& child = agents_[static_cast<std::size_t>(i)];
    const auto& par = agents_[static_cast<std::size_t>(j)];
    const auto mask = draw_keep_mask(cfg_.pbt.p_keep, rng);
    const auto before = child.hp;
    auto hp = crossover(child.hp, par.hp, mask);
    const auto muts = mutate(hp, cfg_.pbt, rng, cfg_.frozen_knobs());
    child.policy = par.policy;
    child.critic = par.critic;
    child.policy_target = par.policy_target;
    child.critic_target = par.critic_target;
    child.hp = hp;
    child.reset_optimizer();
    child.steps_since_sync = 0;
    replays_[static_cast<std::size_t>(i)]->clear();
    credit_[static_cast<std::size_t>(i)] = 0.0;
    me.frames_since_evolved = 0;
    me.in_grace = true;
    ++inheritances_;

    rec["parent"] = j;
    rec["parent_rating"] = book_[j].rating;
    rec["keep_mask"] = mask;
    io::Json mj = io::Json::array();
    for (const auto& m : muts) {
      mj.push_back({{"knob", AgentHyperparams::knob_name(m.knob)}, {"factor", m.factor}, {"before", m.before},
                    {"after", m.after}});
    }
    rec["mutations"] = mj;
    rec["hyperparams_before"] = before.to_json();
    rec["hyperparams_after"] = hp.to_json();
    append(paths_.evolution(), rec);
  }

  void learn() {
    const auto N = agents_.size();
    std::vector<std::vector<io::Json>> logs(N);
    auto work = [&](std::size_t i) {
      auto& a = agents_[i];
      const auto& rec = book_.agents[i];
      auto& replay = *replays_[i];
      if (rec.in_grace || replay.size() < static_cast<std::size_t>(cfg_.replay.min_size)) return 0;
      const auto steps = static_cast<int>(credit_[i]);
      credit_[i] -= steps;
      Rng rng(derive_seed(cfg_.seed, {0x1ea, round_, i}));
      for (int s = 0; s < steps; ++s) {
        const auto m = learner::learn_step(a, replay, cfg_.learner, rng);
        if (m && a.grad_steps % static_cast<std::uint64_t>(cfg_.log_every) == 0) {
          auto j = m->to_json(a.id, static_cast<std::uint64_t>(rec.frames), a.grad_steps);
          j["round"] = round_;
          logs[i].push_back(std::move(j));
        }
      }
      return steps;
    };
    parallel_map<int>(N, cfg_.effective_workers(), work);
    std::ofstream os(paths_.learner(), std::ios::app);
    for (const auto& l : logs)
      for (const auto& j : l) io::write_jsonl(os, j);
  }

  void log_ratings() const {
    io::Json rec;
    rec["round"] = round_;
    rec["frames"] = frames();
    io::Json r = io::Json::array();
    for (const auto& a : book_.agents) r.push_back(a.rating);
    rec["ratings"] = r;
    append(paths_.ratings(), rec);
  }

  TrainConfig cfg_;
  RunPaths paths_;
  MatchRunner runner_;
  RatingBook book_;
  std::vector<learner::Agent> agents_;
  std::vector<std::unique_ptr<learner::ReplayBuffer>> replays_;
  std::vector<double> credit_;
  Rng orchestrator_;
  std::uint64_t round_ = 0;
  std::uint64_t match_id_ = 0;
  std::uint64_t inheritances_ = 0;
  double next_checkpoint_ = 0.0;
};

/// Runs a fresh training job to its frame budget.
inline Trainer run_training(const TrainConfig& cfg, const fs::path& run_dir, MatchRunner runner = play_training_match) {
  Trainer t(cfg, run_dir, std::move(runner));
  t.run();
  return t;
}

}  // namespace coplay::pbt
