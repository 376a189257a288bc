#pragma once

// Trace format "coplay.trace/1": one JSON object per control step.
//
//   schema     "coplay.trace/1"
//   episode    integer episode id within the file
//   step       control step index t of the state below (0-based)
//   time       t * control_dt
//   pitch      [length, width]
//   goal_half  half width of the goal mouth
//   players    4 x [x, y, vx, vy, heading, angular_velocity]   (state s_t)
//   ball       [x, y, vx, vy, spin]                           (state s_t)
//   actions    4 x [drive, turn, kick]                         (a_t)
//   rewards    4 x [goal, concede, vel_to_ball, vel_ball_to_goal]  (r_t)
//   touches    list of [player, team, ball_x, ball_y] during s_t -> s_{t+1}
//   goal       scoring team or null
//   throw_ins  number of throw-ins during the transition
//   invalid    players whose action was non-finite (zeroed)
//   terminal   whether s_{t+1} ends the episode

#include <string>
#include <vector>

#include "coplay/env/soccer.hpp"
#include "coplay/io/jsonl.hpp"

namespace coplay::env {

inline constexpr const char* kTraceSchema = "coplay.trace/1";

struct TraceRecord {
  int episode = 0;
  int step = 0;
  double time = 0.0;
  double length = 0.0;
  double width = 0.0;
  double goal_half = 0.0;
  std::array<PlayerState, kNumPlayers> players;
  BallState ball;
  Actions actions{};
  std::array<RewardVector, kNumPlayers> rewards{};
  std::vector<TouchEvent> touches;
  std::optional<int> goal;
  int throw_ins = 0;
  std::vector<int> invalid;
  bool terminal = false;
};

using Trace = std::vector<TraceRecord>;

inline TraceRecord make_trace_record(int episode, const EnvState& before, const Actions& actions,
                                     const StepResult& result, const EnvConfig& cfg) {
  TraceRecord r;
  r.episode = episode;
  r.step = before.step;
  r.time = before.step * cfg.control_dt;
  r.length = before.length;
  r.width = before.width;
  r.goal_half = before.goal_half_width(cfg);
  r.players = before.players;
  r.ball = before.ball;
  r.actions = actions;
  r.rewards = result.rewards;
  r.touches = result.events.touches;
  if (result.events.goal) r.goal = result.events.goal->scoring_team;
  r.throw_ins = result.events.throw_ins;
  r.invalid = result.events.invalid_action_players;
  r.terminal = result.terminal;
  return r;
}

/// Rebuilds the geometric part of s_t (RNG, score and terminal flag are not
/// part of the trace).
inline EnvState state_from_record(const TraceRecord& r) {
  EnvState s;
  s.players = r.players;
  for (int i = 0; i < kNumPlayers; ++i) s.players[static_cast<std::size_t>(i)].team = team_of(i);
  s.ball = r.ball;
  s.length = r.length;
  s.width = r.width;
  s.step = r.step;
  return s;
}

inline io::Json to_json(const TraceRecord& r) {
  io::Json j;
  j["schema"] = kTraceSchema;
  j["episode"] = r.episode;
  j["step"] = r.step;
  j["time"] = r.time;
  j["pitch"] = {r.length, r.width};
  j["goal_half"] = r.goal_half;
  io::Json players = io::Json::array();
  for (const auto& p : r.players)
    players.push_back({p.pos.x(), p.pos.y(), p.vel.x(), p.vel.y(), p.heading, p.ang_vel});
  j["players"] = players;
  j["ball"] = {r.ball.pos.x(), r.ball.pos.y(), r.ball.vel.x(), r.ball.vel.y(), r.ball.spin};
  io::Json acts = io::Json::array();
  for (const auto& a : r.actions) acts.push_back({a.drive, a.turn, a.kick});
  j["actions"] = acts;
  io::Json rews = io::Json::array();
  for (const auto& rw : r.rewards) rews.push_back({rw[0], rw[1], rw[2], rw[3]});
  j["rewards"] = rews;
  io::Json touches = io::Json::array();
  for (const auto& t : r.touches) touches.push_back({t.player, t.team, t.ball_pos.x(), t.ball_pos.y()});
  j["touches"] = touches;
  j["goal"] = r.goal ? io::Json(*r.goal) : io::Json(nullptr);
  j["throw_ins"] = r.throw_ins;
  j["invalid"] = r.invalid;
  j["terminal"] = r.terminal;
  return j;
}

inline TraceRecord trace_record_from_json(const io::Json& j, double control_dt = 0.05) {
  if (!j.is_object() || j.value("schema", std::string()) != kTraceSchema) {
    throw std::invalid_argument("not a coplay.trace/1 record");
  }
  TraceRecord r;
  r.episode = j.at("episode").get<int>();
  r.step = j.at("step").get<int>();
  r.time = j.at("time").get<double>();
  r.length = j.at("pitch").at(0).get<double>();
  r.width = j.at("pitch").at(1).get<double>();
  r.goal_half = j.at("goal_half").get<double>();
  const auto& players = j.at("players");
  if (players.size() != kNumPlayers) throw std::invalid_argument("players must have 4 entries");
  for (int i = 0; i < kNumPlayers; ++i) {
    const auto& p = players.at(static_cast<std::size_t>(i));
    auto& q = r.players[static_cast<std::size_t>(i)];
    q.pos = Vec2(p.at(0).get<double>(), p.at(1).get<double>());
    q.vel = Vec2(p.at(2).get<double>(), p.at(3).get<double>());
    q.heading = p.at(4).get<double>();
    q.ang_vel = p.at(5).get<double>();
    q.team = team_of(i);
  }
  const auto& b = j.at("ball");
  r.ball.pos = Vec2(b.at(0).get<double>(), b.at(1).get<double>());
  r.ball.vel = Vec2(b.at(2).get<double>(), b.at(3).get<double>());
  r.ball.spin = b.at(4).get<double>();
  for (int i = 0; i < kNumPlayers; ++i) {
    const auto& a = j.at("actions").at(static_cast<std::size_t>(i));
    r.actions[static_cast<std::size_t>(i)] = {a.at(0).get<double>(), a.at(1).get<double>(),
                                              a.at(2).get<double>()};
    const auto& rw = j.at("rewards").at(static_cast<std::size_t>(i));
    for (int c = 0; c < kNumChannels; ++c)
      r.rewards[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] =
          rw.at(static_cast<std::size_t>(c)).get<double>();
  }
  for (const auto& t : j.at("touches")) {
    TouchEvent e;
    e.step = r.step + 1;
    e.time = (r.step + 1) * control_dt;
    e.player = t.at(0).get<int>();
    e.team = t.at(1).get<int>();
    e.ball_pos = Vec2(t.at(2).get<double>(), t.at(3).get<double>());
    if (e.player < 0 || e.player >= kNumPlayers) throw std::invalid_argument("touch player out of range");
    r.touches.push_back(e);
  }
  if (!j.at("goal").is_null()) r.goal = j.at("goal").get<int>();
  r.throw_ins = j.at("throw_ins").get<int>();
  r.invalid = j.at("invalid").get<std::vector<int>>();
  r.terminal = j.at("terminal").get<bool>();
  return r;
}

inline void write_trace(std::ostream& os, const Trace& trace) {
  for (const auto& r : trace) io::write_jsonl(os, to_json(r));
}

/// Parses a trace stream; malformed records raise io::DataError naming the line.
inline Trace read_trace(std::istream& is, const std::string& source = "<trace>",
                        double control_dt = 0.05) {
  Trace out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(trace_record_from_json(io::Json::parse(line), control_dt));
    } catch (const std::exception& e) {
      throw io::DataError(source, n, e.what());
    }
  }
  return out;
}

inline Trace read_trace_file(const std::string& path, double control_dt = 0.05) {
  std::ifstream is(path);
  if (!is) throw io::DataError(path, 0, "cannot open file");
  return read_trace(is, path, control_dt);
}

}  // namespace coplay::env
