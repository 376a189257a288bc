#pragma once

#include <string>
#include <vector>

#include "coplay/agent/nets.hpp"
#include "coplay/io/fields.hpp"
#include "coplay/learner/agent.hpp"
#include "coplay/pbt/population.hpp"

namespace coplay::env {

template <class V>
void visit_fields(V& v, EnvConfig& c) {
  v("base_length", c.base_length);
  v("base_width", c.base_width);
  v("scale_min", c.scale_min);
  v("scale_max", c.scale_max);
  v("control_dt", c.control_dt);
  v("substeps", c.substeps);
  v("max_steps", c.max_steps);
  v("border", c.border);
  v("goal_width_fraction", c.goal_width_fraction);
  v("player_radius", c.player_radius);
  v("player_mass", c.player_mass);
  v("player_max_accel", c.player_max_accel);
  v("player_damping", c.player_damping);
  v("player_max_ang_accel", c.player_max_ang_accel);
  v("player_ang_damping", c.player_ang_damping);
  v("ball_radius", c.ball_radius);
  v("ball_mass", c.ball_mass);
  v("ball_damping", c.ball_damping);
  v("ball_spin_damping", c.ball_spin_damping);
  v("restitution_player_ball", c.restitution_player_ball);
  v("restitution_ball_wall", c.restitution_ball_wall);
  v("kick_gain", c.kick_gain);
  v("throw_in_min", c.throw_in_min);
  v("throw_in_max", c.throw_in_max);
  v("possession_margin", c.possession_margin);
  v("touch_speed_change", c.touch_speed_change);
}

}  // namespace coplay::env

namespace coplay::nn {

template <class V>
void visit_fields(V& v, AdamConfig& c) {
  v("beta1", c.beta1);
  v("beta2", c.beta2);
  v("eps", c.eps);
}

}  // namespace coplay::nn

namespace coplay::learner {

template <class V>
void visit_fields(V& v, LearnerConfig& c) {
  v("unroll", c.unroll);
  v("batch_size", c.batch_size);
  v("expectation_samples", c.expectation_samples);
  v("policy_samples", c.policy_samples);
  v("sync_period", c.sync_period);
  v("adam", c.adam);
}

template <class V>
void visit_fields(V& v, HyperBounds& b) {
  v("lo", b.lo);
  v("hi", b.hi);
}

template <class V>
void visit_fields(V& v, HyperInit& h) {
  v("actor_lr", h.actor_lr);
  v("critic_lr", h.critic_lr);
  v("entropy_cost", h.entropy_cost);
  v("reward_weights", h.reward_weights);
  v("discounts", h.discounts);
}

}  // namespace coplay::learner

namespace coplay::pbt {

template <class V>
void visit_fields(V& v, PbtConfig& c) {
  v("population", c.population);
  v("elo_k", c.elo_k);
  v("select_threshold", c.select_threshold);
  v("p_mutate", c.p_mutate);
  v("p_perturb", c.p_perturb);
  v("p_keep", c.p_keep);
  v("eligible_total", c.eligible_total);
  v("eligible_increment", c.eligible_increment);
  v("burn_in", c.burn_in);
  v("initial_rating", c.initial_rating);
  v("bounds", c.bounds);
}

/// Network widths; the recurrence and head layout come from the variant.
struct NetConfig {
  int embed_hidden = 32;
  int embed_out = 16;
  std::vector<int> trunk = {512, 256};
  int core = 256;
  double stddev_floor = 1e-3;
};

template <class V>
void visit_fields(V& v, NetConfig& c) {
  v("embed_hidden", c.embed_hidden);
  v("embed_out", c.embed_out);
  v("trunk", c.trunk);
  v("core", c.core);
  v("stddev_floor", c.stddev_floor);
}

struct ReplayConfig {
  std::size_t capacity = 100000;  // snippets per agent
  std::size_t recency = 0;        // 0: same as capacity
  int min_size = 32;              // snippets before an agent starts learning
  double grace_fill = 0.5;        // post-inheritance grace lasts until this fraction is refilled
  double updates_per_snippet = 1.0;  // gradient steps credited per new snippet
};

template <class V>
void visit_fields(V& v, ReplayConfig& c) {
  v("capacity", c.capacity);
  v("recency", c.recency);
  v("min_size", c.min_size);
  v("grace_fill", c.grace_fill);
  v("updates_per_snippet", c.updates_per_snippet);
}

inline const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names = {"ff", "ff+evo", "+rwd_shp", "lstm_q", "lstm", "channels"};
  return names;
}

struct TrainConfig {
  std::uint64_t seed = 1;
  std::string variant = "channels";
  double frame_budget = 2e5;       // mean learning frames per agent
  int workers = 1;
  bool deterministic = true;
  int matches_per_round = 1;
  double checkpoint_every = 0.0;   // frames; 0 writes only the initial and final checkpoints
  int log_every = 10;              // learner metrics every n gradient steps per agent
  env::EnvConfig env;
  NetConfig net;
  learner::LearnerConfig learner;
  ReplayConfig replay;
  PbtConfig pbt;
  learner::HyperInit init;

  [[nodiscard]] agent::ArchSpec arch() const {
    agent::ArchSpec a = agent::ArchSpec::for_variant(variant);
    a.embed_hidden = net.embed_hidden;
    a.embed_out = net.embed_out;
    a.trunk = net.trunk;
    a.core = net.core;
    a.stddev_floor = net.stddev_floor;
    return a;
  }
  /// Shaping channels carry weight (and evolve) only from +rwd_shp on.
  [[nodiscard]] bool shaping() const { return variant != "ff" && variant != "ff+evo"; }
  [[nodiscard]] bool evolution() const { return variant != "ff"; }
  [[nodiscard]] int effective_workers() const { return deterministic ? 1 : std::max(1, workers); }

  /// Knobs held fixed by the variant.
  [[nodiscard]] KnobMask frozen_knobs() const {
    KnobMask m{};
    if (!shaping()) {
      m[3 + env::kVelToBall] = true;
      m[3 + env::kVelBallToGoal] = true;
    }
    return m;
  }

  void validate() const {
    arch().validate();
    env.validate();
    learner.validate();
    pbt.validate();
    if (!(frame_budget >= 0.0)) throw io::ConfigError("frame_budget must be >= 0");
    if (workers < 1 || matches_per_round < 1 || log_every < 1) {
      throw io::ConfigError("workers, matches_per_round and log_every must be >= 1");
    }
    if (!(checkpoint_every >= 0.0)) throw io::ConfigError("checkpoint_every must be >= 0");
    if (replay.capacity == 0 || replay.min_size < 1 || !(replay.grace_fill >= 0.0 && replay.grace_fill <= 1.0) ||
        !(replay.updates_per_snippet >= 0.0)) {
      throw io::ConfigError("replay: invalid capacity, min_size, grace_fill or updates_per_snippet");
    }
  }

  /// Reduced setting sized for a single workstation.
  static TrainConfig desk() {
    TrainConfig c;
    c.variant = "+rwd_shp";
    c.env.base_length = 14.0;
    c.env.base_width = 10.5;
    c.net.trunk = {64, 64};
    c.net.core = 64;
    c.learner.batch_size = 16;
    c.replay.capacity = 2000;
    c.replay.min_size = 16;
    c.replay.updates_per_snippet = 0.25;
    c.pbt.population = 4;
    return c;
  }
};

template <class V>
void visit_fields(V& v, TrainConfig& c) {
  v("seed", c.seed);
  v("variant", c.variant);
  v("frame_budget", c.frame_budget);
  v("workers", c.workers);
  v("deterministic", c.deterministic);
  v("matches_per_round", c.matches_per_round);
  v("checkpoint_every", c.checkpoint_every);
  v("log_every", c.log_every);
  v("env", c.env);
  v("net", c.net);
  v("learner", c.learner);
  v("replay", c.replay);
  v("pbt", c.pbt);
  v("init", c.init);
}

inline io::Json to_json(const TrainConfig& c) { return io::fields_to_json(c); }

/// Overlays `j` on `base`, rejecting unknown keys, then validates.
inline TrainConfig train_config_from_json(const io::Json& j, TrainConfig base = {}) {
  io::fields_from_json(j, base);
  try {
    base.validate();
  } catch (const io::ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw io::ConfigError(e.what());
  }
  return base;
}

}  // namespace coplay::pbt
