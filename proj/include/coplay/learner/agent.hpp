#pragma once

#include <string>

#include "coplay/agent/nets.hpp"
#include "coplay/learner/hyperparams.hpp"

namespace coplay::learner {

struct LearnerConfig {
  int unroll = 40;              // snippet length k
  int batch_size = 32;          // snippets per gradient step
  int expectation_samples = 4;  // m in the retrace expectation
  int policy_samples = 1;       // reparameterization samples per state
  int sync_period = 100;        // gradient steps between target syncs
  nn::AdamConfig adam;

  void validate() const {
    if (unroll < 1 || batch_size < 1 || expectation_samples < 1 || policy_samples < 1 || sync_period < 1) {
      throw std::invalid_argument("LearnerConfig: counts must be >= 1");
    }
  }
};

/// One independent learner: online and target networks, optimizer state and
/// evolvable hyperparameters.
class Agent {
 public:
  Agent() = default;
  Agent(int id, const agent::ArchSpec& arch, const AgentHyperparams& hp, Rng& rng)
      : id(id), hp(hp), policy(arch, rng), critic(arch, rng) {
    hp.validate();
    sync_targets();
    reset_optimizer();
  }

  int id = -1;
  AgentHyperparams hp;
  agent::PolicyNet policy, policy_target;
  agent::CriticNet critic, critic_target;
  nn::AdamState policy_adam, critic_adam;
  std::uint64_t grad_steps = 0;
  int steps_since_sync = 0;
  std::uint64_t syncs = 0;

  [[nodiscard]] const agent::ArchSpec& arch() const { return policy.arch(); }

  /// Target networks become exact copies of the online networks.
  void sync_targets() {
    policy_target = policy;
    critic_target = critic;
    steps_since_sync = 0;
  }

  /// Fresh Adam moments (used after inheritance).
  void reset_optimizer() {
    policy_adam = nn::AdamState::for_params(policy.params());
    critic_adam = nn::AdamState::for_params(critic.params());
  }

  /// Counts one gradient step and syncs targets every `period` steps.
  /// Returns true when a sync happened.
  bool count_step(int period) {
    ++grad_steps;
    if (++steps_since_sync >= period) {
      sync_targets();
      ++syncs;
      return true;
    }
    return false;
  }
};

// ---------------------------------------------------------------------------
// Checkpoints: all parameter sets of an agent in one file, names prefixed by
// role, metadata as JSON.

namespace detail {

inline void append_prefixed(nn::ParamSet& dst, const std::string& prefix, const nn::ParamSet& src) {
  for (const auto& e : src.entries()) dst.add(prefix + e.name, e.value.rows(), e.value.cols()) = e.value;
}

inline void extract_prefixed(const nn::ParamSet& all, const std::string& prefix, nn::ParamSet& dst) {
  for (auto& e : dst.entries()) {
    const auto* m = all.find(prefix + e.name);
    if (m == nullptr) throw std::runtime_error("checkpoint: missing array '" + prefix + e.name + "'");
    if (m->rows() != e.value.rows() || m->cols() != e.value.cols()) {
      throw std::runtime_error("checkpoint: shape mismatch for '" + prefix + e.name + "'");
    }
    e.value = *m;
  }
  dst.touch();
}

}  // namespace detail

inline io::Json agent_metadata(const Agent& a) {
  io::Json j;
  j["kind"] = "coplay.agent/1";
  j["id"] = a.id;
  j["arch"] = a.arch().to_json();
  j["hyperparams"] = a.hp.to_json();
  j["grad_steps"] = a.grad_steps;
  j["steps_since_sync"] = a.steps_since_sync;
  j["syncs"] = a.syncs;
  j["policy_adam_step"] = a.policy_adam.step;
  j["critic_adam_step"] = a.critic_adam.step;
  return j;
}

inline void save_agent(const std::string& path, const Agent& a, const io::Json& extra = io::Json::object()) {
  nn::ParamSet all;
  detail::append_prefixed(all, "online/", a.policy.params());
  detail::append_prefixed(all, "online/", a.critic.params());
  detail::append_prefixed(all, "target/", a.policy_target.params());
  detail::append_prefixed(all, "target/", a.critic_target.params());
  detail::append_prefixed(all, "adam.m/", a.policy_adam.m);
  detail::append_prefixed(all, "adam.v/", a.policy_adam.v);
  detail::append_prefixed(all, "adam.m/", a.critic_adam.m);
  detail::append_prefixed(all, "adam.v/", a.critic_adam.v);
  all.set_version(a.policy.params().version());
  io::Json meta = agent_metadata(a);
  meta["extra"] = extra;
  nn::save_checkpoint_file(path, all, meta.dump());
}

struct LoadedAgent {
  Agent agent;
  io::Json metadata;
};

inline LoadedAgent load_agent(const std::string& path) {
  const auto ck = nn::load_checkpoint_file(path);
  io::Json meta;
  try {
    meta = io::Json::parse(ck.metadata);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": metadata is not JSON: " + e.what());
  }
  if (meta.value("kind", std::string()) != "coplay.agent/1") {
    throw std::runtime_error(path + ": not an agent checkpoint");
  }
  LoadedAgent out;
  Agent& a = out.agent;
  const auto arch = agent::ArchSpec::from_json(meta.at("arch"));
  Rng dummy(0);
  a = Agent(meta.at("id").get<int>(), arch, AgentHyperparams::from_json(meta.at("hyperparams")), dummy);
  detail::extract_prefixed(ck.params, "online/", a.policy.params());
  detail::extract_prefixed(ck.params, "online/", a.critic.params());
  detail::extract_prefixed(ck.params, "target/", a.policy_target.params());
  detail::extract_prefixed(ck.params, "target/", a.critic_target.params());
  detail::extract_prefixed(ck.params, "adam.m/", a.policy_adam.m);
  detail::extract_prefixed(ck.params, "adam.v/", a.policy_adam.v);
  detail::extract_prefixed(ck.params, "adam.m/", a.critic_adam.m);
  detail::extract_prefixed(ck.params, "adam.v/", a.critic_adam.v);
  a.policy_adam.step = meta.at("policy_adam_step").get<std::int64_t>();
  a.critic_adam.step = meta.at("critic_adam_step").get<std::int64_t>();
  a.grad_steps = meta.at("grad_steps").get<std::uint64_t>();
  a.steps_since_sync = meta.at("steps_since_sync").get<int>();
  a.syncs = meta.at("syncs").get<std::uint64_t>();
  out.metadata = std::move(meta);
  return out;
}

/// Policy-only view of a checkpoint, for evaluation.
inline agent::PolicyNet load_policy(const std::string& path) { return load_agent(path).agent.policy; }

}  // namespace coplay::learner
