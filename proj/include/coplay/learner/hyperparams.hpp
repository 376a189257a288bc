#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "coplay/core/random.hpp"
#include "coplay/env/types.hpp"
#include "coplay/io/jsonl.hpp"

namespace coplay::learner {

using ChannelArray = std::array<double, env::kNumChannels>;

/// Evolvable per-agent knobs. Index order (used by cross-over masks and
/// mutation logs): actor_lr, critic_lr, entropy_cost, alpha[0..3], gamma[0..3].
struct AgentHyperparams {
  double actor_lr = 1e-4;
  double critic_lr = 1e-4;
  double entropy_cost = 1e-3;
  ChannelArray reward_weights = {1.0, 1.0, 0.0, 0.0};
  ChannelArray discounts = {0.99, 0.99, 0.99, 0.99};

  static constexpr int kNumKnobs = 3 + 2 * env::kNumChannels;

  double& knob(int k) {
    if (k == 0) return actor_lr;
    if (k == 1) return critic_lr;
    if (k == 2) return entropy_cost;
    if (k < 3 + env::kNumChannels) return reward_weights[static_cast<std::size_t>(k - 3)];
    if (k < kNumKnobs) return discounts[static_cast<std::size_t>(k - 3 - env::kNumChannels)];
    throw std::out_of_range("AgentHyperparams: knob index out of range");
  }
  [[nodiscard]] double knob(int k) const { return const_cast<AgentHyperparams*>(this)->knob(k); }

  static std::string knob_name(int k) {
    if (k == 0) return "actor_lr";
    if (k == 1) return "critic_lr";
    if (k == 2) return "entropy_cost";
    if (k < 3 + env::kNumChannels) return std::string("alpha_") + env::channel_name(k - 3);
    if (k < kNumKnobs) return std::string("gamma_") + env::channel_name(k - 3 - env::kNumChannels);
    throw std::out_of_range("AgentHyperparams: knob index out of range");
  }

  void validate() const {
    if (!(actor_lr > 0) || !(critic_lr > 0) || !std::isfinite(actor_lr) || !std::isfinite(critic_lr)) {
      throw std::invalid_argument("AgentHyperparams: learning rates must be positive");
    }
    if (!(entropy_cost >= 0) || !std::isfinite(entropy_cost)) {
      throw std::invalid_argument("AgentHyperparams: entropy_cost must be non-negative");
    }
    for (double a : reward_weights)
      if (!(a >= 0) || !std::isfinite(a)) throw std::invalid_argument("AgentHyperparams: reward weights must be >= 0");
    for (double g : discounts)
      if (!(g > 0 && g < 1)) throw std::invalid_argument("AgentHyperparams: discounts must lie in (0, 1)");
  }

  [[nodiscard]] io::Json to_json() const {
    io::Json j;
    for (int k = 0; k < kNumKnobs; ++k) j[knob_name(k)] = knob(k);
    return j;
  }
  static AgentHyperparams from_json(const io::Json& j) {
    AgentHyperparams h;
    for (int k = 0; k < kNumKnobs; ++k) h.knob(k) = j.at(knob_name(k)).get<double>();
    h.validate();
    return h;
  }

  friend bool operator==(const AgentHyperparams&, const AgentHyperparams&) = default;
};

/// Closed interval per knob; mutation clamps into it.
struct HyperBounds {
  std::array<double, AgentHyperparams::kNumKnobs> lo{}, hi{};

  static HyperBounds defaults() {
    HyperBounds b;
    auto set = [&](int k, double l, double h) {
      b.lo[static_cast<std::size_t>(k)] = l;
      b.hi[static_cast<std::size_t>(k)] = h;
    };
    set(0, 1e-6, 1e-2);
    set(1, 1e-6, 1e-2);
    set(2, 0.0, 1.0);
    for (int c = 0; c < env::kNumChannels; ++c) {
      set(3 + c, 0.0, 100.0);
      set(3 + env::kNumChannels + c, 0.9, 0.999);
    }
    return b;
  }

  [[nodiscard]] bool contains(const AgentHyperparams& h) const {
    for (int k = 0; k < AgentHyperparams::kNumKnobs; ++k) {
      const double v = h.knob(k);
      if (v < lo[static_cast<std::size_t>(k)] || v > hi[static_cast<std::size_t>(k)]) return false;
    }
    return true;
  }
  void clamp(AgentHyperparams& h) const {
    for (int k = 0; k < AgentHyperparams::kNumKnobs; ++k)
      h.knob(k) = std::clamp(h.knob(k), lo[static_cast<std::size_t>(k)], hi[static_cast<std::size_t>(k)]);
  }
};

/// Initial hyperparameter distribution: log-uniform for learning rates and
/// entropy cost, uniform for reward weights and discounts.
struct HyperInit {
  std::array<double, 2> actor_lr = {5e-5, 5e-4};
  std::array<double, 2> critic_lr = {5e-5, 5e-4};
  std::array<double, 2> entropy_cost = {1e-4, 1e-2};
  std::array<std::array<double, 2>, env::kNumChannels> reward_weights = {
      {{1.0, 1.0}, {1.0, 1.0}, {0.005, 0.02}, {0.005, 0.02}}};
  std::array<std::array<double, 2>, env::kNumChannels> discounts = {
      {{0.99, 0.99}, {0.99, 0.99}, {0.95, 0.99}, {0.95, 0.99}}};

  [[nodiscard]] AgentHyperparams sample(Rng& rng) const {
    auto log_uniform = [&](const std::array<double, 2>& r) {
      return r[0] == r[1] ? r[0] : std::exp(uniform(rng, std::log(r[0]), std::log(r[1])));
    };
    auto lin = [&](const std::array<double, 2>& r) { return r[0] == r[1] ? r[0] : uniform(rng, r[0], r[1]); };
    AgentHyperparams h;
    h.actor_lr = log_uniform(actor_lr);
    h.critic_lr = log_uniform(critic_lr);
    h.entropy_cost = entropy_cost[0] <= 0.0 ? lin(entropy_cost) : log_uniform(entropy_cost);
    for (std::size_t c = 0; c < env::kNumChannels; ++c) {
      h.reward_weights[c] = lin(reward_weights[c]);
      h.discounts[c] = lin(discounts[c]);
    }
    h.validate();
    return h;
  }
};

}  // namespace coplay::learner
