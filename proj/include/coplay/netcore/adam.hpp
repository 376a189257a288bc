#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "coplay/netcore/tensor.hpp"

namespace coplay::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates for one ParamSet.
struct AdamState {
  ParamSet m;
  ParamSet v;
  std::int64_t step = 0;

  static AdamState for_params(const ParamSet& p) { return {p.zeros_like(), p.zeros_like(), 0}; }
};

/// Applies one bias-corrected Adam step minimizing the loss whose gradient is
/// `grads`. Returns false, leaving everything untouched, if any gradient is
/// non-finite.
inline bool adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, double lr,
                      const AdamConfig& cfg = {}) {
  if (!(lr > 0.0)) throw std::invalid_argument("adam_step: learning rate must be positive");
  if (!params.same_layout(grads) || !params.same_layout(state.m) || !params.same_layout(state.v)) {
    throw std::invalid_argument("adam_step: shape mismatch between params, grads and state");
  }
  if (!grads.all_finite()) return false;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  auto& pe = params.entries();
  auto& me = state.m.entries();
  auto& ve = state.v.entries();
  const auto& ge = grads.entries();
  for (std::size_t i = 0; i < pe.size(); ++i) {
    auto g = ge[i].value.array();
    me[i].value.array() = cfg.beta1 * me[i].value.array() + (1.0 - cfg.beta1) * g;
    ve[i].value.array() = cfg.beta2 * ve[i].value.array() + (1.0 - cfg.beta2) * g.square();
    pe[i].value.array() -=
        lr * (me[i].value.array() / bc1) / ((ve[i].value.array() / bc2).sqrt() + cfg.eps);
  }
  params.touch();
  return true;
}

}  // namespace coplay::nn
