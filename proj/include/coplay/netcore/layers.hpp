#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "coplay/netcore/tensor.hpp"

namespace coplay::nn {

enum class Activation { kLinear, kElu };
enum class LayerKind { kDense, kLstm };

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
inline double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Matrix apply_activation(const Matrix& z, Activation act) {
  if (act == Activation::kLinear) return z;
  return z.unaryExpr([](double v) { return elu(v); });
}

inline Matrix activation_backward(const Matrix& z, const Matrix& dy, Activation act) {
  if (act == Activation::kLinear) return dy;
  return dy.cwiseProduct(z.unaryExpr([](double v) { return elu_grad(v); }));
}

/// Hidden and cell state of one LSTM layer; one column per batch element.
struct LstmState {
  Matrix hidden;
  Matrix cell;

  static LstmState zeros(Eigen::Index width, Eigen::Index batch) {
    return {Matrix::Zero(width, batch), Matrix::Zero(width, batch)};
  }
  [[nodiscard]] bool valid() const {
    return hidden.rows() == cell.rows() && hidden.cols() == cell.cols() && hidden.allFinite() &&
           cell.allFinite();
  }
};

// ---------------------------------------------------------------------------
// LSTM cell. Gate rows are stacked [input, forget, candidate, output].

struct LstmCache {
  Matrix x, h_prev, c_prev;
  Matrix i, f, g, o;
  Matrix c, tanh_c;
};

struct LstmParamsView {
  const Matrix& wx;  // 4H x in
  const Matrix& wh;  // 4H x H
  const Matrix& b;   // 4H x 1
};

inline Matrix lstm_step(const LstmParamsView& p, const Matrix& x, const LstmState& state,
                        LstmState& next, LstmCache* cache) {
  const Eigen::Index h = p.wh.cols();
  require_dims(x.rows(), p.wx.cols(), "lstm_step input");
  require_dims(state.hidden.rows(), h, "lstm_step state");
  require_dims(state.hidden.cols(), x.cols(), "lstm_step batch");
  Matrix z = p.wx * x + p.wh * state.hidden;
  z.colwise() += p.b.col(0);
  Matrix i = z.topRows(h).unaryExpr([](double v) { return sigmoid(v); });
  Matrix f = z.middleRows(h, h).unaryExpr([](double v) { return sigmoid(v); });
  Matrix g = z.middleRows(2 * h, h).array().tanh().matrix();
  Matrix o = z.bottomRows(h).unaryExpr([](double v) { return sigmoid(v); });
  Matrix c = f.cwiseProduct(state.cell) + i.cwiseProduct(g);
  Matrix tanh_c = c.array().tanh().matrix();
  next.hidden = o.cwiseProduct(tanh_c);
  next.cell = c;
  if (cache != nullptr) {
    *cache = {x, state.hidden, state.cell, std::move(i), std::move(f), std::move(g), std::move(o),
              std::move(c), std::move(tanh_c)};
  }
  return next.hidden;
}

struct LstmGrads {
  Matrix dwx, dwh, db;
};

/// Backward through one cell. `dh` is the total upstream gradient on the
/// emitted hidden state, `dc_next` the gradient flowing into the new cell
/// state from the following step. Outputs gradients for x and prior state.
inline void lstm_step_backward(const LstmParamsView& p, const LstmCache& k, const Matrix& dh,
                               const Matrix& dc_next, LstmGrads& grads, Matrix& dx,
                               LstmState& d_prev) {
  const Eigen::Index h = p.wh.cols();
  Matrix dc = dc_next + dh.cwiseProduct(k.o).cwiseProduct(
                            (1.0 - k.tanh_c.array().square()).matrix());
  Matrix dz(4 * h, dh.cols());
  dz.topRows(h) = dc.cwiseProduct(k.g).cwiseProduct((k.i.array() * (1.0 - k.i.array())).matrix());
  dz.middleRows(h, h) =
      dc.cwiseProduct(k.c_prev).cwiseProduct((k.f.array() * (1.0 - k.f.array())).matrix());
  dz.middleRows(2 * h, h) = dc.cwiseProduct(k.i).cwiseProduct((1.0 - k.g.array().square()).matrix());
  dz.bottomRows(h) =
      dh.cwiseProduct(k.tanh_c).cwiseProduct((k.o.array() * (1.0 - k.o.array())).matrix());
  grads.dwx.noalias() += dz * k.x.transpose();
  grads.dwh.noalias() += dz * k.h_prev.transpose();
  grads.db.col(0) += dz.rowwise().sum();
  dx = p.wx.transpose() * dz;
  d_prev.hidden = p.wh.transpose() * dz;
  d_prev.cell = dc.cwiseProduct(k.f);
}

// ---------------------------------------------------------------------------
// Stack: a chain of dense and LSTM layers evaluated one time step at a time.

struct LayerSpec {
  LayerKind kind = LayerKind::kDense;
  int in = 0;
  int out = 0;
  Activation act = Activation::kLinear;
};

struct StackSpec {
  std::string prefix;
  std::vector<LayerSpec> layers;

  [[nodiscard]] int input_dim() const { return layers.empty() ? 0 : layers.front().in; }
  [[nodiscard]] int output_dim() const { return layers.empty() ? 0 : layers.back().out; }
  [[nodiscard]] int num_recurrent() const {
    int n = 0;
    for (const auto& l : layers) n += l.kind == LayerKind::kLstm ? 1 : 0;
    return n;
  }
  [[nodiscard]] bool recurrent() const { return num_recurrent() > 0; }

  /// Dense layers with `hidden` activation on all but the last, which uses
  /// `last`.
  static StackSpec chain(std::string prefix, int in, const std::vector<int>& widths,
                         Activation hidden, Activation last) {
    StackSpec s{std::move(prefix), {}};
    int prev = in;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      s.layers.push_back({LayerKind::kDense, prev, widths[i],
                          i + 1 == widths.size() ? last : hidden});
      prev = widths[i];
    }
    return s;
  }

  [[nodiscard]] std::string name(std::size_t layer, const char* field) const {
    return prefix + "L" + std::to_string(layer) + "." + field;
  }
};

/// Per-LSTM-layer recurrent state (empty for purely feedforward stacks).
using StackState = std::vector<LstmState>;

struct LayerCache {
  Matrix input;   // dense
  Matrix preact;  // dense
  LstmCache lstm;
};

struct StackCache {
  std::uint64_t param_version = 0;
  const StackSpec* spec = nullptr;
  Eigen::Index batch = 0;
  std::vector<LayerCache> layers;
};

inline void init_stack(const StackSpec& spec, ParamSet& params, Rng& rng) {
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const auto& l = spec.layers[li];
    if (l.kind == LayerKind::kDense) {
      init_fan_in(params.add(spec.name(li, "w"), l.out, l.in), rng);
      params.add(spec.name(li, "b"), l.out, 1);
    } else {
      init_fan_in(params.add(spec.name(li, "wx"), 4 * l.out, l.in), rng);
      init_fan_in(params.add(spec.name(li, "wh"), 4 * l.out, l.out), rng);
      Matrix& b = params.add(spec.name(li, "b"), 4 * l.out, 1);
      b.middleRows(l.out, l.out).setOnes();  // forget-gate bias
    }
  }
}

inline StackState zero_stack_state(const StackSpec& spec, Eigen::Index batch) {
  StackState s;
  for (const auto& l : spec.layers)
    if (l.kind == LayerKind::kLstm) s.push_back(LstmState::zeros(l.out, batch));
  return s;
}

/// One time step over a batch (columns). `state` must be non-null iff the
/// stack is recurrent. Writes the next recurrent state into `next_state`.
inline Matrix stack_forward(const StackSpec& spec, const ParamSet& params, const Matrix& x,
                            const StackState* state, StackState* next_state, StackCache* cache) {
  require_dims(x.rows(), spec.input_dim(), ("forward " + spec.prefix).c_str());
  if (spec.recurrent() != (state != nullptr && !state->empty())) {
    throw std::invalid_argument("forward " + spec.prefix +
                                ": recurrent state must be supplied iff the stack is recurrent");
  }
  if (state != nullptr && static_cast<int>(state->size()) != spec.num_recurrent()) {
    throw std::invalid_argument("forward " + spec.prefix + ": wrong number of recurrent states");
  }
  if (cache != nullptr) {
    cache->param_version = params.version();
    cache->spec = &spec;
    cache->batch = x.cols();
    cache->layers.assign(spec.layers.size(), {});
  }
  if (next_state != nullptr) next_state->clear();
  Matrix h = x;
  std::size_t rec = 0;
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const auto& l = spec.layers[li];
    if (l.kind == LayerKind::kDense) {
      const Matrix& w = params.at(spec.name(li, "w"));
      const Matrix& b = params.at(spec.name(li, "b"));
      Matrix z = w * h;
      z.colwise() += b.col(0);
      Matrix y = apply_activation(z, l.act);
      if (cache != nullptr) {
        cache->layers[li].input = std::move(h);
        cache->layers[li].preact = std::move(z);
      }
      h = std::move(y);
    } else {
      LstmParamsView pv{params.at(spec.name(li, "wx")), params.at(spec.name(li, "wh")),
                        params.at(spec.name(li, "b"))};
      LstmState next;
      Matrix y = lstm_step(pv, h, (*state)[rec], next,
                           cache != nullptr ? &cache->layers[li].lstm : nullptr);
      if (next_state != nullptr) next_state->push_back(std::move(next));
      ++rec;
      h = std::move(y);
    }
  }
  return h;
}

/// Reverse-mode pass for one `stack_forward` call. Gradients are accumulated
/// into `grads` (which must share names with `params`). `d_next_state` is the
/// gradient arriving at the emitted recurrent state from a later step (may be
/// null). Returns the input gradient and fills `d_prev_state`.
inline Matrix stack_backward(const StackSpec& spec, const ParamSet& params,
                             const StackCache& cache, const Matrix& d_out,
                             const StackState* d_next_state, ParamSet& grads,
                             StackState* d_prev_state) {
  if (cache.spec != &spec || cache.param_version != params.version() ||
      cache.layers.size() != spec.layers.size()) {
    throw std::invalid_argument("backward " + spec.prefix + ": stale or mismatched cache");
  }
  require_dims(d_out.rows(), spec.output_dim(), ("backward " + spec.prefix).c_str());
  require_dims(d_out.cols(), cache.batch, ("backward batch " + spec.prefix).c_str());
  if (d_prev_state != nullptr) d_prev_state->assign(static_cast<std::size_t>(spec.num_recurrent()), {});
  Matrix d = d_out;
  int rec = spec.num_recurrent();
  for (std::size_t li = spec.layers.size(); li-- > 0;) {
    const auto& l = spec.layers[li];
    const auto& lc = cache.layers[li];
    if (l.kind == LayerKind::kDense) {
      const Matrix& w = params.at(spec.name(li, "w"));
      Matrix dz = activation_backward(lc.preact, d, l.act);
      grads.at(spec.name(li, "w")).noalias() += dz * lc.input.transpose();
      grads.at(spec.name(li, "b")).col(0) += dz.rowwise().sum();
      d = w.transpose() * dz;
    } else {
      --rec;
      LstmParamsView pv{params.at(spec.name(li, "wx")), params.at(spec.name(li, "wh")),
                        params.at(spec.name(li, "b"))};
      Matrix dh = d;
      Matrix dc = Matrix::Zero(l.out, cache.batch);
      if (d_next_state != nullptr && !d_next_state->empty()) {
        const auto& dn = (*d_next_state)[static_cast<std::size_t>(rec)];
        if (dn.hidden.size() > 0) dh += dn.hidden;
        if (dn.cell.size() > 0) dc += dn.cell;
      }
      LstmGrads lg{Matrix::Zero(4 * l.out, l.in), Matrix::Zero(4 * l.out, l.out),
                   Matrix::Zero(4 * l.out, 1)};
      LstmState dprev;
      Matrix dx;
      lstm_step_backward(pv, lc.lstm, dh, dc, lg, dx, dprev);
      grads.at(spec.name(li, "wx")) += lg.dwx;
      grads.at(spec.name(li, "wh")) += lg.dwh;
      grads.at(spec.name(li, "b")) += lg.db;
      if (d_prev_state != nullptr) (*d_prev_state)[static_cast<std::size_t>(rec)] = std::move(dprev);
      d = std::move(dx);
    }
  }
  return d;
}

}  // namespace coplay::nn
