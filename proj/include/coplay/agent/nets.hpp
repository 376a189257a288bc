#pragma once

#include <string>
#include <vector>

#include "coplay/env/observation.hpp"
#include "coplay/io/jsonl.hpp"
#include "coplay/netcore/netcore.hpp"

namespace coplay::agent {

using nn::Matrix;
using nn::ParamSet;
using nn::StackSpec;
using nn::StackState;

/// Architecture descriptor shared by the policy and critic of one agent.
struct ArchSpec {
  std::string variant = "lstm";
  int embed_hidden = 32;
  int embed_out = 16;
  std::vector<int> trunk = {512, 256};
  int core = 256;
  bool policy_recurrent = true;
  bool critic_recurrent = true;
  bool channel_heads = false;  // one Q head per reward channel
  double stddev_floor = 1e-3;

  /// Presets for the ablation variants: ff, ff+evo, +rwd_shp, lstm_q, lstm,
  /// channels. Widths are left at their defaults.
  static ArchSpec for_variant(const std::string& name) {
    ArchSpec a;
    a.variant = name == "+channels" ? "channels" : name;
    if (name == "ff" || name == "ff+evo" || name == "+rwd_shp") {
      a.policy_recurrent = false;
      a.critic_recurrent = false;
    } else if (name == "lstm_q") {
      a.policy_recurrent = false;
      a.critic_recurrent = true;
    } else if (name == "lstm") {
    } else if (a.variant == "channels") {
      a.channel_heads = true;
    } else {
      throw std::invalid_argument("unknown architecture variant '" + name + "'");
    }
    return a;
  }

  [[nodiscard]] int num_heads() const { return channel_heads ? env::kNumChannels : 1; }
  [[nodiscard]] int feature_dim() const { return 3 * embed_out + env::kNonPlayerDim; }

  void validate() const {
    if (embed_hidden < 1 || embed_out < 1 || core < 1 || trunk.empty()) {
      throw std::invalid_argument("ArchSpec: widths must be positive and trunk non-empty");
    }
    for (int w : trunk)
      if (w < 1) throw std::invalid_argument("ArchSpec: trunk widths must be positive");
    if (!(stddev_floor > 0.0)) throw std::invalid_argument("ArchSpec: stddev_floor must be > 0");
  }

  [[nodiscard]] io::Json to_json() const {
    io::Json j;
    j["variant"] = variant;
    j["embed_hidden"] = embed_hidden;
    j["embed_out"] = embed_out;
    j["trunk"] = trunk;
    j["core"] = core;
    j["policy_recurrent"] = policy_recurrent;
    j["critic_recurrent"] = critic_recurrent;
    j["channel_heads"] = channel_heads;
    j["stddev_floor"] = stddev_floor;
    return j;
  }

  static ArchSpec from_json(const io::Json& j) {
    ArchSpec a;
    a.variant = j.at("variant").get<std::string>();
    a.embed_hidden = j.at("embed_hidden").get<int>();
    a.embed_out = j.at("embed_out").get<int>();
    a.trunk = j.at("trunk").get<std::vector<int>>();
    a.core = j.at("core").get<int>();
    a.policy_recurrent = j.at("policy_recurrent").get<bool>();
    a.critic_recurrent = j.at("critic_recurrent").get<bool>();
    a.channel_heads = j.at("channel_heads").get<bool>();
    a.stddev_floor = j.at("stddev_floor").get<double>();
    a.validate();
    return a;
  }

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

// ---------------------------------------------------------------------------
// Pooling over player blocks

/// Embedded blocks are laid out as columns block*batch + sample.
struct PoolCache {
  int blocks = 0;
  Eigen::Index batch = 0;
  Eigen::MatrixXi argmax, argmin;  // width x batch
};

/// Elementwise max, min and mean over `blocks` embeddings per sample;
/// returns (3 * width) x batch stacked [max; min; mean].
inline Matrix pool_forward(const Matrix& emb, int blocks, PoolCache* cache) {
  if (blocks < 1 || emb.cols() % blocks != 0) {
    throw std::invalid_argument("pool: column count is not a multiple of the block count");
  }
  const Eigen::Index w = emb.rows(), batch = emb.cols() / blocks;
  Matrix out(3 * w, batch);
  Eigen::MatrixXi amax(w, batch), amin(w, batch);
  for (Eigen::Index j = 0; j < batch; ++j) {
    for (Eigen::Index r = 0; r < w; ++r) {
      double mx = emb(r, j), mn = emb(r, j), sum = 0.0;
      int imx = 0, imn = 0;
      for (int k = 0; k < blocks; ++k) {
        const double v = emb(r, k * batch + j);
        sum += v;
        if (v > mx) { mx = v; imx = k; }
        if (v < mn) { mn = v; imn = k; }
      }
      out(r, j) = mx;
      out(w + r, j) = mn;
      out(2 * w + r, j) = sum / blocks;
      amax(r, j) = imx;
      amin(r, j) = imn;
    }
  }
  if (cache != nullptr) *cache = {blocks, batch, std::move(amax), std::move(amin)};
  return out;
}

inline Matrix pool_backward(const PoolCache& cache, const Matrix& d_pooled) {
  const Eigen::Index w = d_pooled.rows() / 3, batch = cache.batch;
  nn::require_dims(d_pooled.cols(), batch, "pool backward batch");
  Matrix d = Matrix::Zero(w, batch * cache.blocks);
  for (Eigen::Index j = 0; j < batch; ++j) {
    for (Eigen::Index r = 0; r < w; ++r) {
      d(r, cache.argmax(r, j) * batch + j) += d_pooled(r, j);
      d(r, cache.argmin(r, j) * batch + j) += d_pooled(w + r, j);
      const double m = d_pooled(2 * w + r, j) / cache.blocks;
      for (int k = 0; k < cache.blocks; ++k) d(r, k * batch + j) += m;
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Encoder: shared embedding of the three other-player blocks, pooled and
// concatenated with proprioception, ball and task features.

/// Block input: the 6 raw features plus a teammate flag.
inline constexpr int kBlockInputDim = env::kPlayerBlockDim + 1;

inline StackSpec encoder_spec(const std::string& prefix, const ArchSpec& a) {
  return StackSpec::chain(prefix + "enc", kBlockInputDim, {a.embed_hidden, a.embed_out},
                          nn::Activation::kElu, nn::Activation::kElu);
}

struct EncoderCache {
  nn::StackCache embed;
  PoolCache pool;
  Eigen::Index batch = 0;
};

inline Matrix player_blocks(const Matrix& obs) {
  const Eigen::Index batch = obs.cols();
  Matrix blocks(kBlockInputDim, env::kNumOtherPlayers * batch);
  for (int k = 0; k < env::kNumOtherPlayers; ++k) {
    auto cols = blocks.middleCols(k * batch, batch);
    cols.topRows(env::kPlayerBlockDim) =
        obs.middleRows(env::kTeammateOffset + env::kPlayerBlockDim * k, env::kPlayerBlockDim);
    cols.row(env::kPlayerBlockDim).setConstant(k == 0 ? 1.0 : 0.0);
  }
  return blocks;
}

/// obs: 40 x batch -> features: (3 * embed_out + 22) x batch.
inline Matrix encode(const StackSpec& spec, const ParamSet& params, const Matrix& obs,
                     EncoderCache* cache) {
  nn::require_dims(obs.rows(), env::kObsDim, "encoder observation");
  const Eigen::Index batch = obs.cols();
  const Matrix emb = nn::stack_forward(spec, params, player_blocks(obs), nullptr, nullptr,
                                       cache != nullptr ? &cache->embed : nullptr);
  const Matrix pooled = pool_forward(emb, env::kNumOtherPlayers, cache != nullptr ? &cache->pool : nullptr);
  if (cache != nullptr) cache->batch = batch;
  Matrix out(pooled.rows() + env::kNonPlayerDim, batch);
  out.topRows(pooled.rows()) = pooled;
  out.bottomRows(env::kNonPlayerDim) = obs.topRows(env::kNonPlayerDim);
  return out;
}

/// Accumulates parameter gradients; returns the observation gradient.
inline Matrix encode_backward(const StackSpec& spec, const ParamSet& params, const EncoderCache& cache,
                              const Matrix& d_features, ParamSet& grads) {
  const Eigen::Index pooled_rows = 3 * spec.output_dim();
  nn::require_dims(d_features.rows(), pooled_rows + env::kNonPlayerDim, "encoder backward");
  const Matrix d_emb = pool_backward(cache.pool, d_features.topRows(pooled_rows));
  const Matrix d_blocks = nn::stack_backward(spec, params, cache.embed, d_emb, nullptr, grads, nullptr);
  Matrix d_obs(env::kObsDim, cache.batch);
  d_obs.topRows(env::kNonPlayerDim) = d_features.bottomRows(env::kNonPlayerDim);
  for (int k = 0; k < env::kNumOtherPlayers; ++k) {
    d_obs.middleRows(env::kTeammateOffset + env::kPlayerBlockDim * k, env::kPlayerBlockDim) =
        d_blocks.middleCols(k * cache.batch, cache.batch).topRows(env::kPlayerBlockDim);
  }
  return d_obs;
}

/// Dense Elu trunk followed by a core layer (dense Elu or LSTM).
inline StackSpec trunk_spec(const std::string& prefix, int in, const ArchSpec& a, bool recurrent) {
  StackSpec s = StackSpec::chain(prefix + "trunk", in, a.trunk, nn::Activation::kElu, nn::Activation::kElu);
  s.layers.push_back({recurrent ? nn::LayerKind::kLstm : nn::LayerKind::kDense, a.trunk.back(), a.core,
                      nn::Activation::kElu});
  return s;
}

// ---------------------------------------------------------------------------
// Policy

struct PolicyCache {
  EncoderCache enc;
  nn::StackCache trunk, head;
  Matrix raw_stddev;
};

struct PolicyOutput {
  nn::Gaussian dist;
  StackState next_state;
};

class PolicyNet {
 public:
  PolicyNet() = default;
  explicit PolicyNet(const ArchSpec& arch) : arch_(arch) {
    arch_.validate();
    build_specs();
  }
  PolicyNet(const ArchSpec& arch, Rng& rng) : PolicyNet(arch) {
    nn::init_stack(enc_, params_, rng);
    nn::init_stack(trunk_, params_, rng);
    nn::init_stack(head_, params_, rng);
  }
  PolicyNet(const PolicyNet& o) : arch_(o.arch_), params_(o.params_) { build_specs(); }
  PolicyNet& operator=(const PolicyNet& o) {
    arch_ = o.arch_;
    params_ = o.params_;
    build_specs();
    return *this;
  }

  [[nodiscard]] const ArchSpec& arch() const { return arch_; }
  [[nodiscard]] bool recurrent() const { return arch_.policy_recurrent; }
  [[nodiscard]] ParamSet& params() { return params_; }
  [[nodiscard]] const ParamSet& params() const { return params_; }
  [[nodiscard]] const StackSpec& encoder() const { return enc_; }
  [[nodiscard]] const StackSpec& trunk() const { return trunk_; }
  [[nodiscard]] const StackSpec& head() const { return head_; }

  [[nodiscard]] StackState initial_state(Eigen::Index batch) const {
    return nn::zero_stack_state(trunk_, batch);
  }

  /// obs: 40 x batch. `state` is ignored (and the returned state empty) for
  /// feedforward policies.
  PolicyOutput forward(const Matrix& obs, const StackState& state, PolicyCache* cache = nullptr) const {
    const Matrix feat = encode(enc_, params_, obs, cache != nullptr ? &cache->enc : nullptr);
    PolicyOutput out;
    const Matrix h = nn::stack_forward(trunk_, params_, feat, recurrent() ? &state : nullptr,
                                       recurrent() ? &out.next_state : nullptr,
                                       cache != nullptr ? &cache->trunk : nullptr);
    const Matrix y = nn::stack_forward(head_, params_, h, nullptr, nullptr,
                                       cache != nullptr ? &cache->head : nullptr);
    out.dist.mean = y.topRows(env::kActionDim);
    Matrix raw = y.bottomRows(env::kActionDim);
    out.dist.stddev = raw.unaryExpr([f = arch_.stddev_floor](double v) { return nn::positive_stddev(v, f); });
    if (cache != nullptr) cache->raw_stddev = std::move(raw);
    return out;
  }

  /// Accumulates parameter gradients for one forward call. Returns the
  /// gradient with respect to the incoming recurrent state.
  StackState backward(const PolicyCache& cache, const Matrix& d_mean, const Matrix& d_stddev,
                      const StackState* d_next_state, ParamSet& grads) const {
    Matrix dy(2 * env::kActionDim, d_mean.cols());
    dy.topRows(env::kActionDim) = d_mean;
    dy.bottomRows(env::kActionDim) =
        d_stddev.cwiseProduct(cache.raw_stddev.unaryExpr([](double v) { return nn::positive_stddev_grad(v); }));
    const Matrix dh = nn::stack_backward(head_, params_, cache.head, dy, nullptr, grads, nullptr);
    StackState d_prev;
    const Matrix dfeat = nn::stack_backward(trunk_, params_, cache.trunk, dh, d_next_state, grads, &d_prev);
    encode_backward(enc_, params_, cache.enc, dfeat, grads);
    return d_prev;
  }

 private:
  void build_specs() {
    enc_ = encoder_spec("pi.", arch_);
    trunk_ = trunk_spec("pi.", arch_.feature_dim(), arch_, arch_.policy_recurrent);
    head_ = StackSpec::chain("pi.head", arch_.core, {2 * env::kActionDim}, nn::Activation::kLinear,
                             nn::Activation::kLinear);
  }

  ArchSpec arch_;
  ParamSet params_;
  StackSpec enc_, trunk_, head_;
};

// ---------------------------------------------------------------------------
// Critic

struct CriticCache {
  EncoderCache enc;
  nn::StackCache trunk, head;
  Eigen::Index feature_rows = 0;
};

struct CriticOutput {
  Matrix q;  // heads x batch
  StackState next_state;
};

class CriticNet {
 public:
  CriticNet() = default;
  explicit CriticNet(const ArchSpec& arch) : arch_(arch) {
    arch_.validate();
    build_specs();
  }
  CriticNet(const ArchSpec& arch, Rng& rng) : CriticNet(arch) {
    nn::init_stack(enc_, params_, rng);
    nn::init_stack(trunk_, params_, rng);
    nn::init_stack(head_, params_, rng);
  }
  CriticNet(const CriticNet& o) : arch_(o.arch_), params_(o.params_) { build_specs(); }
  CriticNet& operator=(const CriticNet& o) {
    arch_ = o.arch_;
    params_ = o.params_;
    build_specs();
    return *this;
  }

  [[nodiscard]] const ArchSpec& arch() const { return arch_; }
  [[nodiscard]] bool recurrent() const { return arch_.critic_recurrent; }
  [[nodiscard]] int num_heads() const { return arch_.num_heads(); }
  [[nodiscard]] ParamSet& params() { return params_; }
  [[nodiscard]] const ParamSet& params() const { return params_; }

  [[nodiscard]] StackState initial_state(Eigen::Index batch) const {
    return nn::zero_stack_state(trunk_, batch);
  }

  /// obs: 40 x batch, action: 3 x batch. The action is appended to the
  /// encoded features.
  CriticOutput forward(const Matrix& obs, const Matrix& action, const StackState& state,
                       CriticCache* cache = nullptr) const {
    nn::require_dims(action.rows(), env::kActionDim, "critic action");
    nn::require_dims(action.cols(), obs.cols(), "critic action batch");
    const Matrix feat = encode(enc_, params_, obs, cache != nullptr ? &cache->enc : nullptr);
    Matrix in(feat.rows() + env::kActionDim, feat.cols());
    in.topRows(feat.rows()) = feat;
    in.bottomRows(env::kActionDim) = action;
    CriticOutput out;
    const Matrix h = nn::stack_forward(trunk_, params_, in, recurrent() ? &state : nullptr,
                                       recurrent() ? &out.next_state : nullptr,
                                       cache != nullptr ? &cache->trunk : nullptr);
    out.q = nn::stack_forward(head_, params_, h, nullptr, nullptr, cache != nullptr ? &cache->head : nullptr);
    if (cache != nullptr) cache->feature_rows = feat.rows();
    return out;
  }

  /// Accumulates parameter gradients (if `grads` is non-null) and returns the
  /// action gradient. `d_prev_state` receives the incoming-state gradient.
  Matrix backward(const CriticCache& cache, const Matrix& d_q, const StackState* d_next_state,
                  ParamSet* grads, StackState* d_prev_state = nullptr) const {
    ParamSet scratch;
    ParamSet& g = grads != nullptr ? *grads : (scratch = params_.zeros_like());
    const Matrix dh = nn::stack_backward(head_, params_, cache.head, d_q, nullptr, g, nullptr);
    const Matrix din = nn::stack_backward(trunk_, params_, cache.trunk, dh, d_next_state, g, d_prev_state);
    if (grads != nullptr) encode_backward(enc_, params_, cache.enc, din.topRows(cache.feature_rows), g);
    return din.bottomRows(env::kActionDim);
  }

 private:
  void build_specs() {
    enc_ = encoder_spec("q.", arch_);
    trunk_ = trunk_spec("q.", arch_.feature_dim() + env::kActionDim, arch_, arch_.critic_recurrent);
    head_ = StackSpec::chain("q.head", arch_.core, {arch_.num_heads()}, nn::Activation::kLinear,
                             nn::Activation::kLinear);
  }

  ArchSpec arch_;
  ParamSet params_;
  StackSpec enc_, trunk_, head_;
};

/// Combined value sum_j alpha_j Q_j. A single-head critic already estimates
/// the combined return and is passed through.
inline Matrix combine_q(const Matrix& q, const std::array<double, env::kNumChannels>& alpha) {
  if (q.rows() == 1) return q;
  nn::require_dims(q.rows(), env::kNumChannels, "combine_q heads");
  Eigen::Map<const Eigen::Matrix<double, 1, env::kNumChannels>> a(alpha.data());
  return a * q;
}

/// Gradient of combine_q with respect to the heads.
inline Matrix combine_q_grad(int heads, const std::array<double, env::kNumChannels>& alpha,
                             const Matrix& d_combined) {
  if (heads == 1) return d_combined;
  Matrix d(env::kNumChannels, d_combined.cols());
  for (int c = 0; c < env::kNumChannels; ++c) d.row(c) = alpha[static_cast<std::size_t>(c)] * d_combined;
  return d;
}

}  // namespace coplay::agent
