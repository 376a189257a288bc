#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "coplay/netcore/tensor.hpp"

namespace coplay::nn {

/// Diagonal Gaussian over actions. Columns of `mean`/`stddev` are batch
/// elements; a single distribution is a one-column batch.
struct Gaussian {
  Matrix mean;
  Matrix stddev;

  void validate() const {
    if (mean.rows() != stddev.rows() || mean.cols() != stddev.cols()) {
      throw std::invalid_argument("Gaussian: mean/stddev shape mismatch");
    }
    if (!(stddev.array() > 0.0).all()) {
      throw std::invalid_argument("Gaussian: stddev must be strictly positive");
    }
  }

  [[nodiscard]] Eigen::Index dim() const { return mean.rows(); }
  [[nodiscard]] Eigen::Index batch() const { return mean.cols(); }

  [[nodiscard]] Gaussian column(Eigen::Index j) const { return {mean.col(j), stddev.col(j)}; }
};

/// Reparameterized sample: mean + stddev * noise.
inline Matrix sample(const Gaussian& g, const Matrix& noise) {
  g.validate();
  require_dims(noise.rows(), g.dim(), "gaussian sample noise");
  require_dims(noise.cols(), g.batch(), "gaussian sample batch");
  return g.mean + g.stddev.cwiseProduct(noise);
}

/// Log density of each column of `action`; returns 1 x batch.
inline Matrix log_prob(const Gaussian& g, const Matrix& action) {
  g.validate();
  require_dims(action.rows(), g.dim(), "gaussian log_prob");
  require_dims(action.cols(), g.batch(), "gaussian log_prob batch");
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  Matrix z = (action - g.mean).cwiseQuotient(g.stddev);
  Matrix out = -0.5 * z.array().square().colwise().sum().matrix() -
               g.stddev.array().log().colwise().sum().matrix();
  out.array() -= half_log_2pi * static_cast<double>(g.dim());
  return out;
}

/// Differential entropy sum_k 0.5*log(2*pi*e*sigma_k^2); returns 1 x batch.
inline Matrix entropy(const Gaussian& g) {
  g.validate();
  const double c = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  Matrix out = g.stddev.array().log().colwise().sum().matrix();
  out.array() += c * static_cast<double>(g.dim());
  return out;
}

/// Closed-form KL(p || q) per column; returns 1 x batch.
inline Matrix kl(const Gaussian& p, const Gaussian& q) {
  p.validate();
  q.validate();
  require_dims(p.dim(), q.dim(), "gaussian kl");
  require_dims(p.batch(), q.batch(), "gaussian kl batch");
  const auto vp = p.stddev.array().square();
  const auto vq = q.stddev.array().square();
  const auto dm = (p.mean - q.mean).array().square();
  Matrix terms = ((q.stddev.array() / p.stddev.array()).log() + (vp + dm) / (2.0 * vq) - 0.5).matrix();
  Matrix out = terms.colwise().sum();
  return out.cwiseMax(0.0);  // rounding can leave -1e-17 for identical inputs
}

/// Softplus with a positive floor, used to map raw head outputs to stddevs.
inline double positive_stddev(double raw, double floor) {
  const double sp = raw > 30.0 ? raw : std::log1p(std::exp(raw));
  return sp + floor;
}
inline double positive_stddev_grad(double raw) { return 1.0 / (1.0 + std::exp(-raw)); }

}  // namespace coplay::nn
