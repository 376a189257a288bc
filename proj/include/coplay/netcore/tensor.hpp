#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coplay/core/random.hpp"

namespace coplay::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Named collection of parameter arrays with a monotone version counter.
///
/// Arrays keep insertion order, which is also the serialization order. The
/// version counter is bumped by every mutation that goes through `touch()`
/// (optimizer steps, copies from another set); forward caches record the
/// version they were produced under so a stale cache can be detected.
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Matrix value;
  };

  ParamSet() = default;

  Matrix& add(std::string name, Eigen::Index rows, Eigen::Index cols) {
    if (find(name) != nullptr) {
      throw std::invalid_argument("ParamSet: duplicate array '" + name + "'");
    }
    entries_.push_back({std::move(name), Matrix::Zero(rows, cols)});
    return entries_.back().value;
  }

  [[nodiscard]] const Matrix* find(std::string_view name) const {
    for (const auto& e : entries_)
      if (e.name == name) return &e.value;
    return nullptr;
  }
  Matrix* find(std::string_view name) {
    for (auto& e : entries_)
      if (e.name == name) return &e.value;
    return nullptr;
  }

  const Matrix& at(std::string_view name) const {
    const Matrix* m = find(name);
    if (m == nullptr) throw std::out_of_range("ParamSet: no array '" + std::string(name) + "'");
    return *m;
  }
  Matrix& at(std::string_view name) {
    Matrix* m = find(name);
    if (m == nullptr) throw std::out_of_range("ParamSet: no array '" + std::string(name) + "'");
    return *m;
  }

  [[nodiscard]] const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  [[nodiscard]] std::size_t size() const { return entries_.size(); }

  [[nodiscard]] std::uint64_t version() const { return version_; }
  void set_version(std::uint64_t v) { version_ = v; }
  void touch() { ++version_; }

  [[nodiscard]] std::size_t num_scalars() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
    return n;
  }

  [[nodiscard]] bool all_finite() const {
    for (const auto& e : entries_)
      if (!e.value.allFinite()) return false;
    return true;
  }

  /// Same names and shapes, all zeros, version 0.
  [[nodiscard]] ParamSet zeros_like() const {
    ParamSet out;
    for (const auto& e : entries_) out.add(e.name, e.value.rows(), e.value.cols());
    return out;
  }

  [[nodiscard]] bool same_layout(const ParamSet& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& a = entries_[i];
      const auto& b = other.entries_[i];
      if (a.name != b.name || a.value.rows() != b.value.rows() ||
          a.value.cols() != b.value.cols())
        return false;
    }
    return true;
  }

  /// Copies values (not the version) from `src`, then bumps the version.
  void assign_values(const ParamSet& src) {
    if (!same_layout(src)) throw std::invalid_argument("ParamSet: layout mismatch in assign");
    for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i].value = src.entries_[i].value;
    touch();
  }

  void set_zero() {
    for (auto& e : entries_) e.value.setZero();
  }

  /// this += scale * other (gradient accumulation; does not bump version).
  void axpy(double scale, const ParamSet& other) {
    if (!same_layout(other)) throw std::invalid_argument("ParamSet: layout mismatch in axpy");
    for (std::size_t i = 0; i < entries_.size(); ++i)
      entries_[i].value += scale * other.entries_[i].value;
  }

  [[nodiscard]] double squared_norm() const {
    double s = 0.0;
    for (const auto& e : entries_) s += e.value.squaredNorm();
    return s;
  }

  /// Flat scalar access in serialization order (used by gradient checks).
  double& flat(std::size_t index) {
    for (auto& e : entries_) {
      const auto n = static_cast<std::size_t>(e.value.size());
      if (index < n) return e.value.data()[index];
      index -= n;
    }
    throw std::out_of_range("ParamSet: flat index out of range");
  }
  [[nodiscard]] double flat(std::size_t index) const {
    return const_cast<ParamSet*>(this)->flat(index);
  }

 private:
  std::vector<Entry> entries_;
  std::uint64_t version_ = 0;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
inline void init_fan_in(Matrix& w, Rng& rng, double gain = 1.0) {
  const double bound = gain / std::sqrt(static_cast<double>(std::max<Eigen::Index>(1, w.cols())));
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng, -bound, bound);
}

inline void require_dims(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (got " +
                                std::to_string(got) + ", expected " + std::to_string(want) + ")");
  }
}

}  // namespace coplay::nn
