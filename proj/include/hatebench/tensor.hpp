#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hatebench/error.hpp"
#include "hatebench/rng.hpp"

namespace hatebench::nn {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

/// Dense row-major array. `T` is double in tests, float allowed elsewhere.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)), data_(count(shape_), fill) {}

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != count(shape_)) {
      throw Error(ErrorCode::ShapeMismatch, shape_string(shape_) + " with " + std::to_string(data_.size()) + " values");
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

  T& operator()(std::size_t i, std::size_t j, std::size_t k) { return data_[(i * shape_[1] + j) * shape_[2] + k]; }
  const T& operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  /// Row `i` of a rank-2 tensor.
  std::span<T> row(std::size_t i) { return std::span<T>(data_).subspan(i * shape_[1], shape_[1]); }
  std::span<const T> row(std::size_t i) const { return std::span<const T>(data_).subspan(i * shape_[1], shape_[1]); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (const T& v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  static std::size_t count(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }

  Shape shape_;
  std::vector<T> data_;
};

template <class T>
void require_shape(const Tensor<T>& t, const Shape& expected, const char* what) {
  if (t.shape() != expected) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(what) + ": expected " + shape_string(expected) + ", got " + shape_string(t.shape()));
  }
}

template <class T>
struct Param {
  Tensor<T> value;
  Tensor<T> grad;
};

/// Named parameters with a same-shaped gradient slot each. Iteration order is by name.
template <class T>
class ParamStore {
 public:
  Tensor<T>& add(const std::string& name, Tensor<T> value) {
    if (params_.contains(name)) throw Error(ErrorCode::BadConfig, "duplicate parameter " + name);
    Tensor<T> grad(value.shape());
    auto& p = params_[name];
    p.value = std::move(value);
    p.grad = std::move(grad);
    return p.value;
  }

  bool contains(const std::string& name) const { return params_.contains(name); }

  Tensor<T>& value(const std::string& name) { return get(name).value; }
  const Tensor<T>& value(const std::string& name) const { return get(name).value; }
  Tensor<T>& grad(const std::string& name) { return get(name).grad; }
  const Tensor<T>& grad(const std::string& name) const { return get(name).grad; }

  void zero_grad() {
    for (auto& [_, p] : params_) p.grad.fill(T(0));
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) n += p.value.size();
    return n;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

  bool values_equal(const ParamStore& other) const {
    if (params_.size() != other.params_.size()) return false;
    auto a = params_.begin();
    auto b = other.params_.begin();
    for (; a != params_.end(); ++a, ++b) {
      if (a->first != b->first || !(a->second.value == b->second.value)) return false;
    }
    return true;
  }

 private:
  Param<T>& get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error(ErrorCode::BadConfig, "unknown parameter " + name);
    return it->second;
  }
  const Param<T>& get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error(ErrorCode::BadConfig, "unknown parameter " + name);
    return it->second;
  }

  std::map<std::string, Param<T>> params_;
};

/// Glorot-uniform fill with limit sqrt(6 / (fan_in + fan_out)).
template <class T>
void glorot_uniform(Tensor<T>& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-limit, limit));
}

/// Orthonormal rows for a square matrix: modified Gram-Schmidt on uniform draws.
template <class T>
void orthogonal_fill(Tensor<T>& t, Rng& rng) {
  const std::size_t n = t.dim(0);
  if (t.rank() != 2 || t.dim(1) != n) throw Error(ErrorCode::ShapeMismatch, "orthogonal_fill needs a square matrix");
  std::vector<double> m(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (;;) {
      for (std::size_t j = 0; j < n; ++j) m[i * n + j] = rng.uniform(-1.0, 1.0);
      for (std::size_t k = 0; k < i; ++k) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += m[i * n + j] * m[k * n + j];
        for (std::size_t j = 0; j < n; ++j) m[i * n + j] -= dot * m[k * n + j];
      }
      double norm = 0.0;
      for (std::size_t j = 0; j < n; ++j) norm += m[i * n + j] * m[i * n + j];
      norm = std::sqrt(norm);
      if (norm > 1e-6) {
        for (std::size_t j = 0; j < n; ++j) m[i * n + j] /= norm;
        break;
      }
    }
  }
  for (std::size_t i = 0; i < n * n; ++i) t.data()[i] = static_cast<T>(m[i]);
}

template <class T>
void uniform_fill(Tensor<T>& t, double lo, double hi, Rng& rng) {
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
}

// ---------------------------------------------------------------------------
// Adam

template <class T>
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long t = 0;
  std::map<std::string, std::pair<Tensor<T>, Tensor<T>>> moments;  // name -> (m, v)
};

/// Bias-corrected Adam update of every parameter, then gradients are zeroed.
template <class T>
void adam_step(ParamStore<T>& store, AdamState<T>& state) {
  for (const auto& [name, p] : store) {
    if (!p.grad.all_finite()) throw Error(ErrorCode::NonFiniteGradient, name);
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (auto& [name, p] : store) {
    auto it = state.moments.find(name);
    if (it == state.moments.end()) {
      it = state.moments.emplace(name, std::make_pair(Tensor<T>(p.value.shape()), Tensor<T>(p.value.shape()))).first;
    }
    auto& m = it->second.first;
    auto& v = it->second.second;
    auto val = p.value.data();
    auto g = p.grad.data();
    auto md = m.data();
    auto vd = v.data();
    for (std::size_t i = 0; i < val.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = state.beta1 * static_cast<double>(md[i]) + (1.0 - state.beta1) * gi;
      const double vi = state.beta2 * static_cast<double>(vd[i]) + (1.0 - state.beta2) * gi * gi;
      md[i] = static_cast<T>(mi);
      vd[i] = static_cast<T>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      val[i] = static_cast<T>(static_cast<double>(val[i]) - state.lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
  store.zero_grad();
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`. Returns the pre-clip norm.
template <class T>
double clip_grad_norm(ParamStore<T>& store, double max_norm) {
  double sq = 0.0;
  for (const auto& [_, p] : store) {
    for (T g : p.grad.data()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const T scale = static_cast<T>(max_norm / norm);
    for (auto& [_, p] : store) {
      for (T& g : p.grad.data()) g *= scale;
    }
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

/// Central differences of `loss` with respect to each entry of `point`, compared
/// against `analytic`. `point` is perturbed in place and restored. Returns the
/// maximum relative error.
inline double grad_check(std::span<double> point, std::span<const double> analytic,
                         const std::function<double()>& loss, double eps = 1e-5) {
  if (point.size() != analytic.size()) throw Error(ErrorCode::ShapeMismatch, "gradient size differs from point size");
  double worst = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + eps;
    const double up = loss();
    point[i] = saved - eps;
    const double down = loss();
    point[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    worst = std::max(worst, relative_error(analytic[i], numeric));
  }
  return worst;
}

}  // namespace hatebench::nn
