#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kgif/error.hpp"

namespace kgif {

using Vector = std::vector<double>;

/// Row-major dense matrix of doubles. A 1×n matrix doubles as a bias vector.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

  static Matrix identity(std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < std::min(rows, cols); ++i) m(i, i) = 1.0;
    return m;
  }

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix zeros_like(const Matrix& m) { return Matrix(m.rows(), m.cols()); }

// ---------------------------------------------------------------------------
// Random numbers. The standard distributions are implementation-defined, so
// sampling goes through these helpers to keep seeded runs portable.

class SplitMix {
public:
  explicit SplitMix(std::uint64_t seed = 0) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

private:
  std::uint64_t state_;
};

/// xoshiro256** seeded through splitmix64.
class Random {
public:
  using result_type = std::uint64_t;

  explicit Random(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    SplitMix sm(seed);
    for (auto& s : s_) s = sm.next();
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform in [0, n). Lemire's nearly-divisionless method.
  std::uint64_t index(std::uint64_t n) {
    if (n == 0) throw DimensionError("Random::index on empty range");
    std::uint64_t x = (*this)();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        x = (*this)();
        m = static_cast<__uint128_t>(x) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4]{};
};

// ---------------------------------------------------------------------------
// Activations

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

/// -ln sigmoid(x) == softplus(-x).
inline double neg_log_sigmoid(double x) { return softplus(-x); }

inline double relu(double x) { return x > 0 ? x : 0.0; }

inline constexpr double kLeakySlope = 0.01;

inline double leaky_relu(double x, double slope = kLeakySlope) { return x > 0 ? x : slope * x; }
inline double leaky_relu_grad(double x, double slope = kLeakySlope) { return x > 0 ? 1.0 : slope; }

inline Vector sigmoid(std::span<const double> x) {
  Vector out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), [](double v) { return sigmoid(v); });
  return out;
}

inline Vector tanh(std::span<const double> x) {
  Vector out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), [](double v) { return std::tanh(v); });
  return out;
}

inline Vector relu(std::span<const double> x) {
  Vector out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), [](double v) { return relu(v); });
  return out;
}

inline Vector leaky_relu(std::span<const double> x, double slope = kLeakySlope) {
  Vector out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), [slope](double v) { return leaky_relu(v, slope); });
  return out;
}

// ---------------------------------------------------------------------------
// Small dense kernels. Vectors are rows; `vec_mat` computes x·W.

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

/// out = x·W, x of length W.rows(), out of length W.cols().
inline void vec_mat(std::span<const double> x, const Matrix& w, std::span<double> out) {
  if (x.size() != w.rows() || out.size() != w.cols()) {
    throw DimensionError("vec_mat: " + std::to_string(x.size()) + " x (" + std::to_string(w.rows()) +
                         "x" + std::to_string(w.cols()) + ")");
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    axpy(xi, w.row(i), out);
  }
}

inline Vector vec_mat(std::span<const double> x, const Matrix& w) {
  Vector out(w.cols());
  vec_mat(x, w, out);
  return out;
}

/// out = W·x (column form), x of length W.cols().
inline void mat_vec(const Matrix& w, std::span<const double> x, std::span<double> out) {
  if (x.size() != w.cols() || out.size() != w.rows()) throw DimensionError("mat_vec shape mismatch");
  for (std::size_t i = 0; i < w.rows(); ++i) out[i] = dot(w.row(i), x);
}

/// out += dy·Wᵀ, the input-gradient of vec_mat.
inline void vec_mat_backward_input(std::span<const double> dy, const Matrix& w, std::span<double> dx) {
  for (std::size_t i = 0; i < w.rows(); ++i) dx[i] += dot(w.row(i), dy);
}

/// dW += xᵀ·dy, the weight-gradient of vec_mat.
inline void vec_mat_backward_weight(std::span<const double> x, std::span<const double> dy, Matrix& dw) {
  for (std::size_t i = 0; i < dw.rows(); ++i) {
    if (x[i] == 0.0) continue;
    axpy(x[i], dy, dw.row(i));
  }
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// ---------------------------------------------------------------------------
// Initialization and optimization

/// Uniform Xavier/Glorot: entries in [-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))].
inline Matrix xavier_init(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  if (rows == 0 || cols == 0) throw DimensionError("xavier_init: zero dimension");
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Random rng(seed);
  Matrix m(rows, cols);
  for (auto& v : m.flat()) v = rng.uniform(-bound, bound);
  return m;
}

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::size_t step = 0;
  Vector first_moment;
  Vector second_moment;
};

/// One bias-corrected Adam update of `params` in place.
inline void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
                      std::string_view group = "params") {
  if (params.size() != grads.size()) {
    throw DimensionError("adam_step: gradient shape mismatch for '" + std::string(group) + "'");
  }
  if (!all_finite(grads)) throw NumericError("adam_step: non-finite gradient in '" + std::string(group) + "'");
  if (state.first_moment.empty() && state.second_moment.empty()) {
    state.first_moment.assign(params.size(), 0.0);
    state.second_moment.assign(params.size(), 0.0);
  }
  if (state.first_moment.size() != params.size()) {
    throw DimensionError("adam_step: accumulator shape mismatch for '" + std::string(group) + "'");
  }
  const auto& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

/// Central-difference gradient (f(x+eps) - f(x-eps)) / 2eps per coordinate.
template <class LossFn>
Vector finite_diff_grad(LossFn&& loss_fn, Vector params, double epsilon) {
  if (!(epsilon > 0)) throw DimensionError("finite_diff_grad: epsilon must be positive");
  Vector grad(params.size());
  auto eval = [&](const Vector& x) {
    const double f = loss_fn(std::span<const double>(x));
    if (!std::isfinite(f)) throw NumericError("finite_diff_grad: non-finite loss");
    return f;
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + epsilon;
    const double up = eval(params);
    params[i] = saved - epsilon;
    const double down = eval(params);
    params[i] = saved;
    grad[i] = (up - down) / (2.0 * epsilon);
  }
  return grad;
}

/// Largest |a-b| / max(|a|, |b|, floor) over coordinates.
inline double max_relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

/// Adam states keyed by tensor name, so partial passes (embedding-only
/// updates) and full passes share moments for the tensors they touch.
class Optimizer {
public:
  explicit Optimizer(AdamConfig config = {}) : config_(config) {}

  void step(const std::string& name, Matrix& params, const Matrix& grads) {
    if (!params.same_shape(grads)) throw DimensionError("optimizer: gradient shape mismatch for '" + name + "'");
    auto [it, inserted] = states_.try_emplace(name);
    if (inserted) it->second.config = config_;
    adam_step(it->second, params.flat(), grads.flat(), name);
  }

  const AdamConfig& config() const { return config_; }
  const std::map<std::string, AdamState>& states() const { return states_; }

private:
  AdamConfig config_;
  std::map<std::string, AdamState> states_;
};

}  // namespace kgif
