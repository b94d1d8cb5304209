#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "crlmaze/env.hpp"
#include "crlmaze/errors.hpp"

namespace crlmaze {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct NetworkConfig {
  int input_size = kObservationChannels * 7 * 7;
  std::vector<int> hidden_sizes{128, 128};
  int n_actions = kNumActions;

  bool operator==(const NetworkConfig&) const = default;
};

/// Where one dense layer lives inside the flat parameter array. Weights are
/// row-major (inputs x outputs).
struct DenseSlice {
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
  int inputs = 0;
  int outputs = 0;
};

struct ParamLayout {
  NetworkConfig config;
  std::vector<DenseSlice> hidden;
  DenseSlice policy;
  DenseSlice value;
  std::size_t size = 0;

  explicit ParamLayout(NetworkConfig cfg) : config(std::move(cfg)) {
    if (config.input_size <= 0) throw ConfigError("network input size must be positive", "input_size");
    if (config.n_actions != kNumActions) throw ConfigError("the policy head has exactly 3 actions", "n_actions");
    int fan_in = config.input_size;
    for (int h : config.hidden_sizes) {
      if (h <= 0) throw ConfigError("hidden layer sizes must be positive", "hidden_sizes");
      hidden.push_back(add(fan_in, h));
      fan_in = h;
    }
    policy = add(fan_in, config.n_actions);
    value = add(fan_in, 1);
  }

 private:
  DenseSlice add(int inputs, int outputs) {
    DenseSlice s;
    s.inputs = inputs;
    s.outputs = outputs;
    s.weight_offset = size;
    size += static_cast<std::size_t>(inputs) * static_cast<std::size_t>(outputs);
    s.bias_offset = size;
    size += static_cast<std::size_t>(outputs);
    return s;
  }
};

/// Flat parameter vector plus a shared, immutable layout. Gradients, Fisher
/// diagonals and anchors use the same type so they stay aligned.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::shared_ptr<const ParamLayout> layout)
      : layout_(std::move(layout)), values_(layout_->size, 0.0) {}

  static ParamVector zeros_like(const ParamVector& other) { return ParamVector(other.layout_); }

  const ParamLayout& layout() const { return *layout_; }
  std::shared_ptr<const ParamLayout> layout_ptr() const { return layout_; }
  std::size_t size() const { return values_.size(); }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  Eigen::Map<Matrix> weights(const DenseSlice& s) {
    return {values_.data() + s.weight_offset, s.inputs, s.outputs};
  }
  Eigen::Map<const Matrix> weights(const DenseSlice& s) const {
    return {values_.data() + s.weight_offset, s.inputs, s.outputs};
  }
  Eigen::Map<Eigen::RowVectorXd> bias(const DenseSlice& s) {
    return {values_.data() + s.bias_offset, s.outputs};
  }
  Eigen::Map<const Eigen::RowVectorXd> bias(const DenseSlice& s) const {
    return {values_.data() + s.bias_offset, s.outputs};
  }
  Eigen::Map<Vector> as_eigen() { return {values_.data(), static_cast<Eigen::Index>(values_.size())}; }
  Eigen::Map<const Vector> as_eigen() const {
    return {values_.data(), static_cast<Eigen::Index>(values_.size())};
  }

  /// FNV-1a over the raw bytes; identifies a parameter snapshot.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto* bytes = reinterpret_cast<const unsigned char*>(values_.data());
    for (std::size_t i = 0; i < values_.size() * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  bool operator==(const ParamVector& other) const {
    return values_ == other.values_ && layout_->config == other.layout_->config;
  }

 private:
  std::shared_ptr<const ParamLayout> layout_;
  std::vector<double> values_;
};

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases zero.
inline ParamVector init_params(const NetworkConfig& config, std::uint64_t seed) {
  ParamVector p(std::make_shared<const ParamLayout>(config));
  std::mt19937_64 rng(seed);
  auto fill = [&](const DenseSlice& s) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.inputs));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto w = p.weights(s);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
  };
  for (const auto& s : p.layout().hidden) fill(s);
  fill(p.layout().policy);
  fill(p.layout().value);
  return p;
}

struct ForwardCache {
  std::vector<Matrix> pre_activations;  // one per hidden layer
  std::vector<Matrix> activations;      // input, then one per hidden layer
  const ParamVector* params = nullptr;
  std::uint64_t params_fingerprint = 0;
};

struct ForwardResult {
  Matrix logits;  // batch x n_actions
  Vector values;  // batch
  ForwardCache cache;
};

/// Flatten -> ReLU hidden layers -> (policy logits, value). Rows of `obs` are
/// batch elements. With keep_cache the result can be fed to backward() as
/// long as `params` is alive and unmodified.
inline ForwardResult forward(const ParamVector& params, const Matrix& obs, bool keep_cache = true) {
  const auto& layout = params.layout();
  if (obs.cols() != layout.config.input_size)
    throw ContractViolation("observation batch width does not match the network input size");
  ForwardResult out;
  Matrix a = obs;
  for (const auto& s : layout.hidden) {
    Matrix z = a * params.weights(s);
    z.rowwise() += params.bias(s);
    Matrix next = z.cwiseMax(0.0);
    if (keep_cache) {
      out.cache.activations.push_back(std::move(a));
      out.cache.pre_activations.push_back(std::move(z));
    }
    a = std::move(next);
  }
  out.logits = a * params.weights(layout.policy);
  out.logits.rowwise() += params.bias(layout.policy);
  Matrix v = a * params.weights(layout.value);
  out.values = v.col(0).array() + params.bias(layout.value)(0);
  if (keep_cache) {
    out.cache.activations.push_back(std::move(a));
    out.cache.params = &params;
    out.cache.params_fingerprint = params.fingerprint();
  }
  return out;
}

namespace detail {

inline void check_cache(const ForwardCache& cache, Eigen::Index dlogit_rows, Eigen::Index dvalue_rows) {
  if (cache.params == nullptr || cache.activations.empty())
    throw ContractViolation("backward needs the cache of a forward call");
  if (cache.params->fingerprint() != cache.params_fingerprint)
    throw ContractViolation("stale forward cache: parameters changed since forward");
  const auto batch = cache.activations.front().rows();
  if (dlogit_rows != batch || dvalue_rows != batch)
    throw ContractViolation("output gradients do not match the cached batch size");
}

// Shared reverse sweep. `emit(slice, upstream_activation, delta)` receives
// every dense layer from the heads down to the first hidden layer.
template <typename Emit>
void reverse_sweep(const ForwardCache& cache, const Matrix& dlogits, const Vector& dvalues, Emit&& emit) {
  const ParamVector& params = *cache.params;
  const auto& layout = params.layout();
  const Matrix& top = cache.activations.back();
  emit(layout.policy, top, dlogits);
  Matrix dv = dvalues;
  emit(layout.value, top, dv);
  if (layout.hidden.empty()) return;
  Matrix da = dlogits * params.weights(layout.policy).transpose();
  da += dvalues * params.weights(layout.value).transpose();
  for (std::size_t l = layout.hidden.size(); l-- > 0;) {
    const auto& s = layout.hidden[l];
    Matrix dz = (cache.pre_activations[l].array() > 0.0).select(da, 0.0);
    emit(s, cache.activations[l], dz);
    if (l > 0) da = dz * params.weights(s).transpose();
  }
}

}  // namespace detail

/// Exact reverse-mode gradient of sum_b <dlogits_b, logits_b> + dvalues_b * value_b.
inline ParamVector backward(const ForwardCache& cache, const Matrix& dlogits, const Vector& dvalues) {
  detail::check_cache(cache, dlogits.rows(), dvalues.rows());
  ParamVector grad = ParamVector::zeros_like(*cache.params);
  detail::reverse_sweep(cache, dlogits, dvalues, [&](const DenseSlice& s, const Matrix& a, const Matrix& delta) {
    grad.weights(s).noalias() = a.transpose() * delta;
    grad.bias(s) = delta.colwise().sum();
  });
  return grad;
}

/// Sum over batch rows of the squared per-row gradient, for value-free
/// output gradients. Uses sum_b (a_bi d_bj)^2 = ((a.^2)^T (d.^2))_ij.
inline ParamVector squared_gradient_sum(const ForwardCache& cache, const Matrix& dlogits) {
  Vector zero = Vector::Zero(dlogits.rows());
  detail::check_cache(cache, dlogits.rows(), zero.rows());
  ParamVector out = ParamVector::zeros_like(*cache.params);
  detail::reverse_sweep(cache, dlogits, zero, [&](const DenseSlice& s, const Matrix& a, const Matrix& delta) {
    Matrix d2 = delta.cwiseProduct(delta);
    out.weights(s).noalias() = a.cwiseProduct(a).transpose() * d2;
    out.bias(s) = d2.colwise().sum();
  });
  return out;
}

// ---------------------------------------------------------------------------
// Policy helpers

inline Eigen::RowVectorXd log_softmax(const Eigen::Ref<const Eigen::RowVectorXd>& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

inline Eigen::RowVectorXd softmax(const Eigen::Ref<const Eigen::RowVectorXd>& logits) {
  return log_softmax(logits).array().exp();
}

struct SampledAction {
  int action = 0;
  double log_probability = 0.0;
};

inline SampledAction sample_action(const Eigen::Ref<const Eigen::RowVectorXd>& logits, std::mt19937_64& rng) {
  const Eigen::RowVectorXd logp = log_softmax(logits);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double draw = u(rng);
  double cumulative = 0.0;
  int chosen = static_cast<int>(logp.size()) - 1;
  for (int a = 0; a < logp.size(); ++a) {
    cumulative += std::exp(logp(a));
    if (draw < cumulative) {
      chosen = a;
      break;
    }
  }
  // Guard against a rounding tail landing on a zero-probability action.
  while (!std::isfinite(logp(chosen)) && chosen > 0) --chosen;
  return {chosen, logp(chosen)};
}

inline int greedy_action(const Eigen::Ref<const Eigen::RowVectorXd>& logits) {
  Eigen::Index best = 0;
  logits.maxCoeff(&best);
  return static_cast<int>(best);
}

// ---------------------------------------------------------------------------
// Finite-difference checking

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

/// Compares `analytic` against central differences of `loss` for every
/// parameter. Relative error is |a - n| / max(|a|, |n|, floor); the floor
/// keeps round-off on near-zero entries from dominating.
inline GradCheckReport check_gradient(const std::function<double(const ParamVector&)>& loss,
                                      const ParamVector& at, const ParamVector& analytic,
                                      double step = 1e-5, double floor = 1e-6) {
  GradCheckReport report;
  ParamVector probe = at;
  for (std::size_t i = 0; i < at.size(); ++i) {
    const double original = probe[i];
    probe[i] = original + step;
    const double up = loss(probe);
    probe[i] = original - step;
    const double down = loss(probe);
    probe[i] = original;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic[i];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
    if (rel > report.max_relative_error) {
      report = {rel, i, a, numeric};
    }
  }
  return report;
}

/// Packs observations into a batch matrix (one row per observation).
inline Matrix stack_observations(std::span<const Observation> observations) {
  if (observations.empty()) return {};
  const auto width = static_cast<Eigen::Index>(observations.front().data.size());
  Matrix m(static_cast<Eigen::Index>(observations.size()), width);
  for (std::size_t i = 0; i < observations.size(); ++i)
    std::memcpy(m.row(static_cast<Eigen::Index>(i)).data(), observations[i].data.data(),
                sizeof(double) * static_cast<std::size_t>(width));
  return m;
}

}  // namespace crlmaze
