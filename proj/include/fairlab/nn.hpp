#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <utility>
#include <vector>

#include "fairlab/common.hpp"

// Minimal feedforward networks with exact reverse-mode gradients and Adam.
// Small dense policy/value heads only; everything is plain double loops so
// results are bit-reproducible for a fixed seed.

namespace fairlab::nn {

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // row-major

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  static Matrix from_row(const std::vector<double>& row) {
    Matrix m(1, static_cast<int>(row.size()));
    m.data = row;
    return m;
  }
};

enum class Activation { kTanh, kRelu };
enum class OutputHead { kSoftmax, kScalar };

struct NetworkSpec {
  std::vector<int> layer_sizes;  // input, hidden..., output
  Activation activation = Activation::kTanh;
  OutputHead head = OutputHead::kSoftmax;

  void validate() const {
    require(layer_sizes.size() >= 2, "NetworkSpec: need at least 2 layers");
    for (int s : layer_sizes) require(s >= 1, "NetworkSpec: layer sizes must be >= 1");
    if (head == OutputHead::kSoftmax)
      require(layer_sizes.back() >= 2, "NetworkSpec: softmax head needs output width >= 2");
    if (head == OutputHead::kScalar)
      require(layer_sizes.back() == 1, "NetworkSpec: scalar head needs output width 1");
  }

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  int layer_count() const { return static_cast<int>(layer_sizes.size()) - 1; }

  // Per layer: out x in weights (row-major) followed by out biases.
  int parameter_count() const {
    int total = 0;
    for (int l = 0; l < layer_count(); ++l)
      total += (layer_sizes[l] + 1) * layer_sizes[l + 1];
    return total;
  }

  int layer_offset(int layer) const {
    int off = 0;
    for (int l = 0; l < layer; ++l) off += (layer_sizes[l] + 1) * layer_sizes[l + 1];
    return off;
  }

  bool operator==(const NetworkSpec& other) const = default;
};

using ParameterVector = std::vector<double>;

// Glorot-uniform weights, zero biases.
inline ParameterVector init_parameters(const NetworkSpec& spec, Rng& rng) {
  spec.validate();
  ParameterVector params(spec.parameter_count(), 0.0);
  for (int l = 0; l < spec.layer_count(); ++l) {
    const int fan_in = spec.layer_sizes[l];
    const int fan_out = spec.layer_sizes[l + 1];
    const double r = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-r, r);
    const int off = spec.layer_offset(l);
    for (int i = 0; i < fan_in * fan_out; ++i) params[off + i] = dist(rng);
  }
  return params;
}

// Everything backward() needs is cached here, including the parameters the
// forward pass used, so a tape cannot silently go stale.
struct ForwardTape {
  NetworkSpec spec;
  ParameterVector params;
  Matrix input;
  std::vector<Matrix> pre;   // pre-activation per layer; back() holds the logits
  std::vector<Matrix> post;  // post-activation per hidden layer
  Matrix output;             // post-head
};

namespace detail {

inline double activate(double z, Activation a) {
  return a == Activation::kTanh ? std::tanh(z) : std::max(0.0, z);
}

inline double activate_grad(double z, Activation a) {
  if (a == Activation::kTanh) {
    const double t = std::tanh(z);
    return 1.0 - t * t;
  }
  return z > 0.0 ? 1.0 : 0.0;
}

// z_out = x * W^T + b for one layer.
inline Matrix affine(const Matrix& x, const ParameterVector& params, int offset,
                     int in_size, int out_size) {
  Matrix z(x.rows, out_size);
  for (int r = 0; r < x.rows; ++r) {
    for (int j = 0; j < out_size; ++j) {
      double acc = params[offset + static_cast<size_t>(out_size) * in_size + j];  // bias
      const int wrow = offset + j * in_size;
      for (int i = 0; i < in_size; ++i) acc += params[wrow + i] * x(r, i);
      z(r, j) = acc;
    }
  }
  return z;
}

}  // namespace detail

// Row-wise log-softmax with max subtraction.
inline Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows, logits.cols);
  for (int r = 0; r < logits.rows; ++r) {
    double mx = logits(r, 0);
    for (int c = 1; c < logits.cols; ++c) mx = std::max(mx, logits(r, c));
    double sum = 0.0;
    for (int c = 0; c < logits.cols; ++c) sum += std::exp(logits(r, c) - mx);
    const double lse = mx + std::log(sum);
    for (int c = 0; c < logits.cols; ++c) out(r, c) = logits(r, c) - lse;
  }
  return out;
}

inline std::pair<Matrix, ForwardTape> forward(const NetworkSpec& spec,
                                              const ParameterVector& params,
                                              const Matrix& inputs) {
  spec.validate();
  require(static_cast<int>(params.size()) == spec.parameter_count(),
          "forward: parameter vector length does not match spec");
  require(inputs.cols == spec.input_size(), "forward: input width does not match spec");
  require(inputs.rows >= 1, "forward: empty input batch");

  ForwardTape tape;
  tape.spec = spec;
  tape.params = params;
  tape.input = inputs;

  Matrix act = inputs;
  const int layers = spec.layer_count();
  for (int l = 0; l < layers; ++l) {
    Matrix z = detail::affine(act, params, spec.layer_offset(l), spec.layer_sizes[l],
                              spec.layer_sizes[l + 1]);
    tape.pre.push_back(z);
    if (l + 1 < layers) {
      for (double& v : z.data) v = detail::activate(v, spec.activation);
      tape.post.push_back(z);
      act = std::move(z);
    }
  }

  const Matrix& logits = tape.pre.back();
  Matrix out;
  if (spec.head == OutputHead::kSoftmax) {
    Matrix lsm = log_softmax_rows(logits);
    out = Matrix(lsm.rows, lsm.cols);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::exp(lsm.data[i]);
  } else {
    out = logits;
  }
  for (double v : out.data)
    if (!std::isfinite(v)) throw NumericError("forward: non-finite network output");
  tape.output = out;
  return {out, tape};
}

// Reverse pass from a gradient at the logits (head Jacobian already applied).
inline ParameterVector backward_logits(const ForwardTape& tape, const Matrix& logit_grad) {
  const NetworkSpec& spec = tape.spec;
  require(!tape.pre.empty() && tape.input.rows >= 1, "backward: tape was not produced by forward");
  require(logit_grad.rows == tape.input.rows && logit_grad.cols == spec.output_size(),
          "backward: gradient shape does not match tape");

  ParameterVector grad(spec.parameter_count(), 0.0);
  Matrix gz = logit_grad;
  for (int l = spec.layer_count() - 1; l >= 0; --l) {
    const int in_size = spec.layer_sizes[l];
    const int out_size = spec.layer_sizes[l + 1];
    const int off = spec.layer_offset(l);
    const Matrix& below = l == 0 ? tape.input : tape.post[l - 1];

    for (int r = 0; r < gz.rows; ++r) {
      for (int j = 0; j < out_size; ++j) {
        const double g = gz(r, j);
        if (g == 0.0) continue;
        const int wrow = off + j * in_size;
        for (int i = 0; i < in_size; ++i) grad[wrow + i] += g * below(r, i);
        grad[off + static_cast<size_t>(out_size) * in_size + j] += g;
      }
    }

    if (l > 0) {
      Matrix ga(gz.rows, in_size);
      for (int r = 0; r < gz.rows; ++r) {
        for (int i = 0; i < in_size; ++i) {
          double acc = 0.0;
          for (int j = 0; j < out_size; ++j) acc += gz(r, j) * tape.params[off + j * in_size + i];
          ga(r, i) = acc * detail::activate_grad(tape.pre[l - 1](r, i), spec.activation);
        }
      }
      gz = std::move(ga);
    }
  }
  return grad;
}

// Reverse pass from a gradient at the network outputs (post-head).
inline ParameterVector backward(const ForwardTape& tape, const Matrix& output_grad) {
  require(output_grad.rows == tape.output.rows && output_grad.cols == tape.output.cols,
          "backward: gradient shape does not match tape");
  if (tape.spec.head == OutputHead::kScalar) return backward_logits(tape, output_grad);

  // Softmax Jacobian: dL/dz_j = p_j * (g_j - sum_k g_k p_k), per row.
  Matrix gz(output_grad.rows, output_grad.cols);
  for (int r = 0; r < output_grad.rows; ++r) {
    double dot = 0.0;
    for (int c = 0; c < output_grad.cols; ++c) dot += output_grad(r, c) * tape.output(r, c);
    for (int c = 0; c < output_grad.cols; ++c)
      gz(r, c) = tape.output(r, c) * (output_grad(r, c) - dot);
  }
  return backward_logits(tape, gz);
}

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline void adam_step(ParameterVector& params, const ParameterVector& gradient,
                      AdamState& state, double step_size) {
  require(params.size() == gradient.size(), "adam_step: shape mismatch");
  require(step_size > 0.0, "adam_step: step size must be positive");
  for (double g : gradient)
    if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient");

  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  require(state.m.size() == params.size(), "adam_step: optimizer state shape mismatch");

  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * gradient[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * gradient[i] * gradient[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= step_size * mhat / (std::sqrt(vhat) + state.epsilon);
    if (!std::isfinite(params[i])) throw NumericError("adam_step: non-finite parameter");
  }
}

}  // namespace fairlab::nn
