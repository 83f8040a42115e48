#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <fairlab/nn.hpp>

#include "oracles.hpp"

using namespace fairlab;
using nn::Activation;
using nn::Matrix;
using nn::NetworkSpec;
using nn::OutputHead;
using nn::ParameterVector;

namespace {

Matrix random_inputs(int rows, int cols, Rng& rng) {
  std::uniform_real_distribution<double> dist(-1.5, 1.5);
  Matrix m(rows, cols);
  for (double& v : m.data) v = dist(rng);
  return m;
}

// Weighted sums of the outputs give a scalar loss whose output gradient is
// the (constant) weight matrix, so the chain through backward() stays honest.
struct LinearLoss {
  Matrix weights;

  double operator()(const Matrix& out) const {
    double total = 0.0;
    for (size_t i = 0; i < out.data.size(); ++i) total += weights.data[i] * out.data[i];
    return total;
  }
};

}  // namespace

TEST_CASE("zero-weight softmax network outputs a fair coin") {
  NetworkSpec spec{{3, 4, 2}, Activation::kTanh, OutputHead::kSoftmax};
  ParameterVector params(spec.parameter_count(), 0.0);
  const auto [out, tape] = nn::forward(spec, params, Matrix::from_row({0.7, -2.0, 5.0}));
  REQUIRE(out.rows == 1);
  REQUIRE(out.cols == 2);
  REQUIRE(out(0, 0) == 0.5);
  REQUIRE(out(0, 1) == 0.5);
}

TEST_CASE("identity scalar layer passes the input through") {
  NetworkSpec spec{{1, 1}, Activation::kTanh, OutputHead::kScalar};
  ParameterVector params{1.0, 0.0};  // single weight, zero bias
  for (double x : {-3.0, -0.25, 0.0, 1.75}) {
    const auto [out, tape] = nn::forward(spec, params, Matrix::from_row({x}));
    REQUIRE(out(0, 0) == x);
  }
}

TEST_CASE("softmax rows are normalized across random networks") {
  NetworkSpec spec{{4, 8, 3}, Activation::kTanh, OutputHead::kSoftmax};
  for (int seed = 1; seed <= 100; ++seed) {
    Rng rng(static_cast<uint64_t>(seed));
    const auto params = nn::init_parameters(spec, rng);
    const auto [out, tape] = nn::forward(spec, params, random_inputs(5, 4, rng));
    for (int r = 0; r < out.rows; ++r) {
      double sum = 0.0;
      for (int c = 0; c < out.cols; ++c) {
        REQUIRE(out(r, c) > 0.0);
        sum += out(r, c);
      }
      REQUIRE(std::abs(sum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("relu head also normalizes and differentiates") {
  NetworkSpec spec{{3, 6, 4}, Activation::kRelu, OutputHead::kSoftmax};
  Rng rng(99);
  const auto params = nn::init_parameters(spec, rng);
  const auto inputs = random_inputs(3, 3, rng);
  const auto [out, tape] = nn::forward(spec, params, inputs);
  for (int r = 0; r < out.rows; ++r) {
    double sum = 0.0;
    for (int c = 0; c < out.cols; ++c) sum += out(r, c);
    REQUIRE(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("zero output gradient yields zero parameter gradient") {
  NetworkSpec spec{{3, 5, 2}, Activation::kTanh, OutputHead::kSoftmax};
  Rng rng(7);
  const auto params = nn::init_parameters(spec, rng);
  const auto [out, tape] = nn::forward(spec, params, random_inputs(4, 3, rng));
  Matrix zero_grad(out.rows, out.cols);
  const auto grad = nn::backward(tape, zero_grad);
  for (double g : grad) REQUIRE(g == 0.0);
}

TEST_CASE("scalar head with loss equal to the output puts unit gradient on the last bias") {
  NetworkSpec spec{{3, 5, 1}, Activation::kTanh, OutputHead::kScalar};
  Rng rng(11);
  const auto params = nn::init_parameters(spec, rng);
  const auto [out, tape] = nn::forward(spec, params, random_inputs(1, 3, rng));
  Matrix ones(1, 1);
  ones(0, 0) = 1.0;
  const auto grad = nn::backward(tape, ones);
  // Last layer holds 5 weights then 1 bias; the bias gradient is exactly 1.
  REQUIRE(grad.back() == 1.0);
}

TEST_CASE("backward matches central finite differences on a 3-5-2 softmax net") {
  NetworkSpec spec{{3, 5, 2}, Activation::kTanh, OutputHead::kSoftmax};
  Rng rng(2024);
  const auto params = nn::init_parameters(spec, rng);
  const auto inputs = random_inputs(4, 3, rng);

  LinearLoss loss{random_inputs(4, 2, rng)};
  const auto [out, tape] = nn::forward(spec, params, inputs);
  const auto grad = nn::backward(tape, loss.weights);
  const auto fd = oracles::fd_gradient(spec, params, inputs, std::cref(loss));
  REQUIRE(oracles::max_relative_error(grad, fd) < 1e-4);
}

TEST_CASE("backward matches finite differences across heads and activations") {
  struct Case {
    NetworkSpec spec;
    int batch;
  };
  const Case cases[] = {
      {{{2, 4, 3}, Activation::kTanh, OutputHead::kSoftmax}, 3},
      {{{2, 4, 3}, Activation::kRelu, OutputHead::kSoftmax}, 3},
      {{{3, 6, 1}, Activation::kTanh, OutputHead::kScalar}, 5},
      {{{3, 6, 1}, Activation::kRelu, OutputHead::kScalar}, 5},
      {{{4, 4, 4, 2}, Activation::kTanh, OutputHead::kSoftmax}, 2},
      {{{1, 1}, Activation::kTanh, OutputHead::kScalar}, 4},
  };
  int seed = 500;
  for (const auto& c : cases) {
    REQUIRE(c.spec.parameter_count() <= 64);
    Rng rng(static_cast<uint64_t>(seed++));
    const auto params = nn::init_parameters(c.spec, rng);
    const auto inputs = random_inputs(c.batch, c.spec.input_size(), rng);
    LinearLoss loss{random_inputs(c.batch, c.spec.output_size(), rng)};
    const auto [out, tape] = nn::forward(c.spec, params, inputs);
    const auto grad = nn::backward(tape, loss.weights);
    const auto fd = oracles::fd_gradient(c.spec, params, inputs, std::cref(loss));
    REQUIRE(oracles::max_relative_error(grad, fd) < 1e-4);
  }
}

TEST_CASE("forward and init are deterministic given the seed") {
  NetworkSpec spec{{4, 8, 3}, Activation::kTanh, OutputHead::kSoftmax};
  Rng a(42), b(42);
  const auto pa = nn::init_parameters(spec, a);
  const auto pb = nn::init_parameters(spec, b);
  REQUIRE(pa == pb);
  Matrix x = random_inputs(2, 4, a);
  const auto oa = nn::forward(spec, pa, x).first;
  const auto ob = nn::forward(spec, pb, x).first;
  REQUIRE(oa.data == ob.data);
}

TEST_CASE("glorot init keeps biases zero and weights inside the bound") {
  NetworkSpec spec{{6, 10, 2}, Activation::kTanh, OutputHead::kSoftmax};
  Rng rng(5);
  const auto params = nn::init_parameters(spec, rng);
  for (int l = 0; l < spec.layer_count(); ++l) {
    const int in = spec.layer_sizes[l], out = spec.layer_sizes[l + 1];
    const int off = spec.layer_offset(l);
    const double bound = std::sqrt(6.0 / (in + out));
    for (int i = 0; i < in * out; ++i) REQUIRE(std::abs(params[off + i]) <= bound);
    for (int i = 0; i < out; ++i) REQUIRE(params[off + in * out + i] == 0.0);
  }
}

TEST_CASE("forward rejects malformed calls") {
  NetworkSpec spec{{3, 5, 2}, Activation::kTanh, OutputHead::kSoftmax};
  Rng rng(1);
  const auto params = nn::init_parameters(spec, rng);
  REQUIRE_THROWS_AS(nn::forward(spec, params, Matrix(1, 4)), ContractError);
  REQUIRE_THROWS_AS(nn::forward(spec, ParameterVector(3, 0.0), Matrix(1, 3)), ContractError);
  REQUIRE_THROWS_AS(nn::forward(spec, params, Matrix(0, 3)), ContractError);

  NetworkSpec bad_softmax{{3, 1}, Activation::kTanh, OutputHead::kSoftmax};
  REQUIRE_THROWS_AS(bad_softmax.validate(), ContractError);
  NetworkSpec bad_scalar{{3, 2}, Activation::kTanh, OutputHead::kScalar};
  REQUIRE_THROWS_AS(bad_scalar.validate(), ContractError);
  NetworkSpec too_short{{3}, Activation::kTanh, OutputHead::kScalar};
  REQUIRE_THROWS_AS(too_short.validate(), ContractError);
}

TEST_CASE("backward rejects mismatched gradients") {
  NetworkSpec spec{{3, 5, 2}, Activation::kTanh, OutputHead::kSoftmax};
  Rng rng(1);
  const auto params = nn::init_parameters(spec, rng);
  const auto [out, tape] = nn::forward(spec, params, Matrix(2, 3));
  REQUIRE_THROWS_AS(nn::backward(tape, Matrix(2, 3)), ContractError);
  REQUIRE_THROWS_AS(nn::backward(tape, Matrix(1, 2)), ContractError);
}

TEST_CASE("adam leaves parameters unchanged on a zero gradient") {
  ParameterVector params{0.3, -0.7, 1.1};
  const ParameterVector before = params;
  nn::AdamState state;
  nn::adam_step(params, ParameterVector(3, 0.0), state, 0.01);
  REQUIRE(params == before);
}

TEST_CASE("adam decreases the magnitude of a scalar quadratic") {
  ParameterVector w{1.0};
  nn::AdamState state;
  nn::adam_step(w, ParameterVector{2.0 * w[0]}, state, 0.05);
  REQUIRE(std::abs(w[0]) < 1.0);
}

TEST_CASE("adam drives a two-dimensional quadratic near zero in 200 steps") {
  ParameterVector w{1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)};
  nn::AdamState state;
  for (int i = 0; i < 200; ++i) {
    const ParameterVector grad{2.0 * w[0], 6.0 * w[1]};
    nn::adam_step(w, grad, state, 0.05);
  }
  REQUIRE(std::hypot(w[0], w[1]) < 1e-2);
}

TEST_CASE("adam rejects shape mismatches and non-finite gradients") {
  ParameterVector params{1.0, 2.0};
  nn::AdamState state;
  REQUIRE_THROWS_AS(nn::adam_step(params, ParameterVector{1.0}, state, 0.01), ContractError);
  REQUIRE_THROWS_AS(
      nn::adam_step(params, ParameterVector{1.0, std::numeric_limits<double>::infinity()}, state,
                    0.01),
      NumericError);
  REQUIRE_THROWS_AS(nn::adam_step(params, ParameterVector{1.0, 1.0}, state, 0.0), ContractError);
}
