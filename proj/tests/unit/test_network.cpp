#include <bit>
#include <cmath>

#include "doctest.h"
#include "dnr/error.hpp"
#include "dnr/losses.hpp"
#include "dnr/network.hpp"
#include "test_util.hpp"

using namespace dnr;
using dnr::testing::fd_gradient;
using dnr::testing::random_matrix;
using dnr::testing::random_network;
using dnr::testing::rel_norm_err;

namespace {

// Straight per-sample evaluation, written independently of forward().
std::vector<double> naive_eval(const Network& net, const std::vector<double>& x) {
  std::vector<double> a = x;
  for (const auto& layer : net.params.hidden) {
    std::vector<double> next(layer.weights.rows());
    for (std::size_t i = 0; i < next.size(); ++i) {
      double z = layer.biases[i];
      for (std::size_t j = 0; j < a.size(); ++j) z += layer.weights(i, j) * a[j];
      next[i] = net.spec.activation == Activation::tanh ? std::tanh(z) : std::max(0.0, z);
    }
    a = next;
  }
  std::vector<double> y(net.params.output.rows());
  for (std::size_t o = 0; o < y.size(); ++o)
    for (std::size_t j = 0; j < a.size(); ++j) y[o] += net.params.output(o, j) * a[j];
  return y;
}

bool bit_identical(const Network& a, const Network& b) {
  const auto fa = a.params.flatten();
  const auto fb = b.params.flatten();
  if (fa.size() != fb.size() || !(a.spec == b.spec)) return false;
  for (std::size_t i = 0; i < fa.size(); ++i)
    if (std::bit_cast<std::uint64_t>(fa[i]) != std::bit_cast<std::uint64_t>(fb[i])) return false;
  return true;
}

}  // namespace

TEST_CASE("param_count reproduces the published parameter counts") {
  CHECK(param_count({2, 1, 4, 3, Activation::tanh}) == 56);
  CHECK(param_count({2, 1, 6, 3, Activation::tanh}) == 108);
  CHECK(param_count({2, 1, 10, 3, Activation::tanh}) == 260);
  CHECK(param_count({2, 1, 20, 3, Activation::tanh}) == 920);
  CHECK(param_count({3, 2, 16, 3, Activation::tanh}) == 640);
}

TEST_CASE("param_count equals stored scalars over a randomized sweep") {
  SeededRng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    NetworkSpec spec{1 + rng.index(5), 1 + rng.index(5), 1 + rng.index(32), 1 + rng.index(6),
                     Activation::tanh};
    SeededRng init(static_cast<std::uint64_t>(trial));
    const Network net = init_network(spec, init);
    REQUIRE(net.params.count() == param_count(spec));
    REQUIRE(net.params.flatten().size() == param_count(spec));
  }
}

TEST_CASE("init_network is deterministic and shaped by its NetworkSpec") {
  const NetworkSpec one{1, 1, 1, 1, Activation::tanh};
  SeededRng a(7);
  SeededRng b(7);
  CHECK(bit_identical(init_network(one, a), init_network(one, b)));

  SeededRng rng(3);
  const Network net = init_network({2, 1, 4, 3, Activation::tanh}, rng);
  REQUIRE(net.params.hidden.size() == 3);
  CHECK(net.params.hidden[0].weights.shape() == "4x2");
  CHECK(net.params.hidden[1].weights.shape() == "4x4");
  CHECK(net.params.hidden[2].weights.shape() == "4x4");
  CHECK(net.params.output.shape() == "1x4");
  for (const auto& layer : net.params.hidden)
    for (double bias : layer.biases) CHECK(bias == 0.0);
}

TEST_CASE("init_network weights are centred and bounded") {
  const NetworkSpec spec{2, 1, 8, 2, Activation::tanh};
  double sum = 0.0;
  std::size_t count = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    SeededRng rng(seed);
    const Network net = init_network(spec, rng);
    for (const auto& layer : net.params.hidden) {
      const double limit = std::sqrt(6.0 / static_cast<double>(layer.weights.rows() + layer.weights.cols()));
      for (double v : layer.weights.values()) {
        REQUIRE(std::abs(v) <= limit);
        sum += v;
        ++count;
      }
    }
  }
  CHECK(std::abs(sum / static_cast<double>(count)) <= 0.02);
}

TEST_CASE("forward closed forms") {
  const Network zero = zero_network({3, 2, 5, 2, Activation::tanh});
  SeededRng rng(2);
  const Matrix x = random_matrix(7, 3, rng);
  const Matrix zero_out = forward(zero, x).outputs;
  for (double v : zero_out.values()) CHECK(v == 0.0);

  Network single = zero_network({1, 1, 1, 1, Activation::tanh});
  single.params.hidden[0].weights(0, 0) = 1.0;
  single.params.output(0, 0) = 1.0;
  const auto out = forward(single, Matrix::from_rows({{0.5}})).outputs;
  CHECK(out(0, 0) == doctest::Approx(0.46211715726000974).epsilon(1e-14));
}

TEST_CASE("forward matches a naive per-sample evaluator exactly") {
  SeededRng rng(4);
  for (Activation act : {Activation::tanh, Activation::relu}) {
    const Network net = random_network({3, 2, 6, 3, act}, rng);
    const Matrix x = random_matrix(20, 3, rng);
    const auto fwd = forward(net, x);
    const Matrix again = predict(net, x);
    for (std::size_t s = 0; s < x.rows(); ++s) {
      const auto row = x.row(s);
      const auto want = naive_eval(net, std::vector<double>(row.begin(), row.end()));
      for (std::size_t o = 0; o < 2; ++o) {
        CHECK(fwd.outputs(s, o) == want[o]);
        CHECK(again(s, o) == want[o]);
      }
    }
    REQUIRE(fwd.trace.post.size() == 3);
    CHECK(fwd.trace.post[0] == layer1_features(net, x));
  }
}

TEST_CASE("forward rejects wrong input width") {
  const Network net = zero_network({2, 1, 3, 1, Activation::tanh});
  CHECK_THROWS_AS(forward(net, Matrix(4, 3)), Error);
}

TEST_CASE("backprop closed forms") {
  SeededRng rng(5);
  const Network net = random_network({2, 1, 4, 2, Activation::tanh}, rng);
  const Matrix x = random_matrix(6, 2, rng);
  const auto fwd = forward(net, x);
  const Parameters g = backprop(net, fwd.trace, Matrix(6, 1));
  for (double v : g.flatten()) CHECK(v == 0.0);

  // relu neuron in its linear regime: y = v * (w x), loss (y - t)^2
  Network lin = zero_network({1, 1, 1, 1, Activation::relu});
  lin.params.hidden[0].weights(0, 0) = 1.0;
  lin.params.output(0, 0) = 0.8;
  const double xv = 0.5;
  const double target = 1.3;
  const auto f = forward(lin, Matrix::from_rows({{xv}}));
  const double yhat = f.outputs(0, 0);
  const Parameters lg = backprop(lin, f.trace, Matrix::from_rows({{2 * (yhat - target)}}));
  CHECK(lg.output(0, 0) == doctest::Approx(2 * (yhat - target) * xv));
}

TEST_CASE("backprop agrees with finite differences on random tanh nets") {
  SeededRng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const NetworkSpec spec{1 + rng.index(3), 1 + rng.index(2), 1 + rng.index(8), 1 + rng.index(3),
                           Activation::tanh};
    const Network net = random_network(spec, rng);
    const Matrix x = random_matrix(1 + rng.index(10), spec.input_dim, rng);
    const Matrix y = random_matrix(x.rows(), spec.output_dim, rng);
    auto loss = [&](const Network& n) { return mse(predict(n, x), y); };
    const auto fwd = forward(net, x);
    Matrix og(x.rows(), spec.output_dim);
    for (std::size_t i = 0; i < og.size(); ++i)
      og.values()[i] = 2 * (fwd.outputs.values()[i] - y.values()[i]) / static_cast<double>(og.size());
    const auto analytic = backprop(net, fwd.trace, og).flatten();
    REQUIRE(rel_norm_err(analytic, fd_gradient(net, loss)) <= 1e-5);
  }
}

TEST_CASE("backprop agrees with finite differences on relu nets away from kinks") {
  SeededRng rng(7);
  int checked = 0;
  for (int trial = 0; trial < 400 && checked < 100; ++trial) {
    const NetworkSpec spec{1 + rng.index(3), 1, 2 + rng.index(6), 1 + rng.index(3), Activation::relu};
    const Network net = random_network(spec, rng);
    const Matrix x = random_matrix(1 + rng.index(8), spec.input_dim, rng);
    const auto fwd = forward(net, x);
    bool near_kink = false;
    for (const auto& pre : fwd.trace.pre)
      for (double z : pre.values()) near_kink |= std::abs(z) <= 1e-3;
    if (near_kink) continue;
    ++checked;
    const Matrix y = random_matrix(x.rows(), 1, rng);
    auto loss = [&](const Network& n) { return mse(predict(n, x), y); };
    Matrix og(x.rows(), 1);
    for (std::size_t i = 0; i < og.size(); ++i)
      og.values()[i] = 2 * (fwd.outputs.values()[i] - y.values()[i]) / static_cast<double>(og.size());
    const auto analytic = backprop(net, fwd.trace, og).flatten();
    const auto numeric = fd_gradient(net, loss, 1e-7);
    double norm = 0;
    for (double v : numeric) norm += v * v;
    if (norm == 0.0) continue;
    REQUIRE(rel_norm_err(analytic, numeric) <= 1e-4);
  }
  CHECK(checked >= 100);
}

TEST_CASE("backprop rejects stale or mismatched traces") {
  SeededRng rng(8);
  Network net = random_network({1, 1, 3, 2, Activation::tanh}, rng);
  const Matrix x = random_matrix(4, 1, rng);
  const auto fwd = forward(net, x);
  net.params.output(0, 0) += 0.1;
  CHECK_THROWS_AS(backprop(net, fwd.trace, Matrix(4, 1)), Error);
  net.params.output(0, 0) -= 0.1;
  CHECK_THROWS_AS(backprop(net, fwd.trace, Matrix(3, 1)), Error);
}

TEST_CASE("forward_jets order 0 equals forward and zero nets have zero derivatives") {
  SeededRng rng(9);
  const Network net = random_network({2, 2, 5, 3, Activation::tanh}, rng);
  const std::vector<double> p{0.3, -0.4};
  const auto jets = forward_jets(net, p, 1, 0);
  const auto out = forward(net, Matrix(1, 2, p)).outputs;
  CHECK(jets[0][0] == out(0, 0));
  CHECK(jets[1][0] == out(0, 1));

  const Network zero = zero_network({2, 1, 4, 2, Activation::tanh});
  const auto zj = forward_jets(zero, p, 0, 4);
  for (int k = 0; k <= 4; ++k) CHECK(zj[0][k] == 0.0);
}

TEST_CASE("forward_jets rejects relu above order 1 and bad axes") {
  SeededRng rng(10);
  const Network relu = random_network({2, 1, 3, 1, Activation::relu}, rng);
  const std::vector<double> p{0.1, 0.2};
  CHECK_NOTHROW(forward_jets(relu, p, 0, 1));
  CHECK_THROWS_AS(forward_jets(relu, p, 0, 2), Error);
  CHECK_THROWS_AS(forward_jets(relu, p, 2, 1), Error);
  const Network tanh_net = random_network({2, 1, 3, 1, Activation::tanh}, rng);
  CHECK_THROWS_AS(forward_jets(tanh_net, p, 0, 5), Error);
}

TEST_CASE("forward_jets derivatives agree with finite differences of forward") {
  SeededRng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const NetworkSpec spec{1 + rng.index(3), 1, 1 + rng.index(8), 1 + rng.index(3), Activation::tanh};
    const Network net = random_network(spec, rng);
    std::vector<double> p(spec.input_dim);
    for (double& v : p) v = rng.uniform(-1, 1);
    const std::size_t axis = rng.index(spec.input_dim);
    const auto jets = forward_jets(net, p, axis, 4);
    auto f = [&](double shift) {
      auto q = p;
      q[axis] += shift;
      return predict(net, Matrix(1, q.size(), q))(0, 0);
    };
    const double h = 1e-3;
    const double d1 = (f(h) - f(-h)) / (2 * h);
    const double d2 = (f(h) - 2 * f(0) + f(-h)) / (h * h);
    const double H = 1e-2;
    const double d3 = (f(2 * H) - 2 * f(H) + 2 * f(-H) - f(-2 * H)) / (2 * H * H * H);
    const double d4 = (f(2 * H) - 4 * f(H) + 6 * f(0) - 4 * f(-H) + f(-2 * H)) / (H * H * H * H);
    auto close = [](double got, double want, double tol) {
      return std::abs(got - want) <= tol * std::max(1.0, std::abs(want));
    };
    CHECK(close(jets[0].derivative(1), d1, 1e-4));
    CHECK(close(jets[0].derivative(2), d2, 1e-4));
    CHECK(close(jets[0].derivative(3), d3, 1e-2));
    CHECK(close(jets[0].derivative(4), d4, 1e-2));
  }
}

TEST_CASE("forward_jets first order equals reverse-mode input gradient") {
  SeededRng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const NetworkSpec spec{1 + rng.index(4), 1 + rng.index(2), 1 + rng.index(8), 1 + rng.index(4),
                           Activation::tanh};
    const Network net = random_network(spec, rng);
    std::vector<double> p(spec.input_dim);
    for (double& v : p) v = rng.uniform(-1, 1);
    for (std::size_t o = 0; o < spec.output_dim; ++o) {
      const auto grad = input_gradient(net, p, o);
      for (std::size_t axis = 0; axis < spec.input_dim; ++axis) {
        const double jet = forward_jets(net, p, axis, 1)[o].derivative(1);
        CHECK(std::abs(jet - grad[axis]) <= 1e-10 * std::max(1e-3, std::abs(grad[axis])));
      }
    }
  }
}

TEST_CASE("backprop_jets agrees with finite differences of jet coefficients") {
  SeededRng rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const NetworkSpec spec{1 + rng.index(2), 1 + rng.index(2), 1 + rng.index(6), 1 + rng.index(3),
                           Activation::tanh};
    const Network net = random_network(spec, rng);
    const Matrix x = random_matrix(1 + rng.index(5), spec.input_dim, rng);
    const std::size_t axis = rng.index(spec.input_dim);
    const int order = static_cast<int>(rng.index(5));
    std::vector<Matrix> weights;
    for (int c = 0; c <= order; ++c) weights.push_back(random_matrix(x.rows(), spec.output_dim, rng));
    auto functional = [&](const Network& n) {
      const auto tr = forward_jets_batch(n, x, axis, order);
      double acc = 0.0;
      for (int c = 0; c <= order; ++c) {
        const auto& coeff = tr.outputs[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i < coeff.size(); ++i)
          acc += weights[static_cast<std::size_t>(c)].values()[i] * coeff.values()[i];
      }
      return acc;
    };
    const auto tr = forward_jets_batch(net, x, axis, order);
    const auto analytic = backprop_jets(net, tr, weights).flatten();
    REQUIRE(rel_norm_err(analytic, fd_gradient(net, functional)) <= 1e-6);
  }
}

TEST_CASE("relu jets of order 1 match forward differences away from kinks") {
  SeededRng rng(14);
  const Network net = random_network({2, 1, 5, 2, Activation::relu}, rng);
  const std::vector<double> p{0.37, -0.21};
  const auto jets = forward_jets(net, p, 0, 1);
  const auto grad = input_gradient(net, p, 0);
  CHECK(jets[0].derivative(1) == doctest::Approx(grad[0]).epsilon(1e-12));
}
