#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "vtlab/nn.hpp"
#include "vtlab/rng.hpp"

using namespace vtlab;
using nn::Activation;

TEST_SUITE_BEGIN("nn");

namespace {

nn::Mlp identity_net(std::size_t dim) {
  nn::Mlp net;
  nn::Layer l;
  l.weights = Matrix(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) l.weights.at(i, i) = 1.0;
  l.bias.assign(dim, 0.0);
  l.act = Activation::identity;
  net.layers.push_back(l);
  return net;
}

Matrix one_row(std::initializer_list<double> vals) {
  Matrix m(1, vals.size());
  std::size_t j = 0;
  for (double v : vals) m.at(0, j++) = v;
  return m;
}

}  // namespace

TEST_CASE("forward: identity layer") {
  const nn::Mlp net = identity_net(2);
  const Matrix out = nn::forward(net, one_row({1.0, 2.0}));
  CHECK(out.at(0, 0) == 1.0);
  CHECK(out.at(0, 1) == 2.0);
}

TEST_CASE("forward: affine + relu by hand") {
  nn::Mlp net;
  nn::Layer l;
  l.weights = Matrix(2, 2);
  l.weights.at(0, 0) = 2.0;
  l.weights.at(1, 1) = 3.0;
  l.bias = {1.0, -1.0};
  l.act = Activation::relu;
  net.layers.push_back(l);
  nn::ForwardTrace trace;
  const Matrix out = nn::forward(net, one_row({1.0, -1.0}), &trace);
  CHECK(trace.pre[0].at(0, 0) == 3.0);
  CHECK(trace.pre[0].at(0, 1) == -4.0);
  CHECK(out.at(0, 0) == 3.0);
  CHECK(out.at(0, 1) == 0.0);
}

TEST_CASE("forward: stacked identities compose to identity") {
  nn::Mlp net = identity_net(3);
  net.layers.push_back(net.layers.front());
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix in(1, 3);
    for (double& v : in.data) v = rng.uniform(-10.0, 10.0);
    const Matrix out = nn::forward(net, in);
    CHECK(out.data == in.data);
  }
}

TEST_CASE("forward: dimension mismatch names the layer") {
  const nn::Mlp net = nn::make_mlp({4, 3, 2}, 1);
  CHECK_THROWS_WITH_AS(nn::forward(net, Matrix(1, 5)),
                       doctest::Contains("layer 0"), std::invalid_argument);
}

TEST_CASE("forward is pure: bit-identical repeat") {
  const nn::Mlp net = nn::make_mlp({3, 8, 2}, 99);
  Matrix in(2, 3);
  Rng rng(3);
  for (double& v : in.data) v = rng.uniform(-1.0, 1.0);
  const Matrix a = nn::forward(net, in);
  const Matrix b = nn::forward(net, in);
  CHECK(a.data == b.data);
}

TEST_CASE("init is fully determined by seed") {
  const nn::Mlp a = nn::make_mlp({5, 4, 3}, 42);
  const nn::Mlp b = nn::make_mlp({5, 4, 3}, 42);
  const nn::Mlp c = nn::make_mlp({5, 4, 3}, 43);
  for (std::size_t li = 0; li < a.layers.size(); ++li) {
    CHECK(a.layers[li].weights.data == b.layers[li].weights.data);
    CHECK(a.layers[li].bias == b.layers[li].bias);
  }
  CHECK(a.layers[0].weights.data != c.layers[0].weights.data);
  // init bound: |w| <= 1/sqrt(fan_in)
  for (double w : a.layers[0].weights.data)
    CHECK(std::abs(w) <= 1.0 / std::sqrt(5.0));
}

TEST_CASE("backward: identity network passes gradient through") {
  const nn::Mlp net = identity_net(2);
  nn::ForwardTrace trace;
  nn::forward(net, one_row({0.5, -0.25}), &trace);
  const Matrix g = one_row({1.0, 2.0});
  const auto back = nn::backward(net, trace, g);
  CHECK(back.input_grad.data == g.data);
  // dW = g^T x (outer product)
  CHECK(back.grads.weights[0].at(0, 0) == doctest::Approx(1.0 * 0.5));
  CHECK(back.grads.weights[0].at(1, 1) == doctest::Approx(2.0 * -0.25));
  CHECK(back.grads.bias[0][0] == 1.0);
  CHECK(back.grads.bias[0][1] == 2.0);
}

TEST_CASE("backward: relu subgradient at exactly zero is zero") {
  nn::Mlp net;
  nn::Layer l;
  l.weights = Matrix(1, 1);
  l.weights.at(0, 0) = 1.0;
  l.bias = {0.0};
  l.act = Activation::relu;
  net.layers.push_back(l);
  nn::ForwardTrace trace;
  nn::forward(net, one_row({0.0}), &trace);  // pre-activation exactly 0
  const auto back = nn::backward(net, trace, one_row({1.0}));
  CHECK(back.input_grad.at(0, 0) == 0.0);
}

// Finite-difference oracle: exact backprop against central differences on
// both parameters and inputs.
TEST_CASE("backward matches central finite differences") {
  Rng rng(2024);
  const double eps = 1e-5;
  double max_rel = 0.0;

  for (int trial = 0; trial < 8; ++trial) {
    nn::Mlp net = nn::make_mlp({4, 6, 5, 3}, 1000 + trial);
    Matrix in(2, 4);
    for (double& v : in.data) v = rng.uniform(-1.5, 1.5);
    // Scalar objective: weighted sum of outputs, fixed weights.
    Matrix wout(2, 3);
    for (double& v : wout.data) v = rng.uniform(-1.0, 1.0);
    auto objective = [&](const nn::Mlp& m, const Matrix& x) {
      const Matrix out = nn::forward(m, x);
      double s = 0.0;
      for (std::size_t i = 0; i < out.data.size(); ++i)
        s += out.data[i] * wout.data[i];
      return s;
    };

    nn::ForwardTrace trace;
    nn::forward(net, in, &trace);
    const auto back = nn::backward(net, trace, wout);

    auto check = [&](double analytic, double plus, double minus) {
      const double numeric = (plus - minus) / (2 * eps);
      const double rel = std::abs(analytic - numeric) /
                         std::max(1.0, std::abs(numeric));
      max_rel = std::max(max_rel, rel);
    };

    for (std::size_t li = 0; li < net.layers.size(); ++li) {
      for (std::size_t k = 0; k < net.layers[li].weights.data.size(); k += 7) {
        nn::Mlp p = net, m = net;
        p.layers[li].weights.data[k] += eps;
        m.layers[li].weights.data[k] -= eps;
        check(back.grads.weights[li].data[k], objective(p, in),
              objective(m, in));
      }
      for (std::size_t k = 0; k < net.layers[li].bias.size(); ++k) {
        nn::Mlp p = net, m = net;
        p.layers[li].bias[k] += eps;
        m.layers[li].bias[k] -= eps;
        check(back.grads.bias[li][k], objective(p, in), objective(m, in));
      }
    }
    for (std::size_t k = 0; k < in.data.size(); ++k) {
      Matrix p = in, m = in;
      p.data[k] += eps;
      m.data[k] -= eps;
      check(back.input_grad.data[k], objective(net, p), objective(net, m));
    }
  }
  CHECK(max_rel < 1e-4);
}

TEST_CASE("sgd_update") {
  nn::Mlp net = identity_net(1);
  net.layers[0].weights.at(0, 0) = 1.0;
  nn::Gradients g = nn::zero_gradients(net);
  g.weights[0].at(0, 0) = 0.5;

  SUBCASE("lr=0 leaves params unchanged") {
    nn::sgd_update(net, g, 0.0);
    CHECK(net.layers[0].weights.at(0, 0) == 1.0);
  }
  SUBCASE("p=1, g=0.5, lr=0.1 -> 0.95") {
    nn::sgd_update(net, g, 0.1);
    CHECK(net.layers[0].weights.at(0, 0) == doctest::Approx(0.95));
  }
  SUBCASE("two updates equal one update at summed deltas") {
    nn::Mlp twice = net;
    nn::sgd_update(twice, g, 0.1);
    nn::sgd_update(twice, g, 0.1);
    nn::Mlp once = net;
    nn::sgd_update(once, g, 0.2);
    CHECK(twice.layers[0].weights.at(0, 0) ==
          doctest::Approx(once.layers[0].weights.at(0, 0)));
  }
  SUBCASE("non-finite gradient rejected") {
    g.weights[0].at(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS(nn::sgd_update(net, g, 0.1));
  }
}

TEST_CASE("softmax cross entropy") {
  SUBCASE("uniform logits") {
    const auto lg = nn::softmax_cross_entropy(std::vector<double>{0.0, 0.0}, 0);
    CHECK(lg.loss == doctest::Approx(std::log(2.0)));
    CHECK(lg.grad[0] == doctest::Approx(-0.5));
    CHECK(lg.grad[1] == doctest::Approx(0.5));
  }
  SUBCASE("huge logit gap stays finite") {
    const auto lg =
        nn::softmax_cross_entropy(std::vector<double>{1000.0, 0.0}, 0);
    CHECK(std::isfinite(lg.loss));
    CHECK(lg.loss == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("grad components sum to zero") {
    Rng rng(5);
    for (int t = 0; t < 20; ++t) {
      std::vector<double> logits(4);
      for (double& v : logits) v = rng.uniform(-5.0, 5.0);
      const auto lg = nn::softmax_cross_entropy(logits, t % 4);
      double s = 0.0;
      for (double g : lg.grad) s += g;
      CHECK(s == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
    }
  }
  SUBCASE("C < 2 rejected") {
    CHECK_THROWS(nn::softmax_cross_entropy(std::vector<double>{1.0}, 0));
  }
  SUBCASE("label out of range rejected") {
    CHECK_THROWS(nn::softmax_cross_entropy(std::vector<double>{1.0, 2.0}, 2));
  }
}

TEST_CASE("mse loss") {
  const std::vector<double> x{1.0, 0.0};
  SUBCASE("perfect reconstruction") {
    CHECK(nn::mse_loss(x, x).loss == 0.0);
  }
  SUBCASE("unit error") {
    const auto lg = nn::mse_loss(x, std::vector<double>{0.0, 0.0});
    CHECK(lg.loss == doctest::Approx(1.0));
    CHECK(lg.grad[0] == doctest::Approx(-2.0));
    CHECK(lg.grad[1] == doctest::Approx(0.0));
  }
  SUBCASE("non-negative") {
    Rng rng(11);
    for (int t = 0; t < 20; ++t) {
      std::vector<double> a(3), b(3);
      for (double& v : a) v = rng.uniform(-4.0, 4.0);
      for (double& v : b) v = rng.uniform(-4.0, 4.0);
      CHECK(nn::mse_loss(a, b).loss >= 0.0);
    }
  }
  SUBCASE("length mismatch rejected") {
    CHECK_THROWS(nn::mse_loss(x, std::vector<double>{1.0}));
  }
}

TEST_CASE("checkpoint roundtrip") {
  const nn::Mlp net = nn::make_mlp(
      {3, 5, 2}, {Activation::relu, Activation::identity}, 77);
  std::stringstream buf;
  nn::save_mlp(buf, net);
  const nn::Mlp loaded = nn::load_mlp(buf);
  REQUIRE(loaded.layers.size() == net.layers.size());
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    CHECK(loaded.layers[li].weights.data == net.layers[li].weights.data);
    CHECK(loaded.layers[li].bias == net.layers[li].bias);
    CHECK(loaded.layers[li].act == net.layers[li].act);
  }
}

TEST_CASE("checkpoint: bad magic rejected") {
  std::stringstream buf;
  buf << "XXXXgarbage-not-a-checkpoint";
  CHECK_THROWS_WITH_AS(nn::load_mlp(buf), doctest::Contains("magic"),
                       std::runtime_error);
}

TEST_SUITE_END();
