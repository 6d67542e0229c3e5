#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "meshgrow/adam.hpp"
#include "meshgrow/mesh.hpp"
#include "meshgrow/ops.hpp"
#include "meshgrow/rng.hpp"
#include "meshgrow/tensor.hpp"

using namespace meshgrow;
using ad::Tensor;

namespace {

Tensor<double> random_tensor(ad::Shape shape, Rng& rng, bool requires_grad,
                             double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(static_cast<size_t>(ad::shape_numel(shape)));
  for (auto& x : v) x = rng.uniform(lo, hi);
  auto t = Tensor<double>::constant(std::move(shape), std::move(v));
  t.set_requires_grad(requires_grad);
  return t;
}

Tensor<double> sum_all(const Tensor<double>& x) {
  return ad::scale(ad::mean_all(x), static_cast<double>(x.numel()));
}

}  // namespace

TEST_CASE("matmul identity and backward of sum") {
  auto eye = Tensor<double>::constant({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Rng rng(1);
  auto x = random_tensor({3, 4}, rng, true);
  auto y = ad::matmul(eye, x);
  CHECK(y.values() == x.values());

  ad::backward(sum_all(y));
  for (double g : x.grad()) CHECK(g == doctest::Approx(1.0));
}

TEST_CASE("l1_loss of identical tensors is zero with zero gradient") {
  Rng rng(2);
  auto x = random_tensor({5, 3}, rng, true);
  auto loss = ad::l1_loss(x, x.detached());
  CHECK(loss.item() == 0.0);
  ad::backward(loss);
  for (double g : x.grad()) CHECK(g == 0.0);  // tie subgradient is 0
}

TEST_CASE("backward: loss = sum(x) gives all-ones gradient") {
  Rng rng(3);
  auto x = random_tensor({7}, rng, true);
  ad::backward(sum_all(x));
  for (double g : x.grad()) CHECK(g == doctest::Approx(1.0));
}

TEST_CASE("backward: mse of a linear layer matches the analytic form") {
  Rng rng(4);
  auto w = random_tensor({3, 2}, rng, true);
  auto x = random_tensor({4, 3}, rng, false);
  auto y = random_tensor({4, 2}, rng, false);
  auto loss = ad::mse_loss(ad::matmul(x, w), y);
  ad::backward(loss);

  // d/dW mean((xW - y)^2) = 2/n * x^T (xW - y)
  const int n = 8;
  std::vector<double> residual(8);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 2; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) {
        acc += x.values()[i * 3 + k] * w.values()[k * 2 + j];
      }
      residual[i * 2 + j] = acc - y.values()[i * 2 + j];
    }
  }
  for (int k = 0; k < 3; ++k) {
    for (int j = 0; j < 2; ++j) {
      double expect = 0.0;
      for (int i = 0; i < 4; ++i) {
        expect += x.values()[i * 3 + k] * residual[i * 2 + j];
      }
      expect *= 2.0 / n;
      const double got = w.grad()[k * 2 + j];
      CHECK(std::abs(got - expect) <=
            1e-10 * std::max(1.0, std::abs(expect)));
    }
  }
}

TEST_CASE("backward twice on the same loss is an error") {
  Rng rng(5);
  auto x = random_tensor({3}, rng, true);
  auto loss = ad::mean_all(x);
  ad::backward(loss);
  CHECK_THROWS_AS(ad::backward(loss), ContractError);
}

TEST_CASE("backward requires a scalar loss") {
  Rng rng(6);
  auto x = random_tensor({3, 2}, rng, true);
  auto y = ad::scale(x, 2.0);
  CHECK_THROWS_AS(ad::backward(y), ContractError);
}

TEST_CASE("broadcast add of a bias vector over rows") {
  auto x = Tensor<double>::constant({2, 3}, {1, 2, 3, 4, 5, 6});
  x.set_requires_grad(true);
  auto b = Tensor<double>::constant({3}, {10, 20, 30});
  b.set_requires_grad(true);
  auto y = ad::add(x, b);
  CHECK(y.values() == std::vector<double>{11, 22, 33, 14, 25, 36});
  ad::backward(sum_all(y));
  for (double g : b.grad()) CHECK(g == doctest::Approx(2.0));
  for (double g : x.grad()) CHECK(g == doctest::Approx(1.0));
}

TEST_CASE("shape mismatch errors name the op") {
  auto a = Tensor<double>::constant({2, 3}, std::vector<double>(6, 1.0));
  auto b = Tensor<double>::constant({2, 2}, std::vector<double>(4, 1.0));
  CHECK_THROWS_WITH_AS(ad::matmul(a, b), doctest::Contains("matmul"),
                       ContractError);
  CHECK_THROWS_WITH_AS(ad::add(a, b), doctest::Contains("add"), ContractError);
}

TEST_CASE("min_reduce_last resolves ties to the lowest index") {
  auto x = Tensor<double>::constant({1, 4}, {3.0, 1.0, 1.0, 2.0});
  x.set_requires_grad(true);
  auto m = ad::min_reduce_last(x);
  CHECK(m.values()[0] == 1.0);
  ad::backward(sum_all(m));
  CHECK(x.grad() == std::vector<double>{0.0, 1.0, 0.0, 0.0});
}

TEST_CASE("sparse_matmul equals dense matmul on random graphs") {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(2, 50));
    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (rng.uniform() < 0.2) edges.emplace_back(i, j);
      }
    }
    const auto p = propagation_matrix(edges, n);
    auto x = random_tensor({n, 4}, rng, false);

    auto sparse = ad::sparse_matmul(p, x);
    std::vector<double> dense_vals = p.dense();
    std::vector<double> expect(static_cast<size_t>(n) * 4, 0.0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        for (int c = 0; c < 4; ++c) {
          expect[i * 4 + c] += dense_vals[i * n + j] * x.values()[j * 4 + c];
        }
      }
    }
    for (size_t i = 0; i < expect.size(); ++i) {
      CHECK(std::abs(sparse.values()[i] - expect[i]) < 1e-12);
    }
  }
}

TEST_CASE("forward determinism: identical graphs produce identical bytes") {
  auto run = [] {
    Rng rng(11);
    auto x = random_tensor({6, 3}, rng, true);
    auto w = random_tensor({3, 5}, rng, true);
    auto y = ad::leaky_relu(ad::matmul(x, w));
    return y.values();
  };
  const auto a = run();
  const auto b = run();
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("non-finite op output raises a numeric fault") {
  auto x = Tensor<double>::constant({2}, {1e308, 1e308});
  auto y = Tensor<double>::constant({2}, {1e308, 1e308});
  CHECK_THROWS_AS(ad::hadamard(x, y), NumericFault);
}

TEST_CASE("gather_rows gathers and scatter-adds") {
  auto x = Tensor<double>::constant({3, 2}, {1, 2, 3, 4, 5, 6});
  x.set_requires_grad(true);
  const std::vector<int32_t> idx = {2, 2, 0, 1};  // rows [2,2] and [0,1]
  auto g = ad::gather_rows(x, idx, 2, 2);
  CHECK(g.values() == std::vector<double>{5, 6, 5, 6, 1, 2, 3, 4});
  ad::backward(sum_all(g));
  CHECK(x.grad() == std::vector<double>{1, 1, 1, 1, 2, 2});
}

TEST_CASE("adam: first step magnitude is about alpha in the gradient sign") {
  auto w = Tensor<double>::param({2}, {0.5, -0.25});
  w.zero_grad();
  w.grad()[0] = 0.3;
  w.grad()[1] = -0.7;
  AdamConfig<double> cfg;
  cfg.alpha = 2e-4;
  Adam<double> opt({w}, cfg);
  opt.step();
  // Bias correction makes m_hat = g and v_hat = g^2, so the update is
  // alpha * g / (|g| + eps) = alpha * sign(g) to within eps.
  CHECK(w.values()[0] == doctest::Approx(0.5 - 2e-4).epsilon(1e-6));
  CHECK(w.values()[1] == doctest::Approx(-0.25 + 2e-4).epsilon(1e-6));
  // Gradients are consumed.
  CHECK(w.grad()[0] == 0.0);
  CHECK(w.grad()[1] == 0.0);
}

TEST_CASE("adam: zero gradient leaves the parameter unchanged") {
  auto w = Tensor<double>::param({3}, {1.0, 2.0, 3.0});
  w.zero_grad();
  Adam<double> opt({w});
  opt.step();
  CHECK(w.values() == std::vector<double>{1.0, 2.0, 3.0});
}

TEST_CASE("adam: missing gradient is a contract error") {
  auto w = Tensor<double>::param({2}, {1.0, 2.0});
  Adam<double> opt({w});
  CHECK_THROWS_AS(opt.step(), ContractError);
}

TEST_CASE("adam: 200 steps on a quadratic converge from distance 1") {
  auto w = Tensor<double>::param({1}, {1.0});  // target w* = 0
  AdamConfig<double> cfg;
  cfg.alpha = 0.05;
  cfg.beta1 = 0.5;
  Adam<double> opt({w}, cfg);
  for (int i = 0; i < 200; ++i) {
    auto target = Tensor<double>::constant({1}, {0.0});
    auto loss = ad::mse_loss(w, target);
    ad::backward(loss);
    opt.step();
  }
  CHECK(std::abs(w.values()[0]) < 1e-2);
}

TEST_CASE("grad access before backward is a contract error") {
  auto w = Tensor<double>::param({2}, {1.0, 2.0});
  CHECK_THROWS_AS(w.grad(), ContractError);
}
