#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>

#include "gradcheck.hpp"
#include "meshgrow/losses.hpp"
#include "meshgrow/rng.hpp"

using namespace meshgrow;
using ad::Tensor;

namespace {

Tensor<double> cloud(std::vector<double> flat) {
  const auto rows = static_cast<int64_t>(flat.size()) / 3;
  return Tensor<double>::constant({rows, 3}, std::move(flat));
}

}  // namespace

TEST_CASE("l1_recon: identical meshes give zero") {
  auto a = cloud({1, 2, 3, 4, 5, 6});
  CHECK(l1_recon(a, a.detached()).item() == 0.0);
}

TEST_CASE("l1_recon: uniform unit-x offset averages to 1/3 mm") {
  Rng rng(1);
  std::vector<double> base(10 * 3);
  for (auto& v : base) v = rng.uniform(-5, 5);
  auto offset = base;
  for (size_t i = 0; i < offset.size(); i += 3) offset[i] += 1.0;
  CHECK(l1_recon(cloud(offset), cloud(base)).item() ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("l1_recon: one vertex off by 3 mm among N=10 gives 0.1 mm") {
  std::vector<double> base(10 * 3, 2.0);
  auto shifted = base;
  shifted[4 * 3] += 3.0;
  CHECK(l1_recon(cloud(shifted), cloud(base)).item() ==
        doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("l1_recon: vertex count mismatch is a contract error") {
  CHECK_THROWS_AS(l1_recon(cloud({0, 0, 0}), cloud({0, 0, 0, 1, 1, 1})),
                  ContractError);
}

TEST_CASE("chamfer_loss: A == B gives zero") {
  auto a = cloud({0, 0, 0, 1, 1, 1, 2, 0, 1});
  CHECK(chamfer_loss(a, a.detached()).item() == 0.0);
}

TEST_CASE("chamfer_loss: two single points a unit apart give 1.0 mm") {
  CHECK(chamfer_loss(cloud({0, 0, 0}), cloud({1, 0, 0})).item() ==
        doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("chamfer_loss matches a brute-force oracle on random clouds") {
  Rng rng(2);
  for (int trial = 0; trial < 4; ++trial) {
    const int n = 30, m = 30;
    std::vector<double> av(n * 3), bv(m * 3);
    for (auto& v : av) v = rng.uniform(-10, 10);
    for (auto& v : bv) v = rng.uniform(-10, 10);

    const double got = chamfer_loss(cloud(av), cloud(bv)).item();

    auto min_dist = [](const std::vector<double>& from,
                       const std::vector<double>& to, size_t i) {
      double best = std::numeric_limits<double>::infinity();
      for (size_t j = 0; j * 3 < to.size(); ++j) {
        double sq = 0;
        for (int c = 0; c < 3; ++c) {
          const double d = from[i * 3 + c] - to[j * 3 + c];
          sq += d * d;
        }
        best = std::min(best, sq);
      }
      return std::sqrt(best);
    };
    double fwd = 0, bwd = 0;
    for (int i = 0; i < n; ++i) fwd += min_dist(av, bv, i);
    for (int j = 0; j < m; ++j) bwd += min_dist(bv, av, j);
    const double expect = 0.5 * (fwd / n + bwd / m);
    CHECK(std::abs(got - expect) < 1e-12);
  }
}

TEST_CASE("chamfer_loss: empty set is a contract error") {
  auto a = cloud({0, 0, 0});
  auto empty = Tensor<double>::constant({0, 3}, {});
  CHECK_THROWS_AS(chamfer_loss(a, empty), ContractError);
}

TEST_CASE("chamfer gradient flows through argmin pairs") {
  auto a = cloud({0, 0, 0, 5, 0, 0});
  a.set_requires_grad(true);
  auto b = cloud({1, 0, 0, 7, 0, 0});
  auto loss = chamfer_loss(a, b);
  ad::backward(loss);
  // Each point is matched once per direction with weight 1/(2N); both a
  // points sit left of their match, so each x-gradient is -1/4 - 1/4.
  CHECK(a.grad()[0] == doctest::Approx(-0.5));
  CHECK(a.grad()[3] == doctest::Approx(-0.5));
}

TEST_CASE("adversarial_losses: optimum of D scores zero loss") {
  auto one = Tensor<double>::scalar(1.0);
  auto zero = Tensor<double>::scalar(0.0);
  auto [d_loss, g_loss] = adversarial_losses(one, zero);
  CHECK(d_loss.item() == 0.0);
  CHECK(g_loss.item() == doctest::Approx(0.5));
}

TEST_CASE("adversarial_losses: fooled discriminator zeroes the G term") {
  auto one = Tensor<double>::scalar(1.0);
  auto [d_loss, g_loss] = adversarial_losses(one, one);
  CHECK(g_loss.item() == 0.0);
  CHECK(d_loss.item() == doctest::Approx(0.5));
}

TEST_CASE("adversarial losses pass finite differences") {
  Rng rng(3);
  auto d_real = Tensor<double>::scalar(rng.uniform(-1, 1));
  d_real.set_requires_grad(true);
  auto d_fake = Tensor<double>::scalar(rng.uniform(-1, 1));
  d_fake.set_requires_grad(true);

  gradcheck::Case cd{"lsgan_d", "scalar", {d_real, d_fake},
                     [](const std::vector<Tensor<double>>& in) {
                       return lsgan_d_loss(in[0], in[1]);
                     }};
  CHECK(gradcheck::run_case(cd).max_rel_err < 1e-6);

  gradcheck::Case cg{"lsgan_g", "scalar", {d_fake},
                     [](const std::vector<Tensor<double>>& in) {
                       return lsgan_g_loss(in[0]);
                     }};
  CHECK(gradcheck::run_case(cg).max_rel_err < 1e-6);
}
