#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "gradcheck.hpp"
#include "meshgrow/gan.hpp"
#include "meshgrow/losses.hpp"
#include "meshgrow/rng.hpp"
#include "meshgrow/synth.hpp"

using namespace meshgrow;
using ad::Tensor;

namespace {

Mesh demo_mesh() {
  Rng rng(42);
  return tube_mesh(
      [&](double s) { return 12.0 + 3.0 * std::exp(-(s - 20.0) * (s - 20.0) / 80.0); },
      6, 8, 40.0);
}

ConditionVector demo_cond(int delta = 12) {
  return encode_condition(ClinicalCondition(64, Sex::kFemale, delta));
}

}  // namespace

TEST_CASE("generator: zero fusion tail reproduces the source bit-exactly") {
  Rng rng(1);
  auto params = GeneratorParams<double>::init(rng, Backbone::kKcnGcn, true, 4);
  // init() already zeroes the tail; make it explicit for the property
  std::fill(params.fuse_w2.values().begin(), params.fuse_w2.values().end(), 0.0);
  std::fill(params.fuse_b2.values().begin(), params.fuse_b2.values().end(), 0.0);

  const Mesh mesh = demo_mesh();
  const auto topo = GraphTopology::from_mesh(mesh);
  const Mesh out = predict_mesh(mesh, topo, demo_cond(), params);
  CHECK(out.faces == mesh.faces);
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      CHECK(out.vertices[i][c] == mesh.vertices[i][c]);
    }
  }
}

TEST_CASE("generator: output keeps vertex count and face list") {
  Rng rng(2);
  for (Backbone bb : {Backbone::kKcn, Backbone::kGcn, Backbone::kKcnGcn}) {
    auto params = GeneratorParams<double>::init(rng, bb, true, 4);
    // exercise a non-identity tail
    for (auto& v : params.fuse_w2.values()) v = rng.uniform(-0.05, 0.05);
    const Mesh mesh = demo_mesh();
    const auto topo = GraphTopology::from_mesh(mesh);
    const Mesh out = predict_mesh(mesh, topo, demo_cond(), params);
    CHECK(out.vertices.size() == mesh.vertices.size());
    CHECK(out.faces == mesh.faces);
  }
}

TEST_CASE("generator: permutation equivariance under consistent relabeling") {
  Rng rng(3);
  auto params = GeneratorParams<double>::init(rng, Backbone::kKcnGcn, true, 3);
  for (auto& v : params.fuse_w2.values()) v = rng.uniform(-0.05, 0.05);

  const Mesh mesh = demo_mesh();
  const auto topo = GraphTopology::from_mesh(mesh);
  const auto cond = demo_cond();
  auto base = generator_forward(vertices_tensor<double>(mesh), topo, cond,
                                params);

  const int n = mesh.vertex_count();
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = (i * 7 + 3) % n;  // bijection (gcd(7,48)=1)
  Mesh permuted;
  permuted.vertices.resize(n);
  for (int i = 0; i < n; ++i) permuted.vertices[perm[i]] = mesh.vertices[i];
  for (const auto& f : mesh.faces) {
    permuted.faces.push_back({perm[f[0]], perm[f[1]], perm[f[2]]});
  }
  const auto topo_p = GraphTopology::from_mesh(permuted);
  auto out_p = generator_forward(vertices_tensor<double>(permuted), topo_p,
                                 cond, params);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      CHECK(out_p.values()[perm[i] * 3 + c] ==
            doctest::Approx(base.values()[i * 3 + c]).epsilon(1e-9));
    }
  }
}

TEST_CASE("discriminator: zero weights score zero for any input") {
  Rng rng(4);
  auto params = DiscriminatorParams<double>::init(rng);
  std::fill(params.head_w.values().begin(), params.head_w.values().end(), 0.0);
  std::fill(params.head_b.values().begin(), params.head_b.values().end(), 0.0);
  const Mesh mesh = demo_mesh();
  const auto topo = GraphTopology::from_mesh(mesh);
  auto score = discriminator_forward(vertices_tensor<double>(mesh), topo,
                                     demo_cond(), params);
  CHECK(score.item() == 0.0);
}

TEST_CASE("discriminator: permutation invariance of the score") {
  Rng rng(5);
  auto params = DiscriminatorParams<double>::init(rng);
  const Mesh mesh = demo_mesh();
  const auto topo = GraphTopology::from_mesh(mesh);
  const auto cond = demo_cond();
  const double base =
      discriminator_forward(vertices_tensor<double>(mesh), topo, cond, params)
          .item();

  const int n = mesh.vertex_count();
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = (i * 5 + 11) % n;
  Mesh permuted;
  permuted.vertices.resize(n);
  for (int i = 0; i < n; ++i) permuted.vertices[perm[i]] = mesh.vertices[i];
  for (const auto& f : mesh.faces) {
    permuted.faces.push_back({perm[f[0]], perm[f[1]], perm[f[2]]});
  }
  const auto topo_p = GraphTopology::from_mesh(permuted);
  const double score =
      discriminator_forward(vertices_tensor<double>(permuted), topo_p, cond,
                            params)
          .item();
  CHECK(score == doctest::Approx(base).epsilon(1e-10));
}

TEST_CASE("discriminator: finite score for meshes scaled by 1e3 at fp32") {
  Rng rng(6);
  auto params = DiscriminatorParams<float>::init(rng);
  Mesh mesh = demo_mesh();
  for (auto& v : mesh.vertices) {
    for (auto& c : v) c *= 1e3;
  }
  const auto topo = GraphTopology::from_mesh(mesh);
  auto score = discriminator_forward(vertices_tensor<float>(mesh), topo,
                                     demo_cond(), params);
  CHECK(std::isfinite(score.item()));
}

TEST_CASE("different conditions produce different condition tensors") {
  auto a = condition_tensor<double>(demo_cond(3));
  auto b = condition_tensor<double>(demo_cond(24));
  CHECK(a.values() != b.values());
}

TEST_CASE("generator loss end-to-end gradient check with frozen KNN") {
  Rng rng(7);
  auto gen = GeneratorParams<double>::init(rng, Backbone::kKcnGcn, true, 3);
  for (auto& v : gen.fuse_w2.values()) v = rng.uniform(-0.05, 0.05);
  auto dis = DiscriminatorParams<double>::init(rng);

  Mesh source = demo_mesh();
  Mesh target = demo_mesh();
  for (auto& v : target.vertices) v[0] += 1.5;  // displaced ground truth
  const auto topo = GraphTopology::from_mesh(source);
  const auto cond = demo_cond();

  // Freeze the KNN table at the current features.
  auto vs = vertices_tensor<double>(source);
  const MeshScale ms = mesh_scale(vs);
  auto frozen =
      knn_indices(cnn_features(normalize_with(vs, ms), gen.kcn), gen.kcn.k);

  gradcheck::Case c;
  c.op = "generator_loss";
  c.detail = "L1 + adversarial";
  gen.visit("g", [&](const std::string&, Tensor<double>& t) {
    c.inputs.push_back(t);
  });
  auto vt = vertices_tensor<double>(target);
  c.forward = [&](const std::vector<Tensor<double>>&) {
    auto predicted = generator_forward(vs, topo, cond, gen, &frozen);
    auto recon = l1_recon(predicted, vt);
    auto d_fake = discriminator_forward(predicted, topo, cond, dis);
    return ad::add(ad::scale(recon, 100.0),
                   lsgan_g_loss(d_fake));
  };
  // Sampled 1% of parameters, matching the stated end-to-end tolerance.
  const auto result = gradcheck::run_case(c, 1e-5, 0.01);
  CHECK(result.checked > 100);
  CHECK(result.max_rel_err < 1e-3);
}
