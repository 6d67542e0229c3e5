#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "meshgrow/condition.hpp"
#include "meshgrow/gcn.hpp"
#include "meshgrow/kcn.hpp"
#include "meshgrow/mesh.hpp"
#include "meshgrow/ops.hpp"

namespace meshgrow {

enum class Backbone { kKcn, kGcn, kKcnGcn };

inline std::string to_string(Backbone b) {
  switch (b) {
    case Backbone::kKcn: return "kcn";
    case Backbone::kGcn: return "gcn";
    default: return "kcn+gcn";
  }
}

inline Backbone backbone_from_string(const std::string& s) {
  if (s == "kcn") return Backbone::kKcn;
  if (s == "gcn") return Backbone::kGcn;
  if (s == "kcn+gcn" || s == "kcngcn" || s == "both") return Backbone::kKcnGcn;
  throw ContractError("backbone: expected kcn|gcn|kcn+gcn, got '" + s + "'");
}

// The 300-entry condition row as a constant tensor.
template <typename T>
ad::Tensor<T> condition_tensor(const ConditionVector& cond) {
  const auto raw = cond.concatenated();
  std::vector<T> v(raw.begin(), raw.end());
  return ad::Tensor<T>::constant({kConditionWidth}, std::move(v));
}

// Per-mesh normalization constants: centroid and RMS of the centered
// coordinates. Networks see zero-mean, unit-RMS geometry; outputs are mapped
// back to mm by the caller.
struct MeshScale {
  Vec3 center{0, 0, 0};
  double rms = 1.0;
};

template <typename T>
MeshScale mesh_scale(const ad::Tensor<T>& vertices) {
  const int64_t n = vertices.dim(0);
  const auto& v = vertices.values();
  MeshScale s;
  for (int64_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) s.center[c] += static_cast<double>(v[i * 3 + c]);
  }
  for (int c = 0; c < 3; ++c) s.center[c] /= static_cast<double>(n);
  double m2 = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const double d = static_cast<double>(v[i * 3 + c]) - s.center[c];
      m2 += d * d;
    }
  }
  s.rms = std::sqrt(m2 / static_cast<double>(3 * n) + 1e-12);
  return s;
}

template <typename T>
ad::Tensor<T> normalize_with(const ad::Tensor<T>& vertices,
                             const MeshScale& s) {
  auto center = ad::Tensor<T>::constant(
      {3}, {static_cast<T>(s.center[0]), static_cast<T>(s.center[1]),
            static_cast<T>(s.center[2])});
  return ad::scale(ad::sub(vertices, center), 1.0 / s.rms);
}

// ---------------------------------------------------------------------------
// Generator

// Condition + local + global branches fused by two pointwise layers into a
// per-vertex displacement added to the source mesh. The final fusion layer
// starts at zero, so an untrained generator is the identity map.
template <typename T>
struct GeneratorParams {
  Backbone backbone = Backbone::kKcnGcn;
  bool use_condition = true;
  int64_t cond_dim = 32;

  KcnParams<T> kcn;
  GcnParams<T> gcn;
  ad::Tensor<T> cond_w, cond_b;    // 300 -> cond_dim
  ad::Tensor<T> fuse_w1, fuse_b1;  // fusion_in -> 64
  ad::Tensor<T> fuse_w2, fuse_b2;  // 64 -> 3, zero-initialized

  bool has_kcn() const { return backbone != Backbone::kGcn; }
  bool has_gcn() const { return backbone != Backbone::kKcn; }

  int64_t fusion_input_dim() const {
    return (has_kcn() ? kcn.output_dim() : 0) +
           (has_gcn() ? gcn.output_dim() : 0) +
           (use_condition ? cond_dim : 0);
  }

  static GeneratorParams init(Rng& rng, Backbone backbone = Backbone::kKcnGcn,
                              bool use_condition = true, int64_t k = 8) {
    GeneratorParams p;
    p.backbone = backbone;
    p.use_condition = use_condition;
    if (p.has_kcn()) p.kcn = KcnParams<T>::init(rng, k);
    if (p.has_gcn()) p.gcn = GcnParams<T>::init(rng);
    if (use_condition) {
      p.cond_w = glorot_init<T>(kConditionWidth, p.cond_dim, rng);
      p.cond_b = zero_bias<T>(p.cond_dim);
    }
    p.fuse_w1 = glorot_init<T>(p.fusion_input_dim(), 64, rng);
    p.fuse_b1 = zero_bias<T>(64);
    p.fuse_w2 =
        ad::Tensor<T>::param({64, 3}, std::vector<T>(64 * 3, T(0)));
    p.fuse_b2 = zero_bias<T>(3);
    return p;
  }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) {
    if (has_kcn()) kcn.visit(prefix + ".kcn", fn);
    if (has_gcn()) gcn.visit(prefix + ".gcn", fn);
    if (use_condition) {
      fn(prefix + ".cond.w", cond_w);
      fn(prefix + ".cond.b", cond_b);
    }
    fn(prefix + ".fuse.w1", fuse_w1);
    fn(prefix + ".fuse.b1", fuse_b1);
    fn(prefix + ".fuse.w2", fuse_w2);
    fn(prefix + ".fuse.b2", fuse_b2);
  }

  std::vector<ad::Tensor<T>> parameters() {
    std::vector<ad::Tensor<T>> out;
    visit("g", [&](const std::string&, ad::Tensor<T>& t) { out.push_back(t); });
    return out;
  }
};

// Predicted vertices in mm, same ordering and count as the source. Pass a
// frozen neighbor table to hold the discrete KNN step fixed (gradient
// checks); by default neighbors are recomputed from the current features.
template <typename T>
ad::Tensor<T> generator_forward(const ad::Tensor<T>& source_vertices,
                                const GraphTopology& topo,
                                const ConditionVector& cond,
                                GeneratorParams<T>& p,
                                const std::vector<int32_t>* frozen_knn =
                                    nullptr) {
  const int64_t n = source_vertices.dim(0);
  if (source_vertices.rank() != 2 || source_vertices.dim(1) != 3) {
    throw ContractError("generator_forward: vertices must be [N, 3]");
  }
  if (topo.vertex_count != n) {
    throw ContractError("generator_forward: topology N = " +
                        std::to_string(topo.vertex_count) +
                        " does not match mesh N = " + std::to_string(n));
  }
  const MeshScale ms = mesh_scale(source_vertices);
  auto x = normalize_with(source_vertices, ms);

  std::vector<ad::Tensor<T>> branches;
  if (p.has_kcn()) {
    if (frozen_knn != nullptr) {
      branches.push_back(kcn_forward_with_indices(x, *frozen_knn, p.kcn));
    } else {
      branches.push_back(kcn_forward(x, p.kcn));
    }
  }
  if (p.has_gcn()) {
    branches.push_back(gcn_forward(x, topo, p.gcn));
  }
  if (p.use_condition) {
    auto c = condition_tensor<T>(cond);
    auto embedded = ad::add(
        ad::reshape(ad::matmul(ad::reshape(c, {1, kConditionWidth}), p.cond_w),
                    {p.cond_dim}),
        p.cond_b);
    branches.push_back(ad::repeat_rows(embedded, n));
  }
  auto fused = branches.size() == 1 ? branches[0]
                                    : ad::concat_last_axis<T>(branches);
  auto h = ad::leaky_relu(ad::affine(fused, p.fuse_w1, p.fuse_b1));
  auto displacement = ad::affine(h, p.fuse_w2, p.fuse_b2);  // normalized units
  return ad::add(source_vertices, ad::scale(displacement, ms.rms));
}

// ---------------------------------------------------------------------------
// Discriminator

// Conditional GCN encoder: three propagation blocks, global mean pool over
// vertices, then an affine score head on [pooled | condition] features.
template <typename T>
struct DiscriminatorParams {
  static constexpr std::array<int64_t, 4> kWidths = {3, 32, 64, 64};
  int64_t cond_dim = 32;

  std::array<ad::Tensor<T>, 3> weights;
  std::array<ad::Tensor<T>, 3> biases;
  ad::Tensor<T> cond_w, cond_b;  // 300 -> cond_dim
  ad::Tensor<T> head_w, head_b;  // (64 + cond_dim) -> 1

  static DiscriminatorParams init(Rng& rng) {
    DiscriminatorParams p;
    for (size_t l = 0; l < 3; ++l) {
      p.weights[l] = glorot_init<T>(kWidths[l], kWidths[l + 1], rng);
      p.biases[l] = zero_bias<T>(kWidths[l + 1]);
    }
    p.cond_w = glorot_init<T>(kConditionWidth, p.cond_dim, rng);
    p.cond_b = zero_bias<T>(p.cond_dim);
    p.head_w = glorot_init<T>(kWidths.back() + p.cond_dim, 1, rng);
    p.head_b = zero_bias<T>(1);
    return p;
  }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) {
    for (size_t l = 0; l < 3; ++l) {
      const std::string layer = prefix + ".gcn.l" + std::to_string(l);
      fn(layer + ".w", weights[l]);
      fn(layer + ".b", biases[l]);
    }
    fn(prefix + ".cond.w", cond_w);
    fn(prefix + ".cond.b", cond_b);
    fn(prefix + ".head.w", head_w);
    fn(prefix + ".head.b", head_b);
  }

  std::vector<ad::Tensor<T>> parameters() {
    std::vector<ad::Tensor<T>> out;
    visit("d", [&](const std::string&, ad::Tensor<T>& t) { out.push_back(t); });
    return out;
  }
};

// Scalar realism score. The candidate is self-normalized on the tape (mean
// and RMS are differentiated through), so scores stay finite for inputs at
// any scale and gradients match finite differences.
template <typename T>
ad::Tensor<T> discriminator_forward(const ad::Tensor<T>& vertices,
                                    const GraphTopology& topo,
                                    const ConditionVector& cond,
                                    DiscriminatorParams<T>& p) {
  const int64_t n = vertices.dim(0);
  if (vertices.rank() != 2 || vertices.dim(1) != 3) {
    throw ContractError("discriminator_forward: vertices must be [N, 3]");
  }
  if (topo.vertex_count != n) {
    throw ContractError("discriminator_forward: topology mismatch");
  }
  auto centered = ad::sub(vertices, ad::mean_axis(vertices, 0));
  auto m2 = ad::mean_all(ad::hadamard(centered, centered));
  auto rms = ad::sqrt(ad::add(m2, ad::Tensor<T>::scalar(T(1e-12))));
  auto x = ad::div(centered, rms);

  auto h = x;
  for (size_t l = 0; l < 3; ++l) {
    h = ad::leaky_relu(gcn_layer(h, topo, p.weights[l], p.biases[l]));
  }
  auto pooled = ad::mean_axis(h, 0);  // [64]

  auto c = condition_tensor<T>(cond);
  auto embedded = ad::add(
      ad::reshape(ad::matmul(ad::reshape(c, {1, kConditionWidth}), p.cond_w),
                  {p.cond_dim}),
      p.cond_b);

  auto joined = ad::concat_last_axis<T>({pooled, embedded});
  auto score = ad::add(
      ad::matmul(ad::reshape(joined, {1, DiscriminatorParams<T>::kWidths.back() +
                                             p.cond_dim}),
                 p.head_w),
      p.head_b);
  return ad::reshape(score, {});
}

// ---------------------------------------------------------------------------
// Mesh-level convenience wrappers

template <typename T>
ad::Tensor<T> vertices_tensor(const Mesh& mesh) {
  std::vector<T> v;
  v.reserve(mesh.vertices.size() * 3);
  for (const auto& vert : mesh.vertices) {
    for (double c : vert) v.push_back(static_cast<T>(c));
  }
  return ad::Tensor<T>::constant({mesh.vertex_count(), 3}, std::move(v));
}

// Runs the generator on a mesh and rebuilds a mesh with the source face list
// carried over unchanged.
template <typename T>
Mesh predict_mesh(const Mesh& source, const GraphTopology& topo,
                  const ConditionVector& cond, GeneratorParams<T>& params) {
  auto predicted =
      generator_forward(vertices_tensor<T>(source), topo, cond, params);
  Mesh out;
  out.faces = source.faces;
  out.vertices.resize(source.vertices.size());
  const auto& v = predicted.values();
  for (size_t i = 0; i < out.vertices.size(); ++i) {
    out.vertices[i] = {static_cast<double>(v[i * 3 + 0]),
                       static_cast<double>(v[i * 3 + 1]),
                       static_cast<double>(v[i * 3 + 2])};
  }
  return out;
}

}  // namespace meshgrow
