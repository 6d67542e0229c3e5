#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "meshgrow/ops.hpp"
#include "meshgrow/rng.hpp"
#include "meshgrow/tensor.hpp"

namespace meshgrow {

// Glorot-uniform weight matrix; biases start at zero.
template <typename T>
ad::Tensor<T> glorot_init(int64_t fan_in, int64_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<T> w(static_cast<size_t>(fan_in * fan_out));
  for (auto& v : w) v = static_cast<T>(rng.uniform(-limit, limit));
  return ad::Tensor<T>::param({fan_in, fan_out}, std::move(w));
}

template <typename T>
ad::Tensor<T> zero_bias(int64_t width) {
  return ad::Tensor<T>::param({width}, std::vector<T>(width, T(0)));
}

// Local branch: pointwise feature extractor, KNN in feature space, parallel
// neighbor/center convolutions, concat and mean over the K neighbors.
template <typename T>
struct KcnParams {
  int64_t feature_dim = 64;  // d_f
  int64_t hidden_dim = 64;   // d_h
  int64_t k = 8;

  ad::Tensor<T> feat_w1, feat_b1;  // 3 -> 32
  ad::Tensor<T> feat_w2, feat_b2;  // 32 -> d_f
  ad::Tensor<T> nei_w, nei_b;      // d_f -> d_h
  ad::Tensor<T> ctr_w, ctr_b;      // d_f -> d_h

  int64_t output_dim() const { return 2 * hidden_dim; }

  static KcnParams init(Rng& rng, int64_t k = 8) {
    KcnParams p;
    p.k = k;
    p.feat_w1 = glorot_init<T>(3, 32, rng);
    p.feat_b1 = zero_bias<T>(32);
    p.feat_w2 = glorot_init<T>(32, p.feature_dim, rng);
    p.feat_b2 = zero_bias<T>(p.feature_dim);
    p.nei_w = glorot_init<T>(p.feature_dim, p.hidden_dim, rng);
    p.nei_b = zero_bias<T>(p.hidden_dim);
    p.ctr_w = glorot_init<T>(p.feature_dim, p.hidden_dim, rng);
    p.ctr_b = zero_bias<T>(p.hidden_dim);
    return p;
  }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) {
    fn(prefix + ".feat.w1", feat_w1);
    fn(prefix + ".feat.b1", feat_b1);
    fn(prefix + ".feat.w2", feat_w2);
    fn(prefix + ".feat.b2", feat_b2);
    fn(prefix + ".nei.w", nei_w);
    fn(prefix + ".nei.b", nei_b);
    fn(prefix + ".ctr.w", ctr_w);
    fn(prefix + ".ctr.b", ctr_b);
  }
};

// Per-vertex feature map: two kernel-width-1 layers with a leaky_relu in
// between. Vertex i's features depend on vertex i's coordinates only.
template <typename T>
ad::Tensor<T> cnn_features(const ad::Tensor<T>& vertices,
                           const KcnParams<T>& p) {
  if (vertices.rank() != 2 || vertices.dim(1) != 3) {
    throw ContractError("cnn_features: vertices must be [N, 3], got " +
                        ad::shape_str(vertices.shape()));
  }
  auto h = ad::leaky_relu(ad::affine(vertices, p.feat_w1, p.feat_b1));
  return ad::affine(h, p.feat_w2, p.feat_b2);
}

// K nearest other rows by Euclidean distance in feature space. The query row
// is excluded; ties break toward the lower index; each row of the result is
// sorted by (distance, index).
template <typename T>
std::vector<int32_t> knn_indices(const ad::Tensor<T>& features, int64_t k) {
  if (features.rank() != 2) {
    throw ContractError("knn_indices: features must be [N, d]");
  }
  const int64_t n = features.dim(0), d = features.dim(1);
  if (k < 1 || k >= n) {
    throw ContractError("knn_indices: K must satisfy 1 <= K <= N-1, got K=" +
                        std::to_string(k) + " N=" + std::to_string(n));
  }
  ad::ConstMatMap<T> f(features.values().data(), n, d);
  // dist^2(i, j) = |f_i|^2 + |f_j|^2 - 2 f_i . f_j via one gemm
  ad::RowMat<T> cross(n, n);
  cross.noalias() = f * f.transpose();
  const auto sq = f.rowwise().squaredNorm().eval();

  std::vector<int32_t> out(static_cast<size_t>(n * k));
  std::vector<std::pair<T, int32_t>> cand(static_cast<size_t>(n - 1));
  for (int64_t i = 0; i < n; ++i) {
    size_t w = 0;
    for (int64_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const T dist_sq = std::max(T(0), sq(i) + sq(j) - T(2) * cross(i, j));
      cand[w++] = {dist_sq, static_cast<int32_t>(j)};
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    for (int64_t c = 0; c < k; ++c) out[i * k + c] = cand[c].second;
  }
  return out;
}

// Neighbor/center convolutions over a precomputed feature map and neighbor
// table: gather -> parallel linear+leaky_relu paths -> concat on the last
// axis -> mean over the K slots. Output is [N, 2 d_h].
template <typename T>
ad::Tensor<T> kcn_aggregate(const ad::Tensor<T>& features,
                            const std::vector<int32_t>& idx,
                            const KcnParams<T>& p) {
  const int64_t n = features.dim(0);
  const int64_t k = p.k;
  auto gathered = ad::gather_rows(features, idx, n, k);  // [N, K, d_f]
  auto nei = ad::leaky_relu(ad::add(
      ad::reshape(
          ad::matmul(ad::reshape(gathered, {n * k, p.feature_dim}), p.nei_w),
          {n, k, p.hidden_dim}),
      p.nei_b));

  auto center =
      ad::leaky_relu(ad::affine(features, p.ctr_w, p.ctr_b));  // [N, d_h]
  // Broadcast the center features alongside each of the K neighbor slots.
  std::vector<int32_t> self_idx(static_cast<size_t>(n * k));
  for (int64_t i = 0; i < n; ++i) {
    std::fill_n(self_idx.begin() + i * k, k, static_cast<int32_t>(i));
  }
  auto center_tiled = ad::gather_rows(center, self_idx, n, k);  // [N, K, d_h]

  auto joined = ad::concat_last_axis<T>({nei, center_tiled});  // [N, K, 2d_h]
  return ad::mean_axis(joined, 1);                             // [N, 2d_h]
}

// Full local pipeline with a frozen neighbor table. Index selection is a
// discrete, non-differentiated step; gradients flow through the gathered
// values only.
template <typename T>
ad::Tensor<T> kcn_forward_with_indices(const ad::Tensor<T>& vertices,
                                       const std::vector<int32_t>& idx,
                                       const KcnParams<T>& p) {
  return kcn_aggregate(cnn_features(vertices, p), idx, p);
}

template <typename T>
ad::Tensor<T> kcn_forward(const ad::Tensor<T>& vertices,
                          const KcnParams<T>& p) {
  auto features = cnn_features(vertices, p);
  // Neighbors are recomputed every pass; the learned feature space moves
  // during training.
  return kcn_aggregate(features, knn_indices(features, p.k), p);
}

}  // namespace meshgrow
