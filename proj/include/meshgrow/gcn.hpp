#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "meshgrow/kcn.hpp"
#include "meshgrow/mesh.hpp"
#include "meshgrow/ops.hpp"

namespace meshgrow {

// Global branch: four stacked propagation blocks, widths 3->32->64->64->32.
template <typename T>
struct GcnParams {
  static constexpr std::array<int64_t, 5> kWidths = {3, 32, 64, 64, 32};

  std::array<ad::Tensor<T>, 4> weights;
  std::array<ad::Tensor<T>, 4> biases;

  int64_t output_dim() const { return kWidths.back(); }

  static GcnParams init(Rng& rng) {
    GcnParams p;
    for (size_t l = 0; l < 4; ++l) {
      p.weights[l] = glorot_init<T>(kWidths[l], kWidths[l + 1], rng);
      p.biases[l] = zero_bias<T>(kWidths[l + 1]);
    }
    return p;
  }

  template <typename Fn>
  void visit(const std::string& prefix, Fn&& fn) {
    for (size_t l = 0; l < 4; ++l) {
      const std::string layer = prefix + ".l" + std::to_string(l);
      fn(layer + ".w", weights[l]);
      fn(layer + ".b", biases[l]);
    }
  }
};

// One propagation step: P X Theta + bias.
template <typename T>
ad::Tensor<T> gcn_layer(const ad::Tensor<T>& x, const GraphTopology& topo,
                        const ad::Tensor<T>& weight, const ad::Tensor<T>& bias) {
  if (x.rank() != 2 || x.dim(0) != topo.vertex_count) {
    throw ContractError("gcn_layer: features " + ad::shape_str(x.shape()) +
                        " do not match topology with N = " +
                        std::to_string(topo.vertex_count));
  }
  return ad::add(ad::matmul(ad::sparse_matmul(topo.propagation, x), weight),
                 bias);
}

// Four blocks; leaky_relu after the first three, final block linear.
// Receptive field after the stack is exactly four hops.
template <typename T>
ad::Tensor<T> gcn_forward(const ad::Tensor<T>& vertices,
                          const GraphTopology& topo, const GcnParams<T>& p) {
  auto h = vertices;
  for (size_t l = 0; l < 4; ++l) {
    h = gcn_layer(h, topo, p.weights[l], p.biases[l]);
    if (l + 1 < 4) h = ad::leaky_relu(h);
  }
  return h;
}

}  // namespace meshgrow
