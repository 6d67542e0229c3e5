#pragma once

#include <utility>

#include "meshgrow/ops.hpp"
#include "meshgrow/tensor.hpp"

namespace meshgrow {

// Mean absolute difference over all 3N coordinates of corresponded meshes,
// in mm. Shares its definition with the MAE evaluation metric.
template <typename T>
ad::Tensor<T> l1_recon(const ad::Tensor<T>& predicted,
                       const ad::Tensor<T>& target) {
  if (predicted.shape() != target.shape()) {
    throw ContractError("l1_recon: vertex counts differ: " +
                        ad::shape_str(predicted.shape()) + " vs " +
                        ad::shape_str(target.shape()));
  }
  return ad::l1_loss(predicted, target);
}

// Symmetric Chamfer distance between vertex sets, unsquared Euclidean, mm:
// CD(A,B) = (mean_a min_b |a-b| + mean_b min_a |a-b|) / 2. Gradient flows
// through the argmin pairs only.
template <typename T>
ad::Tensor<T> chamfer_loss(const ad::Tensor<T>& a, const ad::Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw ContractError("chamfer_loss: point sets must be [N, d] and [M, d]");
  }
  if (a.dim(0) < 1 || b.dim(0) < 1) {
    throw ContractError("chamfer_loss: empty point set");
  }
  auto a_to_b = ad::mean_axis(ad::min_reduce_last(ad::pairwise_distance(a, b)), 0);
  auto b_to_a = ad::mean_axis(ad::min_reduce_last(ad::pairwise_distance(b, a)), 0);
  return ad::scale(ad::add(a_to_b, b_to_a), 0.5);
}

// Least-squares GAN objectives:
//   d_loss = [(d_real - 1)^2 + d_fake^2] / 2
//   g_loss = (d_fake - 1)^2 / 2
template <typename T>
ad::Tensor<T> lsgan_d_loss(const ad::Tensor<T>& d_real,
                           const ad::Tensor<T>& d_fake) {
  auto one = ad::Tensor<T>::scalar(T(1));
  auto real_err = ad::sub(d_real, one);
  return ad::scale(ad::add(ad::hadamard(real_err, real_err),
                           ad::hadamard(d_fake, d_fake)),
                   0.5);
}

template <typename T>
ad::Tensor<T> lsgan_g_loss(const ad::Tensor<T>& d_fake) {
  auto err = ad::sub(d_fake, ad::Tensor<T>::scalar(T(1)));
  return ad::scale(ad::hadamard(err, err), 0.5);
}

template <typename T>
std::pair<ad::Tensor<T>, ad::Tensor<T>> adversarial_losses(
    const ad::Tensor<T>& d_real, const ad::Tensor<T>& d_fake) {
  return {lsgan_d_loss(d_real, d_fake), lsgan_g_loss(d_fake)};
}

}  // namespace meshgrow
