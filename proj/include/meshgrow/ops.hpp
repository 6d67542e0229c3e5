#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "meshgrow/mesh.hpp"
#include "meshgrow/tensor.hpp"

namespace meshgrow::ad {

// Every differentiable op, by the name stored on its output node. The
// finite-difference suite iterates this list and refuses to pass unless each
// entry has a registered check, so a new op cannot dodge the gradient test.
inline const std::vector<std::string>& op_names() {
  static const std::vector<std::string> names = {
      "matmul",       "sparse_matmul",    "add",
      "sub",          "hadamard",         "div",
      "scale",        "gather_rows",      "concat_last_axis",
      "mean_axis",    "leaky_relu",       "tanh",
      "sqrt",         "l1_loss",          "mse_loss",
      "min_reduce_last", "pairwise_distance", "reshape",
      "repeat_rows",
  };
  return names;
}

template <typename T>
using RowMat =
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

namespace detail {

template <typename T>
inline void check_finite(const char* op, const std::vector<T>& v) {
  for (const T x : v) {
    if (!std::isfinite(static_cast<double>(x))) {
      throw NumericFault(std::string("op ") + op +
                         " produced a non-finite value");
    }
  }
}

template <typename T>
inline Tensor<T> make_result(const char* op, Shape shape, std::vector<T> values,
                             std::vector<Tensor<T>> parents,
                             std::function<void(Node<T>&)> backward_fn) {
  check_finite(op, values);
  auto node = std::make_shared<Node<T>>();
  node->op = op;
  node->shape = std::move(shape);
  node->values = std::move(values);
  for (auto& p : parents) {
    node->requires_grad = node->requires_grad || p.requires_grad();
    node->parents.push_back(p.node());
  }
  if (node->requires_grad) node->backward_fn = std::move(backward_fn);
  return Tensor<T>(std::move(node));
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

// True when `small` equals the trailing suffix of `big` (leading-axis
// broadcast; a scalar matches everything).
inline bool is_suffix_of(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

// Shared elementwise binary with leading-axis broadcast of `b` over `a`.
template <typename T, typename Fwd, typename BwdA, typename BwdB>
Tensor<T> broadcast_binary(const char* op, const Tensor<T>& a,
                           const Tensor<T>& b, Fwd fwd, BwdA bwd_a,
                           BwdB bwd_b) {
  require(is_suffix_of(b.shape(), a.shape()),
          std::string(op) + ": shape " + shape_str(b.shape()) +
              " does not broadcast over " + shape_str(a.shape()));
  const int64_t nb = std::max<int64_t>(b.numel(), 1);
  const int64_t n = a.numel();
  std::vector<T> out(static_cast<size_t>(n));
  const auto& av = a.values();
  const auto& bv = b.values();
  for (int64_t i = 0; i < n; ++i) out[i] = fwd(av[i], bv[i % nb]);
  return make_result<T>(
      op, a.shape(), std::move(out), {a, b},
      [nb, n, fwd, bwd_a, bwd_b](Node<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
          pa.ensure_grad();
          for (int64_t i = 0; i < n; ++i) {
            pa.grad[i] += bwd_a(self.grad[i], pa.values[i], pb.values[i % nb]);
          }
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          for (int64_t i = 0; i < n; ++i) {
            pb.grad[i % nb] +=
                bwd_b(self.grad[i], pa.values[i], pb.values[i % nb]);
          }
        }
      });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
                  "matmul: incompatible shapes " + shape_str(a.shape()) +
                      " x " + shape_str(b.shape()));
  const int64_t p = a.dim(0), q = a.dim(1), r = b.dim(1);
  std::vector<T> out(static_cast<size_t>(p * r));
  {
    ConstMatMap<T> ma(a.values().data(), p, q);
    ConstMatMap<T> mb(b.values().data(), q, r);
    MatMap<T> mo(out.data(), p, r);
    mo.noalias() = ma * mb;
  }
  return detail::make_result<T>(
      "matmul", {p, r}, std::move(out), {a, b}, [p, q, r](Node<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        ConstMatMap<T> g(self.grad.data(), p, r);
        if (pa.requires_grad) {
          pa.ensure_grad();
          ConstMatMap<T> mb(pb.values.data(), q, r);
          MatMap<T> ga(pa.grad.data(), p, q);
          ga.noalias() += g * mb.transpose();
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          ConstMatMap<T> ma(pa.values.data(), p, q);
          MatMap<T> gb(pb.grad.data(), q, r);
          gb.noalias() += ma.transpose() * g;
        }
      });
}

// y = P x for a constant sparse operator P. The operator is copied into the
// node so the graph never outlives it.
template <typename T>
Tensor<T> sparse_matmul(std::shared_ptr<const SparseMatrix> p,
                        const Tensor<T>& x) {
  detail::require(p != nullptr, "sparse_matmul: null operator");
  detail::require(x.rank() == 2 && x.dim(0) == p->size,
                  "sparse_matmul: operator size " + std::to_string(p->size) +
                      " vs input " + shape_str(x.shape()));
  const int64_t n = x.dim(0), d = x.dim(1);
  std::vector<T> out(static_cast<size_t>(n * d), T(0));
  const auto& xv = x.values();
  for (const auto& e : p->entries) {
    const T v = static_cast<T>(e.value);
    const T* src = xv.data() + static_cast<int64_t>(e.col) * d;
    T* dst = out.data() + static_cast<int64_t>(e.row) * d;
    for (int64_t k = 0; k < d; ++k) dst[k] += v * src[k];
  }
  return detail::make_result<T>(
      "sparse_matmul", {n, d}, std::move(out), {x}, [p, d](Node<T>& self) {
        auto& px = *self.parents[0];
        if (!px.requires_grad) return;
        px.ensure_grad();
        // grad_x = P^T grad_y
        for (const auto& e : p->entries) {
          const T v = static_cast<T>(e.value);
          const T* src = self.grad.data() + static_cast<int64_t>(e.row) * d;
          T* dst = px.grad.data() + static_cast<int64_t>(e.col) * d;
          for (int64_t k = 0; k < d; ++k) dst[k] += v * src[k];
        }
      });
}

template <typename T>
Tensor<T> sparse_matmul(const SparseMatrix& p, const Tensor<T>& x) {
  return sparse_matmul(std::make_shared<const SparseMatrix>(p), x);
}

// ---------------------------------------------------------------------------
// Elementwise with leading-axis broadcast of the right operand

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::broadcast_binary<T>(
      "add", a, b, [](T x, T y) { return x + y; },
      [](T g, T, T) { return g; }, [](T g, T, T) { return g; });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::broadcast_binary<T>(
      "sub", a, b, [](T x, T y) { return x - y; },
      [](T g, T, T) { return g; }, [](T g, T, T) { return -g; });
}

template <typename T>
Tensor<T> hadamard(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::broadcast_binary<T>(
      "hadamard", a, b, [](T x, T y) { return x * y; },
      [](T g, T, T y) { return g * y; }, [](T g, T x, T) { return g * x; });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::broadcast_binary<T>(
      "div", a, b, [](T x, T y) { return x / y; },
      [](T g, T, T y) { return g / y; },
      [](T g, T x, T y) { return -g * x / (y * y); });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, double s) {
  const T f = static_cast<T>(s);
  std::vector<T> out(x.values().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = x.values()[i] * f;
  return detail::make_result<T>(
      "scale", x.shape(), std::move(out), {x}, [f](Node<T>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) {
          p.grad[i] += self.grad[i] * f;
        }
      });
}

// ---------------------------------------------------------------------------
// Structure ops

// Rows of `x` ([S, d]) selected by a constant [R, K] index table -> [R, K, d].
// Backward scatter-adds into the selected source rows.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<int32_t>& idx,
                      int64_t rows, int64_t k) {
  detail::require(x.rank() == 2, "gather_rows: input must be [S, d], got " +
                                     shape_str(x.shape()));
  detail::require(static_cast<int64_t>(idx.size()) == rows * k,
                  "gather_rows: index table size mismatch");
  const int64_t s = x.dim(0), d = x.dim(1);
  for (int32_t i : idx) {
    detail::require(i >= 0 && i < s, "gather_rows: index out of range");
  }
  std::vector<T> out(static_cast<size_t>(rows * k * d));
  const auto& xv = x.values();
  for (int64_t j = 0; j < rows * k; ++j) {
    std::copy_n(xv.data() + static_cast<int64_t>(idx[j]) * d, d,
                out.data() + j * d);
  }
  return detail::make_result<T>(
      "gather_rows", {rows, k, d}, std::move(out), {x},
      [idx, rows, k, d](Node<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (int64_t j = 0; j < rows * k; ++j) {
          const T* src = self.grad.data() + j * d;
          T* dst = p.grad.data() + static_cast<int64_t>(idx[j]) * d;
          for (int64_t c = 0; c < d; ++c) dst[c] += src[c];
        }
      });
}

template <typename T>
Tensor<T> concat_last_axis(const std::vector<Tensor<T>>& parts) {
  detail::require(!parts.empty(), "concat_last_axis: no inputs");
  const Shape& first = parts[0].shape();
  detail::require(!first.empty(), "concat_last_axis: rank-0 input");
  Shape lead(first.begin(), first.end() - 1);
  int64_t total_last = 0;
  std::vector<int64_t> lasts;
  for (const auto& p : parts) {
    detail::require(p.rank() == static_cast<int64_t>(first.size()) &&
                        std::equal(lead.begin(), lead.end(), p.shape().begin()),
                    "concat_last_axis: leading dims differ: " +
                        shape_str(first) + " vs " + shape_str(p.shape()));
    lasts.push_back(p.shape().back());
    total_last += p.shape().back();
  }
  const int64_t groups = shape_numel(lead);
  Shape out_shape = lead;
  out_shape.push_back(total_last);
  std::vector<T> out(static_cast<size_t>(groups * total_last));
  int64_t offset = 0;
  for (size_t pi = 0; pi < parts.size(); ++pi) {
    const auto& pv = parts[pi].values();
    const int64_t w = lasts[pi];
    for (int64_t g = 0; g < groups; ++g) {
      std::copy_n(pv.data() + g * w, w, out.data() + g * total_last + offset);
    }
    offset += w;
  }
  return detail::make_result<T>(
      "concat_last_axis", std::move(out_shape), std::move(out), parts,
      [lasts, groups, total_last](Node<T>& self) {
        int64_t off = 0;
        for (size_t pi = 0; pi < self.parents.size(); ++pi) {
          auto& p = *self.parents[pi];
          const int64_t w = lasts[pi];
          if (p.requires_grad) {
            p.ensure_grad();
            for (int64_t g = 0; g < groups; ++g) {
              const T* src = self.grad.data() + g * total_last + off;
              T* dst = p.grad.data() + g * w;
              for (int64_t c = 0; c < w; ++c) dst[c] += src[c];
            }
          }
          off += w;
        }
      });
}

template <typename T>
Tensor<T> mean_axis(const Tensor<T>& x, int64_t axis) {
  detail::require(axis >= 0 && axis < x.rank(),
                  "mean_axis: axis " + std::to_string(axis) +
                      " out of range for " + shape_str(x.shape()));
  const Shape& s = x.shape();
  int64_t outer = 1, inner = 1;
  for (int64_t i = 0; i < axis; ++i) outer *= s[i];
  for (int64_t i = axis + 1; i < x.rank(); ++i) inner *= s[i];
  const int64_t len = s[axis];
  Shape out_shape;
  for (int64_t i = 0; i < x.rank(); ++i) {
    if (i != axis) out_shape.push_back(s[i]);
  }
  std::vector<T> out(static_cast<size_t>(outer * inner), T(0));
  const auto& xv = x.values();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t k = 0; k < len; ++k) {
      const T* src = xv.data() + (o * len + k) * inner;
      T* dst = out.data() + o * inner;
      for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  }
  const T inv = T(1) / static_cast<T>(len);
  for (auto& v : out) v *= inv;
  return detail::make_result<T>(
      "mean_axis", std::move(out_shape), std::move(out), {x},
      [outer, len, inner, inv](Node<T>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (int64_t o = 0; o < outer; ++o) {
          for (int64_t k = 0; k < len; ++k) {
            const T* src = self.grad.data() + o * inner;
            T* dst = p.grad.data() + (o * len + k) * inner;
            for (int64_t i = 0; i < inner; ++i) dst[i] += src[i] * inv;
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Nonlinearities and losses

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, double slope = 0.2) {
  const T a = static_cast<T>(slope);
  std::vector<T> out(x.values().size());
  for (size_t i = 0; i < out.size(); ++i) {
    const T v = x.values()[i];
    out[i] = v > T(0) ? v : a * v;
  }
  return detail::make_result<T>(
      "leaky_relu", x.shape(), std::move(out), {x}, [a](Node<T>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) {
          p.grad[i] += self.grad[i] * (p.values[i] > T(0) ? T(1) : a);
        }
      });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  std::vector<T> out(x.values().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x.values()[i]);
  return detail::make_result<T>(
      "tanh", x.shape(), std::move(out), {x}, [](Node<T>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) {
          const T y = self.values[i];
          p.grad[i] += self.grad[i] * (T(1) - y * y);
        }
      });
}

// Elementwise square root; inputs must be positive for a finite gradient.
template <typename T>
Tensor<T> sqrt(const Tensor<T>& x) {
  std::vector<T> out(x.values().size());
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = std::sqrt(x.values()[i]);
  }
  return detail::make_result<T>(
      "sqrt", x.shape(), std::move(out), {x}, [](Node<T>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) {
          p.grad[i] += self.grad[i] / (T(2) * self.values[i]);
        }
      });
}

// Scalar mean |a - b|. Subgradient at a tie is 0.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.shape() == b.shape(),
                  "l1_loss: shapes differ: " + shape_str(a.shape()) + " vs " +
                      shape_str(b.shape()));
  const int64_t n = a.numel();
  T acc = T(0);
  for (int64_t i = 0; i < n; ++i) {
    acc += std::abs(a.values()[i] - b.values()[i]);
  }
  const T inv = T(1) / static_cast<T>(n);
  return detail::make_result<T>(
      "l1_loss", {}, {acc * inv}, {a, b}, [n, inv](Node<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const T g = self.grad[0] * inv;
        if (pa.requires_grad) pa.ensure_grad();
        if (pb.requires_grad) pb.ensure_grad();
        for (int64_t i = 0; i < n; ++i) {
          const T diff = pa.values[i] - pb.values[i];
          const T s = diff > T(0) ? T(1) : (diff < T(0) ? T(-1) : T(0));
          if (pa.requires_grad) pa.grad[i] += g * s;
          if (pb.requires_grad) pb.grad[i] -= g * s;
        }
      });
}

// Scalar mean (a - b)^2.
template <typename T>
Tensor<T> mse_loss(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.shape() == b.shape(),
                  "mse_loss: shapes differ: " + shape_str(a.shape()) + " vs " +
                      shape_str(b.shape()));
  const int64_t n = a.numel();
  T acc = T(0);
  for (int64_t i = 0; i < n; ++i) {
    const T d = a.values()[i] - b.values()[i];
    acc += d * d;
  }
  const T inv = T(1) / static_cast<T>(n);
  return detail::make_result<T>(
      "mse_loss", {}, {acc * inv}, {a, b}, [n, inv](Node<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const T g = self.grad[0] * inv * T(2);
        if (pa.requires_grad) pa.ensure_grad();
        if (pb.requires_grad) pb.ensure_grad();
        for (int64_t i = 0; i < n; ++i) {
          const T diff = pa.values[i] - pb.values[i];
          if (pa.requires_grad) pa.grad[i] += g * diff;
          if (pb.requires_grad) pb.grad[i] -= g * diff;
        }
      });
}

// Minimum over the last axis. Gradient flows to the argmin element only;
// ties resolve to the lowest index, keeping the subgradient deterministic.
template <typename T>
Tensor<T> min_reduce_last(const Tensor<T>& x) {
  detail::require(x.rank() >= 1, "min_reduce_last: needs rank >= 1");
  const int64_t k = x.shape().back();
  detail::require(k >= 1, "min_reduce_last: empty last axis");
  const int64_t rows = x.numel() / k;
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  std::vector<T> out(static_cast<size_t>(rows));
  std::vector<int64_t> argmin(static_cast<size_t>(rows));
  const auto& xv = x.values();
  for (int64_t r = 0; r < rows; ++r) {
    const T* row = xv.data() + r * k;
    int64_t best = 0;
    for (int64_t i = 1; i < k; ++i) {
      if (row[i] < row[best]) best = i;
    }
    out[r] = row[best];
    argmin[r] = best;
  }
  return detail::make_result<T>(
      "min_reduce_last", std::move(out_shape), std::move(out), {x},
      [argmin, k](Node<T>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (size_t r = 0; r < argmin.size(); ++r) {
          p.grad[static_cast<int64_t>(r) * k + argmin[r]] += self.grad[r];
        }
      });
}

// All-pairs Euclidean distances between row sets: [N, d] x [M, d] -> [N, M].
// Coincident pairs get a zero subgradient.
template <typename T>
Tensor<T> pairwise_distance(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(1),
                  "pairwise_distance: incompatible shapes " +
                      shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const int64_t n = a.dim(0), m = b.dim(0), d = a.dim(1);
  std::vector<T> out(static_cast<size_t>(n * m));
  {
    ConstMatMap<T> ma(a.values().data(), n, d);
    ConstMatMap<T> mb(b.values().data(), m, d);
    MatMap<T> mo(out.data(), n, m);
    mo.noalias() = ma * mb.transpose();
    const auto na = ma.rowwise().squaredNorm().eval();
    const auto nb = mb.rowwise().squaredNorm().eval();
    for (int64_t i = 0; i < n; ++i) {
      for (int64_t j = 0; j < m; ++j) {
        const T sq = std::max(T(0), na(i) + nb(j) - T(2) * mo(i, j));
        mo(i, j) = std::sqrt(sq);
      }
    }
  }
  return detail::make_result<T>(
      "pairwise_distance", {n, m}, std::move(out), {a, b},
      [n, m, d](Node<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) pa.ensure_grad();
        if (pb.requires_grad) pb.ensure_grad();
        for (int64_t i = 0; i < n; ++i) {
          for (int64_t j = 0; j < m; ++j) {
            const T g = self.grad[i * m + j];
            if (g == T(0)) continue;
            const T dist = self.values[i * m + j];
            if (dist <= T(0)) continue;
            const T* ai = pa.values.data() + i * d;
            const T* bj = pb.values.data() + j * d;
            const T f = g / dist;
            for (int64_t c = 0; c < d; ++c) {
              const T diff = (ai[c] - bj[c]) * f;
              if (pa.requires_grad) pa.grad[i * d + c] += diff;
              if (pb.requires_grad) pb.grad[j * d + c] -= diff;
            }
          }
        }
      });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  detail::require(shape_numel(shape) == x.numel(),
                  "reshape: cannot view " + shape_str(x.shape()) + " as " +
                      shape_str(shape));
  std::vector<T> out = x.values();
  return detail::make_result<T>(
      "reshape", std::move(shape), std::move(out), {x}, [](Node<T>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) {
          p.grad[i] += self.grad[i];
        }
      });
}

// Tiles a [d] vector into [n, d] rows. Backward sums over the tiled rows.
template <typename T>
Tensor<T> repeat_rows(const Tensor<T>& v, int64_t n) {
  detail::require(v.rank() == 1, "repeat_rows: input must be rank 1, got " +
                                     shape_str(v.shape()));
  detail::require(n >= 1, "repeat_rows: row count must be positive");
  const int64_t d = v.dim(0);
  std::vector<T> out(static_cast<size_t>(n * d));
  for (int64_t r = 0; r < n; ++r) {
    std::copy_n(v.values().data(), d, out.data() + r * d);
  }
  return detail::make_result<T>(
      "repeat_rows", {n, d}, std::move(out), {v}, [n, d](Node<T>& self) {
        auto& p = *self.parents[0];
        p.ensure_grad();
        for (int64_t r = 0; r < n; ++r) {
          const T* src = self.grad.data() + r * d;
          for (int64_t c = 0; c < d; ++c) p.grad[c] += src[c];
        }
      });
}

// ---------------------------------------------------------------------------
// Composites (built from registered ops; no backward rules of their own)

// Mean of every entry, as a rank-0 tensor.
template <typename T>
Tensor<T> mean_all(const Tensor<T>& x) {
  return mean_axis(reshape(x, {x.numel()}), 0);
}

// Affine map y = x W + b for row-major feature matrices.
template <typename T>
Tensor<T> affine(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  return add(matmul(x, w), b);
}

}  // namespace meshgrow::ad
