// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "semfuse/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include "semfuse/errors.hpp"
#include "semfuse/numerics/random.hpp"

namespace semfuse::num {

namespace {

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
Tensor<T> make_op(Shape shape, std::vector<T> value, const char* op, std::vector<NodePtr<T>> inputs,
                  std::function<void(Node<T>&)> fn) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  const bool track = grad_mode_enabled() &&
                     std::any_of(inputs.begin(), inputs.end(),
                                 [](const NodePtr<T>& n) { return n->requires_grad; });
  if (track) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward_fn = std::move(fn);
  }
  return Tensor<T>(std::move(node));
}

// Flat index into `in` for every flat index of `out`, under trailing
// broadcasting. Empty result means the identity map.
std::vector<std::size_t> broadcast_map(const Shape& in, const Shape& out) {
  if (in == out) return {};
  const std::size_t n = shape_numel(out);
  const std::size_t rank = out.size();
  const std::size_t offset = rank - in.size();
  std::vector<std::size_t> in_stride(rank, 0);
  std::size_t stride = 1;
  for (std::size_t i = in.size(); i-- > 0;) {
    in_stride[i + offset] = in[i] == 1 ? 0 : stride;
    stride *= in[i];
  }
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t cur = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    map[flat] = cur;
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      cur += in_stride[d];
      if (idx[d] < out[d]) break;
      cur -= in_stride[d] * idx[d];
      idx[d] = 0;
    }
  }
  return map;
}

inline std::size_t mapped(const std::vector<std::size_t>& map, std::size_t i) {
  return map.empty() ? i : map[i];
}

enum class BinaryKind { kAdd, kSub, kMul };

template <typename T>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, BinaryKind kind) {
  Shape out = broadcast_shapes(a.shape(), b.shape());
  auto amap = std::make_shared<std::vector<std::size_t>>(broadcast_map(a.shape(), out));
  auto bmap = std::make_shared<std::vector<std::size_t>>(broadcast_map(b.shape(), out));
  const std::size_t n = shape_numel(out);
  std::vector<T> value(n);
  auto av = a.values();
  auto bv = b.values();
  switch (kind) {
    case BinaryKind::kAdd:
      for (std::size_t i = 0; i < n; ++i) value[i] = av[mapped(*amap, i)] + bv[mapped(*bmap, i)];
      break;
    case BinaryKind::kSub:
      for (std::size_t i = 0; i < n; ++i) value[i] = av[mapped(*amap, i)] - bv[mapped(*bmap, i)];
      break;
    case BinaryKind::kMul:
      for (std::size_t i = 0; i < n; ++i) value[i] = av[mapped(*amap, i)] * bv[mapped(*bmap, i)];
      break;
  }
  static constexpr const char* kNames[] = {"add", "sub", "mul"};
  return make_op<T>(std::move(out), std::move(value), kNames[static_cast<int>(kind)],
                    {a.node_ptr(), b.node_ptr()}, [amap, bmap, kind](Node<T>& self) {
                      auto& an = *self.inputs[0];
                      auto& bn = *self.inputs[1];
                      const auto& g = self.grad;
                      const std::size_t n = g.size();
                      if (an.requires_grad) {
                        auto& ga = an.grad_buffer();
                        if (kind == BinaryKind::kMul) {
                          for (std::size_t i = 0; i < n; ++i)
                            ga[mapped(*amap, i)] += g[i] * bn.value[mapped(*bmap, i)];
                        } else {
                          for (std::size_t i = 0; i < n; ++i) ga[mapped(*amap, i)] += g[i];
                        }
                      }
                      if (bn.requires_grad) {
                        auto& gb = bn.grad_buffer();
                        switch (kind) {
                          case BinaryKind::kAdd:
                            for (std::size_t i = 0; i < n; ++i) gb[mapped(*bmap, i)] += g[i];
                            break;
                          case BinaryKind::kSub:
                            for (std::size_t i = 0; i < n; ++i) gb[mapped(*bmap, i)] -= g[i];
                            break;
                          case BinaryKind::kMul:
                            for (std::size_t i = 0; i < n; ++i)
                              gb[mapped(*bmap, i)] += g[i] * an.value[mapped(*amap, i)];
                            break;
                        }
                      }
                    });
}

// Unary op: forward f(x); derivative expressed via (x, y).
template <typename T, typename F, typename D>
Tensor<T> unary(const Tensor<T>& x, const char* name, F f, D dfdx) {
  const auto xv = x.values();
  std::vector<T> value(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) value[i] = f(xv[i]);
  return make_op<T>(x.shape(), std::move(value), name, {x.node_ptr()}, [dfdx](Node<T>& self) {
    auto& in = *self.inputs[0];
    auto& gi = in.grad_buffer();
    for (std::size_t i = 0; i < gi.size(); ++i) {
      gi[i] += self.grad[i] * dfdx(in.value[i], self.value[i]);
    }
  });
}

template <typename T>
constexpr T kGeluC = T(0.7978845608028654);  // sqrt(2/pi)
template <typename T>
constexpr T kGeluA = T(0.044715);

}  // namespace

Mask Mask::causal(std::size_t queries, std::size_t keys, std::size_t offset) {
  Mask m;
  m.shape = {queries, keys};
  m.masked.assign(queries * keys, 0);
  for (std::size_t q = 0; q < queries; ++q) {
    for (std::size_t k = q + offset + 1; k < keys; ++k) m.masked[q * keys + k] = 1;
  }
  return m;
}

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw DimensionError("cannot broadcast shapes " + shape_str(a) + " and " + shape_str(b));
    }
    out[i] = da == 1 ? db : da;
  }
  return out;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw DimensionError("matmul needs rank >= 2 operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(a.rank() - 2);
  const std::size_t k = a.dim(a.rank() - 1);
  const std::size_t kb = b.dim(b.rank() - 2);
  const std::size_t n = b.dim(b.rank() - 1);
  const bool shared_b = b.rank() == 2;
  bool ok = k == kb;
  if (!shared_b) {
    ok = ok && a.rank() == b.rank() &&
         std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin());
  }
  if (!ok) {
    throw DimensionError("matmul shape mismatch: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  Shape out(a.shape().begin(), a.shape().end() - 2);
  const std::size_t batch = shape_numel(out);
  out.push_back(m);
  out.push_back(n);
  std::vector<T> value(batch * m * n, T(0));
  const T* av = a.values().data();
  const T* bv = b.values().data();
  for (std::size_t s = 0; s < batch; ++s) {
    const T* A = av + s * m * k;
    const T* B = bv + (shared_b ? 0 : s * k * n);
    T* C = value.data() + s * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      T* crow = C + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const T aip = A[i * k + p];
        const T* brow = B + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  }
  return make_op<T>(std::move(out), std::move(value), "matmul", {a.node_ptr(), b.node_ptr()},
                    [batch, m, k, n, shared_b](Node<T>& self) {
                      auto& an = *self.inputs[0];
                      auto& bn = *self.inputs[1];
                      const T* G = self.grad.data();
                      if (an.requires_grad) {
                        // gA = G B^T as row updates against B^T [n, k].
                        T* gA = an.grad_buffer().data();
                        std::vector<T> bt(k * n), acc(k);
                        for (std::size_t s = 0; s < batch; ++s) {
                          const T* B = bn.value.data() + (shared_b ? 0 : s * k * n);
                          if (s == 0 || !shared_b) {
                            for (std::size_t p = 0; p < k; ++p)
                              for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = B[p * n + j];
                          }
                          for (std::size_t i = 0; i < m; ++i) {
                            const T* grow = G + (s * m + i) * n;
                            T* garow = gA + (s * m + i) * k;
                            std::fill(acc.begin(), acc.end(), T(0));
                            for (std::size_t j = 0; j < n; ++j) {
                              const T g = grow[j];
                              const T* btrow = bt.data() + j * k;
                              for (std::size_t p = 0; p < k; ++p) acc[p] += g * btrow[p];
                            }
                            for (std::size_t p = 0; p < k; ++p) garow[p] += acc[p];
                          }
                        }
                      }
                      if (bn.requires_grad) {
                        T* gB = bn.grad_buffer().data();
                        for (std::size_t s = 0; s < batch; ++s) {
                          const T* A = an.value.data() + s * m * k;
                          T* GB = gB + (shared_b ? 0 : s * k * n);
                          for (std::size_t i = 0; i < m; ++i) {
                            const T* grow = G + (s * m + i) * n;
                            for (std::size_t p = 0; p < k; ++p) {
                              const T aip = A[i * k + p];
                              T* gbrow = GB + p * n;
                              for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
                            }
                          }
                        }
                      }
                    });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  auto y = matmul(x, weight);
  return bias.defined() ? add(y, bias) : y;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinaryKind::kAdd);
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinaryKind::kSub);
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, BinaryKind::kMul);
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(
      x, "sigmoid",
      [](T v) {
        // Split on sign so exp never overflows.
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  return unary(
      x, "gelu",
      [](T v) {
        const T t = std::tanh(kGeluC<T> * (v + kGeluA<T> * v * v * v));
        return T(0.5) * v * (T(1) + t);
      },
      [](T v, T) {
        const T t = std::tanh(kGeluC<T> * (v + kGeluA<T> * v * v * v));
        const T dt = (T(1) - t * t) * kGeluC<T> * (T(1) + T(3) * kGeluA<T> * v * v);
        return T(0.5) * (T(1) + t) + T(0.5) * v * dt;
      });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary(
      x, "tanh", [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary(
      x, "exp", [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary(
      x, "square", [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  return unary(
      x, "scale", [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> one_minus(const Tensor<T>& x) {
  return unary(
      x, "one_minus", [](T v) { return T(1) - v; }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> elementwise(ElementwiseOp kind, std::span<const Tensor<T>> args) {
  const bool binary_kind =
      kind == ElementwiseOp::kAdd || kind == ElementwiseOp::kSub || kind == ElementwiseOp::kMul;
  if (args.size() != (binary_kind ? 2u : 1u)) {
    throw ContractError("elementwise: wrong number of arguments");
  }
  switch (kind) {
    case ElementwiseOp::kAdd: return add(args[0], args[1]);
    case ElementwiseOp::kSub: return sub(args[0], args[1]);
    case ElementwiseOp::kMul: return mul(args[0], args[1]);
    case ElementwiseOp::kSigmoid: return sigmoid(args[0]);
    case ElementwiseOp::kGelu: return gelu(args[0]);
    case ElementwiseOp::kTanh: return tanh(args[0]);
    case ElementwiseOp::kExp: return exp(args[0]);
    case ElementwiseOp::kSquare: return square(args[0]);
  }
  throw ContractError("elementwise: unknown op");
}

template <typename T>
Tensor<T> softmax_lastdim(const Tensor<T>& x, const Mask* mask) {
  if (x.rank() == 0) throw DimensionError("softmax of a scalar");
  const std::size_t cols = x.shape().back();
  const std::size_t rows = cols == 0 ? 0 : x.numel() / cols;
  std::size_t mask_n = 0;
  if (mask != nullptr) {
    const auto& ms = mask->shape;
    if (ms.size() > x.rank() || ms.empty() ||
        !std::equal(ms.begin(), ms.end(), x.shape().end() - ms.size())) {
      throw DimensionError("mask shape " + shape_str(ms) + " does not match trailing dims of " +
                           shape_str(x.shape()));
    }
    mask_n = mask->masked.size();
  }
  const auto xv = x.values();
  std::vector<T> value(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * cols;
    const T* xr = xv.data() + base;
    T* out = value.data() + base;
    const std::uint8_t* mrow = mask ? mask->masked.data() + base % mask_n : nullptr;
    // Masked positions get exactly zero weight.
    T mx = -std::numeric_limits<T>::infinity();
    bool any_open = false;
    for (std::size_t c = 0; c < cols; ++c) {
      if (mrow && mrow[c]) continue;
      any_open = true;
      mx = std::max(mx, xr[c]);
    }
    if (!any_open) {
      throw SingularRowError("softmax row " + std::to_string(r) + " has every position masked");
    }
    T total = T(0);
    for (std::size_t c = 0; c < cols; ++c) {
      out[c] = (mrow && mrow[c]) ? T(0) : std::exp(xr[c] - mx);
      total += out[c];
    }
    for (std::size_t c = 0; c < cols; ++c) out[c] /= total;
  }
  return make_op<T>(x.shape(), std::move(value), "softmax", {x.node_ptr()},
                    [rows, cols](Node<T>& self) {
                      auto& gi = self.inputs[0]->grad_buffer();
                      for (std::size_t r = 0; r < rows; ++r) {
                        const std::size_t base = r * cols;
                        T dot = T(0);
                        for (std::size_t c = 0; c < cols; ++c)
                          dot += self.grad[base + c] * self.value[base + c];
                        for (std::size_t c = 0; c < cols; ++c)
                          gi[base + c] += self.value[base + c] * (self.grad[base + c] - dot);
                      }
                    });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  const std::size_t d = x.shape().back();
  if (gain.numel() != d || bias.numel() != d) {
    throw DimensionError("layer_norm gain/bias must match last dim of " + shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / d;
  auto xhat = std::make_shared<std::vector<T>>(x.numel());
  auto rstd = std::make_shared<std::vector<T>>(rows);
  std::vector<T> value(x.numel());
  const auto xv = x.values();
  const auto gv = gain.values();
  const auto bv = bias.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv.data() + r * d;
    T mu = T(0);
    for (std::size_t c = 0; c < d; ++c) mu += row[c];
    mu /= static_cast<T>(d);
    T var = T(0);
    for (std::size_t c = 0; c < d; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<T>(d);
    const T rs = T(1) / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t c = 0; c < d; ++c) {
      const T h = (row[c] - mu) * rs;
      (*xhat)[r * d + c] = h;
      value[r * d + c] = h * gv[c] + bv[c];
    }
  }
  return make_op<T>(
      x.shape(), std::move(value), "layer_norm", {x.node_ptr(), gain.node_ptr(), bias.node_ptr()},
      [xhat, rstd, rows, d](Node<T>& self) {
        auto& xn = *self.inputs[0];
        auto& gn = *self.inputs[1];
        auto& bn = *self.inputs[2];
        const T* G = self.grad.data();
        if (gn.requires_grad) {
          auto& gg = gn.grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < d; ++c) gg[c] += G[r * d + c] * (*xhat)[r * d + c];
        }
        if (bn.requires_grad) {
          auto& gb = bn.grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < d; ++c) gb[c] += G[r * d + c];
        }
        if (xn.requires_grad) {
          auto& gx = xn.grad_buffer();
          const T inv_d = T(1) / static_cast<T>(d);
          for (std::size_t r = 0; r < rows; ++r) {
            T mean_dh = T(0);
            T mean_dh_h = T(0);
            for (std::size_t c = 0; c < d; ++c) {
              const T dh = G[r * d + c] * gn.value[c];
              mean_dh += dh;
              mean_dh_h += dh * (*xhat)[r * d + c];
            }
            mean_dh *= inv_d;
            mean_dh_h *= inv_d;
            for (std::size_t c = 0; c < d; ++c) {
              const T dh = G[r * d + c] * gn.value[c];
              gx[r * d + c] += (*rstd)[r] * (dh - mean_dh - (*xhat)[r * d + c] * mean_dh_h);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, Rng& rng, bool training) {
  if (p < 0.0 || p >= 1.0) throw ContractError("dropout probability must be in [0, 1)");
  if (!training || p == 0.0) return x;
  const T keep_scale = T(1.0 / (1.0 - p));
  auto keep = std::make_shared<std::vector<T>>(x.numel());
  std::vector<T> value(x.numel());
  const auto xv = x.values();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    (*keep)[i] = rng.uniform() < p ? T(0) : keep_scale;
    value[i] = xv[i] * (*keep)[i];
  }
  return make_op<T>(x.shape(), std::move(value), "dropout", {x.node_ptr()}, [keep](Node<T>& self) {
    auto& gi = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += self.grad[i] * (*keep)[i];
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T total = T(0);
  for (auto v : x.values()) total += v;
  return make_op<T>({}, {total}, "sum", {x.node_ptr()}, [](Node<T>& self) {
    auto& gi = self.inputs[0]->grad_buffer();
    for (auto& g : gi) g += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.numel() == 0) throw ContractError("mean of an empty tensor");
  const T inv = T(1) / static_cast<T>(x.numel());
  T total = T(0);
  for (auto v : x.values()) total += v;
  return make_op<T>({}, {total * inv}, "mean", {x.node_ptr()}, [inv](Node<T>& self) {
    auto& gi = self.inputs[0]->grad_buffer();
    for (auto& g : gi) g += self.grad[0] * inv;
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  std::vector<T> value(x.values().begin(), x.values().end());
  return make_op<T>(std::move(shape), std::move(value), "reshape", {x.node_ptr()},
                    [](Node<T>& self) { self.inputs[0]->accumulate_grad(self.grad); });
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& order) {
  const std::size_t rank = x.rank();
  if (order.size() != rank) throw DimensionError("permute order has wrong rank");
  std::vector<bool> seen(rank, false);
  for (auto o : order) {
    if (o >= rank || seen[o]) throw DimensionError("permute order is not a permutation");
    seen[o] = true;
  }
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_stride[i - 1] = in_stride[i] * x.dim(i);
  Shape out(rank);
  std::vector<std::size_t> stride(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    out[i] = x.dim(order[i]);
    stride[i] = in_stride[order[i]];
  }
  const std::size_t n = x.numel();
  auto src = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t cur = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    (*src)[flat] = cur;
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      cur += stride[d];
      if (idx[d] < out[d]) break;
      cur -= stride[d] * idx[d];
      idx[d] = 0;
    }
  }
  std::vector<T> value(n);
  const auto xv = x.values();
  for (std::size_t i = 0; i < n; ++i) value[i] = xv[(*src)[i]];
  return make_op<T>(std::move(out), std::move(value), "permute", {x.node_ptr()},
                    [src](Node<T>& self) {
                      auto& gi = self.inputs[0]->grad_buffer();
                      for (std::size_t i = 0; i < src->size(); ++i) gi[(*src)[i]] += self.grad[i];
                    });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  if (x.rank() < 2) throw DimensionError("transpose needs rank >= 2");
  std::vector<std::size_t> order(x.rank());
  std::iota(order.begin(), order.end(), 0);
  std::swap(order[x.rank() - 1], order[x.rank() - 2]);
  return permute(x, order);
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t dim) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  const Shape& first = parts.front().shape();
  if (dim >= first.size()) throw DimensionError("concat dim out of range");
  Shape out = first;
  out[dim] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == dim || s[i] == first[i];
    if (!ok) {
      throw DimensionError("concat shape mismatch: " + shape_str(first) + " vs " + shape_str(s));
    }
    out[dim] += s[dim];
  }
  std::size_t outer = 1;
  for (std::size_t i = 0; i < dim; ++i) outer *= first[i];
  std::size_t inner = 1;
  for (std::size_t i = dim + 1; i < first.size(); ++i) inner *= first[i];
  const std::size_t out_row = out[dim] * inner;
  std::vector<T> value(shape_numel(out));
  std::vector<std::size_t> chunk;
  std::vector<NodePtr<T>> inputs;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t c = p.dim(dim) * inner;
    const auto pv = p.values();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pv.begin() + o * c, c, value.begin() + o * out_row + offset);
    }
    chunk.push_back(c);
    inputs.push_back(p.node_ptr());
    offset += c;
  }
  return make_op<T>(std::move(out), std::move(value), "concat", std::move(inputs),
                    [chunk, outer, out_row](Node<T>& self) {
                      std::size_t off = 0;
                      for (std::size_t i = 0; i < self.inputs.size(); ++i) {
                        auto& in = *self.inputs[i];
                        const std::size_t c = chunk[i];
                        if (in.requires_grad) {
                          auto& gi = in.grad_buffer();
                          for (std::size_t o = 0; o < outer; ++o)
                            for (std::size_t j = 0; j < c; ++j)
                              gi[o * c + j] += self.grad[o * out_row + off + j];
                        }
                        off += c;
                      }
                    });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t dim, std::size_t begin, std::size_t end) {
  if (dim >= x.rank() || begin > end || end > x.dim(dim)) {
    throw DimensionError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range on dim " + std::to_string(dim) + " of " +
                         shape_str(x.shape()));
  }
  std::size_t outer = 1;
  for (std::size_t i = 0; i < dim; ++i) outer *= x.dim(i);
  std::size_t inner = 1;
  for (std::size_t i = dim + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const std::size_t in_row = x.dim(dim) * inner;
  const std::size_t c = (end - begin) * inner;
  const std::size_t off = begin * inner;
  Shape out = x.shape();
  out[dim] = end - begin;
  std::vector<T> value(outer * c);
  const auto xv = x.values();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xv.begin() + o * in_row + off, c, value.begin() + o * c);
  }
  return make_op<T>(std::move(out), std::move(value), "slice", {x.node_ptr()},
                    [outer, in_row, c, off](Node<T>& self) {
                      auto& gi = self.inputs[0]->grad_buffer();
                      for (std::size_t o = 0; o < outer; ++o)
                        for (std::size_t j = 0; j < c; ++j)
                          gi[o * in_row + off + j] += self.grad[o * c + j];
                    });
}

template <typename T>
Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape) {
  if (broadcast_shapes(x.shape(), shape) != shape) {
    throw DimensionError("cannot broadcast " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  auto map = std::make_shared<std::vector<std::size_t>>(broadcast_map(x.shape(), shape));
  const std::size_t n = shape_numel(shape);
  std::vector<T> value(n);
  const auto xv = x.values();
  for (std::size_t i = 0; i < n; ++i) value[i] = xv[mapped(*map, i)];
  return make_op<T>(shape, std::move(value), "broadcast_to", {x.node_ptr()},
                    [map](Node<T>& self) {
                      auto& gi = self.inputs[0]->grad_buffer();
                      for (std::size_t i = 0; i < self.grad.size(); ++i)
                        gi[mapped(*map, i)] += self.grad[i];
                    });
}

template <typename T>
Tensor<T> embedding(const Tensor<T>& table, std::span<const std::int64_t> ids) {
  if (table.rank() != 2) throw DimensionError("embedding table must be rank 2");
  const std::size_t vocab = table.dim(0);
  const std::size_t d = table.dim(1);
  auto rows = std::make_shared<std::vector<std::size_t>>();
  rows->reserve(ids.size());
  for (auto id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw DimensionError("token id " + std::to_string(id) + " outside vocabulary of " +
                           std::to_string(vocab));
    }
    rows->push_back(static_cast<std::size_t>(id));
  }
  std::vector<T> value(rows->size() * d);
  const auto tv = table.values();
  for (std::size_t i = 0; i < rows->size(); ++i) {
    std::copy_n(tv.begin() + (*rows)[i] * d, d, value.begin() + i * d);
  }
  return make_op<T>({rows->size(), d}, std::move(value), "embedding", {table.node_ptr()},
                    [rows, d](Node<T>& self) {
                      auto& gi = self.inputs[0]->grad_buffer();
                      for (std::size_t i = 0; i < rows->size(); ++i)
                        for (std::size_t c = 0; c < d; ++c)
                          gi[(*rows)[i] * d + c] += self.grad[i * d + c];
                    });
}

#define SEMFUSE_INSTANTIATE_OPS(T)                                                         \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> sigmoid(const Tensor<T>&);                                            \
  template Tensor<T> gelu(const Tensor<T>&);                                               \
  template Tensor<T> tanh(const Tensor<T>&);                                               \
  template Tensor<T> exp(const Tensor<T>&);                                                \
  template Tensor<T> square(const Tensor<T>&);                                             \
  template Tensor<T> scale(const Tensor<T>&, T);                                           \
  template Tensor<T> one_minus(const Tensor<T>&);                                          \
  template Tensor<T> elementwise(ElementwiseOp, std::span<const Tensor<T>>);               \
  template Tensor<T> softmax_lastdim(const Tensor<T>&, const Mask*);                       \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);  \
  template Tensor<T> dropout(const Tensor<T>&, double, Rng&, bool);                        \
  template Tensor<T> sum(const Tensor<T>&);                                                \
  template Tensor<T> mean(const Tensor<T>&);                                               \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                     \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<std::size_t>&);           \
  template Tensor<T> transpose(const Tensor<T>&);                                          \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                   \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);       \
  template Tensor<T> broadcast_to(const Tensor<T>&, const Shape&);                         \
  template Tensor<T> embedding(const Tensor<T>&, std::span<const std::int64_t>);

SEMFUSE_INSTANTIATE_OPS(float)
SEMFUSE_INSTANTIATE_OPS(double)

#undef SEMFUSE_INSTANTIATE_OPS

}  // namespace semfuse::num
