// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "semfuse/numerics/tensor.hpp"

namespace semfuse::num {

class Rng;

/// Boolean mask; `true` marks a position excluded from the softmax.
/// Its shape must equal the trailing dimensions of the masked tensor.
struct Mask {
  Shape shape;
  std::vector<std::uint8_t> masked;

  /// Lower-triangular causal mask of shape [queries, keys]. Query i may see
  /// keys j <= i + offset (offset = number of keys that precede query 0).
  static Mask causal(std::size_t queries, std::size_t keys, std::size_t offset = 0);
};

enum class ElementwiseOp { kAdd, kSub, kMul, kSigmoid, kGelu, kTanh, kExp, kSquare };

// Linear algebra.

/// a: [..., m, k]; b: [k, n] (shared) or [..., k, n] with identical leading dims.
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// x·W (+ b). W is stored [in, out].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias = {});

// Elementwise with numpy-style trailing broadcasting.

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
/// tanh approximation.
template <typename T> Tensor<T> gelu(const Tensor<T>& x);
template <typename T> Tensor<T> tanh(const Tensor<T>& x);
template <typename T> Tensor<T> exp(const Tensor<T>& x);
template <typename T> Tensor<T> square(const Tensor<T>& x);
template <typename T> Tensor<T> scale(const Tensor<T>& x, T factor);
/// 1 - x
template <typename T> Tensor<T> one_minus(const Tensor<T>& x);

/// Dispatch by kind; binary kinds take two arguments, unary kinds one.
template <typename T>
Tensor<T> elementwise(ElementwiseOp kind, std::span<const Tensor<T>> args);

// Normalization.

/// Softmax over the last dimension. Masked positions get an additive -1e9
/// and come out exactly zero. Throws SingularRowError when a row is fully masked.
template <typename T>
Tensor<T> softmax_lastdim(const Tensor<T>& x, const Mask* mask = nullptr);

/// Normalizes the last dimension with population variance, then gain/bias.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = T(1e-5));

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, Rng& rng, bool training);

// Reductions.

template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);

// Shape manipulation. All of these copy.

template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T> Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& order);
/// Swaps the last two dimensions.
template <typename T> Tensor<T> transpose(const Tensor<T>& x);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t dim);
template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t dim, std::size_t begin, std::size_t end);
template <typename T> Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape);
/// Rows of `table` ([vocab, d]) selected by `ids`; result [ids.size(), d].
template <typename T>
Tensor<T> embedding(const Tensor<T>& table, std::span<const std::int64_t> ids);

/// Broadcast result shape of two operand shapes; throws DimensionError.
Shape broadcast_shapes(const Shape& a, const Shape& b);

}  // namespace semfuse::num
