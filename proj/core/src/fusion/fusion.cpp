// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "semfuse/fusion/fusion.hpp"

#include "semfuse/errors.hpp"
#include "semfuse/numerics/ops.hpp"

namespace semfuse::fusion {

using num::Tensor;

template <typename T>
GatedFusion<T>::GatedFusion(std::size_t d_lm, std::size_t d_model, GateMode mode, num::Rng& rng)
    : mode_(mode), d_model_(d_model), align_(d_lm, d_model, false, rng) {
  if (mode == GateMode::kVector) gate_ = nn::Linear<T>(2 * d_model, d_model, true, rng);
  if (mode == GateMode::kScalar) gate_ = nn::Linear<T>(2 * d_model, 1, true, rng);
}

template <typename T>
Tensor<T> GatedFusion<T>::align(const Tensor<T>& z_llm) const {
  return align_.forward(z_llm);
}

template <typename T>
Tensor<T> GatedFusion<T>::gate(const Tensor<T>& aligned, const Tensor<T>& z) const {
  if (mode_ == GateMode::kNone) throw CapabilityError("additive fusion has no gate");
  if (aligned.shape() != z.shape()) {
    throw DimensionError("gate inputs differ: " + num::shape_str(aligned.shape()) + " vs " +
                         num::shape_str(z.shape()));
  }
  return num::sigmoid(gate_.forward(num::concat<T>({aligned, z}, z.rank() - 1)));
}

template <typename T>
Tensor<T> GatedFusion<T>::fuse(const Tensor<T>& aligned, const Tensor<T>& z, const Tensor<T>& g) {
  return num::add(num::mul(g, aligned), num::mul(num::one_minus(g), z));
}

template <typename T>
FusionOutput<T> GatedFusion<T>::forward(const Tensor<T>& z_llm, const Tensor<T>& z) const {
  FusionOutput<T> out;
  out.aligned = align(z_llm);
  if (mode_ == GateMode::kNone) {
    out.fused = num::add(out.aligned, z);
    return out;
  }
  if (forced_) {
    auto shape = z.shape();
    if (mode_ == GateMode::kScalar) shape.back() = 1;
    out.gate = Tensor<T>::full(shape, static_cast<T>(*forced_));
  } else {
    out.gate = gate(out.aligned, z);
  }
  out.fused = fuse(out.aligned, z, out.gate);
  return out;
}

template <typename T>
void GatedFusion<T>::collect(const std::string& prefix, nn::NamedParams<T>& out) const {
  align_.collect(prefix + ".align", out);
  if (mode_ != GateMode::kNone) gate_.collect(prefix + ".gate", out);
}

template class GatedFusion<float>;
template class GatedFusion<double>;

}  // namespace semfuse::fusion
