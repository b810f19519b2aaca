// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "semfuse/numerics/autograd.hpp"
#include "semfuse/numerics/ops.hpp"
#include "semfuse/variants/model.hpp"

namespace {

namespace num = semfuse::num;
namespace va = semfuse::variants;

// Forward pass of each variant on a batch of 8 windows, general preset
// shape (T_x = 336, T = 16, S = 8, d_model = 16) with the tiny LM.
void BM_VariantForward(benchmark::State& state) {
  const auto kind = va::all_variants()[static_cast<std::size_t>(state.range(0))];
  va::ModelSpec spec;
  auto model = va::build_model<float>(kind, spec, 1);
  num::Rng rng(2);
  auto x = num::Tensor<float>::zeros({8, spec.num_patches(), spec.patch.patch_len});
  rng.fill_uniform(x.mutable_values(), -1.0, 1.0);
  num::NoGradGuard guard;
  for (auto _ : state) {
    auto y = model->forward(x);
    benchmark::DoNotOptimize(y.values().data());
  }
  state.SetLabel(std::string(va::variant_name(kind)));
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_VariantForward)->DenseRange(0, 4)->Unit(benchmark::kMillisecond);

void BM_FusedTrainStep(benchmark::State& state) {
  va::ModelSpec spec;
  spec.history_len = 96;
  auto model = va::build_model<float>(va::VariantKind::kFused, spec, 1);
  num::Rng rng(3);
  auto x = num::Tensor<float>::zeros({8, spec.num_patches(), spec.patch.patch_len});
  rng.fill_uniform(x.mutable_values(), -1.0, 1.0);
  for (auto _ : state) {
    auto loss = num::mean(num::square(model->forward(x)));
    num::backward(loss);
    for (auto& p : model->trainable_parameters()) p.zero_grad();
  }
}
BENCHMARK(BM_FusedTrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
