// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "semfuse/backbone/backbone.hpp"
#include "semfuse/errors.hpp"
#include "semfuse/nn/layers.hpp"
#include "semfuse/numerics/autograd.hpp"
#include "semfuse/numerics/ops.hpp"
#include "support/gradcheck.hpp"

namespace {

namespace num = semfuse::num;
namespace nn = semfuse::nn;
namespace bb = semfuse::backbone;
using semfuse::testing::max_gradient_error;
using semfuse::testing::random_tensor;
using semfuse::testing::TensorD;
using semfuse::testing::weighted_sum;

constexpr double kGradTol = 1e-4;

// Plain triple loop, independent of the library kernels.
std::vector<double> reference_matmul(std::span<const double> a, std::span<const double> b,
                                     std::size_t m, std::size_t k, std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) c[i * n + j] += a[i * k + p] * b[p * n + j];
  return c;
}

bb::BackboneConfig tiny_config() {
  bb::BackboneConfig cfg;
  cfg.d_model = 8;
  cfg.heads = 2;
  cfg.layers = 2;
  cfg.fusion_after_layer = 1;
  cfg.dropout = 0.0;
  return cfg;
}

std::vector<TensorD> all_params(const bb::Backbone<double>& model) {
  nn::NamedParams<double> named;
  model.collect("backbone", named);
  std::vector<TensorD> out;
  for (auto& [n, t] : named) out.push_back(t);
  return out;
}

TEST(BackboneConfig, Validation) {
  EXPECT_NO_THROW(bb::BackboneConfig::general().validate());
  EXPECT_NO_THROW(bb::BackboneConfig::ili().validate());
  auto cfg = bb::BackboneConfig::general();
  cfg.heads = 3;
  EXPECT_THROW(cfg.validate(), semfuse::ConfigError);
  cfg = bb::BackboneConfig::general();
  cfg.fusion_after_layer = 3;
  EXPECT_THROW(cfg.validate(), semfuse::ConfigError);
  cfg.fusion_after_layer = 0;
  EXPECT_THROW(cfg.validate(), semfuse::ConfigError);
  cfg = bb::BackboneConfig::general();
  cfg.dropout = 1.0;
  EXPECT_THROW(cfg.validate(), semfuse::ConfigError);
}

TEST(EmbedPatches, ZeroProjectionGivesPositions) {
  num::Rng rng(1);
  bb::Backbone<double> model(tiny_config(), 4, 4, 6, rng);
  auto w = model.patch_weight().mutable_values();
  std::fill(w.begin(), w.end(), 0.0);
  auto x = random_tensor(rng, {1, 4, 4}, false);
  auto z = model.embed_patches(x);
  auto pos = model.positions().values();
  ASSERT_EQ(z.numel(), pos.size());
  for (std::size_t i = 0; i < pos.size(); ++i) EXPECT_EQ(z.values()[i], pos[i]);
}

TEST(EmbedPatches, ZeroInputGivesPositions) {
  num::Rng rng(2);
  bb::Backbone<double> model(tiny_config(), 4, 4, 6, rng);
  auto z = model.embed_patches(TensorD::zeros({1, 4, 4}));
  auto pos = model.positions().values();
  for (std::size_t i = 0; i < pos.size(); ++i) EXPECT_EQ(z.values()[i], pos[i]);
}

TEST(EmbedPatches, ProjectionMatchesReferenceMatmul) {
  num::Rng rng(3);
  bb::Backbone<double> model(tiny_config(), 5, 4, 6, rng);
  rng.fill_uniform(model.patch_weight().mutable_values(), -1, 1);
  auto x = random_tensor(rng, {1, 5, 4}, false);
  auto z = model.embed_patches(x);
  auto expect = reference_matmul(x.values(), model.patch_weight().values(), 5, 4, 8);
  auto pos = model.positions().values();
  for (std::size_t i = 0; i < expect.size(); ++i) {
    EXPECT_NEAR(z.values()[i] - pos[i], expect[i], 1e-12);
  }
}

TEST(EmbedPatches, PatchCountMismatchIsConfigError) {
  num::Rng rng(4);
  bb::Backbone<double> model(tiny_config(), 4, 4, 6, rng);
  EXPECT_THROW(model.embed_patches(TensorD::zeros({1, 5, 4})), semfuse::ConfigError);
}

TEST(EncoderLayer, ShapePreservedAcrossLayers) {
  num::Rng rng(5);
  auto cfg = bb::BackboneConfig::general();
  cfg.dropout = 0.0;
  bb::Backbone<double> model(cfg, 12, 16, 96, rng);
  auto z = model.embed_patches(random_tensor(rng, {3, 12, 16}, false));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    z = model.layer(l).forward(z);
    EXPECT_EQ(z.shape(), (num::Shape{3, 12, 16}));
  }
}

TEST(EncoderLayer, AttentionRowsSumToOne) {
  num::Rng rng(6);
  bb::Backbone<double> model(bb::BackboneConfig::general(), 12, 16, 96, rng);
  auto& attn = const_cast<nn::MultiHeadAttention<double>&>(model.layer(0).attention());
  rng.fill_uniform(attn.query().weight().mutable_values(), -1, 1);
  rng.fill_uniform(attn.key().weight().mutable_values(), -1, 1);
  attn.set_capture(true);
  model.layer(0).forward(random_tensor(rng, {2, 12, 16}, false));
  const auto& p = attn.captured();
  ASSERT_EQ(p.shape(), (num::Shape{2, 4, 12, 12}));
  for (std::size_t r = 0; r < p.numel() / 12; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < 12; ++j) s += p.values()[r * 12 + j];
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(EncoderLayer, SingleBlockGradientCheck) {
  num::Rng rng(7);
  nn::TransformerBlock<double> block(8, 2, 4, false, 0.0, rng);
  nn::NamedParams<double> named;
  block.collect("b", named);
  std::vector<TensorD> inputs{random_tensor(rng, {2, 3, 8})};
  for (auto& [n, t] : named) {
    rng.fill_uniform(t.mutable_values(), -0.5, 0.5);
    inputs.push_back(t);
  }
  auto f = [&](const std::vector<TensorD>& in) { return weighted_sum(block.forward(in[0])); };
  EXPECT_LT(max_gradient_error(f, inputs), kGradTol);
}

TEST(ForwardLower, ReturnsSecondLayerOutputUnderDefaults) {
  num::Rng rng(8);
  auto cfg = bb::BackboneConfig::general();
  cfg.dropout = 0.0;
  bb::Backbone<double> model(cfg, 12, 16, 96, rng);
  auto x = random_tensor(rng, {2, 12, 16}, false);
  auto manual = model.layer(1).forward(model.layer(0).forward(model.embed_patches(x)));
  auto lower = model.forward_lower(x);
  EXPECT_TRUE(std::equal(lower.values().begin(), lower.values().end(), manual.values().begin()));
}

TEST(ForwardLower, IdentityLayersPassEmbeddingThrough) {
  num::Rng rng(9);
  auto cfg = bb::BackboneConfig::general();
  bb::Backbone<double> model(cfg, 12, 16, 96, rng);
  for (std::size_t l = 0; l < cfg.layers; ++l) model.layer(l).make_identity();
  auto x = random_tensor(rng, {2, 12, 16}, false);
  auto z = model.embed_patches(x);
  auto lower = model.forward_lower(x);
  EXPECT_TRUE(std::equal(lower.values().begin(), lower.values().end(), z.values().begin()));
}

TEST(ForwardLower, Deterministic) {
  num::Rng rng(10);
  bb::Backbone<float> model(bb::BackboneConfig::general(), 12, 16, 96, rng);
  auto x = num::Tensor<float>::zeros({2, 12, 16});
  rng.fill_uniform(x.mutable_values(), -1, 1);
  auto a = model.forward_lower(x);
  auto b = model.forward_lower(x);
  EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
}

TEST(ForwardUpper, AppliesExactlyTheRemainingLayer) {
  num::Rng rng(11);
  auto cfg = bb::BackboneConfig::general();
  cfg.dropout = 0.0;
  bb::Backbone<double> model(cfg, 12, 16, 96, rng);
  auto z = random_tensor(rng, {2, 12, 16}, false);
  auto upper = model.forward_upper(z);
  auto manual = model.layer(2).forward(z);
  EXPECT_TRUE(std::equal(upper.values().begin(), upper.values().end(), manual.values().begin()));
}

TEST(ForwardUpper, SplitPipelineEqualsFullForward) {
  num::Rng rng(12);
  auto cfg = bb::BackboneConfig::general();
  cfg.dropout = 0.0;
  bb::Backbone<float> model(cfg, 12, 16, 96, rng);
  auto x = num::Tensor<float>::zeros({3, 12, 16});
  rng.fill_uniform(x.mutable_values(), -1, 1);
  auto split = model.forecast_head(model.forward_upper(model.forward_lower(x)));
  auto full = model.forward(x);
  EXPECT_TRUE(std::equal(split.values().begin(), split.values().end(), full.values().begin()));
}

TEST(ForecastHead, ZeroWeightsGiveBias) {
  num::Rng rng(13);
  bb::Backbone<double> model(tiny_config(), 4, 4, 6, rng);
  auto w = model.head().weight().mutable_values();
  std::fill(w.begin(), w.end(), 0.0);
  auto bias = model.head().bias().mutable_values();
  std::iota(bias.begin(), bias.end(), 1.0);
  auto y = model.forecast_head(random_tensor(rng, {2, 4, 8}, false));
  ASSERT_EQ(y.shape(), (num::Shape{2, 6}));
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(y.at({b, j}), static_cast<double>(j + 1));
}

TEST(ForecastHead, OutputLengthFollowsHorizon) {
  for (std::size_t horizon : {96u, 192u, 336u, 720u}) {
    num::Rng rng(14);
    bb::Backbone<float> model(bb::BackboneConfig::general(), 42, 16, horizon, rng);
    auto y = model.forward(num::Tensor<float>::zeros({1, 42, 16}));
    EXPECT_EQ(y.shape(), (num::Shape{1, horizon}));
  }
}

TEST(ForecastHead, GradientReachesPatchProjection) {
  num::Rng rng(15);
  bb::Backbone<double> model(tiny_config(), 4, 4, 6, rng);
  auto x = random_tensor(rng, {2, 4, 4}, false);
  auto y = random_tensor(rng, {2, 6}, false);
  num::backward(bb::mse_loss(model.forward(x), y));
  ASSERT_TRUE(model.patch_weight().has_grad());
  double norm = 0.0;
  for (double g : model.patch_weight().grad()) norm += g * g;
  EXPECT_GT(norm, 0.0);
}

TEST(MseLoss, Examples) {
  auto a = TensorD::from({2}, {0, 0});
  auto b = TensorD::from({2}, {3, 4});
  EXPECT_DOUBLE_EQ(bb::mse_loss(a, b).item(), 12.5);
  EXPECT_EQ(bb::mse_loss(b, b).item(), 0.0);
  EXPECT_THROW(bb::mse_loss(a, TensorD::zeros({3})), semfuse::ContractError);
}

TEST(MseLoss, QuadraticHomogeneity) {
  num::Rng rng(16);
  auto p = random_tensor(rng, {3, 7}, false);
  auto t = random_tensor(rng, {3, 7}, false);
  const double base = bb::mse_loss(p, t).item();
  for (double c : {0.5, 2.0, -3.0}) {
    auto pc = num::add(t, num::scale(num::sub(p, t), c));
    EXPECT_NEAR(bb::mse_loss(pc, t).item(), c * c * base, 1e-12);
  }
}

// Bidirectional attention: permuting the sequence permutes the output.
TEST(Attention, PermutationEquivariantWithoutPositions) {
  num::Rng rng(17);
  nn::MultiHeadAttention<double> attn(8, 2, false, rng);
  const std::size_t l = 6;
  auto x = random_tensor(rng, {1, l, 8}, false);
  std::vector<std::size_t> perm(l);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937 gen(3);
  std::shuffle(perm.begin(), perm.end(), gen);
  auto xp = TensorD::zeros({1, l, 8});
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t d = 0; d < 8; ++d) xp.mutable_values()[i * 8 + d] = x.at({0, perm[i], d});
  auto y = attn.forward(x);
  auto yp = attn.forward(xp);
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t d = 0; d < 8; ++d) EXPECT_NEAR(yp.at({0, i, d}), y.at({0, perm[i], d}), 1e-12);
}

TEST(Attention, SharedPrefixMatchesConcatenatedSequence) {
  num::Rng rng(18);
  nn::TransformerBlock<double> block(8, 2, 4, true, 0.0, rng);
  auto prefix = random_tensor(rng, {1, 5, 8}, false);
  auto body = random_tensor(rng, {3, 4, 8}, false);
  auto full = block.forward(
      num::concat<double>({num::broadcast_to(prefix, {3, 5, 8}), body}, 1));
  auto [hp, hb] = block.forward_with_prefix(prefix, body);
  auto tail = num::slice(full, 1, 5, 9);
  EXPECT_TRUE(std::equal(hb.values().begin(), hb.values().end(), tail.values().begin()));
  auto head = num::slice(full, 1, 0, 5);
  for (std::size_t i = 0; i < hp.numel(); ++i) EXPECT_EQ(hp.values()[i], head.values()[i]);
}

TEST(Attention, EmptyPrefixMatchesPlainForward) {
  num::Rng rng(19);
  nn::TransformerBlock<double> block(8, 2, 4, true, 0.0, rng);
  auto body = random_tensor(rng, {2, 4, 8}, false);
  auto full = block.forward(body);
  auto [hp, hb] = block.forward_with_prefix(TensorD::zeros({1, 0, 8}), body);
  EXPECT_TRUE(std::equal(hb.values().begin(), hb.values().end(), full.values().begin()));
}

TEST(Lora, RankValidation) {
  num::Rng rng(20);
  nn::Linear<double> lin(8, 6, true, rng);
  EXPECT_THROW(lin.attach_lora(6, 16, rng), semfuse::ConfigError);
  EXPECT_THROW(lin.attach_lora(0, 16, rng), semfuse::ConfigError);
  EXPECT_NO_THROW(lin.attach_lora(5, 16, rng));
  EXPECT_FALSE(lin.weight().requires_grad());
  EXPECT_TRUE(lin.lora().a.requires_grad());
}

TEST(Lora, ZeroInitAdapterIsExact) {
  num::Rng rng(21);
  nn::Linear<float> lin(16, 16, true, rng);
  auto x = num::Tensor<float>::zeros({3, 16});
  rng.fill_uniform(x.mutable_values(), -1, 1);
  auto before = lin.forward(x);
  lin.attach_lora(8, 16, rng);
  auto after = lin.forward(x);
  EXPECT_TRUE(std::equal(before.values().begin(), before.values().end(), after.values().begin()));
}

TEST(Lora, MergedWeightReproducesAdapterForward) {
  num::Rng rng(22);
  nn::Linear<float> lin(16, 12, true, rng);
  lin.attach_lora(4, 16, rng);
  rng.fill_uniform(lin.lora().b.mutable_values(), -0.5, 0.5);
  auto x = num::Tensor<float>::zeros({5, 16});
  rng.fill_uniform(x.mutable_values(), -1, 1);
  auto adapter = lin.forward(x);
  auto merged = num::linear(x, lin.merged_weight(), lin.bias());
  for (std::size_t i = 0; i < merged.numel(); ++i) {
    EXPECT_NEAR(merged.values()[i], adapter.values()[i], 1e-5);
  }
}

TEST(Backbone, EndToEndGradientCheck) {
  num::Rng rng(23);
  bb::Backbone<double> model(tiny_config(), 4, 4, 5, rng);
  auto params = all_params(model);
  for (auto& p : params) rng.fill_uniform(p.mutable_values(), -0.5, 0.5);
  auto x = random_tensor(rng, {2, 4, 4}, false);
  auto y = random_tensor(rng, {2, 5}, false);
  auto f = [&](const std::vector<TensorD>&) { return bb::mse_loss(model.forward(x), y); };
  EXPECT_LT(max_gradient_error(f, params), kGradTol);
}

TEST(Backbone, DropoutOnlyInTraining) {
  num::Rng rng(24);
  auto cfg = tiny_config();
  cfg.dropout = 0.5;
  bb::Backbone<double> model(cfg, 4, 4, 5, rng);
  auto x = random_tensor(rng, {2, 4, 4}, false);
  auto eval1 = model.forward(x);
  auto eval2 = model.forward(x, {});
  EXPECT_TRUE(std::equal(eval1.values().begin(), eval1.values().end(), eval2.values().begin()));
  num::Rng drop(1);
  auto train = model.forward(x, {true, &drop});
  EXPECT_FALSE(std::equal(train.values().begin(), train.values().end(), eval1.values().begin()));
  EXPECT_THROW(model.forward(x, {true, nullptr}), semfuse::ContractError);
}

TEST(Params, CopyMatchingTransfersValues) {
  num::Rng a_rng(25), b_rng(26);
  bb::Backbone<double> a(tiny_config(), 4, 4, 5, a_rng);
  bb::Backbone<double> b(tiny_config(), 4, 4, 5, b_rng);
  nn::NamedParams<double> pa, pb;
  a.collect("m", pa);
  b.collect("m", pb);
  EXPECT_EQ(nn::copy_matching(pa, pb), pa.size());
  auto x = random_tensor(a_rng, {1, 4, 4}, false);
  auto ya = a.forward(x), yb = b.forward(x);
  EXPECT_TRUE(std::equal(ya.values().begin(), ya.values().end(), yb.values().begin()));
}

}  // namespace
