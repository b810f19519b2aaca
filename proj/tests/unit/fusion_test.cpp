// Copyright 2026 The semfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "semfuse/errors.hpp"
#include "semfuse/fusion/fusion.hpp"
#include "semfuse/numerics/autograd.hpp"
#include "semfuse/numerics/ops.hpp"
#include "support/gradcheck.hpp"

namespace {

namespace num = semfuse::num;
namespace fu = semfuse::fusion;
using semfuse::testing::max_gradient_error;
using semfuse::testing::random_tensor;
using semfuse::testing::TensorD;
using semfuse::testing::weighted_sum;

void zero_fill(TensorD& t) {
  auto v = t.mutable_values();
  std::fill(v.begin(), v.end(), 0.0);
}

TEST(Fusion, AlignZeroWeightsGiveZero) {
  num::Rng rng(1);
  fu::GatedFusion<double> f(32, 8, fu::GateMode::kVector, rng);
  zero_fill(f.align_map().weight());
  auto out = f.align(random_tensor(rng, {2, 5, 32}, false));
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Fusion, AlignShapeUnderDefaults) {
  num::Rng rng(2);
  fu::GatedFusion<float> f(768, 16, fu::GateMode::kVector, rng);
  auto x = num::Tensor<float>::zeros({1, 42, 768});
  EXPECT_EQ(f.align(x).shape(), (num::Shape{1, 42, 16}));
  EXPECT_FALSE(f.align_map().bias());
}

TEST(Fusion, GateIsHalfWithZeroParameters) {
  num::Rng rng(3);
  fu::GatedFusion<double> f(8, 4, fu::GateMode::kVector, rng);
  zero_fill(f.gate_map().weight());
  zero_fill(f.gate_map().bias());
  auto g = f.gate(random_tensor(rng, {3, 4}, false), random_tensor(rng, {3, 4}, false));
  for (double v : g.values()) EXPECT_EQ(v, 0.5);
}

TEST(Fusion, GateSaturatesWithLargeBias) {
  num::Rng rng(4);
  fu::GatedFusion<double> f(8, 4, fu::GateMode::kVector, rng);
  zero_fill(f.gate_map().weight());
  auto b = f.gate_map().bias().mutable_values();
  std::fill(b.begin(), b.end(), 20.0);
  auto g = f.gate(random_tensor(rng, {2, 4}, false), random_tensor(rng, {2, 4}, false));
  for (double v : g.values()) {
    EXPECT_NEAR(v, 1.0, 1e-8);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Fusion, GateInOpenUnitInterval) {
  num::Rng rng(5);
  fu::GatedFusion<double> f(8, 4, fu::GateMode::kVector, rng);
  for (int trial = 0; trial < 1000; ++trial) {
    auto a = random_tensor(rng, {1, 4}, false, -5.0, 5.0);
    auto z = random_tensor(rng, {1, 4}, false, -5.0, 5.0);
    auto g = f.gate(a, z);
    for (double v : g.values()) {
      ASSERT_GT(v, 0.0);
      ASSERT_LT(v, 1.0);
    }
  }
}

TEST(Fusion, ForcedGateEndpoints) {
  num::Rng rng(6);
  fu::GatedFusion<double> f(8, 4, fu::GateMode::kVector, rng);
  auto llm = random_tensor(rng, {2, 3, 8}, false);
  auto z = random_tensor(rng, {2, 3, 4}, false);

  f.force_gate(0.0);
  auto zero = f.forward(llm, z);
  auto zv = z.values();
  auto fv0 = zero.fused.values();
  ASSERT_EQ(fv0.size(), zv.size());
  for (std::size_t i = 0; i < zv.size(); ++i) EXPECT_EQ(fv0[i], zv[i]);

  f.force_gate(1.0);
  auto one = f.forward(llm, z);
  auto av = one.aligned.values();
  auto fv1 = one.fused.values();
  for (std::size_t i = 0; i < av.size(); ++i) EXPECT_EQ(fv1[i], av[i]);

  f.force_gate(0.5);
  auto half = f.forward(llm, z);
  auto fvh = half.fused.values();
  for (std::size_t i = 0; i < av.size(); ++i) EXPECT_EQ(fvh[i], 0.5 * (av[i] + zv[i]));

  f.force_gate(std::nullopt);
  EXPECT_FALSE(f.forced_gate().has_value());
}

TEST(Fusion, AdditiveEqualsTwiceHalfGate) {
  num::Rng rng(7);
  fu::GatedFusion<double> gated(8, 4, fu::GateMode::kVector, rng);
  fu::GatedFusion<double> added(8, 4, fu::GateMode::kNone, rng);
  auto gw = gated.align_map().weight().values();
  auto aw = added.align_map().weight().mutable_values();
  std::copy(gw.begin(), gw.end(), aw.begin());
  gated.force_gate(0.5);
  auto llm = random_tensor(rng, {2, 3, 8}, false);
  auto z = random_tensor(rng, {2, 3, 4}, false);
  auto h = gated.forward(llm, z).fused;
  auto s = added.forward(llm, z);
  EXPECT_FALSE(s.gate);
  auto hv = h.values();
  auto sv = s.fused.values();
  for (std::size_t i = 0; i < hv.size(); ++i) EXPECT_EQ(sv[i], 2.0 * hv[i]);
}

TEST(Fusion, Betweenness) {
  num::Rng rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    auto a = random_tensor(rng, {6}, false, -3.0, 3.0);
    auto b = random_tensor(rng, {6}, false, -3.0, 3.0);
    auto g = random_tensor(rng, {6}, false, 0.0, 1.0);
    auto out = fu::GatedFusion<double>::fuse(a, b, g);
    auto av = a.values();
    auto bv = b.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) {
      ASSERT_GE(ov[i], std::min(av[i], bv[i]));
      ASSERT_LE(ov[i], std::max(av[i], bv[i]));
    }
  }
}

TEST(Fusion, BetweennessWithFloatGate) {
  num::Rng rng(9);
  fu::GatedFusion<float> f(6, 6, fu::GateMode::kVector, rng);
  for (int trial = 0; trial < 1000; ++trial) {
    auto a = num::Tensor<float>::zeros({1, 6});
    auto z = num::Tensor<float>::zeros({1, 6});
    rng.fill_uniform(a.mutable_values(), -3.0, 3.0);
    rng.fill_uniform(z.mutable_values(), -3.0, 3.0);
    auto g = f.gate(a, z);
    auto out = fu::GatedFusion<float>::fuse(a, z, g);
    auto av = a.values();
    auto zv = z.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) {
      ASSERT_GE(ov[i], std::min(av[i], zv[i]));
      ASSERT_LE(ov[i], std::max(av[i], zv[i]));
    }
  }
}

TEST(Fusion, GradientReachesBothBranches) {
  num::Rng rng(10);
  fu::GatedFusion<double> f(6, 4, fu::GateMode::kVector, rng);
  auto llm = random_tensor(rng, {2, 3, 6});
  auto z = random_tensor(rng, {2, 3, 4});
  auto out = f.forward(llm, z);
  num::backward(weighted_sum(out.fused));
  auto nonzero = [](const TensorD& t) {
    auto g = t.grad();
    return std::any_of(g.begin(), g.end(), [](double v) { return v != 0.0; });
  };
  ASSERT_TRUE(llm.has_grad());
  ASSERT_TRUE(z.has_grad());
  EXPECT_TRUE(nonzero(llm));
  EXPECT_TRUE(nonzero(z));
  EXPECT_TRUE(nonzero(f.align_map().weight()));
  EXPECT_TRUE(nonzero(f.gate_map().weight()));
}

TEST(Fusion, GradientCheckVectorAndScalar) {
  for (auto mode : {fu::GateMode::kVector, fu::GateMode::kScalar, fu::GateMode::kNone}) {
    num::Rng rng(11);
    fu::GatedFusion<double> f(5, 3, mode, rng);
    semfuse::nn::NamedParams<double> named;
    f.collect("fusion", named);
    std::vector<TensorD> inputs{random_tensor(rng, {2, 4, 5}), random_tensor(rng, {2, 4, 3})};
    for (auto& [n, t] : named) inputs.push_back(t);
    auto fn = [&](const std::vector<TensorD>& in) {
      return weighted_sum(f.forward(in[0], in[1]).fused);
    };
    EXPECT_LT(max_gradient_error(fn, inputs), 1e-4) << static_cast<int>(mode);
  }
}

TEST(Fusion, ScalarGateBroadcastsOverFeatures) {
  num::Rng rng(12);
  fu::GatedFusion<double> f(8, 4, fu::GateMode::kScalar, rng);
  auto llm = random_tensor(rng, {2, 3, 8}, false);
  auto z = random_tensor(rng, {2, 3, 4}, false);
  auto out = f.forward(llm, z);
  EXPECT_EQ(out.gate.shape(), (num::Shape{2, 3, 1}));
  EXPECT_EQ(out.fused.shape(), z.shape());
  auto gv = out.gate.values();
  auto av = out.aligned.values();
  auto zv = z.values();
  auto fv = out.fused.values();
  for (std::size_t p = 0; p < 6; ++p) {
    for (std::size_t j = 0; j < 4; ++j) {
      const std::size_t i = p * 4 + j;
      EXPECT_DOUBLE_EQ(fv[i], gv[p] * av[i] + (1.0 - gv[p]) * zv[i]);
    }
  }
}

TEST(Fusion, ParameterNames) {
  num::Rng rng(13);
  auto names = [&](fu::GateMode mode) {
    fu::GatedFusion<float> f(8, 4, mode, rng);
    semfuse::nn::NamedParams<float> named;
    f.collect("fusion", named);
    std::vector<std::string> out;
    for (auto& [n, t] : named) out.push_back(n);
    return out;
  };
  EXPECT_EQ(names(fu::GateMode::kVector),
            (std::vector<std::string>{"fusion.align.weight", "fusion.gate.weight",
                                      "fusion.gate.bias"}));
  EXPECT_EQ(names(fu::GateMode::kNone), (std::vector<std::string>{"fusion.align.weight"}));
}

TEST(Fusion, Errors) {
  num::Rng rng(14);
  fu::GatedFusion<double> none(8, 4, fu::GateMode::kNone, rng);
  auto a = random_tensor(rng, {2, 4}, false);
  EXPECT_THROW(none.gate(a, a), semfuse::CapabilityError);
  fu::GatedFusion<double> vec(8, 4, fu::GateMode::kVector, rng);
  EXPECT_THROW(vec.gate(a, random_tensor(rng, {3, 4}, false)), semfuse::DimensionError);
}

}  // namespace
