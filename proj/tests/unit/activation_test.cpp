#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "frn/activation.hpp"
#include "frn/error.hpp"
#include "frn/gradcheck.hpp"

namespace frn {
namespace {

ActSpec tlu(std::initializer_list<double> tau) {
  ActSpec s = make_act_spec(ActKind::TLU, tau.size());
  s.tau = ChannelVec(tau);
  return s;
}

TEST(ActivationTest, TluExample) {
  const Tensor4 y({1, 1, 3, 1}, {-1, 0.5, 2});
  const ActOutput out = act_forward(y, tlu({0.3}));
  EXPECT_EQ(out.z, Tensor4({1, 1, 3, 1}, {0.3, 0.5, 2}));

  const ActGrads g = act_backward(full(y.shape(), 1.0), out.ctx, tlu({0.3}));
  EXPECT_EQ(g.dy, Tensor4({1, 1, 3, 1}, {0, 1, 1}));
  ASSERT_TRUE(g.dtau);
  EXPECT_EQ((*g.dtau)[0], 1.0);
  EXPECT_FALSE(g.dkappa);

  // Finite differences agree with the hand values.
  const ScalarFn f = [&](std::span<const double> tau) {
    const Tensor4 z = act_forward(y, tlu({tau[0]})).z;
    double sum = 0.0;
    for (double v : z.data()) sum += v;
    return sum;
  };
  const std::vector<double> at{0.3};
  EXPECT_NEAR(finite_diff_grad(f, at, 1e-5)[0], 1.0, 1e-9);
}

TEST(ActivationTest, TiesTakeTheFirstBranch) {
  const Tensor4 y({1, 1, 1, 1}, {0.3});
  const ActOutput out = act_forward(y, tlu({0.3}));
  EXPECT_EQ(out.ctx.second_branch[0], 0);
  const ActGrads g = act_backward(full(y.shape(), 1.0), out.ctx, tlu({0.3}));
  EXPECT_EQ(g.dy.data()[0], 1.0);
  EXPECT_EQ((*g.dtau)[0], 0.0);
}

TEST(ActivationTest, TluWithZeroTauIsRelu) {
  Rng rng(4);
  const Tensor4 y = random_normal({2, 3, 3, 4}, rng);
  EXPECT_EQ(act_forward(y, make_act_spec(ActKind::TLU, 4)).z,
            act_forward(y, make_act_spec(ActKind::RELU, 4)).z);
}

TEST(ActivationTest, TluIdentity) {
  Rng rng(6);
  for (int i = 0; i < 100000; ++i) {
    const double y = rng.uniform(-2, 2);
    const double tau = rng.uniform(-1, 1);
    const double z = act_forward(Tensor4({1, 1, 1, 1}, {y}), tlu({tau})).z.data()[0];
    ASSERT_LE(std::abs(z - (std::max(y - tau, 0.0) + tau)), 1e-15);
  }
}

TEST(ActivationTest, MonotonicityAgainstRelu) {
  Rng rng(12);
  const Tensor4 y = random_normal({2, 4, 4, 3}, rng);
  ActSpec spec = tlu({0.1, 0.0, 0.7});
  const Tensor4 z = act_forward(y, spec).z;
  const Tensor4 r = act_forward(y, make_act_spec(ActKind::RELU, 3)).z;
  for (std::size_t i = 0; i < z.size(); ++i) {
    EXPECT_GE(z.data()[i], spec.tau[i % 3]);
    EXPECT_GE(z.data()[i], r.data()[i]);
  }
}

TEST(ActivationTest, GradientCompletenessIsExactForDyadicUpstream) {
  Rng rng(14);
  const Tensor4 y = random_normal({4, 3, 3, 2}, rng);
  const ActSpec spec = tlu({0.2, -0.4});
  const Tensor4 up = map(random_normal(y.shape(), rng), [](double v) { return std::round(8 * v) / 8; });
  const ActOutput out = act_forward(y, spec);
  const ActGrads g = act_backward(up, out.ctx, spec);
  for (std::size_t c = 0; c < 2; ++c) {
    double sum_dy = 0.0, sum_up = 0.0;
    for (std::size_t i = c; i < y.size(); i += 2) {
      sum_dy += g.dy.data()[i];
      sum_up += up.data()[i];
    }
    EXPECT_EQ((*g.dtau)[c] + sum_dy, sum_up);
  }
}

TEST(ActivationTest, GradientCompletenessGenericUpstream) {
  Rng rng(15);
  const Tensor4 y = random_normal({4, 3, 3, 2}, rng);
  const ActSpec spec = tlu({0.2, -0.4});
  const Tensor4 up = random_normal(y.shape(), rng);
  const ActGrads g = act_backward(up, act_forward(y, spec).ctx, spec);
  for (std::size_t c = 0; c < 2; ++c) {
    double sum_dy = 0.0, sum_up = 0.0, scale = 0.0;
    for (std::size_t i = c; i < y.size(); i += 2) {
      sum_dy += g.dy.data()[i];
      sum_up += up.data()[i];
      scale += std::abs(up.data()[i]);
    }
    EXPECT_NEAR((*g.dtau)[c] + sum_dy, sum_up, 1e-12 * scale);
  }
}

TEST(ActivationTest, ZeroUpstreamAndNonBindingThreshold) {
  Rng rng(16);
  const Tensor4 y = random_normal({2, 2, 2, 2}, rng);
  for (ActKind kind : {ActKind::RELU, ActKind::TLU, ActKind::PRELU, ActKind::AFFINE_TLU}) {
    const ActSpec spec = make_act_spec(kind, 2);
    const ActGrads g = act_backward(zeros(y.shape()), act_forward(y, spec).ctx, spec);
    EXPECT_EQ(g.dy, zeros(y.shape()));
    if (g.dtau) EXPECT_EQ(*g.dtau, ChannelVec(2));
    if (g.dkappa) EXPECT_EQ(*g.dkappa, ChannelVec(2));
  }
  const ActSpec low = tlu({-100, -100});
  const Tensor4 up = random_normal(y.shape(), rng);
  const ActGrads g = act_backward(up, act_forward(y, low).ctx, low);
  EXPECT_EQ(g.dy, up);
  EXPECT_EQ(*g.dtau, ChannelVec(2));
}

TEST(ActivationTest, PreluAndAffineTlu) {
  ActSpec prelu = make_act_spec(ActKind::PRELU, 1);
  EXPECT_EQ(prelu.kappa[0], 0.25);
  EXPECT_EQ(prelu.tau.size(), 0u);
  const Tensor4 y({1, 1, 2, 1}, {-2, 3});
  const ActOutput p = act_forward(y, prelu);
  EXPECT_EQ(p.z, Tensor4({1, 1, 2, 1}, {-0.5, 3}));
  const ActGrads gp = act_backward(full(y.shape(), 1.0), p.ctx, prelu);
  EXPECT_EQ(gp.dy, Tensor4({1, 1, 2, 1}, {0.25, 1}));
  EXPECT_EQ((*gp.dkappa)[0], -2.0);

  ActSpec aff = make_act_spec(ActKind::AFFINE_TLU, 1);
  aff.tau = ChannelVec{1.0};
  const ActOutput a = act_forward(y, aff);
  EXPECT_EQ(a.z, Tensor4({1, 1, 2, 1}, {0.5, 3}));
  const ActGrads ga = act_backward(full(y.shape(), 2.0), a.ctx, aff);
  EXPECT_EQ(ga.dy, Tensor4({1, 1, 2, 1}, {0.5, 2}));
  EXPECT_EQ((*ga.dtau)[0], 2.0);
  EXPECT_EQ((*ga.dkappa)[0], -4.0);
}

TEST(ActivationTest, ParameterGradientsMatchFiniteDifferences) {
  Rng rng(18);
  for (ActKind kind : {ActKind::TLU, ActKind::PRELU, ActKind::AFFINE_TLU}) {
    const Tensor4 y = random_normal({2, 3, 3, 2}, rng);
    ActSpec spec = make_act_spec(kind, 2);
    if (uses_tau(kind)) spec.tau = ChannelVec{0.3, -0.2};
    if (kink_margin(y, spec) < 1e-3) continue;
    const Tensor4 w = random_normal(y.shape(), rng);
    const auto loss = [&](const ActSpec& s, const Tensor4& in) {
      double f = 0.0;
      const Tensor4 z = act_forward(in, s).z;
      for (std::size_t i = 0; i < z.size(); ++i) f += w.data()[i] * z.data()[i];
      return f;
    };
    const ActGrads g = act_backward(w, act_forward(y, spec).ctx, spec);
    const Tolerance tol;

    const ScalarFn fy = [&](std::span<const double> v) {
      return loss(spec, Tensor4(y.shape(), {v.begin(), v.end()}));
    };
    EXPECT_TRUE(compare_gradients("y", g.dy.data(), finite_diff_grad(fy, y.data(), 1e-5), tol).pass);
    if (uses_tau(kind)) {
      const ScalarFn ft = [&](std::span<const double> v) {
        ActSpec s = spec;
        s.tau.values.assign(v.begin(), v.end());
        return loss(s, y);
      };
      EXPECT_TRUE(compare_gradients("tau", g.dtau->span(), finite_diff_grad(ft, spec.tau.span(), 1e-5), tol).pass);
    }
    if (uses_kappa(kind)) {
      const ScalarFn fk = [&](std::span<const double> v) {
        ActSpec s = spec;
        s.kappa.values.assign(v.begin(), v.end());
        return loss(s, y);
      };
      EXPECT_TRUE(
          compare_gradients("kappa", g.dkappa->span(), finite_diff_grad(fk, spec.kappa.span(), 1e-5), tol).pass);
    }
  }
}

TEST(ActivationTest, SpecValidation) {
  ActSpec s = make_act_spec(ActKind::TLU, 3);
  EXPECT_NO_THROW(validate(s, 3));
  EXPECT_THROW(validate(s, 4), ConfigError);
  s.kappa = ChannelVec(3);
  EXPECT_THROW(validate(s, 3), ConfigError);
  EXPECT_EQ(parse_act_kind("affine-tlu"), ActKind::AFFINE_TLU);
  EXPECT_THROW(parse_act_kind("gelu"), ConfigError);
  const ActSpec t = tlu({0.0});
  EXPECT_THROW(act_backward(zeros({1, 1, 2, 1}), act_forward(zeros({1, 1, 1, 1}), t).ctx, t), ShapeError);
}

TEST(ActivationTest, KinkMargin) {
  const Tensor4 y({1, 1, 3, 1}, {-1, 0.5, 2});
  EXPECT_DOUBLE_EQ(kink_margin(y, tlu({0.3})), 0.2);
  EXPECT_DOUBLE_EQ(kink_margin(y, make_act_spec(ActKind::RELU, 1)), 0.5);
}

}  // namespace
}  // namespace frn
