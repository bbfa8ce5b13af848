#include <gtest/gtest.h>

#include <cmath>

#include "spatial/attention.hpp"
#include "spatial/diffusion.hpp"
#include "spatial/error.hpp"
#include "spatial/random.hpp"

namespace spatial {
namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::IoError;
}

LatentGrid random_grid(GridShape shape, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(shape.size());
  for (double& x : v) x = standard_normal(rng);
  return LatentGrid(shape, std::move(v));
}

TEST(CfgScore, ZeroAndUnitGuidanceIdentities) {
  const auto u = random_grid({2, 3, 2}, 1);
  const auto i = random_grid({2, 3, 2}, 2);
  const auto f = random_grid({2, 3, 2}, 3);
  EXPECT_EQ(cfg_score(u, i, f, {0, 0}), u);
  EXPECT_EQ(cfg_score(u, i, f, {1, 1}), f);
}

TEST(CfgScore, HandExample) {
  const auto out = cfg_score(LatentGrid::from_values({0, 0}), LatentGrid::from_values({1, 0}),
                             LatentGrid::from_values({1, 2}), {2, 3});
  EXPECT_EQ(out, LatentGrid::from_values({2, 6}));
}

TEST(CfgScore, CollapsesToSingleConditioning) {
  const auto u = random_grid({1, 4, 1}, 4);
  const auto f = random_grid({1, 4, 1}, 5);
  const auto out = cfg_score(u, u, f, {3.0, 1.5});
  for (std::size_t k = 0; k < u.size(); ++k) EXPECT_NEAR(out[k], u[k] + 1.5 * (f[k] - u[k]), 1e-15);
}

TEST(CfgScore, AffineInEachInput) {
  const auto u = random_grid({1, 5, 1}, 6);
  const auto i = random_grid({1, 5, 1}, 7);
  const auto f1 = random_grid({1, 5, 1}, 8);
  const auto f2 = random_grid({1, 5, 1}, 9);
  const GuidanceScales s{1.7, 4.2};
  LatentGrid mid(u.shape());
  for (std::size_t k = 0; k < mid.size(); ++k) mid[k] = 0.5 * (f1[k] + f2[k]);
  const auto a = cfg_score(u, i, f1, s);
  const auto b = cfg_score(u, i, f2, s);
  const auto m = cfg_score(u, i, mid, s);
  for (std::size_t k = 0; k < m.size(); ++k) EXPECT_NEAR(m[k], 0.5 * (a[k] + b[k]), 1e-12);
}

TEST(CfgScore, ShapeMismatch) {
  EXPECT_EQ(code_of([] {
              cfg_score(LatentGrid::from_values({0}), LatentGrid::from_values({0, 1}), LatentGrid::from_values({0}),
                        {});
            }),
            ErrorCode::ShapeMismatch);
}

TEST(GuidedEps, QueriesThreeConditionings) {
  struct Probe : ScoreNetwork {
    LatentGrid eps(const LatentGrid& z, int, const Conditioning* image, const Conditioning* text) const override {
      const double v = (image ? 1.0 : 0.0) + (text ? 10.0 : 0.0);
      return LatentGrid(z.shape(), v);
    }
  } net;
  const auto out = guided_eps(net, LatentGrid::from_values({0}), 1, Conditioning{{1}}, Conditioning{{2}}, {2, 3});
  EXPECT_EQ(out[0], 0 + 2 * (1 - 0) + 3 * (11 - 1));
}

TEST(DenoisingLoss, Examples) {
  EXPECT_EQ(denoising_loss(LatentGrid::from_values({1, 2}), LatentGrid::from_values({1, 2})), 0.0);
  EXPECT_EQ(denoising_loss(LatentGrid::from_values({1, 0}), LatentGrid::from_values({0, 0})), 1.0);
  EXPECT_EQ(denoising_loss(LatentGrid::from_values({1, 2}), LatentGrid::from_values({-1, 1})), 5.0);
}

TEST(Schedule, LinearIsValidAndMonotone) {
  const auto s = DDIMSchedule::linear(100);
  EXPECT_EQ(s.steps(), 100);
  EXPECT_EQ(s.alpha_bar(0), 1.0);
  for (int t = 1; t <= 100; ++t) EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
  // The last DDIM step lands on the last training step.
  double ab = 1.0;
  for (int k = 0; k < 1000; ++k) ab *= 1.0 - (1e-4 + (2e-2 - 1e-4) * k / 999.0);
  EXPECT_NEAR(s.alpha_bar(100), ab, 1e-15);
  EXPECT_EQ(code_of([] { DDIMSchedule({1.0, 0.5, 0.5}); }), ErrorCode::RangeError);
  EXPECT_EQ(code_of([] { DDIMSchedule({0.9, 0.5}); }), ErrorCode::RangeError);
}

TEST(Schedule, JsonFixtureRoundTrip) {
  const auto s = DDIMSchedule::linear(10);
  EXPECT_EQ(schedule_from_json(schedule_to_json(s)).alpha_bars(), s.alpha_bars());
  EXPECT_EQ(code_of([] { schedule_from_json("{}"); }), ErrorCode::SchemaError);
  const auto z = random_grid({2, 3, 4}, 12);
  EXPECT_EQ(latent_from_json(latent_to_json(z)), z);
  EXPECT_EQ(code_of([] { latent_from_json(R"({"shape":[1,2,1],"values":[1]})"); }), ErrorCode::ShapeMismatch);
}

TEST(DdimStep, ConstantScheduleIdentity) {
  const auto z = random_grid({2, 2, 2}, 13);
  const auto eps = random_grid({2, 2, 2}, 14);
  const auto out = ddim_transfer(z, eps, 0.6, 0.6);
  EXPECT_LE(max_abs_difference(out, z), 1e-15);
}

TEST(DdimStep, ZeroEpsIsPureRescaling) {
  const auto s = DDIMSchedule::linear(20);
  const auto z = random_grid({1, 3, 1}, 15);
  const auto out = ddim_step(z, 7, LatentGrid(z.shape()), s);
  for (std::size_t k = 0; k < z.size(); ++k) {
    EXPECT_NEAR(out[k], std::sqrt(s.alpha_bar(6) / s.alpha_bar(7)) * z[k], 1e-14);
  }
  const DDIMSchedule halving({1.0, 0.5, 0.25});
  const auto up = ddim_inverse_step(z, 2, LatentGrid(z.shape()), halving);
  for (std::size_t k = 0; k < z.size(); ++k) EXPECT_NEAR(up[k], std::sqrt(0.5) * z[k], 1e-15);
}

TEST(DdimStep, InverseRoundTrip) {
  const auto s = DDIMSchedule::linear(100);
  for (int t = 1; t <= 100; t += 9) {
    const auto z = random_grid({4, 4, 2}, 100 + static_cast<std::uint64_t>(t));
    const auto eps = random_grid({4, 4, 2}, 200 + static_cast<std::uint64_t>(t));
    EXPECT_LE(max_abs_difference(ddim_step(ddim_inverse_step(z, t, eps, s), t, eps, s), z), 1e-12);
    EXPECT_LE(max_abs_difference(ddim_inverse_step(ddim_step(z, t, eps, s), t, eps, s), z), 1e-12);
  }
}

TEST(DdimStep, StepOutOfRange) {
  const auto s = DDIMSchedule::linear(10);
  const auto z = LatentGrid::from_values({1});
  EXPECT_EQ(code_of([&] { ddim_step(z, 0, z, s); }), ErrorCode::StepOutOfRange);
  EXPECT_EQ(code_of([&] { ddim_inverse_step(z, 0, z, s); }), ErrorCode::StepOutOfRange);
  EXPECT_EQ(code_of([&] { ddim_step(z, 11, z, s); }), ErrorCode::StepOutOfRange);
  EXPECT_EQ(code_of([&] { ddim_step(z, 1, LatentGrid::from_values({1, 2}), s); }), ErrorCode::ShapeMismatch);
}

TEST(ComposeLatents, Examples) {
  const LatentGrid zb({2, 2, 1}, 1.0);
  const LatentGrid zi({2, 2, 1}, 5.0);
  EXPECT_EQ(compose_latents(zb, {{zi, Mask(2, 2, false)}}), zb);
  EXPECT_EQ(compose_latents(zb, {{zi, Mask(2, 2, true)}}), zi);
  EXPECT_EQ(compose_latents(zb, {{zi, Mask(2, 2, std::vector<int>{0, 1, 0, 1})}}),
            LatentGrid({2, 2, 1}, std::vector<double>{1, 5, 1, 5}));
}

TEST(ComposeLatents, MasksApplyToEveryChannelAndPreserveRegions) {
  const auto zb = random_grid({3, 3, 2}, 21);
  const auto z1 = random_grid({3, 3, 2}, 22);
  const auto z2 = random_grid({3, 3, 2}, 23);
  const Mask m1(3, 3, std::vector<int>{1, 1, 0, 0, 0, 0, 0, 0, 0});
  const Mask m2(3, 3, std::vector<int>{0, 0, 0, 0, 0, 0, 0, 1, 1});
  const auto out = compose_latents(zb, {{z1, m1}, {z2, m2}});
  for (std::size_t u = 0; u < 9; ++u) {
    for (std::size_t c = 0; c < 2; ++c) {
      const std::size_t k = u * 2 + c;
      const double expected = m1[u] ? z1[k] : m2[u] ? z2[k] : zb[k];
      EXPECT_EQ(out[k], expected);
    }
  }
}

TEST(ComposeLatents, Errors) {
  const LatentGrid z({2, 2, 1}, 0.0);
  EXPECT_EQ(code_of([&] { compose_latents(z, {{z, Mask(2, 2, true)}, {z, Mask(2, 2, std::vector<int>{1, 0, 0, 0})}}); }),
            ErrorCode::MaskOverlap);
  EXPECT_EQ(code_of([&] { compose_latents(z, {{LatentGrid({2, 2, 2}, 0.0), Mask(2, 2, true)}}); }),
            ErrorCode::ShapeMismatch);
  EXPECT_EQ(code_of([&] { compose_latents(z, {{z, Mask(1, 4, true)}}); }), ErrorCode::ShapeMismatch);
}

TEST(ComposeLatents, ActiveWindow) {
  EXPECT_TRUE(composition_active(100, 100, 50));
  EXPECT_TRUE(composition_active(50, 100, 50));
  EXPECT_FALSE(composition_active(49, 100, 50));
}

TEST(AttentionMap, ClosedFormSoftmax) {
  const auto uniform = attention_map(Matrix(3, 2, 0.0), Matrix(2, 2, 0.0));
  for (std::size_t u = 0; u < 3; ++u) {
    EXPECT_EQ(uniform(u, 0), 0.5);
    EXPECT_EQ(uniform(u, 1), 0.5);
  }
  const auto m = softmax_rows(Matrix(1, 2, std::vector<double>{std::log(2.0), 0.0}));
  EXPECT_NEAR(m(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(m(0, 1), 1.0 / 3.0, 1e-15);
}

TEST(AttentionMap, RowsSumToOneAndShiftInvariant) {
  Rng rng(31);
  Matrix q(6, 3);
  Matrix k(4, 3);
  for (double& v : q.data()) v = 3 * standard_normal(rng);
  for (double& v : k.data()) v = 3 * standard_normal(rng);
  const auto a = attention_map(q, k);
  Matrix logits(6, 4);
  for (std::size_t u = 0; u < 6; ++u) {
    double sum = 0;
    for (std::size_t v = 0; v < 4; ++v) {
      sum += a(u, v);
      for (std::size_t d = 0; d < 3; ++d) logits(u, v) += q(u, d) * k(v, d);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  Matrix shifted = logits;
  for (std::size_t u = 0; u < 6; ++u) {
    for (std::size_t v = 0; v < 4; ++v) shifted(u, v) += 100.0 * static_cast<double>(u);
  }
  const auto b = softmax_rows(shifted);
  for (std::size_t u = 0; u < 6; ++u) {
    for (std::size_t v = 0; v < 4; ++v) EXPECT_NEAR(a(u, v), b(u, v), 1e-12);
  }
}

TEST(AttentionMap, Validation) {
  EXPECT_EQ(code_of([] { attention_map(Matrix(2, 3), Matrix(2, 2)); }), ErrorCode::ShapeMismatch);
  EXPECT_EQ(code_of([] { AttentionMap(Matrix(1, 2, std::vector<double>{0.7, 0.7})); }), ErrorCode::InvalidInput);
  EXPECT_EQ(code_of([] { AttentionMap(Matrix(1, 2, std::vector<double>{1.5, -0.5})); }), ErrorCode::InvalidInput);
}

TEST(GaussianOracle, Limits) {
  const auto s = DDIMSchedule::linear(50);
  const double ab = s.alpha_bar(10);
  const auto on_manifold = LatentGrid::from_values({std::sqrt(ab) * 2.0});
  EXPECT_NEAR(gaussian_oracle_eps(on_manifold, 10, 2.0, 0.0, s)[0], 0.0, 1e-15);
  EXPECT_EQ(gaussian_oracle_eps(LatentGrid::from_values({2.0}), 0, 2.0, 1.0, s)[0], 0.0);
}

// Independent check: for x0 ~ N(mu, s2) and eps ~ N(0, 1), E[eps | z] is
// linear in z, so the least-squares slope of eps on z - sqrt(ab) mu must match
// the closed form within three standard errors.
TEST(GaussianOracle, MonteCarloRegression) {
  const auto s = DDIMSchedule::linear(20);
  const double mu = 0.7;
  const double sigma2 = 2.5;
  Rng rng(20240611);
  for (int t : {3, 12, 20}) {
    const double ab = s.alpha_bar(t);
    const std::size_t n = 1000000;
    double sxx = 0, sxy = 0, sx = 0, sy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x0 = mu + std::sqrt(sigma2) * standard_normal(rng);
      const double e = standard_normal(rng);
      const double x = std::sqrt(ab) * x0 + std::sqrt(1 - ab) * e - std::sqrt(ab) * mu;
      sx += x;
      sy += e;
      sxx += x * x;
      sxy += x * e;
      syy += e * e;
    }
    const double dn = static_cast<double>(n);
    const double vx = sxx / dn - (sx / dn) * (sx / dn);
    const double cxy = sxy / dn - (sx / dn) * (sy / dn);
    const double slope = cxy / vx;
    const double vy = syy / dn - (sy / dn) * (sy / dn);
    const double residual = vy - slope * cxy;
    const double se = std::sqrt(residual / (dn * vx));

    const double z_probe = std::sqrt(ab) * mu + 1.0;
    const double formula = gaussian_oracle_eps(LatentGrid::from_values({z_probe}), t, mu, sigma2, s)[0];
    EXPECT_NEAR(slope, formula, 3 * se) << "t=" << t;
  }
}

TEST(Enhancement, PhaseBoundaries) {
  const auto p = enhancement_phases(100, 0.7);
  EXPECT_EQ(p.t1, 70);
  EXPECT_EQ(p.t2, 85);
  EXPECT_EQ(p.inversion_steps(), 30);
  EXPECT_EQ(p.base_steps(), 15);
  EXPECT_EQ(p.enhancer_steps(), 15);
  const auto one = enhancement_phases(100, 1.0);
  EXPECT_EQ(one.t1, 100);
  EXPECT_EQ(one.t2, 100);
  const auto zero = enhancement_phases(100, 0.0);
  EXPECT_EQ(zero.t1, 0);
  EXPECT_EQ(zero.t2, 50);
}

TEST(Enhancement, TiesRoundDown) {
  const auto p = enhancement_phases(5, 0.5);  // 2.5 and 3.75
  EXPECT_EQ(p.t1, 2);
  EXPECT_EQ(p.t2, 4);
  const auto q = enhancement_phases(1, 0.5);  // 0.5 and 0.75
  EXPECT_EQ(q.t1, 0);
  EXPECT_EQ(q.t2, 1);
}

TEST(Enhancement, RangeErrors) {
  EXPECT_EQ(code_of([] { enhancement_phases(100, 1.1); }), ErrorCode::RangeError);
  EXPECT_EQ(code_of([] { enhancement_phases(100, -0.1); }), ErrorCode::RangeError);
  EXPECT_EQ(code_of([] { enhancement_phases(0, 0.5); }), ErrorCode::RangeError);
}

TEST(Enhancement, GaussianOracleRoundTrip) {
  const auto s = DDIMSchedule::linear(100);
  const GaussianOracleNetwork net(0.0, 1.0, s);
  const auto z = random_grid({8, 8, 4}, 77);
  const auto out = run_enhancement(z, net, net, enhancement_phases(100, 0.7), s);
  EXPECT_LE(max_abs_difference(out, z), 1e-6);
}

TEST(Enhancement, AlphaOneExecutesNoSteps) {
  const auto s = DDIMSchedule::linear(100);
  const GaussianOracleNetwork net(0.3, 2.0, s);
  const auto z = random_grid({3, 3, 2}, 78);
  EXPECT_EQ(run_enhancement(z, net, net, enhancement_phases(100, 1.0), s), z);
  EXPECT_EQ(code_of([&] { run_enhancement(z, net, net, enhancement_phases(50, 0.5), s); }), ErrorCode::RangeError);
}

TEST(Enhancement, FullInversionThenDenoising) {
  const auto s = DDIMSchedule::linear(100);
  const GaussianOracleNetwork net(0.0, 1.0, s);
  const auto z0 = random_grid({8, 8, 4}, 79);
  LatentGrid z = z0;
  for (int t = 1; t <= 100; ++t) z = ddim_inverse_step_implicit(net, z, t, s);
  for (int t = 100; t >= 1; --t) z = ddim_step(z, t, net.eps(z, t, nullptr, nullptr), s);
  EXPECT_LE(max_abs_difference(z, z0), 1e-6);
}

}  // namespace
}  // namespace spatial
