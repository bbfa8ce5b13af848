#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spatial/energies.hpp"
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

// Two-location map whose token 0 column is `col`; token 1 takes the rest.
AttentionMap column_map(double a, double b) {
  return AttentionMap(Matrix(2, 2, std::vector<double>{a, 1 - a, b, 1 - b}));
}

AttentionMap random_map(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix logits(rows, cols);
  for (double& v : logits.data()) v = 2 * standard_normal(rng);
  return softmax_rows(logits);
}

Mask random_mask(std::size_t h, std::size_t w, Rng& rng) {
  Mask m(h, w);
  for (std::size_t u = 0; u < m.size(); ++u) m.set(u, uniform01(rng) < 0.5);
  return m;
}

TEST(TopkMean, Examples) {
  const std::vector<double> v{3, 1, 2};
  EXPECT_EQ(topk_mean(v, 2), 2.5);
  EXPECT_EQ(topk_mean(v, 3), 2.0);
  EXPECT_EQ(topk_mean(v, 1), 3.0);
  EXPECT_EQ(code_of([&] { topk_mean(v, 0); }), ErrorCode::RangeError);
  EXPECT_EQ(code_of([&] { topk_mean(v, 4); }), ErrorCode::RangeError);
}

TEST(EnergyConfig, TopK) {
  EnergyConfig c;
  EXPECT_EQ(c.top_k(6), 2u);
  c.topk_fraction = 0.01;
  EXPECT_EQ(c.top_k(6), 1u);
  c.topk_fraction = 1.0;
  EXPECT_EQ(c.top_k(6), 6u);
  c.topk_fraction = 0.0;
  EXPECT_EQ(code_of([&] { c.top_k(6); }), ErrorCode::RangeError);
  c.topk_fraction = 0.5;
  c.eta = -1;
  EXPECT_EQ(code_of([&] { c.top_k(6); }), ErrorCode::RangeError);
}

TEST(AttentionControl, HandExample) {
  const EnergyConfig cfg{0.5, 0.1, 0.5};  // k = 1 on two rows
  const Mask m(1, 2, std::vector<int>{1, 0});
  EXPECT_NEAR(attention_control_energy(column_map(0.8, 0.6), m, 0, cfg), -0.5, 1e-15);
}

TEST(AttentionControl, DegenerateMasks) {
  Rng rng(5);
  const auto map = random_map(6, 3, rng);
  EnergyConfig cfg{2.0, 0.1, 0.5};
  std::vector<double> col(6);
  for (std::size_t u = 0; u < 6; ++u) col[u] = map(u, 1);
  EXPECT_NEAR(attention_control_energy(map, Mask(2, 3, true), 1, cfg), -topk_mean(col, 3), 1e-15);
  cfg.omega = 0;
  cfg.topk_fraction = 0.1;
  EXPECT_EQ(attention_control_energy(map, Mask(2, 3, false), 1, cfg), 0.0);
}

TEST(AttentionControl, Errors) {
  const auto map = column_map(0.5, 0.5);
  EXPECT_EQ(code_of([&] { attention_control_energy(map, Mask(1, 3, true), 0, {}); }), ErrorCode::ShapeMismatch);
  EXPECT_EQ(code_of([&] { attention_control_energy(map, Mask(1, 2, true), 2, {}); }), ErrorCode::IndexError);
}

TEST(EnergyTotal, SumsTokens) {
  const EnergyConfig cfg{0.5, 0.1, 0.5};
  const Mask m(1, 2, std::vector<int>{1, 0});
  const std::vector<std::size_t> one{0};
  const auto a = column_map(0.8, 0.6);
  EXPECT_EQ(energy_total(a, m, one, cfg), attention_control_energy(a, m, 0, cfg));

  // Columns [0.8, 0.6] and [0.1, 0.9] cannot share a row-stochastic map, so
  // the two-token sum is checked across two maps.
  const double split = attention_control_energy(a, m, 0, cfg) +
                       attention_control_energy(column_map(0.1, 0.9), m, 0, cfg);
  EXPECT_NEAR(split, -0.15, 1e-15);

  const AttentionMap b(Matrix(2, 3, std::vector<double>{0.8, 0.1, 0.1, 0.6, 0.3, 0.1}));
  const std::vector<std::size_t> two{0, 1};
  EXPECT_NEAR(energy_total(b, m, two, cfg), -0.5 + (-0.1 + 0.5 * 0.3), 1e-15);
}

TEST(EnergyTotal, Errors) {
  const auto a = column_map(0.8, 0.6);
  const Mask m(1, 2, true);
  EXPECT_EQ(code_of([&] { energy_total(a, m, std::vector<std::size_t>{0, 0}, {}); }), ErrorCode::IndexError);
  EXPECT_EQ(code_of([&] { energy_total(a, m, std::vector<std::size_t>{}, {}); }), ErrorCode::IndexError);
  EXPECT_EQ(code_of([&] { energy_total(a, m, std::vector<std::size_t>{5}, {}); }), ErrorCode::IndexError);
}

TEST(AttentionControl, MonotoneInParticipatingValues) {
  Rng rng(11);
  const EnergyConfig cfg{1.5, 0.1, 0.34};
  for (int trial = 0; trial < 200; ++trial) {
    const auto map = random_map(6, 3, rng);
    const auto mask = random_mask(2, 3, rng);
    const std::size_t u = static_cast<std::size_t>(uniform_int(rng, 0, 5));
    // Move mass from token 2 into token 0 at row u; token 0's energy sees a
    // single entry increase.
    Matrix p = map.probabilities();
    const double delta = 0.5 * p(u, 2);
    p(u, 0) += delta;
    p(u, 2) -= delta;
    const AttentionMap bumped(p);
    const double before = attention_control_energy(map, mask, 0, cfg);
    const double after = attention_control_energy(bumped, mask, 0, cfg);
    if (mask[u]) {
      EXPECT_LE(after, before + 1e-15);
    } else {
      EXPECT_GE(after, before - 1e-15);
    }
  }
}

TEST(BackgroundRetention, Examples) {
  const std::vector<std::size_t> v0{0};
  const auto a1 = column_map(0.7, 0.2);
  const auto a2 = column_map(0.4, 0.9);
  EXPECT_NEAR(background_retention_energy(a1, a2, Mask(1, 2, std::vector<int>{0, 1}), v0), 0.045, 1e-15);
  EXPECT_EQ(background_retention_energy(a1, a1, Mask(1, 2, false), v0), 0.0);
  EXPECT_EQ(background_retention_energy(a1, a2, Mask(1, 2, true), v0), 0.0);
}

TEST(BackgroundRetention, FullVocabularyIsZero) {
  Rng rng(17);
  const std::vector<std::size_t> all{0, 1, 2, 3};
  for (int trial = 0; trial < 100; ++trial) {
    const auto a1 = random_map(6, 4, rng);
    const auto a2 = random_map(6, 4, rng);
    EXPECT_NEAR(background_retention_energy(a1, a2, random_mask(2, 3, rng), all), 0.0, 1e-28);
  }
}

TEST(BackgroundRetention, SymmetricAndNonNegative) {
  Rng rng(19);
  const std::vector<std::size_t> tokens{1, 3};
  for (int trial = 0; trial < 100; ++trial) {
    const auto a1 = random_map(6, 4, rng);
    const auto a2 = random_map(6, 4, rng);
    const auto m = random_mask(3, 2, rng);
    const double e12 = background_retention_energy(a1, a2, m, tokens);
    EXPECT_GE(e12, 0.0);
    EXPECT_EQ(e12, background_retention_energy(a2, a1, m, tokens));
  }
}

TEST(BackgroundRetention, Errors) {
  const auto a = column_map(0.5, 0.5);
  const AttentionMap wide(Matrix(2, 3, std::vector<double>{1, 0, 0, 0, 1, 0}));
  const std::vector<std::size_t> v0{0};
  EXPECT_EQ(code_of([&] { background_retention_energy(a, wide, Mask(1, 2), v0); }), ErrorCode::ShapeMismatch);
  EXPECT_EQ(code_of([&] { background_retention_energy(a, a, Mask(1, 3), v0); }), ErrorCode::ShapeMismatch);
  EXPECT_EQ(code_of([&] { background_retention_energy(a, a, Mask(1, 2), std::vector<std::size_t>{2}); }),
            ErrorCode::IndexError);
}

TEST(LatentUpdate, QuadraticExamples) {
  const QuadraticEnergy quad;
  EnergyConfig cfg;
  cfg.eta = 0.1;
  const auto z = LatentGrid::from_values({1, -2});
  const auto out = latent_energy_update(z, quad, cfg);
  EXPECT_NEAR(out[0], 0.9, 1e-15);
  EXPECT_NEAR(out[1], -1.8, 1e-15);
  EXPECT_LT(quad.value(out), quad.value(z));
  cfg.eta = 0;
  EXPECT_EQ(latent_energy_update(z, quad, cfg), z);
}

TEST(LatentUpdate, NonfiniteGradient) {
  struct Blowup : DifferentiableEnergy {
    double value(const LatentGrid&) const override { return 0; }
    LatentGrid gradient(const LatentGrid& z) const override {
      LatentGrid g(z.shape());
      g.values()[0] = 1e308;
      g.values()[0] *= 10;
      return g;
    }
  };
  EXPECT_EQ(code_of([] { latent_energy_update(LatentGrid::from_values({1}), Blowup{}, {}); }),
            ErrorCode::NonfiniteGradient);
}

TEST(FiniteDifference, Examples) {
  const auto z = LatentGrid::from_values({0.3, -1.2, 2.0});
  const auto half_norm = [](const LatentGrid& x) {
    double s = 0;
    for (double v : x.values()) s += 0.5 * v * v;
    return s;
  };
  const auto g = finite_difference_gradient(half_norm, z, 1e-4);
  for (std::size_t k = 0; k < z.size(); ++k) EXPECT_NEAR(g[k], z[k], 1e-9);
  const auto c = finite_difference_gradient([](const LatentGrid&) { return 4.0; }, z, 1e-3);
  for (double v : c.values()) EXPECT_EQ(v, 0.0);
  const auto sum = [](const LatentGrid& x) {
    return std::accumulate(x.values().begin(), x.values().end(), 0.0);
  };
  const auto ones = finite_difference_gradient(sum, z, 1e-3);
  for (double v : ones.values()) EXPECT_NEAR(v, 1.0, 1e-12);
  EXPECT_EQ(code_of([&] { finite_difference_gradient(sum, z, 0.0); }), ErrorCode::RangeError);
  EXPECT_EQ(code_of([&] { finite_difference_gradient([](const LatentGrid&) { return NAN; }, z, 1e-3); }),
            ErrorCode::NonfiniteValue);
}

TEST(GradientRelativeError, Definition) {
  EXPECT_EQ(gradient_relative_error(LatentGrid::from_values({0, 0}), LatentGrid::from_values({0, 0})), 0.0);
  EXPECT_NEAR(gradient_relative_error(LatentGrid::from_values({1, 0}), LatentGrid::from_values({0, 1})),
              std::sqrt(2.0) / 2.0, 1e-15);
}

struct Instance {
  CrossAttentionProbe probe;
  LatentGrid z;
  Mask mask;
};

Instance random_instance(Rng& rng) {
  // 2 x 3 spatial grid (6 locations), 3 channels, 4 tokens.
  Matrix w(3, 3);
  Matrix k(4, 3);
  for (double& v : w.data()) v = standard_normal(rng);
  for (double& v : k.data()) v = standard_normal(rng);
  LatentGrid z({2, 3, 3});
  for (double& v : z.values()) v = standard_normal(rng);
  return {CrossAttentionProbe(w, k), z, random_mask(2, 3, rng)};
}

double fd_error(const DifferentiableEnergy& e, const LatentGrid& z) {
  const auto numeric = finite_difference_gradient([&](const LatentGrid& x) { return e.value(x); }, z, 1e-5);
  return gradient_relative_error(e.gradient(z), numeric);
}

TEST(Gradients, AttentionControlMatchesFiniteDifferences) {
  Rng rng(2024);
  for (int i = 0; i < 20; ++i) {
    auto inst = random_instance(rng);
    ASSERT_EQ(inst.probe.attention(inst.z).locations(), 6u);
    const AttentionControlEnergy e(inst.probe, inst.mask, {0, 2}, EnergyConfig{1.0, 0.1, 0.34});
    EXPECT_LT(fd_error(e, inst.z), 1e-4) << "instance " << i;
  }
}

TEST(Gradients, BackgroundRetentionMatchesFiniteDifferences) {
  Rng rng(2025);
  for (int i = 0; i < 20; ++i) {
    auto inst = random_instance(rng);
    LatentGrid other(inst.z.shape());
    for (double& v : other.values()) v = standard_normal(rng);
    const BackgroundRetentionEnergy e(inst.probe, inst.probe.attention(other), inst.mask, {1, 3});
    EXPECT_LT(fd_error(e, inst.z), 1e-4) << "instance " << i;
  }
}

TEST(Gradients, DescentOnAttentionControl) {
  Rng rng(7);
  auto inst = random_instance(rng);
  const EnergyConfig cfg{1.0, 1e-3, 0.34};
  const AttentionControlEnergy e(inst.probe, inst.mask, {1}, cfg);
  EXPECT_LT(e.value(latent_energy_update(inst.z, e, cfg)), e.value(inst.z));
}

}  // namespace
}  // namespace spatial
