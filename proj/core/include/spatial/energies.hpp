#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "spatial/attention.hpp"
#include "spatial/latent.hpp"

namespace spatial {

/// omega weighs attention leaking outside the box, eta is the latent step
/// size, topk_fraction sets k = ceil(fraction * locations), at least 1.
struct EnergyConfig {
  double omega = 1.0;
  double eta = 0.1;
  double topk_fraction = 0.2;

  /// Throws RangeError for eta < 0 or a fraction outside (0, 1].
  std::size_t top_k(std::size_t locations) const;
};

/// Mean of the k largest values. Throws RangeError unless 1 <= k <= size.
double topk_mean(std::span<const double> values, std::size_t k);

/// -topk_u(A_uv m_u) + omega topk_u(A_uv (1 - m_u)), top-k over all
/// locations of the elementwise products (masked-out entries count as zero).
double attention_control_energy(const AttentionMap& map, const Mask& mask, std::size_t token,
                                const EnergyConfig& config);

/// Sum of attention_control_energy over a non-empty set of distinct tokens.
double energy_total(const AttentionMap& map, const Mask& mask, std::span<const std::size_t> tokens,
                    const EnergyConfig& config);

/// d energy_total / dA (subgradient of the top-k selection).
Matrix energy_total_grad(const AttentionMap& map, const Mask& mask,
                         std::span<const std::size_t> tokens, const EnergyConfig& config);

/// 1/2 sum_u (1 - m2(u)) (s1(u) - s2(u))^2 with s_i(u) = sum_{v in tokens} A^i_uv.
double background_retention_energy(const AttentionMap& reference, const AttentionMap& target,
                                   const Mask& second_object, std::span<const std::size_t> tokens);

/// d background_retention_energy / d target.
Matrix background_retention_grad(const AttentionMap& reference, const AttentionMap& target,
                                 const Mask& second_object, std::span<const std::size_t> tokens);

/// Scalar energy of a latent with an analytic gradient.
class DifferentiableEnergy {
 public:
  virtual ~DifferentiableEnergy() = default;
  virtual double value(const LatentGrid& z) const = 0;
  virtual LatentGrid gradient(const LatentGrid& z) const = 0;
};

/// 1/2 ||z||^2.
class QuadraticEnergy final : public DifferentiableEnergy {
 public:
  double value(const LatentGrid& z) const override;
  LatentGrid gradient(const LatentGrid& z) const override;
};

/// Attention-control energy of the probe's attention at z, summed over tokens.
class AttentionControlEnergy final : public DifferentiableEnergy {
 public:
  AttentionControlEnergy(CrossAttentionProbe probe, Mask mask, std::vector<std::size_t> tokens,
                         EnergyConfig config);
  double value(const LatentGrid& z) const override;
  LatentGrid gradient(const LatentGrid& z) const override;

 private:
  CrossAttentionProbe probe_;
  Mask mask_;
  std::vector<std::size_t> tokens_;
  EnergyConfig config_;
};

/// Background retention between a fixed reference map and the probe's
/// attention at z (the target trajectory).
class BackgroundRetentionEnergy final : public DifferentiableEnergy {
 public:
  BackgroundRetentionEnergy(CrossAttentionProbe probe, AttentionMap reference, Mask second_object,
                            std::vector<std::size_t> tokens);
  double value(const LatentGrid& z) const override;
  LatentGrid gradient(const LatentGrid& z) const override;

 private:
  CrossAttentionProbe probe_;
  AttentionMap reference_;
  Mask mask_;
  std::vector<std::size_t> tokens_;
};

/// z - eta grad E(z). Throws NonfiniteGradient.
LatentGrid latent_energy_update(const LatentGrid& z, const DifferentiableEnergy& energy,
                                const EnergyConfig& config);

/// Central differences (f(z + h e_i) - f(z - h e_i)) / 2h per coordinate.
/// Throws RangeError for h <= 0 and NonfiniteValue when f is not finite.
LatentGrid finite_difference_gradient(const std::function<double(const LatentGrid&)>& f,
                                      const LatentGrid& z, double h);

/// ||a - b|| / (||a|| + ||b||), 0 when both are zero.
double gradient_relative_error(const LatentGrid& analytic, const LatentGrid& numeric);

}  // namespace spatial
