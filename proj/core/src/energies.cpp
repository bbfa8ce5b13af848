#include "spatial/energies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "spatial/error.hpp"

namespace spatial {

std::size_t EnergyConfig::top_k(std::size_t locations) const {
  if (!(eta >= 0.0)) throw Error(ErrorCode::RangeError, "eta must be non-negative");
  if (!(topk_fraction > 0.0 && topk_fraction <= 1.0)) {
    throw Error(ErrorCode::RangeError, "topk_fraction must lie in (0, 1]");
  }
  const auto k = static_cast<std::size_t>(std::ceil(topk_fraction * static_cast<double>(locations)));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(locations, 1));
}

namespace {

// Indices of the k largest values; ties keep the lower index.
std::vector<std::size_t> topk_indices(std::span<const double> values, std::size_t k) {
  if (k < 1 || k > values.size()) {
    throw Error(ErrorCode::RangeError, "top-k needs 1 <= k <= " + std::to_string(values.size()) +
                                           ", got k=" + std::to_string(k));
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  order.resize(k);
  return order;
}

void check_mask(const AttentionMap& map, const Mask& mask) {
  if (mask.size() != map.locations()) {
    throw Error(ErrorCode::ShapeMismatch, "mask covers " + std::to_string(mask.size()) +
                                              " locations, attention map has " +
                                              std::to_string(map.locations()));
  }
}

void check_tokens(std::span<const std::size_t> tokens, std::size_t token_count) {
  if (tokens.empty()) throw Error(ErrorCode::IndexError, "token set is empty");
  std::vector<std::size_t> sorted(tokens.begin(), tokens.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw Error(ErrorCode::IndexError, "token set contains a duplicate index");
  }
  if (sorted.back() >= token_count) {
    throw Error(ErrorCode::IndexError, "token index " + std::to_string(sorted.back()) +
                                           " out of range for " + std::to_string(token_count) + " tokens");
  }
}

struct MaskedColumns {
  std::vector<double> inside;
  std::vector<double> outside;
};

MaskedColumns split_column(const AttentionMap& map, const Mask& mask, std::size_t token) {
  MaskedColumns out;
  out.inside.resize(map.locations());
  out.outside.resize(map.locations());
  for (std::size_t u = 0; u < map.locations(); ++u) {
    out.inside[u] = map(u, token) * mask.value(u);
    out.outside[u] = map(u, token) * (1.0 - mask.value(u));
  }
  return out;
}

std::vector<double> token_sums(const AttentionMap& map, std::span<const std::size_t> tokens) {
  std::vector<double> sums(map.locations(), 0.0);
  for (std::size_t u = 0; u < map.locations(); ++u) {
    for (std::size_t v : tokens) sums[u] += map(u, v);
  }
  return sums;
}

void check_retention_inputs(const AttentionMap& reference, const AttentionMap& target,
                            const Mask& mask, std::span<const std::size_t> tokens) {
  if (reference.locations() != target.locations() || reference.tokens() != target.tokens()) {
    throw Error(ErrorCode::ShapeMismatch, "reference and target attention maps differ in shape");
  }
  check_mask(target, mask);
  check_tokens(tokens, target.tokens());
}

}  // namespace

double topk_mean(std::span<const double> values, std::size_t k) {
  double sum = 0.0;
  for (std::size_t i : topk_indices(values, k)) sum += values[i];
  return sum / static_cast<double>(k);
}

double attention_control_energy(const AttentionMap& map, const Mask& mask, std::size_t token,
                                const EnergyConfig& config) {
  check_mask(map, mask);
  if (token >= map.tokens()) throw Error(ErrorCode::IndexError, "token index out of range");
  const std::size_t k = config.top_k(map.locations());
  const auto columns = split_column(map, mask, token);
  return -topk_mean(columns.inside, k) + config.omega * topk_mean(columns.outside, k);
}

double energy_total(const AttentionMap& map, const Mask& mask, std::span<const std::size_t> tokens,
                    const EnergyConfig& config) {
  check_tokens(tokens, map.tokens());
  double total = 0.0;
  for (std::size_t v : tokens) total += attention_control_energy(map, mask, v, config);
  return total;
}

Matrix energy_total_grad(const AttentionMap& map, const Mask& mask,
                         std::span<const std::size_t> tokens, const EnergyConfig& config) {
  check_mask(map, mask);
  check_tokens(tokens, map.tokens());
  const std::size_t k = config.top_k(map.locations());
  const double share = 1.0 / static_cast<double>(k);
  Matrix grad(map.locations(), map.tokens());
  for (std::size_t v : tokens) {
    const auto columns = split_column(map, mask, v);
    for (std::size_t u : topk_indices(columns.inside, k)) grad(u, v) -= share * mask.value(u);
    for (std::size_t u : topk_indices(columns.outside, k)) {
      grad(u, v) += config.omega * share * (1.0 - mask.value(u));
    }
  }
  return grad;
}

double background_retention_energy(const AttentionMap& reference, const AttentionMap& target,
                                   const Mask& second_object, std::span<const std::size_t> tokens) {
  check_retention_inputs(reference, target, second_object, tokens);
  const auto s1 = token_sums(reference, tokens);
  const auto s2 = token_sums(target, tokens);
  double energy = 0.0;
  for (std::size_t u = 0; u < s1.size(); ++u) {
    const double d = s1[u] - s2[u];
    energy += (1.0 - second_object.value(u)) * d * d;
  }
  return 0.5 * energy;
}

Matrix background_retention_grad(const AttentionMap& reference, const AttentionMap& target,
                                 const Mask& second_object, std::span<const std::size_t> tokens) {
  check_retention_inputs(reference, target, second_object, tokens);
  const auto s1 = token_sums(reference, tokens);
  const auto s2 = token_sums(target, tokens);
  Matrix grad(target.locations(), target.tokens());
  for (std::size_t u = 0; u < s1.size(); ++u) {
    const double g = -(1.0 - second_object.value(u)) * (s1[u] - s2[u]);
    for (std::size_t v : tokens) grad(u, v) = g;
  }
  return grad;
}

double QuadraticEnergy::value(const LatentGrid& z) const {
  double sum = 0.0;
  for (double v : z.values()) sum += v * v;
  return 0.5 * sum;
}

LatentGrid QuadraticEnergy::gradient(const LatentGrid& z) const { return z; }

AttentionControlEnergy::AttentionControlEnergy(CrossAttentionProbe probe, Mask mask,
                                               std::vector<std::size_t> tokens, EnergyConfig config)
    : probe_(std::move(probe)), mask_(std::move(mask)), tokens_(std::move(tokens)), config_(config) {
  check_tokens(tokens_, probe_.tokens());
}

double AttentionControlEnergy::value(const LatentGrid& z) const {
  return energy_total(probe_.attention(z), mask_, tokens_, config_);
}

LatentGrid AttentionControlEnergy::gradient(const LatentGrid& z) const {
  const AttentionMap map = probe_.attention(z);
  return probe_.backward(z, softmax_backward(map, energy_total_grad(map, mask_, tokens_, config_)));
}

BackgroundRetentionEnergy::BackgroundRetentionEnergy(CrossAttentionProbe probe, AttentionMap reference,
                                                     Mask second_object, std::vector<std::size_t> tokens)
    : probe_(std::move(probe)),
      reference_(std::move(reference)),
      mask_(std::move(second_object)),
      tokens_(std::move(tokens)) {
  check_tokens(tokens_, probe_.tokens());
}

double BackgroundRetentionEnergy::value(const LatentGrid& z) const {
  return background_retention_energy(reference_, probe_.attention(z), mask_, tokens_);
}

LatentGrid BackgroundRetentionEnergy::gradient(const LatentGrid& z) const {
  const AttentionMap target = probe_.attention(z);
  return probe_.backward(
      z, softmax_backward(target, background_retention_grad(reference_, target, mask_, tokens_)));
}

LatentGrid latent_energy_update(const LatentGrid& z, const DifferentiableEnergy& energy,
                                const EnergyConfig& config) {
  if (!(config.eta >= 0.0)) throw Error(ErrorCode::RangeError, "eta must be non-negative");
  const LatentGrid grad = energy.gradient(z);
  require_same_shape(z, grad, "latent_energy_update");
  if (!grad.all_finite()) throw Error(ErrorCode::NonfiniteGradient, "energy gradient is not finite");
  LatentGrid out = z;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= config.eta * grad[i];
  return out;
}

LatentGrid finite_difference_gradient(const std::function<double(const LatentGrid&)>& f,
                                      const LatentGrid& z, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::RangeError, "finite-difference step must be positive");
  LatentGrid grad(z.shape());
  LatentGrid probe = z;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double original = probe[i];
    probe[i] = original + h;
    const double up = f(probe);
    probe[i] = original - h;
    const double down = f(probe);
    probe[i] = original;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw Error(ErrorCode::NonfiniteValue, "function is not finite near coordinate " + std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double gradient_relative_error(const LatentGrid& analytic, const LatentGrid& numeric) {
  require_same_shape(analytic, numeric, "gradient_relative_error");
  double diff = 0.0;
  double norm_a = 0.0;
  double norm_n = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    norm_a += analytic[i] * analytic[i];
    norm_n += numeric[i] * numeric[i];
  }
  const double denom = std::sqrt(norm_a) + std::sqrt(norm_n);
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

}  // namespace spatial
