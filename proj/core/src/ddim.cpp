#include <algorithm>
#include <cmath>
#include <string>

#include "json.hpp"
#include "spatial/diffusion.hpp"
#include "spatial/error.hpp"

namespace spatial {

DDIMSchedule::DDIMSchedule(std::vector<double> alpha_bar) : alpha_bar_(std::move(alpha_bar)) {
  if (alpha_bar_.size() < 2) throw Error(ErrorCode::RangeError, "schedule needs at least one step");
  if (alpha_bar_.front() != 1.0) throw Error(ErrorCode::RangeError, "alpha_bar[0] must be 1");
  for (std::size_t t = 1; t < alpha_bar_.size(); ++t) {
    const double a = alpha_bar_[t];
    if (!(a > 0.0 && a <= 1.0)) {
      throw Error(ErrorCode::RangeError, "alpha_bar[" + std::to_string(t) + "] outside (0, 1]");
    }
    if (!(a < alpha_bar_[t - 1])) {
      throw Error(ErrorCode::RangeError, "alpha_bar must decrease strictly at step " + std::to_string(t));
    }
  }
}

DDIMSchedule DDIMSchedule::linear(int steps, int train_steps, double beta_start, double beta_end) {
  if (steps < 1 || train_steps < steps) {
    throw Error(ErrorCode::RangeError, "need 1 <= steps <= train_steps");
  }
  if (!(beta_start > 0 && beta_start <= beta_end && beta_end < 1)) {
    throw Error(ErrorCode::RangeError, "need 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> cumulative(static_cast<std::size_t>(train_steps) + 1, 1.0);
  for (int i = 1; i <= train_steps; ++i) {
    const double frac = train_steps == 1 ? 0.0 : static_cast<double>(i - 1) / (train_steps - 1);
    const double beta = beta_start + frac * (beta_end - beta_start);
    cumulative[i] = cumulative[i - 1] * (1.0 - beta);
  }
  std::vector<double> alpha_bar(static_cast<std::size_t>(steps) + 1, 1.0);
  for (int t = 1; t <= steps; ++t) {
    const auto index = static_cast<std::size_t>(
        std::llround(static_cast<double>(t) * train_steps / static_cast<double>(steps)));
    alpha_bar[t] = cumulative[index];
  }
  return DDIMSchedule(std::move(alpha_bar));
}

LatentGrid cfg_score(const LatentGrid& eps_uncond, const LatentGrid& eps_img,
                     const LatentGrid& eps_full, const GuidanceScales& scales) {
  require_same_shape(eps_uncond, eps_img, "cfg_score");
  require_same_shape(eps_uncond, eps_full, "cfg_score");
  // Expanded per input so that zero weights drop a term exactly.
  const double wu = 1.0 - scales.omega_img;
  const double wi = scales.omega_img - scales.omega_text;
  const double wf = scales.omega_text;
  LatentGrid out(eps_uncond.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = wu * eps_uncond[i] + wi * eps_img[i] + wf * eps_full[i];
  }
  return out;
}

LatentGrid guided_eps(const ScoreNetwork& net, const LatentGrid& z, int t, const Conditioning& image,
                      const Conditioning& text, const GuidanceScales& scales) {
  const LatentGrid uncond = net.eps(z, t, nullptr, nullptr);
  const LatentGrid img = net.eps(z, t, &image, nullptr);
  const LatentGrid full = net.eps(z, t, &image, &text);
  return cfg_score(uncond, img, full, scales);
}

double denoising_loss(const LatentGrid& eps_true, const LatentGrid& eps_pred) {
  require_same_shape(eps_true, eps_pred, "denoising_loss");
  double sum = 0.0;
  for (std::size_t i = 0; i < eps_true.size(); ++i) {
    const double d = eps_true[i] - eps_pred[i];
    sum += d * d;
  }
  return sum;
}

LatentGrid ddim_transfer(const LatentGrid& z, const LatentGrid& eps, double alpha_bar_from,
                         double alpha_bar_to) {
  require_same_shape(z, eps, "ddim step");
  const double sqrt_from = std::sqrt(alpha_bar_from);
  const double noise_from = std::sqrt(1.0 - alpha_bar_from);
  const double sqrt_to = std::sqrt(alpha_bar_to);
  const double noise_to = std::sqrt(1.0 - alpha_bar_to);
  LatentGrid out(z.shape());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double x0 = (z[i] - noise_from * eps[i]) / sqrt_from;
    out[i] = sqrt_to * x0 + noise_to * eps[i];
  }
  return out;
}

namespace {
void require_step(int t, const DDIMSchedule& s) {
  if (t < 1 || t > s.steps()) {
    throw Error(ErrorCode::StepOutOfRange,
                "step " + std::to_string(t) + " outside [1, " + std::to_string(s.steps()) + "]");
  }
}
}  // namespace

LatentGrid ddim_step(const LatentGrid& z_t, int t, const LatentGrid& eps, const DDIMSchedule& s) {
  require_step(t, s);
  return ddim_transfer(z_t, eps, s.alpha_bar(t), s.alpha_bar(t - 1));
}

LatentGrid ddim_inverse_step(const LatentGrid& z_prev, int t, const LatentGrid& eps,
                             const DDIMSchedule& s) {
  require_step(t, s);
  return ddim_transfer(z_prev, eps, s.alpha_bar(t - 1), s.alpha_bar(t));
}

LatentGrid ddim_inverse_step_implicit(const ScoreNetwork& net, const LatentGrid& z_prev, int t,
                                      const DDIMSchedule& s, int max_iterations, double tolerance) {
  LatentGrid z = ddim_inverse_step(z_prev, t, net.eps(z_prev, t, nullptr, nullptr), s);
  for (int i = 0; i < max_iterations; ++i) {
    LatentGrid next = ddim_inverse_step(z_prev, t, net.eps(z, t, nullptr, nullptr), s);
    double scale = 1.0;
    for (double v : next.values()) scale = std::max(scale, std::abs(v));
    const double change = max_abs_difference(next, z);
    z = std::move(next);
    if (change <= tolerance * scale) break;
  }
  return z;
}

LatentGrid compose_latents(const LatentGrid& background,
                           const std::vector<std::pair<LatentGrid, Mask>>& parts) {
  const GridShape& shape = background.shape();
  std::vector<int> owner(shape.spatial_size(), -1);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& [latent, mask] = parts[p];
    require_same_shape(background, latent, "compose_latents");
    if (mask.height() != shape.height || mask.width() != shape.width) {
      throw Error(ErrorCode::ShapeMismatch, "compose_latents: mask does not match the latent grid");
    }
    for (std::size_t u = 0; u < mask.size(); ++u) {
      if (!mask[u]) continue;
      if (owner[u] >= 0) {
        throw Error(ErrorCode::MaskOverlap, "compose_latents: masks " + std::to_string(owner[u]) +
                                                " and " + std::to_string(p) + " overlap");
      }
      owner[u] = static_cast<int>(p);
    }
  }
  LatentGrid out = background;
  for (std::size_t u = 0; u < owner.size(); ++u) {
    if (owner[u] < 0) continue;
    const LatentGrid& source = parts[static_cast<std::size_t>(owner[u])].first;
    for (std::size_t c = 0; c < shape.channels; ++c) {
      out[u * shape.channels + c] = source[u * shape.channels + c];
    }
  }
  return out;
}

bool composition_active(int t, int total_steps, int k) {
  return t >= total_steps - k && t <= total_steps;
}

LatentGrid gaussian_oracle_eps(const LatentGrid& z_t, int t, double mu, double sigma2,
                               const DDIMSchedule& s) {
  if (!(sigma2 >= 0)) throw Error(ErrorCode::RangeError, "sigma2 must be non-negative");
  if (t < 0 || t > s.steps()) throw Error(ErrorCode::StepOutOfRange, "oracle step out of range");
  const double ab = s.alpha_bar(t);
  const double denom = ab * sigma2 + 1.0 - ab;
  LatentGrid out(z_t.shape());
  if (denom == 0.0) return out;  // t = 0 with noiseless data: eps is never observed
  const double gain = std::sqrt(1.0 - ab) / denom;
  const double offset = std::sqrt(ab) * mu;
  for (std::size_t i = 0; i < z_t.size(); ++i) out[i] = gain * (z_t[i] - offset);
  return out;
}

GaussianOracleNetwork::GaussianOracleNetwork(double mu, double sigma2, DDIMSchedule schedule)
    : mu_(mu), sigma2_(sigma2), schedule_(std::move(schedule)) {
  if (!(sigma2 >= 0)) throw Error(ErrorCode::RangeError, "sigma2 must be non-negative");
}

LatentGrid GaussianOracleNetwork::eps(const LatentGrid& z, int t, const Conditioning*,
                                      const Conditioning*) const {
  return gaussian_oracle_eps(z, t, mu_, sigma2_, schedule_);
}

namespace {
// Nearest integer, exact halves rounding down.
int round_half_down(double value) { return static_cast<int>(std::ceil(value - 0.5)); }
}  // namespace

EnhancementSchedule enhancement_phases(int total_steps, double alpha) {
  if (total_steps < 1) throw Error(ErrorCode::RangeError, "enhancement needs T >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::RangeError, "alpha must lie in [0, 1]");
  EnhancementSchedule phases;
  phases.total_steps = total_steps;
  phases.alpha = alpha;
  phases.t1 = std::clamp(round_half_down(alpha * total_steps), 0, total_steps);
  phases.t2 = std::clamp(round_half_down(0.5 * total_steps * (1.0 + alpha)), phases.t1, total_steps);
  return phases;
}

LatentGrid run_enhancement(const LatentGrid& z, const ScoreNetwork& base, const ScoreNetwork& enhancer,
                           const EnhancementSchedule& phases, const DDIMSchedule& schedule) {
  if (phases.total_steps != schedule.steps()) {
    throw Error(ErrorCode::RangeError, "enhancement phases use T=" + std::to_string(phases.total_steps) +
                                           " but the schedule has " + std::to_string(schedule.steps()) +
                                           " steps");
  }
  if (!(0 <= phases.t1 && phases.t1 <= phases.t2 && phases.t2 <= phases.total_steps)) {
    throw Error(ErrorCode::RangeError, "phase boundaries must satisfy 0 <= t1 <= t2 <= T");
  }
  LatentGrid current = z;
  const int depth = phases.inversion_steps();
  for (int t = 1; t <= depth; ++t) {
    current = ddim_inverse_step_implicit(base, current, t, schedule);
  }
  int t = depth;
  for (int i = 0; i < phases.base_steps(); ++i, --t) {
    current = ddim_step(current, t, base.eps(current, t, nullptr, nullptr), schedule);
  }
  for (int i = 0; i < phases.enhancer_steps(); ++i, --t) {
    current = ddim_step(current, t, enhancer.eps(current, t, nullptr, nullptr), schedule);
  }
  return current;
}

std::string schedule_to_json(const DDIMSchedule& schedule) {
  nlohmann::ordered_json j;
  j["alpha_bar"] = schedule.alpha_bars();
  return j.dump();
}

DDIMSchedule schedule_from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("alpha_bar") || !j["alpha_bar"].is_array()) {
    throw Error(ErrorCode::SchemaError, "schedule fixture needs an \"alpha_bar\" array");
  }
  std::vector<double> values;
  for (const auto& v : j["alpha_bar"]) {
    if (!v.is_number()) throw Error(ErrorCode::SchemaError, "alpha_bar entries must be numbers");
    values.push_back(v.get<double>());
  }
  return DDIMSchedule(std::move(values));
}

}  // namespace spatial
