#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spatial/latent.hpp"

namespace spatial {

/// Cumulative signal levels alpha_bar[0..T] with alpha_bar[0] = 1, strictly
/// decreasing, all in (0, 1].
class DDIMSchedule {
 public:
  /// Throws RangeError when the sequence breaks the invariants.
  explicit DDIMSchedule(std::vector<double> alpha_bar);

  /// Linear beta in [beta_start, beta_end] over `train_steps` training steps,
  /// subsampled evenly to `steps` sampling steps.
  static DDIMSchedule linear(int steps, int train_steps = 1000, double beta_start = 1e-4,
                             double beta_end = 2e-2);

  int steps() const { return static_cast<int>(alpha_bar_.size()) - 1; }
  double alpha_bar(int t) const { return alpha_bar_.at(static_cast<std::size_t>(t)); }
  const std::vector<double>& alpha_bars() const { return alpha_bar_; }

 private:
  std::vector<double> alpha_bar_;
};

/// {"alpha_bar": [1, ...]} with round-trip precision.
std::string schedule_to_json(const DDIMSchedule& schedule);
/// Throws SchemaError, or RangeError when the values break the invariants.
DDIMSchedule schedule_from_json(std::string_view text);

/// Optional conditioning vector; a null pointer stands for the empty condition.
struct Conditioning {
  std::vector<double> embedding;
};

/// Epsilon-prediction network.
class ScoreNetwork {
 public:
  virtual ~ScoreNetwork() = default;
  /// Must be deterministic and return a grid of the same shape as `z`.
  virtual LatentGrid eps(const LatentGrid& z, int t, const Conditioning* image,
                         const Conditioning* text) const = 0;
};

struct GuidanceScales {
  double omega_img = 1.0;
  double omega_text = 1.0;
};

/// eps_uncond + w_I (eps_img - eps_uncond) + w_T (eps_full - eps_img), exact
/// for (w_I, w_T) = (0, 0) and (1, 1).
LatentGrid cfg_score(const LatentGrid& eps_uncond, const LatentGrid& eps_img,
                     const LatentGrid& eps_full, const GuidanceScales& scales);

/// Queries `net` with (null, null), (image, null) and (image, text) and
/// combines the three predictions with cfg_score.
LatentGrid guided_eps(const ScoreNetwork& net, const LatentGrid& z, int t, const Conditioning& image,
                      const Conditioning& text, const GuidanceScales& scales);

/// Squared L2 norm of the difference, summed over all entries.
double denoising_loss(const LatentGrid& eps_true, const LatentGrid& eps_pred);

/// Moves a latent from signal level `from` to signal level `to` along the
/// deterministic DDIM path defined by `eps`.
LatentGrid ddim_transfer(const LatentGrid& z, const LatentGrid& eps, double alpha_bar_from,
                         double alpha_bar_to);

/// z_t -> z_{t-1}. Throws StepOutOfRange unless 1 <= t <= T.
LatentGrid ddim_step(const LatentGrid& z_t, int t, const LatentGrid& eps, const DDIMSchedule& s);

/// z_{t-1} -> z_t, the algebraic inverse of ddim_step for the same eps.
LatentGrid ddim_inverse_step(const LatentGrid& z_prev, int t, const LatentGrid& eps,
                             const DDIMSchedule& s);

/// Inversion step whose output z_t satisfies ddim_step(z_t, t, net(z_t, t)) ==
/// z_prev, found by fixed-point iteration starting from net(z_prev, t).
LatentGrid ddim_inverse_step_implicit(const ScoreNetwork& net, const LatentGrid& z_prev, int t,
                                      const DDIMSchedule& s, int max_iterations = 100,
                                      double tolerance = 1e-14);

/// z_b (1 - union of masks) + sum z_i m_i. Throws ShapeMismatch or MaskOverlap.
LatentGrid compose_latents(const LatentGrid& background,
                           const std::vector<std::pair<LatentGrid, Mask>>& parts);

/// Whether latent composition applies at step t, i.e. t in [T - k, T].
bool composition_active(int t, int total_steps, int k);

/// Bayes-optimal eps for i.i.d. data x0 ~ N(mu, sigma2):
/// sqrt(1 - ab) (z - sqrt(ab) mu) / (ab sigma2 + 1 - ab).
LatentGrid gaussian_oracle_eps(const LatentGrid& z_t, int t, double mu, double sigma2,
                               const DDIMSchedule& s);

/// ScoreNetwork backed by gaussian_oracle_eps; ignores conditioning.
class GaussianOracleNetwork final : public ScoreNetwork {
 public:
  GaussianOracleNetwork(double mu, double sigma2, DDIMSchedule schedule);
  LatentGrid eps(const LatentGrid& z, int t, const Conditioning* image,
                 const Conditioning* text) const override;

 private:
  double mu_;
  double sigma2_;
  DDIMSchedule schedule_;
};

/// Phase boundaries of the three-stage enhancement pass.
struct EnhancementSchedule {
  int total_steps = 100;
  double alpha = 0.7;
  int t1 = 70;  // end of inversion, round(alpha T)
  int t2 = 85;  // hand-off from base to enhancer, round(T (1 + alpha) / 2)

  /// Inversion depth and denoising step counts. The phase index p runs from
  /// the clean image (p = T) towards noise, so step p sits at noise level
  /// T - p: inversion covers T - t1 steps, the base model t2 - t1 steps and
  /// the enhancer T - t2 steps.
  int inversion_steps() const { return total_steps - t1; }
  int base_steps() const { return t2 - t1; }
  int enhancer_steps() const { return total_steps - t2; }
};

/// Rounds to the nearest step with ties going down. Throws RangeError unless
/// 0 <= alpha <= 1 and T >= 1.
EnhancementSchedule enhancement_phases(int total_steps, double alpha);

/// Inverts `z` by inversion_steps() with the base network, denoises
/// base_steps() with `base`, then enhancer_steps() with `enhancer`. Throws
/// RangeError when the schedules disagree on T.
LatentGrid run_enhancement(const LatentGrid& z, const ScoreNetwork& base, const ScoreNetwork& enhancer,
                           const EnhancementSchedule& phases, const DDIMSchedule& schedule);

}  // namespace spatial
