#pragma once

#include "spatial/latent.hpp"

namespace spatial {

/// Row-stochastic map: rows are spatial locations u, columns token indices v.
class AttentionMap {
 public:
  /// Throws InvalidInput unless entries are >= 0 and rows sum to 1 within 1e-9.
  explicit AttentionMap(Matrix probabilities);

  std::size_t locations() const { return probs_.rows(); }
  std::size_t tokens() const { return probs_.cols(); }
  double operator()(std::size_t u, std::size_t v) const { return probs_(u, v); }
  const Matrix& probabilities() const { return probs_; }

 private:
  Matrix probs_;
};

/// Row-wise softmax, stabilized by subtracting each row's maximum.
AttentionMap softmax_rows(const Matrix& logits);

/// A_uv = softmax_v(q_u . k_v) for queries (U x d) and keys (V x d).
/// Throws ShapeMismatch when the inner dimensions differ.
AttentionMap attention_map(const Matrix& queries, const Matrix& keys);

/// Pulls dE/dA back through the row softmax to dE/dlogits.
Matrix softmax_backward(const AttentionMap& map, const Matrix& grad_probs);

/// Cross-attention read-out used to differentiate energies with respect to a
/// latent: q_u = W^T z_u for each spatial location u, logits = q_u . k_v.
class CrossAttentionProbe {
 public:
  /// query_weights: C x d, keys: V x d.
  CrossAttentionProbe(Matrix query_weights, Matrix keys);

  std::size_t tokens() const { return keys_.rows(); }
  Matrix logits(const LatentGrid& z) const;
  AttentionMap attention(const LatentGrid& z) const;
  /// dE/dz given dE/dlogits evaluated at z.
  LatentGrid backward(const LatentGrid& z, const Matrix& grad_logits) const;

 private:
  Matrix weights_;
  Matrix keys_;
};

}  // namespace spatial
