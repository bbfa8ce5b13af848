#include "spatial/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spatial/error.hpp"

namespace spatial {

AttentionMap::AttentionMap(Matrix probabilities) : probs_(std::move(probabilities)) {
  for (std::size_t u = 0; u < probs_.rows(); ++u) {
    double sum = 0.0;
    for (std::size_t v = 0; v < probs_.cols(); ++v) {
      const double a = probs_(u, v);
      if (!(a >= 0.0) || !std::isfinite(a)) {
        throw Error(ErrorCode::InvalidInput, "attention entries must be finite and non-negative");
      }
      sum += a;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw Error(ErrorCode::InvalidInput, "attention row " + std::to_string(u) + " sums to " +
                                               std::to_string(sum));
    }
  }
}

AttentionMap softmax_rows(const Matrix& logits) {
  if (logits.cols() == 0) throw Error(ErrorCode::ShapeMismatch, "softmax over zero tokens");
  Matrix probs(logits.rows(), logits.cols());
  for (std::size_t u = 0; u < logits.rows(); ++u) {
    double peak = logits(u, 0);
    for (std::size_t v = 1; v < logits.cols(); ++v) peak = std::max(peak, logits(u, v));
    double total = 0.0;
    for (std::size_t v = 0; v < logits.cols(); ++v) {
      probs(u, v) = std::exp(logits(u, v) - peak);
      total += probs(u, v);
    }
    for (std::size_t v = 0; v < logits.cols(); ++v) probs(u, v) /= total;
  }
  return AttentionMap(std::move(probs));
}

AttentionMap attention_map(const Matrix& queries, const Matrix& keys) {
  if (queries.cols() != keys.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "query dimension " + std::to_string(queries.cols()) +
                                              " does not match key dimension " +
                                              std::to_string(keys.cols()));
  }
  Matrix logits(queries.rows(), keys.rows());
  for (std::size_t u = 0; u < queries.rows(); ++u) {
    for (std::size_t v = 0; v < keys.rows(); ++v) {
      double dot = 0.0;
      for (std::size_t d = 0; d < queries.cols(); ++d) dot += queries(u, d) * keys(v, d);
      logits(u, v) = dot;
    }
  }
  return softmax_rows(logits);
}

Matrix softmax_backward(const AttentionMap& map, const Matrix& grad_probs) {
  if (grad_probs.rows() != map.locations() || grad_probs.cols() != map.tokens()) {
    throw Error(ErrorCode::ShapeMismatch, "softmax_backward: gradient shape differs from the map");
  }
  Matrix grad(map.locations(), map.tokens());
  for (std::size_t u = 0; u < map.locations(); ++u) {
    double weighted = 0.0;
    for (std::size_t v = 0; v < map.tokens(); ++v) weighted += map(u, v) * grad_probs(u, v);
    for (std::size_t v = 0; v < map.tokens(); ++v) grad(u, v) = map(u, v) * (grad_probs(u, v) - weighted);
  }
  return grad;
}

CrossAttentionProbe::CrossAttentionProbe(Matrix query_weights, Matrix keys)
    : weights_(std::move(query_weights)), keys_(std::move(keys)) {
  if (weights_.cols() != keys_.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "probe query and key dimensions differ");
  }
}

Matrix CrossAttentionProbe::logits(const LatentGrid& z) const {
  const GridShape& shape = z.shape();
  if (shape.channels != weights_.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "probe expects " + std::to_string(weights_.rows()) +
                                              " latent channels, got " + std::to_string(shape.channels));
  }
  const std::size_t locations = shape.spatial_size();
  Matrix queries(locations, weights_.cols());
  for (std::size_t u = 0; u < locations; ++u) {
    for (std::size_t d = 0; d < weights_.cols(); ++d) {
      double q = 0.0;
      for (std::size_t c = 0; c < shape.channels; ++c) q += z[u * shape.channels + c] * weights_(c, d);
      queries(u, d) = q;
    }
  }
  Matrix out(locations, keys_.rows());
  for (std::size_t u = 0; u < locations; ++u) {
    for (std::size_t v = 0; v < keys_.rows(); ++v) {
      double dot = 0.0;
      for (std::size_t d = 0; d < keys_.cols(); ++d) dot += queries(u, d) * keys_(v, d);
      out(u, v) = dot;
    }
  }
  return out;
}

AttentionMap CrossAttentionProbe::attention(const LatentGrid& z) const {
  return softmax_rows(logits(z));
}

LatentGrid CrossAttentionProbe::backward(const LatentGrid& z, const Matrix& grad_logits) const {
  const GridShape& shape = z.shape();
  const std::size_t locations = shape.spatial_size();
  if (grad_logits.rows() != locations || grad_logits.cols() != keys_.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "probe backward: gradient shape differs from the logits");
  }
  LatentGrid grad(shape);
  std::vector<double> grad_query(keys_.cols());
  for (std::size_t u = 0; u < locations; ++u) {
    std::fill(grad_query.begin(), grad_query.end(), 0.0);
    for (std::size_t v = 0; v < keys_.rows(); ++v) {
      for (std::size_t d = 0; d < keys_.cols(); ++d) grad_query[d] += grad_logits(u, v) * keys_(v, d);
    }
    for (std::size_t c = 0; c < shape.channels; ++c) {
      double g = 0.0;
      for (std::size_t d = 0; d < weights_.cols(); ++d) g += weights_(c, d) * grad_query[d];
      grad[u * shape.channels + c] = g;
    }
  }
  return grad;
}

}  // namespace spatial
