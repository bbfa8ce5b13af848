#include "spatial/latent.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "json.hpp"
#include "spatial/error.hpp"

namespace spatial {

namespace {
std::string describe(const GridShape& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" + std::to_string(s.channels);
}
}  // namespace

LatentGrid::LatentGrid(GridShape shape, double fill) : shape_(shape), values_(shape.size(), fill) {
  if (!std::isfinite(fill)) throw Error(ErrorCode::NonfiniteValue, "latent fill value is not finite");
}

LatentGrid::LatentGrid(GridShape shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)) {
  if (values_.size() != shape_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "latent of shape " + describe(shape_) + " needs " +
                                              std::to_string(shape_.size()) + " values, got " +
                                              std::to_string(values_.size()));
  }
  if (!all_finite()) throw Error(ErrorCode::NonfiniteValue, "latent contains non-finite values");
}

LatentGrid LatentGrid::from_values(std::initializer_list<double> values) {
  return LatentGrid(GridShape{1, values.size(), 1}, std::vector<double>(values));
}

double& LatentGrid::at(std::size_t row, std::size_t col, std::size_t channel) {
  return values_.at((row * shape_.width + col) * shape_.channels + channel);
}

double LatentGrid::at(std::size_t row, std::size_t col, std::size_t channel) const {
  return values_.at((row * shape_.width + col) * shape_.channels + channel);
}

bool LatentGrid::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void require_same_shape(const LatentGrid& a, const LatentGrid& b, const char* what) {
  if (!(a.shape() == b.shape())) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": shapes " + describe(a.shape()) +
                                              " and " + describe(b.shape()) + " differ");
  }
}

double max_abs_difference(const LatentGrid& a, const LatentGrid& b) {
  require_same_shape(a, b, "max_abs_difference");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

Mask::Mask(std::size_t height, std::size_t width, bool fill)
    : height_(height), width_(width), bits_(height * width, fill ? 1 : 0) {}

Mask::Mask(std::size_t height, std::size_t width, std::vector<int> values)
    : height_(height), width_(width) {
  if (values.size() != height * width) {
    throw Error(ErrorCode::ShapeMismatch, "mask needs " + std::to_string(height * width) + " values");
  }
  bits_.reserve(values.size());
  for (int v : values) {
    if (v != 0 && v != 1) throw Error(ErrorCode::InvalidInput, "mask values must be 0 or 1");
    bits_.push_back(static_cast<unsigned char>(v));
  }
}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows * cols) {
    throw Error(ErrorCode::ShapeMismatch, "matrix needs " + std::to_string(rows * cols) + " values");
  }
}

std::string latent_to_json(const LatentGrid& grid) {
  nlohmann::ordered_json j;
  j["shape"] = {grid.shape().height, grid.shape().width, grid.shape().channels};
  j["values"] = std::vector<double>(grid.values().begin(), grid.values().end());
  return j.dump();
}

LatentGrid latent_from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::SchemaError, "latent fixture is not a JSON object");
  const auto shape = j.find("shape");
  const auto values = j.find("values");
  if (shape == j.end() || !shape->is_array() || shape->size() != 3 || values == j.end() || !values->is_array()) {
    throw Error(ErrorCode::SchemaError, "latent fixture needs \"shape\": [h, w, c] and \"values\"");
  }
  std::size_t dims[3];
  for (std::size_t i = 0; i < 3; ++i) {
    if (!(*shape)[i].is_number_unsigned()) throw Error(ErrorCode::SchemaError, "latent shape entries must be unsigned");
    dims[i] = (*shape)[i].get<std::size_t>();
  }
  std::vector<double> data;
  for (const auto& v : *values) {
    if (!v.is_number()) throw Error(ErrorCode::SchemaError, "latent values must be numbers");
    data.push_back(v.get<double>());
  }
  return LatentGrid(GridShape{dims[0], dims[1], dims[2]}, std::move(data));
}

}  // namespace spatial
