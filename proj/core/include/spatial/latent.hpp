#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spatial {

struct GridShape {
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t channels = 1;

  std::size_t size() const { return height * width * channels; }
  std::size_t spatial_size() const { return height * width; }
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// Dense H x W x C array of finite reals, channel-fastest storage.
class LatentGrid {
 public:
  LatentGrid() = default;
  explicit LatentGrid(GridShape shape, double fill = 0.0);
  /// Throws ShapeMismatch when values.size() != shape.size(), NonfiniteValue
  /// when a value is not finite.
  LatentGrid(GridShape shape, std::vector<double> values);

  /// 1 x N x 1 grid, convenient for small vectors.
  static LatentGrid from_values(std::initializer_list<double> values);

  const GridShape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(std::size_t row, std::size_t col, std::size_t channel);
  double at(std::size_t row, std::size_t col, std::size_t channel) const;

  bool all_finite() const;

  friend bool operator==(const LatentGrid&, const LatentGrid&) = default;

 private:
  GridShape shape_;
  std::vector<double> values_ = std::vector<double>(1, 0.0);
};

/// Throws ShapeMismatch unless the shapes agree.
void require_same_shape(const LatentGrid& a, const LatentGrid& b, const char* what);

double max_abs_difference(const LatentGrid& a, const LatentGrid& b);

/// {"shape": [h, w, c], "values": [...]} with round-trip precision.
std::string latent_to_json(const LatentGrid& grid);
/// Throws SchemaError, or the LatentGrid constructor's errors.
LatentGrid latent_from_json(std::string_view text);

/// Binary H x W mask over the spatial grid; applies to every channel.
class Mask {
 public:
  Mask() = default;
  Mask(std::size_t height, std::size_t width, bool fill = false);
  /// Row-major values; each must be 0 or 1 (InvalidInput otherwise).
  Mask(std::size_t height, std::size_t width, std::vector<int> values);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return bits_.size(); }
  bool operator[](std::size_t u) const { return bits_[u] != 0; }
  void set(std::size_t u, bool on) { bits_[u] = on ? 1 : 0; }
  double value(std::size_t u) const { return bits_[u] ? 1.0 : 0.0; }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<unsigned char> bits_;
};

/// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace spatial
