#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "spatial/cooccur.hpp"
#include "spatial/evaluator.hpp"
#include "spatial/layout.hpp"

namespace spatial {

/// Canvas-sized grid of category ids, 0 for background. Row-major.
class LabelGrid {
 public:
  LabelGrid(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  std::uint16_t at(int x, int y) const { return cells_[index(x, y)]; }
  void set(int x, int y, std::uint16_t id) { cells_[index(x, y)] = id; }
  std::size_t count(std::uint16_t id) const;
  const std::vector<std::uint16_t>& cells() const { return cells_; }

  friend bool operator==(const LabelGrid&, const LabelGrid&) = default;

 private:
  std::size_t index(int x, int y) const;

  int width_;
  int height_;
  std::vector<std::uint16_t> cells_;
};

/// Category id of the longest vocabulary name that is a whole-word suffix of
/// the caption ("a small teddy bear" -> "teddy bear"). Throws UnknownCategory.
int category_for_caption(std::string_view caption, const CategoryVocab& vocab);

/// Paints each box with its category id. Throws ValidationError for invalid
/// layouts and UnknownCategory, InvalidInput for non-integer boxes or ids
/// outside 1..65535.
LabelGrid rasterize(const Layout& layout, const CategoryVocab& vocab);

/// Tight box of every present category id, score 1.0, in id order.
DetectionRecord oracle_detect(const LabelGrid& grid, const CategoryVocab& vocab,
                              std::string image_id = {});

struct Perturbation {
  enum class Kind { DropObject, SwapPositions, Jitter };
  Kind kind = Kind::SwapPositions;
  int index = 0;        // DropObject
  int max_px = 0;       // Jitter
  std::uint64_t seed = 0;

  static Perturbation drop_object(int index) { return {Kind::DropObject, index, 0, 0}; }
  static Perturbation swap_positions() { return {Kind::SwapPositions, 0, 0, 0}; }
  static Perturbation jitter(int max_px, std::uint64_t seed) { return {Kind::Jitter, 0, max_px, seed}; }
};

/// drop_object throws IndexError; swap_positions exchanges the two boxes and
/// throws ArityError unless there are exactly two; jitter shifts each box by
/// up to max_px per axis, clamped to the canvas, and returns the input when no
/// valid draw is found. Throws ValidationError when the result is invalid.
Layout perturb(const Layout& layout, const Perturbation& perturbation);

/// Binary PGM (P5), one byte per cell. Throws RangeError for ids above 255.
std::string to_pgm(const LabelGrid& grid);

}  // namespace spatial
