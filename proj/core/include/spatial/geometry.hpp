#pragma once

#include <string_view>
#include <vector>

namespace spatial {

/// Axis-aligned box in pixels: left edge, top edge, width, height.
/// Serialized as an integer array `[x, y, w, h]`.
struct BBox {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct Center {
  double cx = 0;
  double cy = 0;

  friend bool operator==(const Center&, const Center&) = default;
};

enum class SpatialRelation { Left, Right, NA };

/// "left", "right" or "n/a".
std::string_view to_string(SpatialRelation relation);
/// Inverse of to_string for "left"/"right"; anything else maps to NA.
SpatialRelation relation_from_string(std::string_view text);

struct CanvasSpec {
  int width = 512;
  int height = 512;
  int max_box_dim = 350;

  friend bool operator==(const CanvasSpec&, const CanvasSpec&) = default;
};

enum class Violation {
  OutOfBounds,
  DimTooLarge,
  NonpositiveDim,
  Overlap,
  ForegroundInBackground,
  BadObjectCount,
  InvalidCaption,
};

std::string_view to_string(Violation violation);

Center center(const BBox& box);

/// Relation of box `b` with respect to box `a`, decided on exact center x.
SpatialRelation relation_of(const BBox& b, const BBox& a);

/// Empty result means the box fits the canvas. Dimensions must be strictly
/// below `max_box_dim`.
std::vector<Violation> validate_box(const BBox& box, const CanvasSpec& canvas);

/// Positive-area intersection; touching edges do not overlap.
bool boxes_overlap(const BBox& a, const BBox& b);

double area(const BBox& box);

}  // namespace spatial
