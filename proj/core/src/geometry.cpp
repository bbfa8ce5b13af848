#include "spatial/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace spatial {

std::string_view to_string(SpatialRelation relation) {
  switch (relation) {
    case SpatialRelation::Left: return "left";
    case SpatialRelation::Right: return "right";
    case SpatialRelation::NA: return "n/a";
  }
  return "n/a";
}

SpatialRelation relation_from_string(std::string_view text) {
  if (text == "left") return SpatialRelation::Left;
  if (text == "right") return SpatialRelation::Right;
  return SpatialRelation::NA;
}

std::string_view to_string(Violation violation) {
  switch (violation) {
    case Violation::OutOfBounds: return "OUT_OF_BOUNDS";
    case Violation::DimTooLarge: return "DIM_TOO_LARGE";
    case Violation::NonpositiveDim: return "NONPOSITIVE_DIM";
    case Violation::Overlap: return "OVERLAP";
    case Violation::ForegroundInBackground: return "FOREGROUND_IN_BACKGROUND";
    case Violation::BadObjectCount: return "BAD_OBJECT_COUNT";
    case Violation::InvalidCaption: return "INVALID_CAPTION";
  }
  return "UNKNOWN";
}

Center center(const BBox& box) {
  return {box.x + box.w / 2.0, box.y + box.h / 2.0};
}

SpatialRelation relation_of(const BBox& b, const BBox& a) {
  const double bx = center(b).cx;
  const double ax = center(a).cx;
  if (bx < ax) return SpatialRelation::Left;
  if (bx > ax) return SpatialRelation::Right;
  return SpatialRelation::NA;
}

std::vector<Violation> validate_box(const BBox& box, const CanvasSpec& canvas) {
  std::vector<Violation> out;
  const bool finite = std::isfinite(box.x) && std::isfinite(box.y) &&
                      std::isfinite(box.w) && std::isfinite(box.h);
  if (!finite || box.x < 0 || box.y < 0 || box.x + box.w > canvas.width ||
      box.y + box.h > canvas.height) {
    out.push_back(Violation::OutOfBounds);
  }
  if (box.w >= canvas.max_box_dim || box.h >= canvas.max_box_dim) {
    out.push_back(Violation::DimTooLarge);
  }
  if (!(box.w > 0) || !(box.h > 0)) {
    out.push_back(Violation::NonpositiveDim);
  }
  return out;
}

bool boxes_overlap(const BBox& a, const BBox& b) {
  const double ix = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double iy = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  return ix > 0 && iy > 0;
}

double area(const BBox& box) { return box.w * box.h; }

}  // namespace spatial
