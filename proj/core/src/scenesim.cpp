#include "spatial/scenesim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "spatial/error.hpp"
#include "spatial/random.hpp"
#include "text_util.hpp"

namespace spatial {

namespace {

constexpr int kJitterAttempts = 16;

std::vector<std::string> violation_names(const std::vector<Violation>& violations) {
  std::vector<std::string> names;
  for (Violation v : violations) names.emplace_back(to_string(v));
  return names;
}

void require_valid(const Layout& layout, const char* what) {
  const auto violations = validate_layout(layout);
  if (!violations.empty()) {
    throw Error(ErrorCode::ValidationError, std::string(what) + ": layout is invalid",
                violation_names(violations));
  }
}

int integral(double v) {
  if (v != std::floor(v) || std::abs(v) > 1e9) {
    throw Error(ErrorCode::InvalidInput, "box coordinates must be integers");
  }
  return static_cast<int>(v);
}

}  // namespace

LabelGrid::LabelGrid(int width, int height) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidInput, "grid dimensions must be positive");
  cells_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
}

std::size_t LabelGrid::index(int x, int y) const {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) {
    throw Error(ErrorCode::IndexError, "cell (" + std::to_string(x) + ", " + std::to_string(y) +
                                           ") outside the grid");
  }
  return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
}

std::size_t LabelGrid::count(std::uint16_t id) const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), id));
}

int category_for_caption(std::string_view caption, const CategoryVocab& vocab) {
  const auto caption_words = detail::words(caption);
  std::size_t best_len = 0;
  int best_id = 0;
  for (const auto& [id, name] : vocab.names()) {
    const auto name_words = detail::words(name);
    if (name_words.empty() || name_words.size() > caption_words.size()) continue;
    if (!std::equal(name_words.rbegin(), name_words.rend(), caption_words.rbegin())) continue;
    if (name_words.size() > best_len) {
      best_len = name_words.size();
      best_id = id;
    }
  }
  if (best_len == 0) {
    throw Error(ErrorCode::UnknownCategory, "no category matches caption \"" + std::string(caption) + "\"");
  }
  return best_id;
}

LabelGrid rasterize(const Layout& layout, const CategoryVocab& vocab) {
  require_valid(layout, "rasterize");
  LabelGrid grid(layout.canvas.width, layout.canvas.height);
  for (const auto& object : layout.objects) {
    const int id = category_for_caption(object.caption, vocab);
    if (id <= 0 || id > std::numeric_limits<std::uint16_t>::max()) {
      throw Error(ErrorCode::InvalidInput, "category id " + std::to_string(id) + " cannot be painted");
    }
    const int x0 = integral(object.bbox.x);
    const int y0 = integral(object.bbox.y);
    const int x1 = x0 + integral(object.bbox.w);
    const int y1 = y0 + integral(object.bbox.h);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) grid.set(x, y, static_cast<std::uint16_t>(id));
    }
  }
  return grid;
}

DetectionRecord oracle_detect(const LabelGrid& grid, const CategoryVocab& vocab, std::string image_id) {
  struct Extent {
    int x0, y0, x1, y1;
  };
  std::map<std::uint16_t, Extent> extents;
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      const std::uint16_t id = grid.at(x, y);
      if (id == 0) continue;
      auto [it, inserted] = extents.try_emplace(id, Extent{x, y, x, y});
      if (!inserted) {
        auto& e = it->second;
        e.x0 = std::min(e.x0, x);
        e.y0 = std::min(e.y0, y);
        e.x1 = std::max(e.x1, x);
        e.y1 = std::max(e.y1, y);
      }
    }
  }
  DetectionRecord record;
  record.image_id = std::move(image_id);
  for (const auto& [id, e] : extents) {
    const std::string label = vocab.contains(id) ? vocab.name_of(id) : "category_" + std::to_string(id);
    record.detections.push_back({label,
                                 BBox{static_cast<double>(e.x0), static_cast<double>(e.y0),
                                      static_cast<double>(e.x1 - e.x0 + 1),
                                      static_cast<double>(e.y1 - e.y0 + 1)},
                                 1.0});
  }
  return record;
}

Layout perturb(const Layout& layout, const Perturbation& p) {
  Layout out = layout;
  switch (p.kind) {
    case Perturbation::Kind::DropObject:
      if (p.index < 0 || static_cast<std::size_t>(p.index) >= out.objects.size()) {
        throw Error(ErrorCode::IndexError, "drop index " + std::to_string(p.index) + " out of range");
      }
      out.objects.erase(out.objects.begin() + p.index);
      break;
    case Perturbation::Kind::SwapPositions:
      if (out.objects.size() != 2) throw Error(ErrorCode::ArityError, "swap needs exactly two objects");
      std::swap(out.objects[0].bbox, out.objects[1].bbox);
      break;
    case Perturbation::Kind::Jitter: {
      if (p.max_px < 0) throw Error(ErrorCode::RangeError, "jitter magnitude must be non-negative");
      if (p.max_px == 0) break;
      Rng rng(mix_seed(p.seed));
      bool found = false;
      for (int attempt = 0; attempt < kJitterAttempts && !found; ++attempt) {
        Layout candidate = layout;
        for (auto& object : candidate.objects) {
          auto& b = object.bbox;
          const double dx = static_cast<double>(uniform_int(rng, -p.max_px, p.max_px));
          const double dy = static_cast<double>(uniform_int(rng, -p.max_px, p.max_px));
          b.x = std::clamp(b.x + dx, 0.0, std::max(0.0, layout.canvas.width - b.w));
          b.y = std::clamp(b.y + dy, 0.0, std::max(0.0, layout.canvas.height - b.h));
        }
        if (validate_layout(candidate).empty()) {
          out = std::move(candidate);
          found = true;
        }
      }
      break;
    }
  }
  require_valid(out, "perturb");
  return out;
}

std::string to_pgm(const LabelGrid& grid) {
  std::string out = "P5\n" + std::to_string(grid.width()) + " " + std::to_string(grid.height()) + "\n255\n";
  out.reserve(out.size() + grid.cells().size());
  for (std::uint16_t id : grid.cells()) {
    if (id > 255) throw Error(ErrorCode::RangeError, "category id " + std::to_string(id) + " exceeds one byte");
    out.push_back(static_cast<char>(id));
  }
  return out;
}

}  // namespace spatial
