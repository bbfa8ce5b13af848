#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "spatial/geometry.hpp"

namespace spatial {

struct ObjectAnnotation {
  std::string caption;  // e.g. "a gray cat"
  BBox bbox;

  friend bool operator==(const ObjectAnnotation&, const ObjectAnnotation&) = default;
};

/// Background prompt plus one or two captioned boxes.
struct Layout {
  std::vector<ObjectAnnotation> objects;
  std::string background_prompt;
  CanvasSpec canvas;

  friend bool operator==(const Layout&, const Layout&) = default;
};

/// `<background> with <left> on the left and <right> on the right.`
struct CaptionSpec {
  std::string background;
  std::string left_object;
  std::string right_object;

  friend bool operator==(const CaptionSpec&, const CaptionSpec&) = default;
};

struct EditInstruction {
  std::string placed_caption;
  SpatialRelation relation = SpatialRelation::NA;
  std::string anchor_caption;
  std::string rendered;  // "Place {placed} on the {relation} of {anchor}."

  friend bool operator==(const EditInstruction&, const EditInstruction&) = default;
};

/// Throws ParseError when the text does not follow the caption grammar. The
/// mirrored order ("... on the right and ... on the left") is normalized, a
/// missing final period is accepted (the caption request stops on '.'), and
/// a leading "[Caption]:" label is stripped.
CaptionSpec parse_caption(std::string_view text);

/// Canonical caption sentence, ending with a period.
std::string render_caption(const CaptionSpec& spec);

/// Grammar-only parse of
///   Objects: [('<caption>', [x, y, w, h]), ...]
///   Background prompt: <text>
/// Labels may be bracketed ("[Objects]:"), quotes may be single, double or
/// typographic. Throws ParseError; does not validate geometry.
Layout parse_layout_text(std::string_view text, const CanvasSpec& canvas = {});

/// parse_layout_text followed by validate_layout. Throws ValidationError with
/// the violation codes attached when the parsed layout is invalid.
Layout parse_layout_response(std::string_view text, const CanvasSpec& canvas = {});

/// Two-line layout text that parse_layout_text reads back to an equal layout.
std::string render_layout(const Layout& layout);

/// Final token of a caption, lowercased and stripped of punctuation.
std::string head_noun(std::string_view caption);

/// Sorted, de-duplicated violations; empty means valid.
std::vector<Violation> validate_layout(const Layout& layout);

/// The one-object layout obtained by removing `removed_index` from a
/// two-object layout. Throws ArityError / IndexError.
Layout derive_source_layout(const Layout& two_object, int removed_index);

/// Instruction that places the removed object relative to the kept one.
/// Throws NaRelation when the centers tie, ArityError / IndexError as above.
EditInstruction make_edit_instruction(const Layout& two_object, int removed_index);

std::string render_instruction(std::string_view placed, SpatialRelation relation,
                               std::string_view anchor);

/// One dataset record: source layout (one object), instruction, and target
/// layout (two objects). The constructor enforces that the source is the
/// target minus the placed object and that the instruction matches geometry.
class TrainingTriplet {
 public:
  TrainingTriplet(std::string id, Layout source_layout, EditInstruction instruction,
                  Layout target_layout, std::uint64_t generation_seed);

  const std::string& id() const { return id_; }
  const Layout& source_layout() const { return source_; }
  const EditInstruction& instruction() const { return instruction_; }
  const Layout& target_layout() const { return target_; }
  std::uint64_t generation_seed() const { return seed_; }

  /// Index of the placed object inside the target layout.
  int placed_index() const { return placed_index_; }

  friend bool operator==(const TrainingTriplet&, const TrainingTriplet&) = default;

 private:
  std::string id_;
  Layout source_;
  EditInstruction instruction_;
  Layout target_;
  std::uint64_t seed_;
  int placed_index_ = 0;
};

/// Builds the triplet for `two_object` with `removed_index` as the placed object.
TrainingTriplet make_triplet(std::string id, const Layout& two_object, int removed_index,
                             std::uint64_t generation_seed);

/// JSONL record with fixed field order:
/// {"id","seed","source_layout":{"objects":[["cap",[x,y,w,h]]],"background":...},
///  "instruction":...,"target_layout":{...}}
std::string to_jsonl(const TrainingTriplet& triplet);

/// Parses one JSONL record; throws SchemaError for malformed records and
/// ValidationError when the triplet invariants do not hold.
TrainingTriplet triplet_from_jsonl(std::string_view line, const CanvasSpec& canvas = {});

}  // namespace spatial
