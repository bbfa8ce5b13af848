#include "spatial/layout.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "spatial/error.hpp"
#include "text_util.hpp"

namespace spatial {

using detail::ends_with;
using detail::starts_with;
using detail::trim;

namespace {

[[noreturn]] void parse_fail(const std::string& what, std::string_view text) {
  throw Error(ErrorCode::ParseError, what + ": \"" + std::string(text) + "\"");
}

std::vector<std::string> violation_names(const std::vector<Violation>& violations) {
  std::vector<std::string> out;
  out.reserve(violations.size());
  for (Violation v : violations) out.emplace_back(to_string(v));
  return out;
}

// Cursor over one line of the object list grammar.
class ListScanner {
 public:
  explicit ListScanner(std::string_view text) : text_(text) {}

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool consume(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!consume(c)) parse_fail(std::string("expected '") + c + "' in object list", text_);
  }

  bool at_end() {
    skip_ws();
    return pos_ >= text_.size();
  }

  std::string quoted() {
    skip_ws();
    std::string_view open;
    std::string_view close;
    for (auto [o, c] : kQuotes) {
      if (text_.substr(pos_, o.size()) == o) {
        open = o;
        close = c;
        break;
      }
    }
    if (open.empty()) parse_fail("expected a quoted caption", text_);
    const std::size_t begin = pos_ + open.size();
    // The closing quote is the first one followed by `, [`, which keeps
    // apostrophes inside captions ("a dog's bone") intact.
    std::size_t search = begin;
    while (true) {
      const std::size_t found = text_.find(close, search);
      if (found == std::string_view::npos) parse_fail("unterminated caption", text_);
      std::size_t after = found + close.size();
      while (after < text_.size() && std::isspace(static_cast<unsigned char>(text_[after]))) ++after;
      if (after < text_.size() && text_[after] == ',') {
        ++after;
        while (after < text_.size() && std::isspace(static_cast<unsigned char>(text_[after]))) ++after;
        if (after < text_.size() && text_[after] == '[') {
          pos_ = found + close.size();
          return std::string(text_.substr(begin, found - begin));
        }
      }
      search = found + close.size();
    }
  }

  double integer() {
    skip_ws();
    const std::size_t begin = pos_;
    if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) ++pos_;
    const std::size_t digits = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ == digits) parse_fail("expected an integer coordinate", text_);
    if (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E')) {
      parse_fail("coordinates must be integers", text_);
    }
    if (pos_ - digits > 9) parse_fail("coordinate out of range", text_);
    return std::strtod(std::string(text_.substr(begin, pos_ - begin)).c_str(), nullptr);
  }

 private:
  static constexpr std::pair<std::string_view, std::string_view> kQuotes[] = {
      {"'", "'"}, {"\"", "\""}, {"\xE2\x80\x98", "\xE2\x80\x99"}, {"\xE2\x80\x9C", "\xE2\x80\x9D"}};

  std::string_view text_;
  std::size_t pos_ = 0;
};

std::vector<ObjectAnnotation> parse_object_list(std::string_view text) {
  ListScanner scan(text);
  std::vector<ObjectAnnotation> objects;
  scan.expect('[');
  if (!scan.consume(']')) {
    while (true) {
      scan.expect('(');
      ObjectAnnotation object;
      object.caption = scan.quoted();
      scan.expect(',');
      scan.expect('[');
      object.bbox.x = scan.integer();
      scan.expect(',');
      object.bbox.y = scan.integer();
      scan.expect(',');
      object.bbox.w = scan.integer();
      scan.expect(',');
      object.bbox.h = scan.integer();
      scan.expect(']');
      scan.expect(')');
      objects.push_back(std::move(object));
      if (scan.consume(']')) break;
      scan.expect(',');
    }
  }
  if (!scan.at_end()) parse_fail("trailing text after object list", text);
  return objects;
}

std::string format_coordinate(double value) {
  return std::to_string(std::llround(value));
}

void check_two_objects(const Layout& layout, int index) {
  if (layout.objects.size() != 2) {
    throw Error(ErrorCode::ArityError, "expected a two-object layout, got " +
                                           std::to_string(layout.objects.size()) + " objects");
  }
  if (index != 0 && index != 1) {
    throw Error(ErrorCode::IndexError, "removed index must be 0 or 1, got " + std::to_string(index));
  }
}

}  // namespace

CaptionSpec parse_caption(std::string_view text) {
  std::string_view body = trim(text);
  detail::strip_label(body, "Caption");
  if (!body.empty() && body.back() == '.') body.remove_suffix(1);
  body = trim(body);

  constexpr std::string_view kLeft = " on the left";
  constexpr std::string_view kRight = " on the right";
  bool second_is_right;
  if (ends_with(body, kRight)) {
    second_is_right = true;
    body.remove_suffix(kRight.size());
  } else if (ends_with(body, kLeft)) {
    second_is_right = false;
    body.remove_suffix(kLeft.size());
  } else {
    parse_fail("caption does not end with 'on the left' or 'on the right'", text);
  }

  const std::string_view marker = second_is_right ? " on the left and " : " on the right and ";
  const std::size_t marker_pos = body.rfind(marker);
  if (marker_pos == std::string_view::npos) parse_fail("caption is missing the first object clause", text);
  const std::string_view second = trim(body.substr(marker_pos + marker.size()));
  const std::string_view prefix = body.substr(0, marker_pos);

  constexpr std::string_view kWith = " with ";
  const std::size_t with_pos = prefix.rfind(kWith);
  if (with_pos == std::string_view::npos) parse_fail("caption is missing ' with '", text);
  const std::string_view background = trim(prefix.substr(0, with_pos));
  const std::string_view first = trim(prefix.substr(with_pos + kWith.size()));

  if (background.empty() || first.empty() || second.empty()) {
    parse_fail("caption has an empty background or object", text);
  }
  CaptionSpec spec;
  spec.background = std::string(background);
  spec.left_object = std::string(second_is_right ? first : second);
  spec.right_object = std::string(second_is_right ? second : first);
  return spec;
}

std::string render_caption(const CaptionSpec& spec) {
  return spec.background + " with " + spec.left_object + " on the left and " + spec.right_object +
         " on the right.";
}

Layout parse_layout_text(std::string_view text, const CanvasSpec& canvas) {
  std::vector<std::string_view> lines;
  for (std::string_view line : detail::split_lines(text)) {
    line = trim(line);
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.size() != 2) parse_fail("layout must have an objects line and a background line", text);

  std::string_view objects_line = lines[0];
  if (!detail::strip_label(objects_line, "Objects")) {
    // A bare list is accepted when the model omits the label.
    if (objects_line.empty() || objects_line.front() != '[' ||
        starts_with(objects_line, "[Background")) {
      parse_fail("missing 'Objects:' line", text);
    }
  }
  std::string_view background_line = lines[1];
  if (!detail::strip_label(background_line, "Background prompt")) {
    parse_fail("missing 'Background prompt:' line", text);
  }

  Layout layout;
  layout.objects = parse_object_list(objects_line);
  layout.background_prompt = std::string(background_line);
  layout.canvas = canvas;
  return layout;
}

Layout parse_layout_response(std::string_view text, const CanvasSpec& canvas) {
  Layout layout = parse_layout_text(text, canvas);
  const auto violations = validate_layout(layout);
  if (!violations.empty()) {
    std::string joined;
    for (Violation v : violations) {
      if (!joined.empty()) joined += ", ";
      joined += to_string(v);
    }
    throw Error(ErrorCode::ValidationError, "layout violates constraints [" + joined + "]",
                violation_names(violations));
  }
  return layout;
}

std::string render_layout(const Layout& layout) {
  std::string out = "Objects: [";
  for (std::size_t i = 0; i < layout.objects.size(); ++i) {
    const auto& object = layout.objects[i];
    const char quote = object.caption.find('\'') == std::string::npos ? '\'' : '"';
    if (i > 0) out += ", ";
    out += "(";
    out += quote;
    out += object.caption;
    out += quote;
    out += ", [" + format_coordinate(object.bbox.x) + ", " + format_coordinate(object.bbox.y) + ", " +
           format_coordinate(object.bbox.w) + ", " + format_coordinate(object.bbox.h) + "])";
  }
  out += "]\nBackground prompt: " + layout.background_prompt;
  return out;
}

std::string head_noun(std::string_view caption) {
  const auto tokens = detail::words(caption);
  return tokens.empty() ? std::string() : tokens.back();
}

std::vector<Violation> validate_layout(const Layout& layout) {
  std::vector<Violation> out;
  const auto& objects = layout.objects;
  if (objects.empty() || objects.size() > 2) out.push_back(Violation::BadObjectCount);

  const auto background_words = detail::words(layout.background_prompt);
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& caption = objects[i].caption;
    if (trim(caption).empty() || caption.find_first_of("\r\n") != std::string::npos) {
      out.push_back(Violation::InvalidCaption);
    }
    for (Violation v : validate_box(objects[i].bbox, layout.canvas)) out.push_back(v);
    for (std::size_t j = i + 1; j < objects.size(); ++j) {
      if (boxes_overlap(objects[i].bbox, objects[j].bbox)) out.push_back(Violation::Overlap);
    }
    const std::string noun = head_noun(caption);
    if (!noun.empty() &&
        std::find(background_words.begin(), background_words.end(), noun) != background_words.end()) {
      out.push_back(Violation::ForegroundInBackground);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Layout derive_source_layout(const Layout& two_object, int removed_index) {
  check_two_objects(two_object, removed_index);
  Layout source = two_object;
  source.objects.erase(source.objects.begin() + removed_index);
  return source;
}

std::string render_instruction(std::string_view placed, SpatialRelation relation,
                               std::string_view anchor) {
  std::string out = "Place ";
  out += placed;
  out += " on the ";
  out += to_string(relation);
  out += " of ";
  out += anchor;
  out += ".";
  return out;
}

EditInstruction make_edit_instruction(const Layout& two_object, int removed_index) {
  check_two_objects(two_object, removed_index);
  const auto& placed = two_object.objects[removed_index];
  const auto& anchor = two_object.objects[1 - removed_index];
  const SpatialRelation relation = relation_of(placed.bbox, anchor.bbox);
  if (relation == SpatialRelation::NA) {
    throw Error(ErrorCode::NaRelation, "objects '" + placed.caption + "' and '" + anchor.caption +
                                           "' share the same center x");
  }
  EditInstruction instruction;
  instruction.placed_caption = placed.caption;
  instruction.relation = relation;
  instruction.anchor_caption = anchor.caption;
  instruction.rendered = render_instruction(placed.caption, relation, anchor.caption);
  return instruction;
}

TrainingTriplet::TrainingTriplet(std::string id, Layout source_layout, EditInstruction instruction,
                                 Layout target_layout, std::uint64_t generation_seed)
    : id_(std::move(id)),
      source_(std::move(source_layout)),
      instruction_(std::move(instruction)),
      target_(std::move(target_layout)),
      seed_(generation_seed) {
  std::vector<std::string> problems;
  if (target_.objects.size() != 2) problems.emplace_back("target layout must have two objects");
  if (source_.objects.size() != 1) problems.emplace_back("source layout must have one object");
  if (source_.background_prompt != target_.background_prompt) {
    problems.emplace_back("background prompts differ");
  }
  if (!(source_.canvas == target_.canvas)) problems.emplace_back("canvases differ");
  if (problems.empty()) {
    const auto& kept = source_.objects.front();
    if (target_.objects[0] == kept) {
      placed_index_ = 1;
    } else if (target_.objects[1] == kept) {
      placed_index_ = 0;
    } else {
      problems.emplace_back("source object is not part of the target layout");
    }
  }
  if (problems.empty()) {
    const auto& placed = target_.objects[placed_index_];
    const auto& anchor = target_.objects[1 - placed_index_];
    const SpatialRelation relation = relation_of(placed.bbox, anchor.bbox);
    if (instruction_.placed_caption != placed.caption) {
      problems.emplace_back("instruction places '" + instruction_.placed_caption +
                            "' but the added object is '" + placed.caption + "'");
    }
    if (instruction_.anchor_caption != anchor.caption) {
      problems.emplace_back("instruction anchor does not match the kept object");
    }
    if (relation == SpatialRelation::NA || instruction_.relation != relation) {
      problems.emplace_back("instruction relation does not match the box geometry");
    }
    if (instruction_.rendered !=
        render_instruction(instruction_.placed_caption, instruction_.relation,
                           instruction_.anchor_caption)) {
      problems.emplace_back("rendered instruction text does not match its fields");
    }
  }
  if (!problems.empty()) {
    std::string joined;
    for (const auto& p : problems) {
      if (!joined.empty()) joined += "; ";
      joined += p;
    }
    throw Error(ErrorCode::ValidationError, "triplet " + id_ + ": " + joined, std::move(problems));
  }
}

TrainingTriplet make_triplet(std::string id, const Layout& two_object, int removed_index,
                             std::uint64_t generation_seed) {
  EditInstruction instruction = make_edit_instruction(two_object, removed_index);
  Layout source = derive_source_layout(two_object, removed_index);
  return TrainingTriplet(std::move(id), std::move(source), std::move(instruction), two_object,
                         generation_seed);
}

}  // namespace spatial
