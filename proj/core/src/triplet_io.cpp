#include <cmath>

#include "json_util.hpp"
#include "spatial/layout.hpp"

namespace spatial {

namespace {

using Json = nlohmann::ordered_json;

Json layout_to_json(const Layout& layout) {
  Json objects = Json::array();
  for (const auto& object : layout.objects) {
    objects.push_back(Json::array({object.caption, detail::bbox_to_json(object.bbox)}));
  }
  Json out;
  out["objects"] = std::move(objects);
  out["background"] = layout.background_prompt;
  return out;
}

Layout layout_from_json(const Json& value, const CanvasSpec& canvas, const std::string& context) {
  const auto& objects = detail::require_field(value, "objects", context);
  if (!objects.is_array()) throw Error(ErrorCode::SchemaError, context + ": objects must be an array");
  Layout layout;
  layout.canvas = canvas;
  layout.background_prompt = detail::require_string(value, "background", context);
  for (const auto& entry : objects) {
    if (!entry.is_array() || entry.size() != 2 || !entry[0].is_string()) {
      throw Error(ErrorCode::SchemaError, context + ": object must be [caption, [x, y, w, h]]");
    }
    layout.objects.push_back({entry[0].get<std::string>(), detail::bbox_from_json(entry[1], context)});
  }
  return layout;
}

}  // namespace

std::string to_jsonl(const TrainingTriplet& triplet) {
  Json record;
  record["id"] = triplet.id();
  record["seed"] = triplet.generation_seed();
  record["source_layout"] = layout_to_json(triplet.source_layout());
  record["instruction"] = triplet.instruction().rendered;
  record["target_layout"] = layout_to_json(triplet.target_layout());
  return record.dump(-1, ' ', false, Json::error_handler_t::strict);
}

TrainingTriplet triplet_from_jsonl(std::string_view line, const CanvasSpec& canvas) {
  Json record;
  try {
    record = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, std::string("malformed JSON record: ") + e.what());
  }
  if (!record.is_object()) throw Error(ErrorCode::SchemaError, "record must be a JSON object");
  const std::string id = detail::require_string(record, "id", "record");
  const std::string context = "record " + id;
  const auto& seed = detail::require_field(record, "seed", context);
  if (!seed.is_number_unsigned()) {
    throw Error(ErrorCode::SchemaError, context + ": seed must be a non-negative integer");
  }
  Layout source = layout_from_json(detail::require_field(record, "source_layout", context), canvas,
                                   context + " source_layout");
  Layout target = layout_from_json(detail::require_field(record, "target_layout", context), canvas,
                                   context + " target_layout");
  const std::string rendered = detail::require_string(record, "instruction", context);

  // The stored instruction is recomputed from geometry; a stale or edited
  // text therefore fails the triplet invariant.
  EditInstruction instruction;
  instruction.rendered = rendered;
  if (target.objects.size() == 2 && source.objects.size() == 1) {
    const int placed = target.objects[0] == source.objects[0] ? 1 : 0;
    instruction.placed_caption = target.objects[placed].caption;
    instruction.anchor_caption = target.objects[1 - placed].caption;
    instruction.relation = relation_of(target.objects[placed].bbox, target.objects[1 - placed].bbox);
    if (rendered != render_instruction(instruction.placed_caption, instruction.relation,
                                       instruction.anchor_caption)) {
      throw Error(ErrorCode::ValidationError,
                  "triplet " + id + ": instruction text does not match the layouts",
                  {"instruction text does not match the layouts"});
    }
  }
  return TrainingTriplet(id, std::move(source), std::move(instruction), std::move(target),
                         seed.get<std::uint64_t>());
}

}  // namespace spatial
