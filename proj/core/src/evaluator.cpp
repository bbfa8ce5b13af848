#include "spatial/evaluator.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "json_util.hpp"
#include "spatial/error.hpp"
#include "text_util.hpp"

namespace spatial {

namespace {

using json = nlohmann::ordered_json;

const Detection* best_detection(const DetectionRecord& record, std::string_view label,
                                double threshold) {
  const Detection* best = nullptr;
  for (const auto& d : record.detections) {
    if (d.label != label || !(d.score >= threshold)) continue;
    if (best == nullptr || d.score > best->score ||
        (d.score == best->score && area(d.bbox) > area(best->bbox))) {
      best = &d;
    }
  }
  return best;
}

double pct(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

std::string line_context(std::size_t line_no) { return "line " + std::to_string(line_no) + ": "; }

template <typename Parse>
auto parse_jsonl(std::string_view text, Parse parse) {
  std::vector<decltype(parse(json{}))> out;
  std::size_t line_no = 0;
  for (const auto& raw : detail::split_lines(text)) {
    ++line_no;
    if (detail::trim(raw).empty()) continue;
    try {
      out.push_back(parse(json::parse(raw)));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::SchemaError, line_context(line_no) + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::SchemaError, line_context(line_no) + e.what());
    }
  }
  return out;
}

EvalCase case_from_json(const json& j) {
  EvalCase c;
  c.image_id = detail::require_string(j, "image_id", "case");
  c.label_a = detail::require_string(j, "label_a", "case");
  c.label_b = detail::require_string(j, "label_b", "case");
  const std::string relation = detail::require_string(j, "relation", "case");
  c.expected_relation = relation_from_string(relation);
  if (c.expected_relation == SpatialRelation::NA) {
    throw Error(ErrorCode::SchemaError, "relation must be \"left\" or \"right\", got \"" + relation + "\"");
  }
  if (c.label_a.empty() || c.label_b.empty() || c.label_a == c.label_b) {
    throw Error(ErrorCode::SchemaError, "labels must be non-empty and distinct");
  }
  return c;
}

// Detector boxes may be fractional.
BBox real_bbox(const json& value) {
  if (!value.is_array() || value.size() != 4) {
    throw Error(ErrorCode::SchemaError, "detection: bbox must be [x, y, w, h]");
  }
  double v[4];
  for (std::size_t i = 0; i < 4; ++i) {
    if (!value[i].is_number()) throw Error(ErrorCode::SchemaError, "detection: bbox entries must be numbers");
    v[i] = value[i].get<double>();
    if (!std::isfinite(v[i])) throw Error(ErrorCode::SchemaError, "detection: bbox is not finite");
  }
  return {v[0], v[1], v[2], v[3]};
}

DetectionRecord record_from_json(const json& j) {
  DetectionRecord r;
  r.image_id = detail::require_string(j, "image_id", "record");
  const json& list = detail::require_field(j, "detections", "record");
  if (!list.is_array()) throw Error(ErrorCode::SchemaError, "detections must be an array");
  for (const auto& item : list) {
    Detection d;
    d.label = detail::require_string(item, "label", "detection");
    d.bbox = real_bbox(detail::require_field(item, "bbox", "detection"));
    const json& score = detail::require_field(item, "score", "detection");
    if (!score.is_number()) throw Error(ErrorCode::SchemaError, "score must be a number");
    d.score = score.get<double>();
    if (d.label.empty()) throw Error(ErrorCode::SchemaError, "detection label is empty");
    if (!std::isfinite(d.score) || d.score < 0.0 || d.score > 1.0) {
      throw Error(ErrorCode::SchemaError, "detection score must lie in [0, 1]");
    }
    r.detections.push_back(std::move(d));
  }
  return r;
}

}  // namespace

bool object_accuracy(const EvalCase& eval_case, const DetectionRecord& record,
                     double score_threshold) {
  if (eval_case.image_id != record.image_id) {
    throw Error(ErrorCode::IdMismatch, "case " + eval_case.image_id + " scored against record " +
                                           record.image_id);
  }
  return best_detection(record, eval_case.label_a, score_threshold) != nullptr &&
         best_detection(record, eval_case.label_b, score_threshold) != nullptr;
}

SpatialRelation extract_relation(const DetectionRecord& record, std::string_view label_a,
                                 std::string_view label_b, double score_threshold) {
  const Detection* a = best_detection(record, label_a, score_threshold);
  const Detection* b = best_detection(record, label_b, score_threshold);
  if (a == nullptr || b == nullptr) {
    throw Error(ErrorCode::MissingLabel, "record " + record.image_id + " lacks a detection for " +
                                             std::string(a == nullptr ? label_a : label_b));
  }
  return relation_of(b->bbox, a->bbox);
}

EvalReport make_report(std::uint64_t n, std::uint64_t oa_count, std::uint64_t s, std::uint64_t u,
                       double score_threshold) {
  if (oa_count > n || s + u > oa_count) {
    throw Error(ErrorCode::InvalidInput, "counts violate s + u <= oa_count <= n");
  }
  EvalReport r;
  r.n = n;
  r.oa_count = oa_count;
  r.s = s;
  r.u = u;
  r.score_threshold = score_threshold;
  r.oa_pct = pct(oa_count, n);
  r.visor_uncond_pct = pct(s, n);
  if (s + u > 0) r.visor_cond_pct = pct(s, s + u);
  return r;
}

EvalReport visor(std::span<const EvalCase> cases, std::span<const DetectionRecord> records,
                 double score_threshold) {
  std::unordered_map<std::string_view, const DetectionRecord*> by_id;
  for (const auto& r : records) {
    if (!by_id.emplace(r.image_id, &r).second) {
      throw Error(ErrorCode::InvalidInput, "duplicate detection record " + r.image_id);
    }
  }
  std::uint64_t oa = 0;
  std::uint64_t s = 0;
  std::uint64_t u = 0;
  for (const auto& c : cases) {
    const auto it = by_id.find(c.image_id);
    if (it == by_id.end()) throw Error(ErrorCode::MissingRecord, "no detections for " + c.image_id);
    if (!object_accuracy(c, *it->second, score_threshold)) continue;
    ++oa;
    const auto relation = extract_relation(*it->second, c.label_a, c.label_b, score_threshold);
    if (relation != SpatialRelation::NA && relation == c.expected_relation) {
      ++s;
    } else {
      ++u;
    }
  }
  return make_report(cases.size(), oa, s, u, score_threshold);
}

std::vector<EvalCase> parse_cases_jsonl(std::string_view text) {
  return parse_jsonl(text, case_from_json);
}

std::vector<DetectionRecord> parse_detections_jsonl(std::string_view text) {
  return parse_jsonl(text, record_from_json);
}

std::string to_jsonl(const EvalCase& eval_case) {
  json j;
  j["image_id"] = eval_case.image_id;
  j["label_a"] = eval_case.label_a;
  j["label_b"] = eval_case.label_b;
  j["relation"] = std::string(to_string(eval_case.expected_relation));
  return j.dump();
}

std::string to_jsonl(const DetectionRecord& record) {
  json j;
  j["image_id"] = record.image_id;
  j["detections"] = json::array();
  for (const auto& d : record.detections) {
    json item;
    item["label"] = d.label;
    item["bbox"] = json::array({d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h});
    item["score"] = d.score;
    j["detections"].push_back(std::move(item));
  }
  return j.dump();
}

std::string format_pct(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  return buf;
}

std::string report_to_json(const EvalReport& report) {
  json j;
  j["n"] = report.n;
  j["oa_count"] = report.oa_count;
  j["s"] = report.s;
  j["u"] = report.u;
  j["score_threshold"] = report.score_threshold;
  j["oa_pct"] = format_pct(report.oa_pct);
  j["visor_uncond_pct"] = format_pct(report.visor_uncond_pct);
  j["visor_cond_pct"] = report.visor_cond_pct ? json(format_pct(*report.visor_cond_pct)) : json("NA");
  return j.dump(2);
}

std::string report_table(const EvalReport& report) {
  const std::pair<const char*, std::string> rows[] = {
      {"N", std::to_string(report.n)},
      {"OA count", std::to_string(report.oa_count)},
      {"S", std::to_string(report.s)},
      {"U", std::to_string(report.u)},
      {"OA (%)", format_pct(report.oa_pct)},
      {"VISOR_uncond (%)", format_pct(report.visor_uncond_pct)},
      {"VISOR_cond (%)", report.visor_cond_pct ? format_pct(*report.visor_cond_pct) : "NA"},
  };
  std::ostringstream out;
  for (const auto& [name, value] : rows) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-18s%10s\n", name, value.c_str());
    out << buf;
  }
  return out.str();
}

}  // namespace spatial
