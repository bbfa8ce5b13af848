#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spatial/geometry.hpp"

namespace spatial {

struct Detection {
  std::string label;
  BBox bbox;
  double score = 0;
  friend bool operator==(const Detection&, const Detection&) = default;
};

struct DetectionRecord {
  std::string image_id;
  std::vector<Detection> detections;
  friend bool operator==(const DetectionRecord&, const DetectionRecord&) = default;
};

/// Expected relation of object B with respect to object A.
struct EvalCase {
  std::string image_id;
  std::string label_a;
  std::string label_b;
  SpatialRelation expected_relation = SpatialRelation::NA;
  friend bool operator==(const EvalCase&, const EvalCase&) = default;
};

/// Exact counts plus percentages derived from them.
struct EvalReport {
  std::uint64_t n = 0;
  std::uint64_t oa_count = 0;
  std::uint64_t s = 0;
  std::uint64_t u = 0;
  double score_threshold = 0.1;
  double oa_pct = 0;
  double visor_uncond_pct = 0;
  std::optional<double> visor_cond_pct;  // empty when s + u == 0
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

inline constexpr double kDefaultScoreThreshold = 0.1;

/// Both labels detected at or above the threshold. Throws IdMismatch.
bool object_accuracy(const EvalCase& eval_case, const DetectionRecord& record,
                     double score_threshold = kDefaultScoreThreshold);

/// Relation of the best B detection w.r.t. the best A detection. Best is the
/// highest score, then the larger area, then the earliest entry. Throws
/// MissingLabel when either label has no detection above the threshold.
SpatialRelation extract_relation(const DetectionRecord& record, std::string_view label_a,
                                 std::string_view label_b,
                                 double score_threshold = kDefaultScoreThreshold);

/// Report from exact counts. Throws InvalidInput unless s + u <= oa_count <= n.
EvalReport make_report(std::uint64_t n, std::uint64_t oa_count, std::uint64_t s, std::uint64_t u,
                       double score_threshold = kDefaultScoreThreshold);

/// Throws MissingRecord when a case has no record, InvalidInput for
/// duplicate record ids.
EvalReport visor(std::span<const EvalCase> cases, std::span<const DetectionRecord> records,
                 double score_threshold = kDefaultScoreThreshold);

/// JSONL, one object per non-empty line. Throw SchemaError with the line number.
std::vector<EvalCase> parse_cases_jsonl(std::string_view text);
std::vector<DetectionRecord> parse_detections_jsonl(std::string_view text);

std::string to_jsonl(const EvalCase& eval_case);
std::string to_jsonl(const DetectionRecord& record);

/// Pretty JSON with counts, percentages (two decimals) and threshold.
std::string report_to_json(const EvalReport& report);
/// Aligned two-column table; cond prints as "NA" when undefined.
std::string report_table(const EvalReport& report);

/// Two-decimal rendering used by both report formats.
std::string format_pct(double pct);

}  // namespace spatial
