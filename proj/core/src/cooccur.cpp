#include "spatial/cooccur.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "json_util.hpp"
#include "spatial/error.hpp"
#include "spatial/random.hpp"

namespace spatial {

CategoryVocab::CategoryVocab(std::map<int, std::string> names) : names_(std::move(names)) {
  std::set<std::string> seen;
  for (const auto& [id, name] : names_) {
    if (name.empty()) throw Error(ErrorCode::SchemaError, "category " + std::to_string(id) + " has an empty name");
    if (!seen.insert(name).second) throw Error(ErrorCode::SchemaError, "duplicate category name '" + name + "'");
    ids_.push_back(id);
  }
}

std::optional<int> CategoryVocab::id_of(std::string_view name) const {
  for (const auto& [id, n] : names_) {
    if (n == name) return id;
  }
  return std::nullopt;
}

const std::string& CategoryVocab::name_of(int id) const {
  const auto it = names_.find(id);
  if (it == names_.end()) throw Error(ErrorCode::UnknownCategory, "unknown category id " + std::to_string(id));
  return it->second;
}

std::size_t CategoryVocab::index_of(int id) const {
  const auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id) {
    throw Error(ErrorCode::UnknownCategory, "unknown category id " + std::to_string(id));
  }
  return static_cast<std::size_t>(it - ids_.begin());
}

CooccurrenceMatrix::CooccurrenceMatrix(CategoryVocab vocab)
    : vocab_(std::move(vocab)), counts_(vocab_.size() * vocab_.size(), 0) {}

std::uint64_t CooccurrenceMatrix::count(std::size_t a, std::size_t b) const {
  const std::size_t n = vocab_.size();
  if (a >= n || b >= n) throw Error(ErrorCode::IndexError, "category index out of range");
  return counts_[a * n + b];
}

std::uint64_t CooccurrenceMatrix::count(std::string_view a, std::string_view b) const {
  const auto ia = vocab_.id_of(a);
  const auto ib = vocab_.id_of(b);
  if (!ia) throw Error(ErrorCode::UnknownCategory, "unknown category '" + std::string(a) + "'");
  if (!ib) throw Error(ErrorCode::UnknownCategory, "unknown category '" + std::string(b) + "'");
  return count(vocab_.index_of(*ia), vocab_.index_of(*ib));
}

void CooccurrenceMatrix::add(std::size_t a, std::size_t b, std::uint64_t amount) {
  const std::size_t n = vocab_.size();
  if (a >= n || b >= n) throw Error(ErrorCode::IndexError, "category index out of range");
  if (a == b) return;
  counts_[a * n + b] += amount;
  counts_[b * n + a] += amount;
}

namespace {

using Json = nlohmann::json;

const Json& require_array(const Json& root, const char* key) {
  const auto& value = detail::require_field(root, key, "COCO instances");
  if (!value.is_array()) {
    throw Error(ErrorCode::SchemaError, std::string("COCO instances: '") + key + "' must be an array");
  }
  return value;
}

long long require_id(const Json& object, const char* key, const char* context) {
  const auto& value = detail::require_field(object, key, context);
  if (!value.is_number_integer()) {
    throw Error(ErrorCode::SchemaError, std::string(context) + ": '" + key + "' must be an integer");
  }
  return value.get<long long>();
}

}  // namespace

CooccurrenceMatrix build_matrix(std::string_view coco_json) {
  Json root;
  try {
    root = Json::parse(coco_json);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, std::string("COCO instances: malformed JSON: ") + e.what());
  }
  if (!root.is_object()) throw Error(ErrorCode::SchemaError, "COCO instances: root must be an object");

  std::map<int, std::string> names;
  for (const auto& category : require_array(root, "categories")) {
    const auto id = static_cast<int>(require_id(category, "id", "category"));
    names[id] = detail::require_string(category, "name", "category");
  }
  CooccurrenceMatrix matrix{CategoryVocab(std::move(names))};

  std::unordered_set<long long> image_ids;
  for (const auto& image : require_array(root, "images")) {
    image_ids.insert(require_id(image, "id", "image"));
  }

  // Image-level presence: several instances of a category in one image count once.
  std::map<long long, std::set<std::size_t>> present;
  for (const auto& annotation : require_array(root, "annotations")) {
    const long long image_id = require_id(annotation, "image_id", "annotation");
    const long long category_id = require_id(annotation, "category_id", "annotation");
    if (!image_ids.count(image_id)) {
      throw Error(ErrorCode::SchemaError,
                  "annotation references unknown image id " + std::to_string(image_id));
    }
    if (!matrix.vocab().contains(static_cast<int>(category_id))) {
      throw Error(ErrorCode::UnknownCategory,
                  "annotation references unknown category id " + std::to_string(category_id));
    }
    present[image_id].insert(matrix.vocab().index_of(static_cast<int>(category_id)));
  }

  for (const auto& [image_id, categories] : present) {
    for (auto a = categories.begin(); a != categories.end(); ++a) {
      for (auto b = std::next(a); b != categories.end(); ++b) matrix.add(*a, *b);
    }
  }
  return matrix;
}

std::vector<PairSample> sample_pairs(const CooccurrenceMatrix& matrix, std::size_t n,
                                     std::uint64_t seed, std::uint64_t min_count,
                                     PairWeighting weighting) {
  const std::uint64_t floor = std::max<std::uint64_t>(min_count, 1);
  struct Candidate {
    std::size_t a;
    std::size_t b;
    std::uint64_t count;
  };
  std::vector<Candidate> support;
  const std::size_t size = matrix.vocab().size();
  for (std::size_t a = 0; a < size; ++a) {
    for (std::size_t b = a + 1; b < size; ++b) {
      const std::uint64_t c = matrix.count(a, b);
      if (c >= floor) support.push_back({a, b, c});
    }
  }
  if (support.empty()) {
    throw Error(ErrorCode::EmptySupport,
                "no category pair co-occurs at least " + std::to_string(floor) + " times");
  }

  std::vector<double> cumulative;
  cumulative.reserve(support.size());
  double total = 0;
  for (const auto& candidate : support) {
    total += weighting == PairWeighting::Proportional ? static_cast<double>(candidate.count) : 1.0;
    cumulative.push_back(total);
  }

  Rng rng(seed);
  std::vector<PairSample> samples;
  samples.reserve(n);
  const auto& vocab = matrix.vocab();
  for (std::size_t i = 0; i < n; ++i) {
    const double target = uniform01(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    if (it == cumulative.end()) --it;
    const auto& chosen = support[static_cast<std::size_t>(it - cumulative.begin())];
    samples.push_back({vocab.name_of(vocab.id_at(chosen.a)), vocab.name_of(vocab.id_at(chosen.b)),
                       chosen.count});
  }
  return samples;
}

std::string matrix_to_json(const CooccurrenceMatrix& matrix) {
  nlohmann::ordered_json out;
  nlohmann::ordered_json vocab = nlohmann::ordered_json::object();
  for (const auto& [id, name] : matrix.vocab().names()) vocab[std::to_string(id)] = name;
  nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
  const std::size_t size = matrix.vocab().size();
  for (std::size_t a = 0; a < size; ++a) {
    for (std::size_t b = a + 1; b < size; ++b) {
      const std::uint64_t c = matrix.count(a, b);
      if (c == 0) continue;
      const auto& v = matrix.vocab();
      pairs.push_back(nlohmann::ordered_json::array({v.name_of(v.id_at(a)), v.name_of(v.id_at(b)), c}));
    }
  }
  out["vocab"] = std::move(vocab);
  out["pairs"] = std::move(pairs);
  return out.dump(2);
}

CooccurrenceMatrix matrix_from_json(std::string_view json_text) {
  Json root;
  try {
    root = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, std::string("co-occurrence matrix: malformed JSON: ") + e.what());
  }
  const auto& vocab_json = detail::require_field(root, "vocab", "co-occurrence matrix");
  if (!vocab_json.is_object()) throw Error(ErrorCode::SchemaError, "co-occurrence matrix: vocab must be an object");
  std::map<int, std::string> names;
  for (const auto& [key, value] : vocab_json.items()) {
    if (!value.is_string()) throw Error(ErrorCode::SchemaError, "co-occurrence matrix: vocab names must be strings");
    try {
      std::size_t used = 0;
      const int id = std::stoi(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
      names[id] = value.get<std::string>();
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::SchemaError, "co-occurrence matrix: vocab key '" + key + "' is not an integer id");
    }
  }
  CooccurrenceMatrix matrix{CategoryVocab(std::move(names))};
  const auto& pairs = detail::require_field(root, "pairs", "co-occurrence matrix");
  if (!pairs.is_array()) throw Error(ErrorCode::SchemaError, "co-occurrence matrix: pairs must be an array");
  for (const auto& entry : pairs) {
    if (!entry.is_array() || entry.size() != 3 || !entry[0].is_string() || !entry[1].is_string() ||
        !entry[2].is_number_unsigned()) {
      throw Error(ErrorCode::SchemaError, "co-occurrence matrix: pair must be [name, name, count]");
    }
    const auto& vocab = matrix.vocab();
    const auto a = vocab.id_of(entry[0].get<std::string>());
    const auto b = vocab.id_of(entry[1].get<std::string>());
    if (!a || !b) throw Error(ErrorCode::UnknownCategory, "co-occurrence matrix: pair names an unknown category");
    if (*a == *b) throw Error(ErrorCode::SchemaError, "co-occurrence matrix: diagonal entries are not allowed");
    matrix.add(vocab.index_of(*a), vocab.index_of(*b), entry[2].get<std::uint64_t>());
  }
  return matrix;
}

}  // namespace spatial
