#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spatial {

/// Category id -> name, ordered by id. Names are unique and non-empty.
class CategoryVocab {
 public:
  CategoryVocab() = default;
  explicit CategoryVocab(std::map<int, std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::map<int, std::string>& names() const { return names_; }
  std::optional<int> id_of(std::string_view name) const;
  const std::string& name_of(int id) const;
  bool contains(int id) const { return names_.count(id) > 0; }

  /// Dense position of a category id (0-based, in id order).
  std::size_t index_of(int id) const;
  int id_at(std::size_t index) const { return ids_.at(index); }

  friend bool operator==(const CategoryVocab& a, const CategoryVocab& b) {
    return a.names_ == b.names_;
  }

 private:
  std::map<int, std::string> names_;
  std::vector<int> ids_;
};

/// Symmetric image-level co-occurrence counts; the diagonal is fixed to 0.
class CooccurrenceMatrix {
 public:
  explicit CooccurrenceMatrix(CategoryVocab vocab);

  const CategoryVocab& vocab() const { return vocab_; }
  std::uint64_t count(std::size_t a, std::size_t b) const;
  std::uint64_t count(std::string_view a, std::string_view b) const;

  /// Adds `amount` to the unordered pair {a, b}; a == b is ignored.
  void add(std::size_t a, std::size_t b, std::uint64_t amount = 1);

  friend bool operator==(const CooccurrenceMatrix&, const CooccurrenceMatrix&) = default;

 private:
  CategoryVocab vocab_;
  std::vector<std::uint64_t> counts_;
};

struct PairSample {
  std::string category_a;
  std::string category_b;
  std::uint64_t weight = 0;

  friend bool operator==(const PairSample&, const PairSample&) = default;
};

enum class PairWeighting { Proportional, Uniform };

/// Builds the matrix from COCO instances JSON text. Only images[].id,
/// annotations[].image_id / category_id and categories[].id / name are read.
/// Throws SchemaError or UnknownCategory.
CooccurrenceMatrix build_matrix(std::string_view coco_json);

/// Draws `n` unordered pairs with replacement among pairs with
/// count >= max(min_count, 1). Throws EmptySupport when no pair qualifies.
std::vector<PairSample> sample_pairs(const CooccurrenceMatrix& matrix, std::size_t n,
                                     std::uint64_t seed, std::uint64_t min_count,
                                     PairWeighting weighting = PairWeighting::Proportional);

/// {"vocab": {"<id>": "<name>", ...}, "pairs": [["cat", "dog", 2], ...]} with
/// nonzero entries only.
std::string matrix_to_json(const CooccurrenceMatrix& matrix);
CooccurrenceMatrix matrix_from_json(std::string_view json_text);

}  // namespace spatial
