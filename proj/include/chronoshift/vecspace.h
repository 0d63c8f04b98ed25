#pragma once

// Vocabulary-indexed dense embedding spaces.
//
// An EmbeddingSpace is immutable once constructed: row norms are cached at
// construction, so concurrent read access (kNN, cosine lookups) from several
// threads is safe. Every transformation returns a new space.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace chronoshift {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Vocabulary {
 public:
  Vocabulary() = default;
  // Throws on duplicate or empty tokens. `counts` may be empty (all zero).
  explicit Vocabulary(std::vector<std::string> tokens, std::vector<std::uint64_t> counts = {});

  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }

  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::uint64_t count(std::size_t id) const { return counts_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  std::optional<std::size_t> find(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  // Throws Error(not-found) for unknown tokens.
  std::size_t at(const std::string& token) const;

 private:
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::size_t> index_;
};

class EmbeddingSpace {
 public:
  EmbeddingSpace() = default;
  // Validates the invariants: one row per token, finite entries, dim >= 1,
  // and unit rows when `normalized` is set.
  EmbeddingSpace(Vocabulary vocab, RowMatrix matrix, std::string label = {},
                 std::optional<int> year = std::nullopt, bool normalized = false);

  const Vocabulary& vocab() const { return vocab_; }
  const RowMatrix& matrix() const { return matrix_; }
  std::size_t size() const { return vocab_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(matrix_.cols()); }
  const std::string& label() const { return label_; }
  std::optional<int> year() const { return year_; }
  bool normalized() const { return normalized_; }

  bool contains(const std::string& token) const { return vocab_.contains(token); }
  std::span<const double> row(std::size_t id) const {
    return {matrix_.data() + id * dim(), dim()};
  }
  std::span<const double> vector(const std::string& token) const { return row(vocab_.at(token)); }
  double row_norm(std::size_t id) const { return norms_[id]; }

  EmbeddingSpace relabeled(std::string label, std::optional<int> year) const;

 private:
  Vocabulary vocab_;
  RowMatrix matrix_;
  std::vector<double> norms_;
  std::string label_;
  std::optional<int> year_;
  bool normalized_ = false;
};

struct Neighbor {
  std::string token;
  double similarity = 0.0;

  bool operator==(const Neighbor&) const = default;
};

struct Neighbors {
  std::string query;
  std::vector<Neighbor> entries;  // similarity descending, token ascending on ties
  int k = 0;

  std::vector<std::string> tokens() const;
};

// Cosine similarity in [-1, 1]. Throws on dimension mismatch or zero vectors.
double cosine(std::span<const double> u, std::span<const double> v);

// Exact top-k by cosine over every other row of `space`.
Neighbors knn(const EmbeddingSpace& space, const std::string& word, int k);

// Exact top-k against an arbitrary query vector; `exclude` is skipped.
std::vector<Neighbor> knn_by_vector(const EmbeddingSpace& space, std::span<const double> query,
                                    int k, std::optional<std::size_t> exclude = std::nullopt);

// Runs knn for each query; results are identical to sequential execution.
std::vector<Neighbors> knn_batch(const EmbeddingSpace& space, const std::vector<std::string>& words,
                                 int k, int workers = 1);

// Scales every row to unit length. Throws (naming the token) on a zero row.
EmbeddingSpace normalize(const EmbeddingSpace& space);

// Tokens in both vocabularies, by descending count in `a`, ties lexicographic.
std::vector<std::string> shared_vocab(const EmbeddingSpace& a, const EmbeddingSpace& b);

enum class VectorFormat { kText, kBinary };

// Text: "<count> <dim>" header then "<token> v1 ... vd" with 9 significant
// digits. Binary: "TEMB1", u32 dim, u32 count, then per record u16 token
// length, UTF-8 bytes and dim little-endian f32 values.
void save_space(const EmbeddingSpace& space, const std::filesystem::path& path, VectorFormat format);
// Picks the format from the extension: .txt and .vec are text, anything else binary.
void save_space(const EmbeddingSpace& space, const std::filesystem::path& path);
// Detects the format from the magic bytes. The label is the file stem; the
// year is parsed from a trailing integer in the stem when there is one.
EmbeddingSpace load_space(const std::filesystem::path& path);

std::optional<int> year_from_stem(const std::string& stem);

}  // namespace chronoshift
