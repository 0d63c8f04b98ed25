#include "chronoshift/vecspace.h"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "chronoshift/common.h"

namespace chronoshift {
namespace {

constexpr char kBinaryMagic[] = "TEMB1";
constexpr std::size_t kMagicLength = 5;
constexpr double kUnitTolerance = 1e-6;

static_assert(std::endian::native == std::endian::little,
              "binary vector files are written assuming a little-endian host");

double dot(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

double clamp_similarity(double s) { return std::clamp(s, -1.0, 1.0); }

// Similarity descending, token ascending.
bool neighbor_before(const Neighbor& a, const Neighbor& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.token < b.token;
}

template <typename T>
void write_le(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const std::filesystem::path& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  Require(static_cast<bool>(in), errc::kFormat, "truncated binary vector file: " + path.string());
  return value;
}

bool all_unit(const std::vector<double>& norms) {
  return !norms.empty() && std::all_of(norms.begin(), norms.end(), [](double n) {
    return std::abs(n - 1.0) <= kUnitTolerance;
  });
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::vector<std::uint64_t> counts)
    : tokens_(std::move(tokens)), counts_(std::move(counts)) {
  if (counts_.empty()) counts_.assign(tokens_.size(), 0);
  Require(counts_.size() == tokens_.size(), errc::kInvalidArgument,
          "vocabulary counts do not match token count");
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    Require(!tokens_[i].empty(), errc::kInvalidArgument, "empty token in vocabulary");
    auto [it, inserted] = index_.emplace(tokens_[i], i);
    Require(inserted, errc::kFormat, "duplicate token: " + tokens_[i]);
  }
}

std::optional<std::size_t> Vocabulary::find(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::at(const std::string& token) const {
  auto it = index_.find(token);
  Require(it != index_.end(), errc::kNotFound, "unknown token: " + token);
  return it->second;
}

EmbeddingSpace::EmbeddingSpace(Vocabulary vocab, RowMatrix matrix, std::string label,
                               std::optional<int> year, bool normalized)
    : vocab_(std::move(vocab)),
      matrix_(std::move(matrix)),
      label_(std::move(label)),
      year_(year),
      normalized_(normalized) {
  Require(matrix_.cols() >= 1, errc::kInvalidArgument, "embedding dimension must be positive");
  Require(static_cast<std::size_t>(matrix_.rows()) == vocab_.size(), errc::kInvalidArgument,
          "matrix has " + std::to_string(matrix_.rows()) + " rows but vocabulary has " +
              std::to_string(vocab_.size()) + " tokens");
  Require(matrix_.allFinite(), errc::kNumerical, "non-finite entry in space " + label_);
  norms_.resize(vocab_.size());
  for (std::size_t i = 0; i < vocab_.size(); ++i) norms_[i] = matrix_.row(i).norm();
  if (normalized_) {
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
      Require(std::abs(norms_[i] - 1.0) <= kUnitTolerance, errc::kInvalidArgument,
              "row '" + vocab_.token(i) + "' is not unit length in normalized space " + label_);
    }
  }
}

EmbeddingSpace EmbeddingSpace::relabeled(std::string label, std::optional<int> year) const {
  EmbeddingSpace copy = *this;
  copy.label_ = std::move(label);
  copy.year_ = year;
  return copy;
}

std::vector<std::string> Neighbors::tokens() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.token);
  return out;
}

double cosine(std::span<const double> u, std::span<const double> v) {
  Require(u.size() == v.size(), errc::kInvalidArgument,
          "cosine: dimension mismatch (" + std::to_string(u.size()) + " vs " +
              std::to_string(v.size()) + ")");
  const double nu = std::sqrt(dot(u, u));
  const double nv = std::sqrt(dot(v, v));
  Require(nu > 0.0 && nv > 0.0, errc::kInvalidArgument, "cosine: zero vector");
  return clamp_similarity(dot(u, v) / (nu * nv));
}

std::vector<Neighbor> knn_by_vector(const EmbeddingSpace& space, std::span<const double> query,
                                    int k, std::optional<std::size_t> exclude) {
  Require(k >= 1, errc::kInvalidArgument, "knn: k must be positive");
  Require(query.size() == space.dim(), errc::kInvalidArgument, "knn: query dimension mismatch");
  const double qn = std::sqrt(dot(query, query));
  Require(qn > 0.0, errc::kInvalidArgument, "knn: zero query vector");

  std::vector<Neighbor> all;
  all.reserve(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (exclude && *exclude == i) continue;
    const double rn = space.row_norm(i);
    const double sim = rn > 0.0 ? clamp_similarity(dot(query, space.row(i)) / (qn * rn)) : 0.0;
    all.push_back({space.vocab().token(i), sim});
  }
  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(),
                    neighbor_before);
  all.resize(keep);
  return all;
}

Neighbors knn(const EmbeddingSpace& space, const std::string& word, int k) {
  Require(k >= 1, errc::kInvalidArgument, "knn: k must be positive");
  const std::size_t id = space.vocab().at(word);
  Neighbors result;
  result.query = word;
  result.k = k;
  result.entries = knn_by_vector(space, space.row(id), k, id);
  return result;
}

std::vector<Neighbors> knn_batch(const EmbeddingSpace& space, const std::vector<std::string>& words,
                                 int k, int workers) {
  std::vector<Neighbors> out(words.size());
  workers = std::max(1, std::min<int>(workers, static_cast<int>(words.size())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < words.size(); ++i) out[i] = knn(space, words[i], k);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < words.size(); i += workers) out[i] = knn(space, words[i], k);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

EmbeddingSpace normalize(const EmbeddingSpace& space) {
  RowMatrix m = space.matrix();
  for (std::size_t i = 0; i < space.size(); ++i) {
    const double n = space.row_norm(i);
    Require(n > 0.0, errc::kNumerical, "cannot normalize zero row for token '" +
                                           space.vocab().token(i) + "' in " + space.label());
    m.row(i) /= n;
  }
  return EmbeddingSpace(space.vocab(), std::move(m), space.label(), space.year(), true);
}

std::vector<std::string> shared_vocab(const EmbeddingSpace& a, const EmbeddingSpace& b) {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (b.contains(a.vocab().token(i))) ids.push_back(i);
  const auto& vocab = a.vocab();
  std::sort(ids.begin(), ids.end(), [&](std::size_t x, std::size_t y) {
    if (vocab.count(x) != vocab.count(y)) return vocab.count(x) > vocab.count(y);
    return vocab.token(x) < vocab.token(y);
  });
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto i : ids) out.push_back(vocab.token(i));
  return out;
}

std::optional<int> year_from_stem(const std::string& stem) {
  std::size_t end = stem.size();
  std::size_t begin = end;
  while (begin > 0 && std::isdigit(static_cast<unsigned char>(stem[begin - 1]))) --begin;
  if (begin == end || end - begin > 6) return std::nullopt;
  return std::stoi(stem.substr(begin));
}

namespace {

void save_text(const EmbeddingSpace& space, const std::filesystem::path& path) {
  std::ofstream out(path);
  Require(out.is_open(), errc::kIo, "cannot open for writing: " + path.string());
  out << space.size() << ' ' << space.dim() << '\n';
  char buf[32];
  for (std::size_t i = 0; i < space.size(); ++i) {
    out << space.vocab().token(i);
    for (double v : space.row(i)) {
      std::snprintf(buf, sizeof buf, " %.9g", v);
      out << buf;
    }
    out << '\n';
  }
  Require(static_cast<bool>(out), errc::kIo, "write failed: " + path.string());
}

void save_binary(const EmbeddingSpace& space, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  Require(out.is_open(), errc::kIo, "cannot open for writing: " + path.string());
  Require(space.size() <= std::numeric_limits<std::uint32_t>::max(), errc::kInvalidArgument,
          "too many rows for binary format");
  out.write(kBinaryMagic, kMagicLength);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(space.dim()));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(space.size()));
  for (std::size_t i = 0; i < space.size(); ++i) {
    const std::string& token = space.vocab().token(i);
    Require(token.size() <= std::numeric_limits<std::uint16_t>::max(), errc::kInvalidArgument,
            "token too long for binary format");
    write_le<std::uint16_t>(out, static_cast<std::uint16_t>(token.size()));
    out.write(token.data(), static_cast<std::streamsize>(token.size()));
    for (double v : space.row(i)) write_le<float>(out, static_cast<float>(v));
  }
  Require(static_cast<bool>(out), errc::kIo, "write failed: " + path.string());
}

EmbeddingSpace finish_load(std::vector<std::string> tokens, RowMatrix m,
                           const std::filesystem::path& path) {
  const std::string stem = path.stem().string();
  Vocabulary vocab(std::move(tokens));
  std::vector<double> norms(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) norms[i] = m.row(i).norm();
  const bool unit = all_unit(norms);
  return EmbeddingSpace(std::move(vocab), std::move(m), stem, year_from_stem(stem), unit);
}

EmbeddingSpace load_binary(std::ifstream& in, const std::filesystem::path& path) {
  const auto dim = read_le<std::uint32_t>(in, path);
  const auto count = read_le<std::uint32_t>(in, path);
  Require(dim >= 1, errc::kFormat, "binary vector file declares zero dimension: " + path.string());
  std::vector<std::string> tokens;
  tokens.reserve(count);
  RowMatrix m(count, dim);
  std::vector<float> row(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = read_le<std::uint16_t>(in, path);
    std::string token(len, '\0');
    in.read(token.data(), len);
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(dim * sizeof(float)));
    Require(static_cast<bool>(in), errc::kFormat,
            "truncated binary vector file at record " + std::to_string(i) + ": " + path.string());
    for (std::uint32_t j = 0; j < dim; ++j) m(i, j) = row[j];
    tokens.push_back(std::move(token));
  }
  in.peek();
  Require(in.eof(), errc::kFormat, "trailing bytes after " + std::to_string(count) +
                                       " records: " + path.string());
  return finish_load(std::move(tokens), std::move(m), path);
}

EmbeddingSpace load_text(std::ifstream& in, const std::filesystem::path& path) {
  std::string line;
  Require(static_cast<bool>(std::getline(in, line)), errc::kFormat,
          "empty vector file: " + path.string());
  std::istringstream header(line);
  long long count = -1, dim = -1;
  header >> count >> dim;
  std::string rest;
  Require(header && !(header >> rest) && count >= 0 && dim >= 1, errc::kFormat,
          "malformed header '" + line + "' in " + path.string());

  std::vector<std::string> tokens;
  tokens.reserve(static_cast<std::size_t>(count));
  RowMatrix m(count, dim);
  long long row = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Require(row < count, errc::kFormat,
            "more rows than the declared " + std::to_string(count) + " in " + path.string());
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    for (long long j = 0; j < dim; ++j) {
      std::string value;
      Require(static_cast<bool>(fields >> value), errc::kFormat,
              "line " + std::to_string(line_no) + " has fewer than " + std::to_string(dim) +
                  " values in " + path.string());
      char* end = nullptr;
      m(row, j) = std::strtod(value.c_str(), &end);
      Require(end && *end == '\0', errc::kFormat,
              "bad number '" + value + "' on line " + std::to_string(line_no));
    }
    Require(!(fields >> rest), errc::kFormat,
            "line " + std::to_string(line_no) + " has more than " + std::to_string(dim) +
                " values in " + path.string());
    tokens.push_back(std::move(token));
    ++row;
  }
  Require(row == count, errc::kFormat,
          "header declares " + std::to_string(count) + " rows but file has " +
              std::to_string(row) + ": " + path.string());
  return finish_load(std::move(tokens), std::move(m), path);
}

}  // namespace

void save_space(const EmbeddingSpace& space, const std::filesystem::path& path, VectorFormat format) {
  if (format == VectorFormat::kText)
    save_text(space, path);
  else
    save_binary(space, path);
}

void save_space(const EmbeddingSpace& space, const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  save_space(space, path, (ext == ".txt" || ext == ".vec") ? VectorFormat::kText
                                                           : VectorFormat::kBinary);
}

EmbeddingSpace load_space(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.is_open(), errc::kIo, "cannot open vector file: " + path.string());
  char magic[kMagicLength] = {};
  in.read(magic, kMagicLength);
  if (in.gcount() == static_cast<std::streamsize>(kMagicLength) &&
      std::memcmp(magic, kBinaryMagic, kMagicLength) == 0) {
    return load_binary(in, path);
  }
  in.clear();
  in.seekg(0);
  return load_text(in, path);
}

}  // namespace chronoshift
