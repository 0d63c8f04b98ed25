#include "chronoshift/corpus.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>

#include "chronoshift/common.h"

namespace chronoshift {
namespace {

// Decodes the UTF-8 code point starting at `pos`; returns {code point, byte length}.
// Malformed bytes decode as themselves with length 1.
std::pair<char32_t, std::size_t> decode_at(std::string_view s, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  auto cont = [&](std::size_t i) -> int {
    if (pos + i >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[pos + i]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) return {b0, 1};
  if ((b0 & 0xE0) == 0xC0) {
    const int c1 = cont(1);
    if (c1 >= 0) return {static_cast<char32_t>(((b0 & 0x1F) << 6) | c1), 2};
  } else if ((b0 & 0xF0) == 0xE0) {
    const int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) return {static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2), 3};
  } else if ((b0 & 0xF8) == 0xF0) {
    const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0)
      return {static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3), 4};
  }
  return {b0, 1};
}

// Start offset of the code point that ends right before `end`.
std::size_t last_start(std::string_view s, std::size_t end) {
  std::size_t i = end - 1;
  while (i > 0 && (static_cast<unsigned char>(s[i]) & 0xC0) == 0x80 && end - i < 4) --i;
  return i;
}

bool is_space(char32_t c) {
  switch (c) {
    case U' ': case U'\t': case U'\n': case U'\v': case U'\f': case U'\r':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

bool is_strippable_punct(char32_t c) {
  if (c == U'_') return false;
  if (c < 0x80) return std::ispunct(static_cast<int>(c)) != 0;
  switch (c) {
    case 0xAB: case 0xBB: case 0xBF: case 0xA1:             // « » ¿ ¡
    case 0x2013: case 0x2014: case 0x2018: case 0x2019:     // – — ‘ ’
    case 0x201C: case 0x201D: case 0x2026:                  // “ ” …
      return true;
    default:
      return false;
  }
}

std::string_view strip_punct(std::string_view tok) {
  while (!tok.empty()) {
    auto [c, len] = decode_at(tok, 0);
    if (!is_strippable_punct(c)) break;
    tok.remove_prefix(len);
  }
  while (!tok.empty()) {
    const std::size_t start = last_start(tok, tok.size());
    auto [c, len] = decode_at(tok, start);
    if (start + len != tok.size() || !is_strippable_punct(c)) break;
    tok.remove_suffix(len);
  }
  return tok;
}

}  // namespace

void CorpusConfig::validate() const {
  std::vector<std::string> problems;
  if (min_count < 1) problems.push_back("min_count must be >= 1");
  if (year_start > year_end) problems.push_back("year range start must not exceed end");
  if (!problems.empty()) {
    std::string msg = "invalid corpus config:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw Error(errc::kConfig, msg);
  }
}

std::uint64_t YearCorpus::total_tokens() const {
  return std::accumulate(token_counts.begin(), token_counts.end(), std::uint64_t{0},
                         [](std::uint64_t acc, const auto& kv) { return acc + kv.second; });
}

bool is_concept_token(std::string_view token) {
  return token.starts_with("wiki:") || token.find('_') != std::string_view::npos;
}

std::vector<std::string> tokenize(std::string_view text, const CorpusConfig& config) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size()) {
      auto [c, len] = decode_at(text, pos);
      if (!is_space(c)) break;
      pos += len;
    }
    const std::size_t begin = pos;
    while (pos < text.size()) {
      auto [c, len] = decode_at(text, pos);
      if (is_space(c)) break;
      pos += len;
    }
    if (begin == pos) break;
    std::string_view raw = strip_punct(text.substr(begin, pos - begin));
    if (raw.empty()) continue;
    std::string token(raw);
    if (config.lowercase && !is_concept_token(token)) {
      std::transform(token.begin(), token.end(), token.begin(), [](unsigned char ch) {
        return static_cast<char>(std::tolower(ch));
      });
    }
    out.push_back(std::move(token));
  }
  return out;
}

YearCorpus make_year_corpus(int year, std::vector<std::vector<std::string>> documents) {
  YearCorpus corpus;
  corpus.year = year;
  corpus.documents = std::move(documents);
  for (const auto& doc : corpus.documents)
    for (const auto& tok : doc) ++corpus.token_counts[tok];
  return corpus;
}

YearCorpus load_year_corpus(const std::filesystem::path& path, int year, const CorpusConfig& config) {
  config.validate();
  Require(year >= config.year_start && year <= config.year_end, errc::kInvalidArgument,
          "year " + std::to_string(year) + " outside configured range [" +
              std::to_string(config.year_start) + ", " + std::to_string(config.year_end) + "]");
  std::ifstream in(path);
  Require(in.is_open(), errc::kIo, "cannot open corpus file: " + path.string());
  std::vector<std::vector<std::string>> docs;
  std::string line;
  while (std::getline(in, line)) {
    auto tokens = tokenize(line, config);
    if (!tokens.empty()) docs.push_back(std::move(tokens));
  }
  Require(in.eof(), errc::kIo, "read failed: " + path.string());
  return make_year_corpus(year, std::move(docs));
}

std::map<int, YearCorpus> load_corpus_dir(const std::filesystem::path& root,
                                          const CorpusConfig& config) {
  config.validate();
  Require(std::filesystem::is_directory(root), errc::kIo, "not a directory: " + root.string());
  std::map<int, YearCorpus> out;
  for (int year = config.year_start; year <= config.year_end; ++year) {
    const auto path = root / (std::to_string(year) + ".txt");
    if (std::filesystem::exists(path)) out.emplace(year, load_year_corpus(path, year, config));
  }
  return out;
}

Vocabulary build_vocab(const YearCorpus& corpus, std::uint64_t min_count) {
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (const auto& [tok, n] : corpus.token_counts)
    if (n >= min_count) kept.emplace_back(tok, n);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens;
  std::vector<std::uint64_t> counts;
  for (auto& [tok, n] : kept) {
    tokens.push_back(std::move(tok));
    counts.push_back(n);
  }
  return Vocabulary(std::move(tokens), std::move(counts));
}

}  // namespace chronoshift
