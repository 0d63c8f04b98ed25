#pragma once

// Year-bucketed corpus ingestion: one document per line, `<root>/<year>.txt`.
//
// Concept annotation happens upstream: tokens of the form "wiki:<id>" or
// containing '_' are concept identifiers and are never case-folded.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "chronoshift/vecspace.h"

namespace chronoshift {

struct CorpusConfig {
  std::uint64_t min_count = 50;
  bool lowercase = true;
  int year_start = 1981;
  int year_end = 2016;

  // Throws Error(config) listing every violated constraint.
  void validate() const;
};

struct YearCorpus {
  int year = 0;
  std::vector<std::vector<std::string>> documents;
  std::unordered_map<std::string, std::uint64_t> token_counts;

  std::uint64_t total_tokens() const;
};

std::vector<std::string> tokenize(std::string_view text, const CorpusConfig& config);

bool is_concept_token(std::string_view token);

YearCorpus make_year_corpus(int year, std::vector<std::vector<std::string>> documents);

YearCorpus load_year_corpus(const std::filesystem::path& path, int year, const CorpusConfig& config);

// Loads every `<year>.txt` under `root` whose year lies in the configured range.
std::map<int, YearCorpus> load_corpus_dir(const std::filesystem::path& root,
                                          const CorpusConfig& config);

// Tokens with count >= min_count, by descending count then lexicographically.
Vocabulary build_vocab(const YearCorpus& corpus, std::uint64_t min_count);

}  // namespace chronoshift
