#pragma once

#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include <unistd.h>

#include "chronoshift/common.h"
#include "chronoshift/vecspace.h"

namespace chronoshift::testing {

// Fresh, empty directory under the system temp dir, unique per process.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() /
                 ("chronoshift_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline RowMatrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  RowMatrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

inline EmbeddingSpace random_space(std::size_t n, std::size_t dim, std::uint64_t seed,
                                   bool unit = false, const std::string& prefix = "t") {
  std::vector<std::string> tokens;
  std::vector<std::uint64_t> counts;
  for (std::size_t i = 0; i < n; ++i) {
    tokens.push_back(prefix + std::to_string(i));
    counts.push_back(n - i);
  }
  EmbeddingSpace s(Vocabulary(tokens, counts), gaussian_matrix(n, dim, seed), "rand");
  return unit ? normalize(s) : s;
}

// Error code raised by fn, or "" if it returns normally.
inline std::string error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

}  // namespace chronoshift::testing
