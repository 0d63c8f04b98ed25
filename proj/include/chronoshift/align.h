#pragma once

// Alignment of per-year spaces into one coordinate frame, and projection of
// a global word+event space into each per-year frame.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chronoshift/vecspace.h"

namespace chronoshift {

using YearSpaces = std::map<int, EmbeddingSpace>;

struct AnchorPolicy {
  std::size_t max_anchors = 10000;  // top-A shared tokens by frequency
};

// Per-year spaces rotated into the frame of the earliest year. Every space
// is normalized; `rotations[t]` is the orthogonal matrix applied to year t.
class AlignedSeries {
 public:
  AlignedSeries() = default;
  AlignedSeries(YearSpaces spaces, std::map<int, Eigen::MatrixXd> rotations);

  const YearSpaces& spaces() const { return spaces_; }
  const std::map<int, Eigen::MatrixXd>& rotations() const { return rotations_; }
  std::vector<int> years() const;
  bool has_year(int year) const { return spaces_.count(year) > 0; }
  const EmbeddingSpace& at(int year) const;

 private:
  YearSpaces spaces_;
  std::map<int, Eigen::MatrixXd> rotations_;
};

// Orthogonal R such that source_anchors * R best matches target_anchors.
// Both spaces must be normalized and share the dimension; at least two anchors.
Eigen::MatrixXd procrustes(const EmbeddingSpace& source, const EmbeddingSpace& target,
                           const std::vector<std::string>& anchors);

// Applies a d x d map to every row; normalized output when `renormalize`.
EmbeddingSpace transform_space(const EmbeddingSpace& space, const Eigen::MatrixXd& map,
                               std::string label, bool renormalize);

// Chained alignment: year t is rotated onto the already aligned year before it.
AlignedSeries align_series(const YearSpaces& series, const AnchorPolicy& policy = {});

// Wraps spaces that already share a frame (rotations set to identity).
AlignedSeries assume_aligned(const YearSpaces& series);

struct ProjectionMap {
  Eigen::MatrixXd matrix;  // d_src x d_dst
  std::string source_label;
  std::string target_label;
  double ridge = 0.0;
  double fit_rmse = 0.0;
};

// Fits the global->temporal linear map over every shared token. `ridge`
// defaults to 1e-3 * trace(X^T X) / p when not given.
ProjectionMap fit_projection(const EmbeddingSpace& global, const EmbeddingSpace& temporal,
                             std::optional<double> ridge = std::nullopt);

// global * map over the full global vocabulary, normalized, labeled "proj-<year>".
EmbeddingSpace apply_projection(const EmbeddingSpace& global, const ProjectionMap& map,
                                std::optional<int> year);

EmbeddingSpace project_global(const EmbeddingSpace& global, const EmbeddingSpace& temporal,
                              std::optional<double> ridge = std::nullopt);

// Binary: "TPRJ1", u32 rows, u32 cols, row-major f64 matrix, u16-length
// source and target labels, f64 ridge, f64 rmse.
void save_projection(const ProjectionMap& map, const std::filesystem::path& path);
ProjectionMap load_projection(const std::filesystem::path& path);

// Loads every vector file in `dir` whose stem ends in a year.
YearSpaces load_year_spaces(const std::filesystem::path& dir);
// Writes `<dir>/<year>.temb` for each space.
void save_year_spaces(const YearSpaces& spaces, const std::filesystem::path& dir);

}  // namespace chronoshift
