#pragma once

// Per-word change series and threshold-based turning-point detection.

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "chronoshift/align.h"

namespace chronoshift {

enum class ChangeMethod { kNeighborhood, kEmbeddingSimilarity };

std::string to_string(ChangeMethod method);
// Accepts "neighborhood" / "embedding" (and "embedding-similarity").
ChangeMethod parse_change_method(const std::string& name);

// 1 - |NN_k^t(w) & NN_k^{t-1}(w)| / k over per-year kNN. Rotation invariant,
// so the spaces need not be aligned. nullopt when w is missing in either
// year; throws when year t or t-1 is not in the series.
std::optional<double> neighborhood_change(const YearSpaces& series, const std::string& word,
                                          int year, int k);

// 1 - cos(v_w^t, v_w^{t-1}) on an aligned series. nullopt when w is missing.
std::optional<double> embedding_change(const AlignedSeries& aligned, const std::string& word,
                                       int year);

struct ChangeParams {
  ChangeMethod method = ChangeMethod::kEmbeddingSimilarity;
  int k = 20;  // neighborhood size for kNeighborhood
};

struct ChangeSeries {
  std::string word;
  ChangeMethod method = ChangeMethod::kEmbeddingSimilarity;
  int k = 0;
  std::map<int, double> values;  // defined years only
  std::vector<int> gaps;         // years (after the first) where w was missing
};

// d_t(w) for every year that has a predecessor in the series. Throws
// not-found when the word is absent from every year.
ChangeSeries change_series(const AlignedSeries& aligned, const std::string& word,
                           const ChangeParams& params = {});

struct DetectParams {
  double lambda = 1.5;
  double floor = 0.2;
  void validate() const;
};

struct TurningPoint {
  std::string word;
  int year = 0;
  double score = 0.0;
  double zscore = 0.0;
};

// Years whose value (a) reaches mean + lambda * std (population std),
// (b) reaches the floor and (c) strictly exceeds the nearest defined
// neighbour on each side. A flat series yields nothing. Needs >= 3 values.
std::vector<TurningPoint> detect_turning_points(const ChangeSeries& series,
                                                const DetectParams& params = {});

struct ChangeFlag {
  bool changed = false;
  bool gap = false;  // year t has no defined value for the word
};

// Memoizes turning points per word; safe to query from several threads.
class ChangeDetector {
 public:
  ChangeDetector(const AlignedSeries& aligned, ChangeParams change = {}, DetectParams detect = {});

  ChangeFlag changed_at(const std::string& word, int year) const;
  const std::vector<TurningPoint>& turning_points(const std::string& word) const;
  const AlignedSeries& aligned() const { return aligned_; }
  const ChangeParams& change_params() const { return change_; }
  const DetectParams& detect_params() const { return detect_; }

 private:
  struct Entry {
    ChangeSeries series;
    std::vector<TurningPoint> points;
  };
  const Entry& entry(const std::string& word) const;

  const AlignedSeries& aligned_;
  ChangeParams change_;
  DetectParams detect_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::string, Entry> cache_;
};

}  // namespace chronoshift
