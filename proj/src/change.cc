#include "chronoshift/change.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "chronoshift/common.h"

namespace chronoshift {
namespace {

const EmbeddingSpace& year_space(const YearSpaces& series, int year) {
  auto it = series.find(year);
  Require(it != series.end(), errc::kNotFound, "no space for year " + std::to_string(year));
  return it->second;
}

double overlap_change(const std::vector<std::string>& now, const std::vector<std::string>& before,
                      int k) {
  const std::set<std::string> prev(before.begin(), before.end());
  std::size_t shared = 0;
  for (const auto& tok : now) shared += prev.count(tok);
  return 1.0 - static_cast<double>(shared) / static_cast<double>(k);
}

}  // namespace

std::string to_string(ChangeMethod method) {
  return method == ChangeMethod::kNeighborhood ? "neighborhood" : "embedding";
}

ChangeMethod parse_change_method(const std::string& name) {
  if (name == "neighborhood") return ChangeMethod::kNeighborhood;
  if (name == "embedding" || name == "embedding-similarity") return ChangeMethod::kEmbeddingSimilarity;
  throw Error(errc::kInvalidArgument, "unknown change method '" + name + "'");
}

std::optional<double> neighborhood_change(const YearSpaces& series, const std::string& word,
                                          int year, int k) {
  Require(k >= 1, errc::kInvalidArgument, "neighborhood change needs k >= 1");
  const EmbeddingSpace& now = year_space(series, year);
  const EmbeddingSpace& before = year_space(series, year - 1);
  if (!now.contains(word) || !before.contains(word)) return std::nullopt;
  return overlap_change(knn(now, word, k).tokens(), knn(before, word, k).tokens(), k);
}

std::optional<double> embedding_change(const AlignedSeries& aligned, const std::string& word,
                                       int year) {
  const EmbeddingSpace& now = aligned.at(year);
  const EmbeddingSpace& before = aligned.at(year - 1);
  if (!now.contains(word) || !before.contains(word)) return std::nullopt;
  return 1.0 - cosine(now.vector(word), before.vector(word));
}

ChangeSeries change_series(const AlignedSeries& aligned, const std::string& word,
                           const ChangeParams& params) {
  Require(params.k >= 1, errc::kInvalidArgument, "change series needs k >= 1");
  ChangeSeries out;
  out.word = word;
  out.method = params.method;
  out.k = params.method == ChangeMethod::kNeighborhood ? params.k : 0;

  const auto& spaces = aligned.spaces();
  const bool anywhere = std::any_of(spaces.begin(), spaces.end(),
                                    [&](const auto& kv) { return kv.second.contains(word); });
  Require(anywhere, errc::kNotFound, "word '" + word + "' is absent from every year");

  // Each year's neighbour list is needed twice (as t and as t-1); compute once.
  std::map<int, std::vector<std::string>> neighbours;
  auto neighbours_at = [&](int year) -> const std::vector<std::string>& {
    auto it = neighbours.find(year);
    if (it == neighbours.end())
      it = neighbours.emplace(year, knn(spaces.at(year), word, params.k).tokens()).first;
    return it->second;
  };

  for (const auto& [year, space] : spaces) {
    auto prev = spaces.find(year - 1);
    if (prev == spaces.end()) continue;
    if (!space.contains(word) || !prev->second.contains(word)) {
      out.gaps.push_back(year);
      continue;
    }
    if (params.method == ChangeMethod::kNeighborhood) {
      out.values[year] = overlap_change(neighbours_at(year), neighbours_at(year - 1), params.k);
    } else {
      out.values[year] = 1.0 - cosine(space.vector(word), prev->second.vector(word));
    }
  }
  return out;
}

void DetectParams::validate() const {
  std::vector<std::string> problems;
  if (!std::isfinite(lambda) || lambda < 0) problems.push_back("lambda must be finite and >= 0");
  if (!std::isfinite(floor)) problems.push_back("floor must be finite");
  if (!problems.empty()) {
    std::string msg = "invalid detection config:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw Error(errc::kConfig, msg);
  }
}

std::vector<TurningPoint> detect_turning_points(const ChangeSeries& series,
                                                const DetectParams& params) {
  params.validate();
  Require(series.values.size() >= 3, errc::kInvalidArgument,
          "peak detection for '" + series.word + "' needs at least 3 defined values, got " +
              std::to_string(series.values.size()));
  std::vector<int> years;
  std::vector<double> v;
  for (const auto& [y, d] : series.values) {
    years.push_back(y);
    v.push_back(d);
  }
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double d : v) mean += d;
  mean /= n;
  double var = 0.0;
  for (double d : v) var += (d - mean) * (d - mean);
  const double sd = std::sqrt(var / n);

  std::vector<TurningPoint> out;
  if (sd == 0.0) {
    Log().debug("flat change series for '{}'; no turning points", series.word);
    return out;
  }
  const double threshold = mean + params.lambda * sd;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < threshold || v[i] < params.floor) continue;
    if (i > 0 && !(v[i] > v[i - 1])) continue;
    if (i + 1 < v.size() && !(v[i] > v[i + 1])) continue;
    out.push_back({series.word, years[i], v[i], (v[i] - mean) / sd});
  }
  return out;
}

ChangeDetector::ChangeDetector(const AlignedSeries& aligned, ChangeParams change, DetectParams detect)
    : aligned_(aligned), change_(change), detect_(detect) {
  detect_.validate();
  Require(change_.k >= 1, errc::kInvalidArgument, "change detector needs k >= 1");
}

const ChangeDetector::Entry& ChangeDetector::entry(const std::string& word) const {
  {
    std::lock_guard lock(mutex_);
    auto it = cache_.find(word);
    if (it != cache_.end()) return it->second;
  }
  Entry e;
  e.series = change_series(aligned_, word, change_);
  if (e.series.values.size() >= 3) e.points = detect_turning_points(e.series, detect_);
  std::lock_guard lock(mutex_);
  return cache_.emplace(word, std::move(e)).first->second;
}

const std::vector<TurningPoint>& ChangeDetector::turning_points(const std::string& word) const {
  return entry(word).points;
}

ChangeFlag ChangeDetector::changed_at(const std::string& word, int year) const {
  const Entry& e = entry(word);
  ChangeFlag flag;
  flag.gap = e.series.values.count(year) == 0;
  flag.changed = std::any_of(e.points.begin(), e.points.end(),
                             [&](const TurningPoint& p) { return p.year == year; });
  return flag;
}

}  // namespace chronoshift
