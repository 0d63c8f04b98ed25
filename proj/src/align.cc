#include "chronoshift/align.h"

#include <cmath>
#include <cstring>
#include <fstream>

#include "chronoshift/common.h"
#include "chronoshift/linalg.h"

namespace chronoshift {
namespace {

constexpr char kProjectionMagic[] = "TPRJ1";
constexpr double kOrthogonalityTolerance = 1e-6;

Eigen::MatrixXd gather_rows(const EmbeddingSpace& space, const std::vector<std::string>& tokens) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(tokens.size()), static_cast<Eigen::Index>(space.dim()));
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto row = space.vector(tokens[i]);
    for (std::size_t j = 0; j < row.size(); ++j) out(i, j) = row[j];
  }
  return out;
}

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  Require(static_cast<bool>(in), errc::kFormat, "truncated projection file: " + path.string());
  return value;
}

void put_string(std::ostream& out, const std::string& s) {
  Require(s.size() <= 0xFFFF, errc::kInvalidArgument, "label too long");
  put<std::uint16_t>(out, static_cast<std::uint16_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, const std::filesystem::path& path) {
  const auto len = get<std::uint16_t>(in, path);
  std::string s(len, '\0');
  in.read(s.data(), len);
  Require(static_cast<bool>(in), errc::kFormat, "truncated projection file: " + path.string());
  return s;
}

}  // namespace

AlignedSeries::AlignedSeries(YearSpaces spaces, std::map<int, Eigen::MatrixXd> rotations)
    : spaces_(std::move(spaces)), rotations_(std::move(rotations)) {
  std::optional<std::size_t> dim;
  for (const auto& [year, space] : spaces_) {
    Require(space.normalized(), errc::kInvalidArgument,
            "aligned series requires normalized spaces (year " + std::to_string(year) + ")");
    Require(!dim || *dim == space.dim(), errc::kInvalidArgument,
            "aligned series spaces differ in dimension");
    dim = space.dim();
    auto it = rotations_.find(year);
    Require(it != rotations_.end(), errc::kInvalidArgument,
            "missing rotation for year " + std::to_string(year));
    Require(orthogonality_defect(it->second) < kOrthogonalityTolerance, errc::kNumerical,
            "rotation for year " + std::to_string(year) + " is not orthogonal");
  }
}

std::vector<int> AlignedSeries::years() const {
  std::vector<int> out;
  for (const auto& kv : spaces_) out.push_back(kv.first);
  return out;
}

const EmbeddingSpace& AlignedSeries::at(int year) const {
  auto it = spaces_.find(year);
  Require(it != spaces_.end(), errc::kNotFound, "no space for year " + std::to_string(year));
  return it->second;
}

Eigen::MatrixXd procrustes(const EmbeddingSpace& source, const EmbeddingSpace& target,
                           const std::vector<std::string>& anchors) {
  Require(source.dim() == target.dim(), errc::kInvalidArgument,
          "procrustes: dimension mismatch (" + std::to_string(source.dim()) + " vs " +
              std::to_string(target.dim()) + ")");
  Require(anchors.size() >= 2, errc::kInvalidArgument, "procrustes: fewer than two anchors");
  Require(source.normalized() && target.normalized(), errc::kInvalidArgument,
          "procrustes: both spaces must be normalized");
  if (anchors.size() < source.dim()) {
    Log().warn("procrustes: {} anchors for dimension {}; rotation is underdetermined",
               anchors.size(), source.dim());
  }
  return orthogonal_procrustes(gather_rows(source, anchors), gather_rows(target, anchors));
}

EmbeddingSpace transform_space(const EmbeddingSpace& space, const Eigen::MatrixXd& map,
                               std::string label, bool renormalize) {
  Require(static_cast<std::size_t>(map.rows()) == space.dim(), errc::kInvalidArgument,
          "transform: map rows do not match space dimension");
  RowMatrix m = space.matrix() * map;
  if (renormalize) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double n = m.row(i).norm();
      Require(n > 0.0, errc::kNumerical,
              "transform: row '" + space.vocab().token(i) + "' maps to zero");
      m.row(i) /= n;
    }
  }
  return EmbeddingSpace(space.vocab(), std::move(m), std::move(label), space.year(), renormalize);
}

AlignedSeries align_series(const YearSpaces& series, const AnchorPolicy& policy) {
  Require(series.size() >= 2, errc::kInvalidArgument, "align_series: need at least two years");
  Require(policy.max_anchors >= 2, errc::kInvalidArgument, "align_series: max_anchors must be >= 2");
  YearSpaces aligned;
  std::map<int, Eigen::MatrixXd> rotations;
  const EmbeddingSpace* previous = nullptr;
  for (const auto& [year, raw] : series) {
    EmbeddingSpace unit = raw.normalized() ? raw : normalize(raw);
    Require(!previous || previous->dim() == unit.dim(), errc::kInvalidArgument,
            "align_series: dimension changes at year " + std::to_string(year));
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(unit.dim(), unit.dim());
    if (previous) {
      auto anchors = shared_vocab(unit, *previous);
      Require(!anchors.empty(), errc::kInvalidArgument,
              "align_series: no shared vocabulary between year " + std::to_string(year) +
                  " and the year before it");
      if (anchors.size() > policy.max_anchors) anchors.resize(policy.max_anchors);
      r = procrustes(unit, *previous, anchors);
    }
    auto [it, _] = aligned.emplace(year, transform_space(unit, r, unit.label(), true));
    rotations.emplace(year, std::move(r));
    previous = &it->second;
  }
  return AlignedSeries(std::move(aligned), std::move(rotations));
}

AlignedSeries assume_aligned(const YearSpaces& series) {
  YearSpaces spaces;
  std::map<int, Eigen::MatrixXd> rotations;
  for (const auto& [year, space] : series) {
    spaces.emplace(year, space.normalized() ? space : normalize(space));
    rotations.emplace(year, Eigen::MatrixXd::Identity(space.dim(), space.dim()));
  }
  return AlignedSeries(std::move(spaces), std::move(rotations));
}

ProjectionMap fit_projection(const EmbeddingSpace& global, const EmbeddingSpace& temporal,
                             std::optional<double> ridge) {
  const auto anchors = shared_vocab(global, temporal);
  Require(!anchors.empty(), errc::kInvalidArgument,
          "projection: no shared tokens between " + global.label() + " and " + temporal.label());
  if (anchors.size() < temporal.dim()) {
    Log().warn("projection: only {} anchors for target dimension {}", anchors.size(), temporal.dim());
  }
  const Eigen::MatrixXd x = gather_rows(global, anchors);
  const Eigen::MatrixXd y = gather_rows(temporal, anchors);
  ProjectionMap map;
  map.ridge = ridge.value_or(default_ridge(x));
  map.matrix = lstsq_ridge(x, y, map.ridge);
  map.fit_rmse = std::sqrt((x * map.matrix - y).squaredNorm() / static_cast<double>(anchors.size()));
  map.source_label = global.label();
  map.target_label = temporal.label();
  return map;
}

EmbeddingSpace apply_projection(const EmbeddingSpace& global, const ProjectionMap& map,
                                std::optional<int> year) {
  const std::string label = year ? "proj-" + std::to_string(*year) : std::string("proj");
  EmbeddingSpace out = transform_space(global, map.matrix, label, true);
  return out.relabeled(label, year);
}

EmbeddingSpace project_global(const EmbeddingSpace& global, const EmbeddingSpace& temporal,
                              std::optional<double> ridge) {
  return apply_projection(global, fit_projection(global, temporal, ridge), temporal.year());
}

void save_projection(const ProjectionMap& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  Require(out.is_open(), errc::kIo, "cannot open for writing: " + path.string());
  out.write(kProjectionMagic, 5);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(map.matrix.rows()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(map.matrix.cols()));
  for (Eigen::Index i = 0; i < map.matrix.rows(); ++i)
    for (Eigen::Index j = 0; j < map.matrix.cols(); ++j) put<double>(out, map.matrix(i, j));
  put_string(out, map.source_label);
  put_string(out, map.target_label);
  put<double>(out, map.ridge);
  put<double>(out, map.fit_rmse);
  Require(static_cast<bool>(out), errc::kIo, "write failed: " + path.string());
}

ProjectionMap load_projection(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.is_open(), errc::kIo, "cannot open projection file: " + path.string());
  char magic[5] = {};
  in.read(magic, 5);
  Require(in && std::memcmp(magic, kProjectionMagic, 5) == 0, errc::kFormat,
          "not a projection file: " + path.string());
  ProjectionMap map;
  const auto rows = get<std::uint32_t>(in, path);
  const auto cols = get<std::uint32_t>(in, path);
  map.matrix.resize(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < cols; ++j) map.matrix(i, j) = get<double>(in, path);
  map.source_label = get_string(in, path);
  map.target_label = get_string(in, path);
  map.ridge = get<double>(in, path);
  map.fit_rmse = get<double>(in, path);
  return map;
}

YearSpaces load_year_spaces(const std::filesystem::path& dir) {
  Require(std::filesystem::is_directory(dir), errc::kMissingArtifact,
          "space directory not found: " + dir.string());
  YearSpaces out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext != ".temb" && ext != ".txt" && ext != ".vec") continue;
    const auto year = year_from_stem(entry.path().stem().string());
    if (!year) continue;
    Require(out.count(*year) == 0, errc::kFormat,
            "two vector files for year " + std::to_string(*year) + " in " + dir.string());
    out.emplace(*year, load_space(entry.path()).relabeled(entry.path().stem().string(), *year));
  }
  return out;
}

void save_year_spaces(const YearSpaces& spaces, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [year, space] : spaces)
    save_space(space, dir / (std::to_string(year) + ".temb"), VectorFormat::kBinary);
}

}  // namespace chronoshift
