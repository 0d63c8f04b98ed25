#include <fstream>

#include <gtest/gtest.h>

#include "chronoshift/align.h"
#include "chronoshift/linalg.h"
#include "test_util.h"

namespace chronoshift {
namespace {

using testing::error_code;
using testing::random_space;
using testing::temp_dir;

Eigen::MatrixXd random_orthogonal(int n, std::uint64_t seed) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(testing::gaussian_matrix(n, n, seed));
  return qr.householderQ();
}

EmbeddingSpace rotated(const EmbeddingSpace& s, const Eigen::MatrixXd& r, int year) {
  RowMatrix m = s.matrix() * r;
  return EmbeddingSpace(s.vocab(), m, "y" + std::to_string(year), year, s.normalized());
}

TEST(Procrustes, ZeroNoiseRecovery) {
  const EmbeddingSpace base = random_space(200, 10, 1, true);
  const Eigen::MatrixXd r_star = random_orthogonal(10, 2);
  const EmbeddingSpace moved = rotated(base, r_star.transpose(), 1);
  const Eigen::MatrixXd r = procrustes(moved, base, base.vocab().tokens());
  EXPECT_LT((r - r_star).norm(), 1e-9);
}

TEST(Procrustes, Preconditions) {
  const EmbeddingSpace a = random_space(20, 4, 3, true);
  const EmbeddingSpace b = random_space(20, 5, 4, true);
  EXPECT_EQ(error_code([&] { procrustes(a, b, a.vocab().tokens()); }), errc::kInvalidArgument);
  EXPECT_EQ(error_code([&] { procrustes(a, a, {"t0"}); }), errc::kInvalidArgument);
  const EmbeddingSpace raw = random_space(20, 4, 5);
  EXPECT_EQ(error_code([&] { procrustes(raw, a, a.vocab().tokens()); }), errc::kInvalidArgument);
}

TEST(AlignSeries, ChainedRotationsUndoPerYearFrames) {
  const EmbeddingSpace base = random_space(150, 8, 6, true);
  YearSpaces series;
  for (int y = 2000; y < 2004; ++y) series.emplace(y, rotated(base, random_orthogonal(8, y), y));
  const AlignedSeries aligned = align_series(series);
  EXPECT_EQ(aligned.years(), (std::vector<int>{2000, 2001, 2002, 2003}));
  for (int y = 2001; y < 2004; ++y) {
    for (const auto& tok : {"t0", "t77", "t149"})
      EXPECT_NEAR(cosine(aligned.at(y).vector(tok), aligned.at(2000).vector(tok)), 1.0, 1e-9);
    EXPECT_LT(orthogonality_defect(aligned.rotations().at(y)), 1e-9);
  }
  EXPECT_TRUE(aligned.rotations().at(2000).isIdentity());
  EXPECT_EQ(error_code([&] { aligned.at(1999); }), errc::kNotFound);
}

TEST(AlignSeries, AnchorCapLimitsTokensUsed) {
  // Rows outside the top anchors are scrambled; with a cap the rotation is
  // still exact because only frequent tokens are used.
  const EmbeddingSpace base = random_space(100, 6, 7, true);
  const Eigen::MatrixXd r = random_orthogonal(6, 8);
  RowMatrix m = base.matrix() * r;
  const RowMatrix junk = testing::gaussian_matrix(50, 6, 9);
  for (int i = 50; i < 100; ++i) m.row(i) = junk.row(i - 50).normalized();
  YearSpaces series;
  series.emplace(1990, base);
  series.emplace(1991, EmbeddingSpace(base.vocab(), m, "b", 1991, true));
  const AlignedSeries capped = align_series(series, AnchorPolicy{50});
  EXPECT_LT((capped.rotations().at(1991) - r.transpose()).norm(), 1e-9);
  const AlignedSeries all = align_series(series, AnchorPolicy{100});
  EXPECT_GT((all.rotations().at(1991) - r.transpose()).norm(), 1e-3);
}

TEST(AlignSeries, NeedsTwoYears) {
  YearSpaces one;
  one.emplace(2000, random_space(5, 3, 1, true));
  EXPECT_EQ(error_code([&] { align_series(one); }), errc::kInvalidArgument);
}

TEST(Projection, RecoversPlantedMap) {
  const EmbeddingSpace global = random_space(300, 12, 10, false, "g");
  const Eigen::MatrixXd t_star = testing::gaussian_matrix(12, 8, 11);
  const RowMatrix target = global.matrix() * t_star;
  const EmbeddingSpace temporal(global.vocab(), target, "y", 2000);
  const ProjectionMap map = fit_projection(global, temporal, 0.0);
  EXPECT_LT((map.matrix - t_star).norm(), 1e-9);
  EXPECT_LT(map.fit_rmse, 1e-9);
  const EmbeddingSpace projected = apply_projection(global, map, 2000);
  EXPECT_EQ(projected.label(), "proj-2000");
  EXPECT_TRUE(projected.normalized());
  EXPECT_EQ(projected.dim(), 8u);
}

TEST(Projection, UnsharedRowsAreMappedToo) {
  // Event tokens absent from the temporal space still receive an image.
  const EmbeddingSpace global = random_space(60, 5, 12, false, "g");
  const Eigen::MatrixXd t_star = testing::gaussian_matrix(5, 5, 13);
  std::vector<std::string> tokens(global.vocab().tokens().begin(), global.vocab().tokens().begin() + 50);
  const RowMatrix target = global.matrix().topRows(50) * t_star;
  const EmbeddingSpace temporal(Vocabulary(tokens), target, "y", 2001);
  const EmbeddingSpace projected = project_global(global, temporal, 0.0);
  const Eigen::VectorXd truth = global.matrix().row(55) * t_star;
  const auto got = projected.vector("g55");
  EXPECT_NEAR(cosine(got, std::span<const double>(truth.data(), truth.size())), 1.0, 1e-9);
}

TEST(Projection, DefaultRidgeAndNoSharedTokens) {
  const EmbeddingSpace global = random_space(40, 4, 14, false, "g");
  const EmbeddingSpace temporal(global.vocab(), global.matrix(), "y", 2000);
  const ProjectionMap map = fit_projection(global, temporal);
  Eigen::MatrixXd x = global.matrix();
  EXPECT_DOUBLE_EQ(map.ridge, default_ridge(x));
  const EmbeddingSpace other = random_space(10, 4, 15, false, "zz");
  EXPECT_EQ(error_code([&] { fit_projection(global, other); }), errc::kInvalidArgument);
}

TEST(Projection, FileRoundTrip) {
  const auto dir = temp_dir("proj_io");
  ProjectionMap map;
  map.matrix = testing::gaussian_matrix(3, 2, 16);
  map.source_label = "global";
  map.target_label = "1999";
  map.ridge = 0.25;
  map.fit_rmse = 0.5;
  save_projection(map, dir / "1999.tprj");
  const ProjectionMap back = load_projection(dir / "1999.tprj");
  EXPECT_TRUE(back.matrix == map.matrix);
  EXPECT_EQ(back.source_label, "global");
  EXPECT_EQ(back.target_label, "1999");
  EXPECT_EQ(back.ridge, 0.25);
  EXPECT_EQ(back.fit_rmse, 0.5);
  std::ofstream(dir / "bad.tprj") << "nope";
  EXPECT_EQ(error_code([&] { load_projection(dir / "bad.tprj"); }), errc::kFormat);
}

TEST(YearSpacesIo, RoundTripAndMissingDirectory) {
  const auto dir = temp_dir("year_spaces");
  YearSpaces spaces;
  spaces.emplace(1995, random_space(10, 3, 1, true).relabeled("a", 1995));
  spaces.emplace(1996, random_space(10, 3, 2, true).relabeled("b", 1996));
  save_year_spaces(spaces, dir);
  const YearSpaces back = load_year_spaces(dir);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.at(1996).year(), 1996);
  EXPECT_EQ(error_code([&] { load_year_spaces(dir / "missing"); }), errc::kMissingArtifact);
}

}  // namespace
}  // namespace chronoshift
