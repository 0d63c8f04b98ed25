#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "chronoshift/sgns.h"
#include "chronoshift/synthgen.h"
#include "test_util.h"

namespace chronoshift {
namespace {

using testing::error_code;

double log_sig(double x) { return -std::log(1.0 + std::exp(-x)); }

// Negative objective, written out directly.
double objective(const std::vector<double>& v, const std::vector<double>& u,
                 const std::vector<std::vector<double>>& negs) {
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  double l = -log_sig(dot(u, v));
  for (const auto& n : negs) l -= log_sig(-dot(n, v));
  return l;
}

std::vector<double> random_vec(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> g(0, 0.5);
  std::vector<double> v(d);
  for (auto& x : v) x = g(rng);
  return v;
}

TEST(SgdStep, DeltasMatchFiniteDifferences) {
  std::mt19937_64 rng(11);
  const int d = 6;
  const double lr = 0.1, h = 1e-6;
  for (int trial = 0; trial < 10; ++trial) {
    auto v = random_vec(rng, d), u = random_vec(rng, d);
    std::vector<std::vector<double>> negs{random_vec(rng, d), random_vec(rng, d), random_vec(rng, d)};
    std::vector<std::span<const double>> neg_spans(negs.begin(), negs.end());
    const SgnsDeltas step = sgd_step(v, u, neg_spans, lr);
    EXPECT_NEAR(step.loss, objective(v, u, negs), 1e-12);

    auto check = [&](std::vector<double>& param, const Eigen::VectorXd& delta) {
      for (int j = 0; j < d; ++j) {
        const double keep = param[j];
        param[j] = keep + h;
        const double up = objective(v, u, negs);
        param[j] = keep - h;
        const double down = objective(v, u, negs);
        param[j] = keep;
        const double grad = (up - down) / (2 * h);
        EXPECT_NEAR(delta(j), -lr * grad, 1e-7);
      }
    };
    check(v, step.center);
    check(u, step.context);
    for (std::size_t n = 0; n < negs.size(); ++n) check(negs[n], step.negative[n]);
  }
}

TEST(NegativeSampler, TableFollowsPowerLaw) {
  const std::vector<std::uint64_t> counts{1000, 100, 10, 1};
  const std::size_t size = 100000;
  const NegativeSampler s(counts, 0.75, size);
  ASSERT_EQ(s.table().size(), size);
  double total = 0;
  for (auto c : counts) total += std::pow(static_cast<double>(c), 0.75);
  std::vector<std::size_t> seen(counts.size(), 0);
  for (auto id : s.table()) ++seen[id];
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double exact = std::pow(static_cast<double>(counts[i]), 0.75) / total * size;
    EXPECT_LE(std::abs(static_cast<double>(seen[i]) - exact), 1.0);
  }
}

YearCorpus two_topic_corpus(std::size_t docs) {
  CorpusSpec spec;
  spec.docs_per_year = docs;
  spec.doc_length = 30;
  spec.words_per_topic = 8;
  return make_year_corpus(2000, gen_corpus(spec).at(2000));
}

SgnsConfig small_config() {
  SgnsConfig cfg;
  cfg.dim = 16;
  cfg.min_count = 1;
  cfg.epochs = 3;
  cfg.subsample_t = 0;
  return cfg;
}

TEST(TrainSgns, CoOccurringWordsEndUpCloser) {
  const EmbeddingSpace s = normalize(train_sgns(two_topic_corpus(300), small_config()));
  double intra = 0, inter = 0;
  int ni = 0, nx = 0;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      const auto a = s.vector("t0w" + std::to_string(i));
      if (i != j) {
        intra += cosine(a, s.vector("t0w" + std::to_string(j)));
        ++ni;
      }
      inter += cosine(a, s.vector("t1w" + std::to_string(j)));
      ++nx;
    }
  }
  EXPECT_GT(intra / ni, inter / nx + 0.2);
}

TEST(TrainSgns, DeterministicForOneWorker) {
  const YearCorpus c = two_topic_corpus(100);
  const EmbeddingSpace a = train_sgns(c, small_config());
  const EmbeddingSpace b = train_sgns(c, small_config());
  EXPECT_EQ(a.vocab().tokens(), b.vocab().tokens());
  EXPECT_TRUE(a.matrix() == b.matrix());
  SgnsConfig other = small_config();
  other.seed = 2;
  EXPECT_FALSE(train_sgns(c, other).matrix() == a.matrix());
}

TEST(TrainSgns, SeveralWorkersStillProduceFiniteVectors) {
  SgnsConfig cfg = small_config();
  cfg.workers = 3;
  const EmbeddingSpace s = train_sgns(two_topic_corpus(100), cfg);
  EXPECT_TRUE(s.matrix().allFinite());
  EXPECT_EQ(s.dim(), 16u);
}

TEST(TrainSgns, MinCountAndConfigErrors) {
  const YearCorpus c = make_year_corpus(1990, {{"a", "b", "a"}});
  SgnsConfig cfg = small_config();
  cfg.min_count = 2;
  EXPECT_EQ(train_sgns(c, cfg).vocab().tokens(), (std::vector<std::string>{"a"}));
  cfg.min_count = 5;
  EXPECT_NE(error_code([&] { train_sgns(c, cfg); }), "");
  cfg = small_config();
  cfg.window = 0;
  cfg.dim = 1;
  try {
    cfg.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::kConfig);
    EXPECT_NE(std::string(e.what()).find("window"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("dim"), std::string::npos);
  }
}

}  // namespace
}  // namespace chronoshift
