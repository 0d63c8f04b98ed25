#pragma once

// Skip-gram with negative sampling.
//
// For a (center w, context c) pair with sampled negatives n_1..n_K the
// objective maximised is
//   log s(u_c . v_w) + sum_i log s(-u_{n_i} . v_w)
// where v are input (center) vectors and u output (context) vectors.
// Only the input matrix is returned.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "chronoshift/corpus.h"
#include "chronoshift/vecspace.h"

namespace chronoshift {

struct SgnsConfig {
  int dim = 140;
  int window = 5;
  int negatives = 5;
  int epochs = 5;
  double initial_lr = 0.025;
  double final_lr = 1e-4;
  double subsample_t = 1e-4;  // 0 disables subsampling
  std::uint64_t min_count = 50;
  std::uint64_t seed = 1;
  int workers = 1;

  void validate() const;
};

// Unigram^power sampling table.
class NegativeSampler {
 public:
  NegativeSampler(const std::vector<std::uint64_t>& counts, double power = 0.75,
                  std::size_t table_size = 1'000'000);

  std::uint32_t sample(std::uint64_t random) const { return table_[random % table_.size()]; }
  const std::vector<std::uint32_t>& table() const { return table_; }

 private:
  std::vector<std::uint32_t> table_;
};

struct SgnsDeltas {
  Eigen::VectorXd center;                 // added to v_w
  Eigen::VectorXd context;                // added to u_c
  std::vector<Eigen::VectorXd> negative;  // added to each u_{n_i}
  double positive_coefficient = 0.0;      // d(-objective)/d(u_c . v_w) = s(x) - 1
  double loss = 0.0;                      // -objective before the step
};

// One gradient step on a single pair; deltas are lr times the objective gradient.
SgnsDeltas sgd_step(std::span<const double> center, std::span<const double> context,
                    const std::vector<std::span<const double>>& negatives, double lr);

// Trains on one corpus and returns the input-vector matrix. Deterministic for
// a fixed seed when workers == 1; more workers update shared weights without
// locking.
EmbeddingSpace train_sgns(const YearCorpus& corpus, const SgnsConfig& config);

}  // namespace chronoshift
