#include "chronoshift/sgns.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <unordered_map>

#include "chronoshift/common.h"

namespace chronoshift {
namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow.
double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

// The linear congruential generator used by the reference word2vec tool.
struct Lcg {
  std::uint64_t state;
  std::uint64_t next() {
    state = state * 25214903917ULL + 11;
    return state;
  }
  double uniform() { return static_cast<double>(next() & 0xFFFF) / 65536.0; }
};

// Relaxed element access; several workers may touch the same row concurrently.
class SharedWeights {
 public:
  SharedWeights(std::size_t rows, int dim) : dim_(dim), data_(rows * dim, 0.0) {}

  double get(std::size_t row, int j) const {
    return std::atomic_ref<double>(data_[row * dim_ + j]).load(std::memory_order_relaxed);
  }
  void add(std::size_t row, int j, double delta) {
    std::atomic_ref<double> ref(data_[row * dim_ + j]);
    ref.store(ref.load(std::memory_order_relaxed) + delta, std::memory_order_relaxed);
  }
  void set(std::size_t row, int j, double value) { data_[row * dim_ + j] = value; }
  const std::vector<double>& data() const { return data_; }

 private:
  int dim_;
  mutable std::vector<double> data_;
};

struct TrainState {
  const SgnsConfig& config;
  const std::vector<std::vector<std::uint32_t>>& docs;
  const std::vector<double>& keep_prob;
  const NegativeSampler& sampler;
  SharedWeights& input;
  SharedWeights& output;
  std::atomic<std::uint64_t>& processed;
  std::uint64_t total_work;
};

void train_worker(TrainState& s, int worker) {
  const SgnsConfig& cfg = s.config;
  const int dim = cfg.dim;
  Lcg rng{cfg.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(worker) + 1};
  std::vector<double> v(dim), grad(dim);
  std::vector<std::uint32_t> sentence;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t d = worker; d < s.docs.size(); d += cfg.workers) {
      const auto& doc = s.docs[d];
      sentence.clear();
      for (auto id : doc)
        if (s.keep_prob[id] >= 1.0 || s.keep_prob[id] >= rng.uniform()) sentence.push_back(id);
      const std::uint64_t done = s.processed.fetch_add(doc.size(), std::memory_order_relaxed);
      const double progress = std::min(1.0, static_cast<double>(done) / s.total_work);
      const double lr = cfg.initial_lr - (cfg.initial_lr - cfg.final_lr) * progress;

      const auto n = static_cast<std::ptrdiff_t>(sentence.size());
      for (std::ptrdiff_t pos = 0; pos < n; ++pos) {
        const std::uint32_t center = sentence[pos];
        const auto reach = static_cast<std::ptrdiff_t>(cfg.window - rng.next() % cfg.window);
        for (std::ptrdiff_t c = std::max<std::ptrdiff_t>(0, pos - reach);
             c <= std::min(n - 1, pos + reach); ++c) {
          if (c == pos) continue;
          const std::uint32_t context = sentence[c];
          for (int j = 0; j < dim; ++j) v[j] = s.input.get(center, j);
          std::fill(grad.begin(), grad.end(), 0.0);
          for (int k = 0; k <= cfg.negatives; ++k) {
            std::uint32_t target;
            double label;
            if (k == 0) {
              target = context;
              label = 1.0;
            } else {
              target = s.sampler.sample(rng.next() >> 16);
              if (target == context) continue;
              label = 0.0;
            }
            double f = 0.0;
            for (int j = 0; j < dim; ++j) f += v[j] * s.output.get(target, j);
            const double g = (label - sigmoid(f)) * lr;
            for (int j = 0; j < dim; ++j) grad[j] += g * s.output.get(target, j);
            for (int j = 0; j < dim; ++j) s.output.add(target, j, g * v[j]);
          }
          for (int j = 0; j < dim; ++j) s.input.add(center, j, grad[j]);
        }
      }
    }
  }
}

}  // namespace

void SgnsConfig::validate() const {
  std::vector<std::string> problems;
  if (dim < 2) problems.push_back("dim must be >= 2");
  if (window < 1) problems.push_back("window must be >= 1");
  if (negatives < 1) problems.push_back("negatives must be >= 1");
  if (epochs < 0) problems.push_back("epochs must be >= 0");
  if (!(initial_lr > 0)) problems.push_back("initial_lr must be > 0");
  if (final_lr < 0 || final_lr > initial_lr) problems.push_back("final_lr must lie in [0, initial_lr]");
  if (subsample_t < 0) problems.push_back("subsample_t must be >= 0");
  if (min_count < 1) problems.push_back("min_count must be >= 1");
  if (workers < 1) problems.push_back("workers must be >= 1");
  if (!problems.empty()) {
    std::string msg = "invalid sgns config:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw Error(errc::kConfig, msg);
  }
}

NegativeSampler::NegativeSampler(const std::vector<std::uint64_t>& counts, double power,
                                 std::size_t table_size) {
  Require(!counts.empty(), errc::kInvalidArgument, "negative sampler needs a nonempty vocabulary");
  Require(table_size >= counts.size(), errc::kInvalidArgument, "sampling table too small");
  std::vector<double> weights(counts.size());
  double total = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    weights[i] = std::pow(static_cast<double>(std::max<std::uint64_t>(counts[i], 1)), power);
    total += weights[i];
  }
  // Largest-remainder apportionment so every slot count is within one of exact.
  std::vector<std::size_t> slots(counts.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double exact = weights[i] / total * static_cast<double>(table_size);
    slots[i] = static_cast<std::size_t>(exact);
    assigned += slots[i];
    remainders.emplace_back(exact - static_cast<double>(slots[i]), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < table_size; ++r, ++assigned) ++slots[remainders[r].second];
  table_.reserve(table_size);
  for (std::size_t i = 0; i < counts.size(); ++i)
    table_.insert(table_.end(), slots[i], static_cast<std::uint32_t>(i));
}

SgnsDeltas sgd_step(std::span<const double> center, std::span<const double> context,
                    const std::vector<std::span<const double>>& negatives, double lr) {
  const auto dim = static_cast<Eigen::Index>(center.size());
  Require(context.size() == center.size(), errc::kInvalidArgument, "sgd_step: dimension mismatch");
  Eigen::Map<const Eigen::VectorXd> v(center.data(), dim);
  Eigen::Map<const Eigen::VectorXd> u(context.data(), dim);

  SgnsDeltas out;
  const double x = u.dot(v);
  out.positive_coefficient = sigmoid(x) - 1.0;
  out.loss = -log_sigmoid(x);
  out.context = -lr * out.positive_coefficient * v;
  Eigen::VectorXd grad_v = -out.positive_coefficient * u;
  for (const auto& neg : negatives) {
    Require(neg.size() == center.size(), errc::kInvalidArgument, "sgd_step: dimension mismatch");
    Eigen::Map<const Eigen::VectorXd> un(neg.data(), dim);
    const double xn = un.dot(v);
    const double s = sigmoid(xn);
    out.loss -= log_sigmoid(-xn);
    grad_v -= s * un;
    out.negative.push_back(-lr * s * v);
  }
  out.center = lr * grad_v;
  return out;
}

EmbeddingSpace train_sgns(const YearCorpus& corpus, const SgnsConfig& config) {
  config.validate();
  Vocabulary vocab = build_vocab(corpus, config.min_count);
  Require(!vocab.empty(), errc::kInvalidArgument,
          "empty vocabulary after min_count=" + std::to_string(config.min_count) + " for year " +
              std::to_string(corpus.year));
  if (static_cast<std::size_t>(config.dim) >= vocab.size()) {
    Log().warn("sgns: dim {} >= vocabulary size {} for year {}; embedding is degenerate",
               config.dim, vocab.size(), corpus.year);
  }

  std::vector<std::vector<std::uint32_t>> docs;
  docs.reserve(corpus.documents.size());
  std::uint64_t total_tokens = 0;
  for (const auto& doc : corpus.documents) {
    std::vector<std::uint32_t> ids;
    ids.reserve(doc.size());
    for (const auto& tok : doc)
      if (auto id = vocab.find(tok)) ids.push_back(static_cast<std::uint32_t>(*id));
    total_tokens += ids.size();
    if (!ids.empty()) docs.push_back(std::move(ids));
  }

  std::vector<double> keep_prob(vocab.size(), 1.0);
  if (config.subsample_t > 0) {
    const double threshold = config.subsample_t * static_cast<double>(total_tokens);
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      const double f = static_cast<double>(vocab.count(i));
      keep_prob[i] = (std::sqrt(f / threshold) + 1.0) * threshold / f;
    }
  }

  const int dim = config.dim;
  SharedWeights input(vocab.size(), dim), output(vocab.size(), dim);
  Lcg init{config.seed};
  for (std::size_t i = 0; i < vocab.size(); ++i)
    for (int j = 0; j < dim; ++j) input.set(i, j, (init.uniform() - 0.5) / dim);

  if (config.epochs > 0 && total_tokens > 0) {
    NegativeSampler sampler(vocab.counts(), 0.75,
                            std::max<std::size_t>(1'000'000, vocab.size() * 10));
    std::atomic<std::uint64_t> processed{0};
    TrainState state{config, docs, keep_prob, sampler, input, output, processed,
                     std::max<std::uint64_t>(1, total_tokens * config.epochs)};
    if (config.workers == 1) {
      train_worker(state, 0);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < config.workers; ++w) pool.emplace_back([&state, w] { train_worker(state, w); });
      for (auto& t : pool) t.join();
    }
  }

  RowMatrix m(vocab.size(), dim);
  std::copy(input.data().begin(), input.data().end(), m.data());
  Require(m.allFinite(), errc::kNumerical, "sgns produced non-finite vectors");
  return EmbeddingSpace(std::move(vocab), std::move(m), "sgns-" + std::to_string(corpus.year),
                        corpus.year);
}

}  // namespace chronoshift
