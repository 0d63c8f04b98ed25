#pragma once

// Event-influence dataset construction, feature assembly, model files and
// classifier-reranked event descriptors.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chronoshift/align.h"
#include "chronoshift/change.h"
#include "chronoshift/classifier.h"
#include "chronoshift/descriptors.h"
#include "chronoshift/events.h"

namespace chronoshift {

// Where event and term vectors come from. kProjected: event from the
// projected global space at t, term from the aligned temporal space at t.
// kGlobal: both from the global space.
enum class EmbeddingSource { kGlobal, kProjected };

std::string to_string(EmbeddingSource source);
EmbeddingSource parse_embedding_source(const std::string& name);

struct TrainingPair {
  std::string event_id;
  std::string term;
  int year = 0;
  int label = 0;  // 1 affected, 0 unaffected
  EmbeddingSource source = EmbeddingSource::kProjected;
};

// Spaces backing one embedding source. `projected` is needed for
// kProjected; `global` for kGlobal.
struct InfluenceSpaces {
  const AlignedSeries* aligned = nullptr;
  const EmbeddingSpace* global = nullptr;
  const YearSpaces* projected = nullptr;
};

struct PairParams {
  EmbeddingSource source = EmbeddingSource::kProjected;
  int per_event = 20;
  double sim_threshold = 0.3;
  int horizon = 3;  // unaffected terms change within (t, t + horizon]
  void validate() const;
};

// Per event e at year t: candidate terms have cos(term, e) > sim_threshold
// in the source space, ranked by cosine then token. Affected terms change at
// t but not at t-1; unaffected ones change within (t, t+horizon] but not at
// t. Each list is capped at per_event. Events without coverage are skipped.
std::vector<TrainingPair> build_training_pairs(const EventCatalog& catalog, const InfluenceSpaces& spaces,
                                               const ChangeDetector& detector, const PairParams& params);

void save_pairs(const std::vector<TrainingPair>& pairs, const std::filesystem::path& path);
std::vector<TrainingPair> load_pairs(const std::filesystem::path& path);

// Layout: v_e (d) | v_w (d) | cos (1) | category BoW (N) | log1p of internal
// links, external links, pageviews (3). Popularity columns are z-scored by
// the classifier's scaler, fitted on training rows only.
class FeatureBuilder {
 public:
  FeatureBuilder(const EventCatalog& catalog, const InfluenceSpaces& spaces, EmbeddingSource source,
                 CategoryIndex categories);

  Eigen::VectorXd features(const std::string& event, const std::string& term, int year) const;
  Eigen::MatrixXd matrix(const std::vector<TrainingPair>& pairs) const;
  std::size_t dim() const { return dim_; }
  std::size_t length() const { return 2 * dim_ + 1 + categories_.width() + 3; }
  std::vector<Eigen::Index> popularity_columns() const;
  const CategoryIndex& categories() const { return categories_; }
  EmbeddingSource source() const { return source_; }

 private:
  std::span<const double> event_vector(const std::string& event, int year) const;
  std::span<const double> term_vector(const std::string& term, int year) const;

  const EventCatalog& catalog_;
  InfluenceSpaces spaces_;
  EmbeddingSource source_;
  CategoryIndex categories_;
  std::size_t dim_ = 0;
};

Eigen::VectorXd labels_of(const std::vector<TrainingPair>& pairs);

struct InfluenceModel {
  ClassifierModel classifier;
  EmbeddingSource source = EmbeddingSource::kProjected;
  CategoryIndex categories;
  std::uint32_t dim = 0;
};

InfluenceModel train_influence(const std::vector<TrainingPair>& pairs, const FeatureBuilder& builder,
                               ModelKind kind, const TrainConfig& config);

// "TCLF1", u8 source, u32 dim, u32 BoW width, u32 category count with
// u16-length names, then the classifier payload.
void save_model(const InfluenceModel& model, const std::filesystem::path& path);
InfluenceModel load_model(const std::filesystem::path& path);

struct RerankParams {
  int n_candidates = 30;
  int n_out = 5;
  int k = 20;
  int window = 0;
};

// Top n_candidates by ByKNN, then final = sqrt(max(p, 1e-6) * max(s, 1e-6))
// with s the ByKNN score min-max normalized over the candidates (all 1 when
// they tie). Ties by id.
DescriptorSet rank_by_knn_cls(const std::string& word, int year, const EventCatalog& catalog,
                              const JointSpace& joint, const InfluenceModel& model,
                              const FeatureBuilder& builder, const RerankParams& params = {});

}  // namespace chronoshift
