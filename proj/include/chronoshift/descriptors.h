#pragma once

// Word and event descriptors for a turning point.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chronoshift/align.h"
#include "chronoshift/events.h"
#include "chronoshift/vecspace.h"

namespace chronoshift {

enum class DescriptorKind { kWords, kEvents };
enum class DescriptorMethod { kWordDescriptors, kByWord, kByKnn, kByKnnCls, kByKnnGlobCls, kBaseEvents };

std::string to_string(DescriptorMethod method);
// "words", "byword", "byknn", "byknncls", "byknnglobcls", "baseevents".
DescriptorMethod parse_descriptor_method(const std::string& name);
DescriptorKind kind_of(DescriptorMethod method);

struct DescriptorItem {
  std::string label;
  double score = 0.0;
  std::optional<std::string> title;  // event title for event descriptors
};

struct DescriptorSet {
  std::string word;
  int year = 0;
  DescriptorKind kind = DescriptorKind::kWords;
  DescriptorMethod method = DescriptorMethod::kWordDescriptors;
  std::vector<DescriptorItem> items;  // score descending
  bool no_candidates = false;         // no events dated in the window
};

// NN_k^t(w) minus NN_k^{t-1}(w), ranked by similarity to w at t.
DescriptorSet word_descriptors(const YearSpaces& series, const std::string& word, int year, int k = 20);

// Words and events in one frame: the temporal space at t supplies word
// vectors and neighbourhoods, the projected global space at t supplies event
// vectors. A word missing from the temporal space falls back to its
// projected vector.
class JointSpace {
 public:
  JointSpace(const EmbeddingSpace& temporal, const EmbeddingSpace& projected);

  const EmbeddingSpace& temporal() const { return temporal_; }
  const EmbeddingSpace& projected() const { return projected_; }
  std::span<const double> word_vector(const std::string& word) const;
  std::span<const double> event_vector(const std::string& event) const;
  bool has_event(const std::string& event) const { return projected_.contains(event); }
  std::vector<std::string> neighbors(const std::string& word, int k) const;

 private:
  const EmbeddingSpace& temporal_;
  const EmbeddingSpace& projected_;
};

// cos(v_w, v_e).
double score_by_word(const std::string& word, const std::string& event, const JointSpace& joint);

// Mean of cos(v_n, v_e) over n in {w} + NN_k(w); k = 0 reduces to score_by_word.
double score_by_knn(const std::string& word, const std::string& event, const JointSpace& joint, int k);

// Holds {w} + NN_k(w) so many events can be scored against one word.
class KnnScorer {
 public:
  KnnScorer(const std::string& word, const JointSpace& joint, int k);
  double score(std::span<const double> event_vector) const;
  const std::vector<std::string>& members() const { return members_; }

 private:
  std::vector<std::string> members_;
  std::vector<std::vector<double>> vectors_;
};

struct EventQuery {
  DescriptorMethod method = DescriptorMethod::kByKnn;  // kByWord or kByKnn
  int n = 5;
  int k = 20;
  int window = 0;  // candidate years t-window..t+window
};

// Candidate ids for (t, window) that have a projected vector, ascending.
std::vector<std::string> event_candidates(const EventCatalog& catalog, const JointSpace& joint,
                                          int year, int window);

// Top-n candidates, score descending then id ascending.
DescriptorSet top_events(const std::string& word, int year, const EventQuery& query,
                         const EventCatalog& catalog, const JointSpace& joint);

// Ranks candidates by occurrences of w in their page text (case-insensitive,
// tokenized); ties by pageviews descending then id. Candidates without text
// are skipped; throws when every candidate lacks text.
DescriptorSet base_events(const std::string& word, int year, const EventCatalog& catalog, int n,
                          int window = 0);

}  // namespace chronoshift
