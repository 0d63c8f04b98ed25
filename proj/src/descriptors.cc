#include "chronoshift/descriptors.h"

#include <algorithm>
#include <cctype>
#include <set>

#include "chronoshift/common.h"
#include "chronoshift/corpus.h"

namespace chronoshift {
namespace {

void sort_items(std::vector<DescriptorItem>& items) {
  std::sort(items.begin(), items.end(), [](const DescriptorItem& a, const DescriptorItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.label < b.label;
  });
}

}  // namespace

std::string to_string(DescriptorMethod method) {
  switch (method) {
    case DescriptorMethod::kWordDescriptors: return "words";
    case DescriptorMethod::kByWord: return "byword";
    case DescriptorMethod::kByKnn: return "byknn";
    case DescriptorMethod::kByKnnCls: return "byknncls";
    case DescriptorMethod::kByKnnGlobCls: return "byknnglobcls";
    case DescriptorMethod::kBaseEvents: return "baseevents";
  }
  return "unknown";
}

DescriptorMethod parse_descriptor_method(const std::string& name) {
  for (auto m : {DescriptorMethod::kWordDescriptors, DescriptorMethod::kByWord, DescriptorMethod::kByKnn,
                 DescriptorMethod::kByKnnCls, DescriptorMethod::kByKnnGlobCls, DescriptorMethod::kBaseEvents})
    if (to_string(m) == name) return m;
  throw Error(errc::kInvalidArgument, "unknown descriptor method '" + name + "'");
}

DescriptorKind kind_of(DescriptorMethod method) {
  return method == DescriptorMethod::kWordDescriptors ? DescriptorKind::kWords : DescriptorKind::kEvents;
}

DescriptorSet word_descriptors(const YearSpaces& series, const std::string& word, int year, int k) {
  Require(k >= 1, errc::kInvalidArgument, "word descriptors need k >= 1");
  auto now = series.find(year);
  auto before = series.find(year - 1);
  Require(now != series.end() && before != series.end(), errc::kNotFound,
          "word descriptors need years " + std::to_string(year - 1) + " and " + std::to_string(year));
  Require(now->second.contains(word) && before->second.contains(word), errc::kNotFound,
          "word '" + word + "' missing in " + std::to_string(year - 1) + " or " + std::to_string(year));

  const auto previous = knn(before->second, word, k).tokens();
  const std::set<std::string> old(previous.begin(), previous.end());
  DescriptorSet out;
  out.word = word;
  out.year = year;
  out.kind = DescriptorKind::kWords;
  out.method = DescriptorMethod::kWordDescriptors;
  for (const auto& n : knn(now->second, word, k).entries)
    if (!old.count(n.token)) out.items.push_back({n.token, n.similarity, std::nullopt});
  return out;
}

JointSpace::JointSpace(const EmbeddingSpace& temporal, const EmbeddingSpace& projected)
    : temporal_(temporal), projected_(projected) {
  Require(temporal.dim() == projected.dim(), errc::kInvalidArgument,
          "joint space: temporal and projected dimensions differ");
}

std::span<const double> JointSpace::word_vector(const std::string& word) const {
  if (temporal_.contains(word)) return temporal_.vector(word);
  Require(projected_.contains(word), errc::kNotFound, "word '" + word + "' not in the joint space");
  return projected_.vector(word);
}

std::span<const double> JointSpace::event_vector(const std::string& event) const {
  Require(projected_.contains(event), errc::kNotFound,
          "event '" + event + "' not in projected space " + projected_.label());
  return projected_.vector(event);
}

std::vector<std::string> JointSpace::neighbors(const std::string& word, int k) const {
  if (k == 0) return {};
  if (temporal_.contains(word)) return knn(temporal_, word, k).tokens();
  return knn(projected_, word, k).tokens();
}

double score_by_word(const std::string& word, const std::string& event, const JointSpace& joint) {
  return cosine(joint.word_vector(word), joint.event_vector(event));
}

KnnScorer::KnnScorer(const std::string& word, const JointSpace& joint, int k) {
  Require(k >= 0, errc::kInvalidArgument, "ByKNN needs k >= 0");
  members_.push_back(word);
  for (auto& n : joint.neighbors(word, k)) members_.push_back(std::move(n));
  const EmbeddingSpace& home = joint.temporal().contains(word) ? joint.temporal() : joint.projected();
  vectors_.emplace_back(joint.word_vector(word).begin(), joint.word_vector(word).end());
  for (std::size_t i = 1; i < members_.size(); ++i) {
    const auto v = home.vector(members_[i]);
    vectors_.emplace_back(v.begin(), v.end());
  }
}

double KnnScorer::score(std::span<const double> event_vector) const {
  double sum = 0.0;
  for (const auto& v : vectors_) sum += cosine(v, event_vector);
  return sum / static_cast<double>(vectors_.size());
}

double score_by_knn(const std::string& word, const std::string& event, const JointSpace& joint, int k) {
  return KnnScorer(word, joint, k).score(joint.event_vector(event));
}

std::vector<std::string> event_candidates(const EventCatalog& catalog, const JointSpace& joint,
                                          int year, int window) {
  std::vector<std::string> out;
  for (auto& id : events_near_year(catalog, year, window)) {
    if (joint.has_event(id)) {
      out.push_back(std::move(id));
    } else {
      Log().warn("event '{}' has no vector in {}; skipped", id, joint.projected().label());
    }
  }
  return out;
}

DescriptorSet top_events(const std::string& word, int year, const EventQuery& query,
                         const EventCatalog& catalog, const JointSpace& joint) {
  Require(query.method == DescriptorMethod::kByWord || query.method == DescriptorMethod::kByKnn,
          errc::kInvalidArgument, "top_events scores with byword or byknn only");
  Require(query.n >= 1, errc::kInvalidArgument, "descriptor count n must be >= 1");
  DescriptorSet out;
  out.word = word;
  out.year = year;
  out.kind = DescriptorKind::kEvents;
  out.method = query.method;
  const auto candidates = event_candidates(catalog, joint, year, query.window);
  if (candidates.empty()) {
    out.no_candidates = true;
    return out;
  }
  const KnnScorer scorer(word, joint, query.method == DescriptorMethod::kByWord ? 0 : query.k);
  for (const auto& id : candidates)
    out.items.push_back({id, scorer.score(joint.event_vector(id)), catalog.at(id).title});
  sort_items(out.items);
  if (out.items.size() > static_cast<std::size_t>(query.n)) out.items.resize(query.n);
  return out;
}

DescriptorSet base_events(const std::string& word, int year, const EventCatalog& catalog, int n,
                          int window) {
  Require(n >= 1, errc::kInvalidArgument, "descriptor count n must be >= 1");
  DescriptorSet out;
  out.word = word;
  out.year = year;
  out.kind = DescriptorKind::kEvents;
  out.method = DescriptorMethod::kBaseEvents;
  const auto candidates = events_near_year(catalog, year, window);
  if (candidates.empty()) {
    out.no_candidates = true;
    return out;
  }
  CorpusConfig lower;
  const auto query = tokenize(word, lower);
  Require(query.size() == 1, errc::kInvalidArgument, "base events need a single-token word");
  std::string needle = query.front();
  std::transform(needle.begin(), needle.end(), needle.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

  struct Ranked {
    DescriptorItem item;
    std::int64_t pageviews;
  };
  std::vector<Ranked> ranked;
  for (const auto& id : candidates) {
    const EventRecord& r = catalog.at(id);
    if (!r.page_text) continue;
    double count = 0.0;
    for (auto tok : tokenize(*r.page_text, lower)) {
      std::transform(tok.begin(), tok.end(), tok.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      count += tok == needle ? 1.0 : 0.0;
    }
    ranked.push_back({{id, count, r.title}, r.pageviews});
  }
  Require(!ranked.empty(), errc::kInvalidArgument,
          "base events: no candidate in " + std::to_string(year) + " carries page text");
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.item.score != b.item.score) return a.item.score > b.item.score;
    if (a.pageviews != b.pageviews) return a.pageviews > b.pageviews;
    return a.item.label < b.item.label;
  });
  for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(n); ++i)
    out.items.push_back(std::move(ranked[i].item));
  return out;
}

}  // namespace chronoshift
