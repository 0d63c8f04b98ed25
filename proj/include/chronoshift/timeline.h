#pragma once

// Timelines: turning points paired with descriptors, rendering, and
// evaluation metrics over annotation files.

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chronoshift/align.h"
#include "chronoshift/change.h"
#include "chronoshift/descriptors.h"
#include "chronoshift/events.h"
#include "chronoshift/influence.h"

namespace chronoshift {

struct TimelineConfig {
  DescriptorMethod method = DescriptorMethod::kByKnn;
  ChangeParams change;
  DetectParams detect;
  int n = 5;              // descriptors per entry
  int k = 20;             // word-descriptor / ByKNN neighbourhood
  int window = 0;         // event years t-window..t+window
  int n_candidates = 30;  // ByKNN shortlist for the classifier methods
  bool keep_empty = false;
  nlohmann::ordered_json to_json() const;
};

// Artifacts a method may need; missing ones raise missing-artifact.
struct TimelineInputs {
  const AlignedSeries* aligned = nullptr;
  const EventCatalog* catalog = nullptr;
  const YearSpaces* projected = nullptr;
  const EmbeddingSpace* global = nullptr;
  const InfluenceModel* model = nullptr;
};

struct TimelineEntry {
  int year = 0;
  double turning_score = 0.0;
  DescriptorSet descriptors;
};

struct Timeline {
  std::string word;
  DescriptorMethod method = DescriptorMethod::kByKnn;
  std::vector<TimelineEntry> entries;  // years strictly increasing
  nlohmann::ordered_json config;
};

Timeline generate(const std::string& word, const TimelineConfig& config, const TimelineInputs& inputs);

enum class RenderFormat { kJson, kMarkdown };
RenderFormat parse_render_format(const std::string& name);

// {word, method, config, entries: [{year, turning_score, descriptors: [{label, title?, score}]}]}
std::string render_json(const Timeline& timeline);
std::string render_markdown(const Timeline& timeline);
std::string render(const Timeline& timeline, RenderFormat format);
Timeline parse_timeline_json(const std::string& text);

// Annotation CSV with header timeline_id,evaluator_id,descriptor_label,judged_true.
// Descriptor rows carry 1/0 (or true/false). Rows whose label is one of
// #missing, #redundant, #relevance_rank, #subjective_rank, #familiarity_pre,
// #familiarity_post carry that number in the last column.
struct EvaluatorAnnotation {
  std::map<std::string, bool> judgments;
  std::optional<double> missing;
  std::optional<double> redundant;
  std::optional<double> relevance_rank;
  std::optional<double> subjective_rank;
  std::optional<double> familiarity_pre;
  std::optional<double> familiarity_post;
};

// timeline id -> evaluator id -> annotation
using AnnotationSet = std::map<std::string, std::map<std::string, EvaluatorAnnotation>>;

AnnotationSet parse_annotations(std::istream& in);
AnnotationSet load_annotations(const std::filesystem::path& path);

struct MetricRecord {
  std::optional<double> accuracy;       // true / judged
  std::optional<double> relevance;      // relevance rank / #timelines
  std::optional<double> missing;        // #missing / #descriptors
  std::optional<double> redundancy;     // #redundant / #descriptors
  std::optional<double> ranking;        // subjective rank / #timelines
  std::optional<double> effectiveness;  // familiarity post - pre
  int evaluators = 0;
};

// Each metric is computed per evaluator and averaged over the evaluators
// that supplied it. Throws when the timeline has no descriptors.
MetricRecord eval_metrics(const Timeline& timeline,
                          const std::map<std::string, EvaluatorAnnotation>& annotations, int n_timelines);

// (concordant - discordant) / C(n, 2) for tie-free rankings.
double kendall_tau(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace chronoshift
