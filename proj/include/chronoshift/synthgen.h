#pragma once

// Synthetic embedding series, corpora and event catalogs with planted
// ground truth.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "chronoshift/align.h"
#include "chronoshift/events.h"
#include "chronoshift/vecspace.h"

namespace chronoshift {

// Word names are "w0000", "w0001", ...
std::string synth_word(std::size_t index);

struct ShiftSpec {
  std::string word;
  int year = 0;
  double theta = 0.0;          // radians, in (0, pi]
  std::vector<double> target;  // base-frame direction; empty picks a random one
};

struct SeriesSpec {
  std::size_t vocab_size = 50;
  std::size_t dim = 16;
  int first_year = 1990;
  int n_years = 20;
  double noise = 0.02;  // per-coordinate Gaussian sigma, fresh every year
  bool rotate = true;   // random orthogonal frame per year
  std::uint64_t seed = 1;
  std::vector<ShiftSpec> shifts;
  std::vector<std::pair<std::string, int>> dropouts;  // (word, year) removed
  void validate() const;
};

struct PlantedShift {
  std::string word;
  int year = 0;
  double theta = 0.0;
  bool operator==(const PlantedShift&) const = default;
};

struct SynthSeries {
  YearSpaces spaces;
  EmbeddingSpace base;  // clean pre-shift vectors (base frame)
  std::vector<PlantedShift> truth;
};

// Words rotate by theta toward their target from the shift year onward.
SynthSeries gen_series(const SeriesSpec& spec);

struct TopicSwitch {
  std::string word;
  int year = 0;
  std::size_t to_topic = 0;
};

struct CorpusSpec {
  int first_year = 2000;
  int n_years = 1;
  std::size_t topics = 2;
  std::size_t words_per_topic = 20;  // named "t<topic>w<i>"
  std::size_t docs_per_year = 1000;
  std::size_t doc_length = 50;
  std::uint64_t seed = 1;
  // Extra words "s<i>" start in topic i % topics and move at the switch year.
  std::vector<TopicSwitch> switches;
};

// year -> documents; every document draws uniformly from one topic's words.
std::map<int, std::vector<std::vector<std::string>>> gen_corpus(const CorpusSpec& spec);
void write_corpus(const std::map<int, std::vector<std::vector<std::string>>>& corpus,
                  const std::filesystem::path& dir);

enum class EventRole { kInfluential, kDistractor, kCoTimedDistractor, kBackground };
std::string to_string(EventRole role);

struct WorldSpec {
  std::size_t vocab_size = 3000;
  std::size_t dim = 100;
  int first_year = 1990;
  int n_years = 20;
  double noise = 0.01;
  double global_noise = 0.01;
  bool rotate = true;
  std::uint64_t seed = 7;
  int n_influential = 60;
  int n_distractors = 60;
  int n_background = 60;
  int n_cotimed = 6;  // distractors matched in similarity to an affected term
  int affected_per_event = 4;
  int related_per_event = 4;
  double psi = 0.349066;          // affected term to event after the shift (20 deg)
  double shift_theta = 1.047198;  // 60 deg
  double related_min = 0.872665;  // 50 deg
  double related_max = 1.047198;  // 60 deg
  double distractor_related = 0.349066;
  double cotimed_margin = 0.03;
  void validate() const;
};

struct InfluenceTruth {
  std::string event_id;
  std::string term;
  int year = 0;
  int label = 0;
};

struct CoTimed {
  std::string distractor;
  std::string event;  // influential event sharing year and term
  std::string term;
  int year = 0;
};

struct SynthWorld {
  YearSpaces series;     // per-year spaces in independent random frames
  EmbeddingSpace global; // words (pre-shift) and events in one static frame
  EventCatalog catalog;
  std::vector<PlantedShift> shifts;
  std::map<std::string, EventRole> roles;
  std::vector<InfluenceTruth> influence;  // every planted (event, term) relation
  std::vector<CoTimed> cotimed;
  std::map<std::string, std::vector<double>> base_events;  // event directions, base frame
  std::map<std::string, std::vector<double>> post_shift;   // affected-term targets, base frame
  // Truth label of (event, term); pairs without a planted relation are 0.
  int truth_label(const std::string& event, const std::string& term) const;
};

// Influential events sit at psi from the post-shift direction of their
// affected terms, which shift by shift_theta in the event year; their
// related terms sit 50-60 deg away and shift 1-3 years later. Distractors
// have their own related terms at 20 deg that shift later, and categories
// from a separate pool. Background events fill the years.
SynthWorld gen_world(const WorldSpec& spec);

// Workspace layout shared with the CLI: temporal/<year>.temb, global.temb,
// events.jsonl, truth.json.
void write_world(const SynthWorld& world, const std::filesystem::path& dir);

}  // namespace chronoshift
