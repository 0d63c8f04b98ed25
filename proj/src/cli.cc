#include "chronoshift/cli.h"

#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "chronoshift/align.h"
#include "chronoshift/change.h"
#include "chronoshift/classifier.h"
#include "chronoshift/common.h"
#include "chronoshift/corpus.h"
#include "chronoshift/descriptors.h"
#include "chronoshift/events.h"
#include "chronoshift/influence.h"
#include "chronoshift/sgns.h"
#include "chronoshift/synthgen.h"
#include "chronoshift/timeline.h"

namespace chronoshift {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

struct Globals {
  std::string workspace = ".";
  int workers = 1;
  std::uint64_t seed = 1;
  std::string log_level = "warn";
};

fs::path resolve(const Globals& g, const std::string& given, const std::string& fallback) {
  return given.empty() ? fs::path(g.workspace) / fallback : fs::path(given);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  Require(out.is_open(), errc::kIo, "cannot open for writing: " + path.string());
  out << text;
  Require(static_cast<bool>(out), errc::kIo, "write failed: " + path.string());
}

// Writes to `path`, or standard output when it is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_text(path, text);
  }
}

void require_artifact(const fs::path& path, const std::string& what, const std::string& hint) {
  Require(fs::exists(path), errc::kMissingArtifact, what + " not found at " + path.string() + " (" + hint + ")");
}

AlignedSeries load_aligned(const fs::path& dir) {
  require_artifact(dir, "aligned spaces", "run `chronoshift align`");
  YearSpaces spaces = load_year_spaces(dir);
  Require(!spaces.empty(), errc::kMissingArtifact, "no aligned spaces in " + dir.string());
  return assume_aligned(spaces);
}

YearSpaces load_projected(const fs::path& dir) {
  require_artifact(dir, "projected spaces", "run `chronoshift project`");
  return load_year_spaces(dir);
}

EventCatalog load_catalog(const fs::path& path) {
  require_artifact(path, "event catalog", "pass --events or place events.jsonl in the workspace");
  return load_events(path);
}

EmbeddingSpace load_global(const fs::path& path) {
  require_artifact(path, "global space", "pass --global or place global.temb in the workspace");
  return load_space(path);
}

// Runs fn(i) for i in [0, n) over `workers` threads; callers write results by index.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex mutex;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mutex);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

ojson descriptor_set_json(const DescriptorSet& set) {
  ojson j;
  j["word"] = set.word;
  j["year"] = set.year;
  j["method"] = to_string(set.method);
  j["no_candidates"] = set.no_candidates;
  j["descriptors"] = ojson::array();
  for (const auto& item : set.items) {
    ojson d;
    d["label"] = item.label;
    if (item.title) d["title"] = *item.title;
    d["score"] = item.score;
    j["descriptors"].push_back(std::move(d));
  }
  return j;
}

ojson metrics_json(const FoldMetrics& m) {
  return ojson{{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
               {"auc", m.auc}};
}

ojson optional_json(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

// ---------------------------------------------------------------- train

struct TrainOpts {
  std::string corpus;
  std::string global_corpus;
  std::string out;
  std::vector<int> years;
  int year_start = 1981;
  int year_end = 2016;
  bool keep_case = false;
  SgnsConfig sgns;
};

void cmd_train(const Globals& g, TrainOpts o) {
  o.sgns.workers = g.workers;
  o.sgns.seed = g.seed;
  o.sgns.validate();
  CorpusConfig cc;
  cc.min_count = o.sgns.min_count;
  cc.lowercase = !o.keep_case;
  cc.year_start = o.year_start;
  cc.year_end = o.year_end;
  cc.validate();

  if (!o.global_corpus.empty()) {
    std::ifstream in(o.global_corpus);
    Require(in.is_open(), errc::kIo, "cannot open corpus file: " + o.global_corpus);
    std::vector<std::vector<std::string>> docs;
    for (std::string line; std::getline(in, line);) {
      auto toks = tokenize(line, cc);
      if (!toks.empty()) docs.push_back(std::move(toks));
    }
    const EmbeddingSpace space = train_sgns(make_year_corpus(0, std::move(docs)), o.sgns);
    const fs::path out = resolve(g, o.out, "global.temb");
    save_space(space.relabeled("global", std::nullopt), out);
    Log().info("wrote global space ({} x {}) to {}", space.size(), space.dim(), out.string());
    return;
  }

  Require(!o.corpus.empty(), errc::kConfig, "train needs --corpus DIR or --global-corpus FILE");
  std::map<int, YearCorpus> corpora;
  if (o.years.empty()) {
    corpora = load_corpus_dir(o.corpus, cc);
  } else {
    for (int y : o.years)
      corpora.emplace(y, load_year_corpus(fs::path(o.corpus) / (std::to_string(y) + ".txt"), y, cc));
  }
  Require(!corpora.empty(), errc::kMissingArtifact, "no <year>.txt files in range under " + o.corpus);
  const fs::path out = resolve(g, o.out, "temporal");
  fs::create_directories(out);
  for (const auto& [year, corpus] : corpora) {
    const EmbeddingSpace space = train_sgns(corpus, o.sgns);
    save_space(space, out / (std::to_string(year) + ".temb"), VectorFormat::kBinary);
    Log().info("year {}: {} tokens, {} words", year, corpus.total_tokens(), space.size());
  }
}

// ---------------------------------------------------------------- align / project

struct AlignOpts {
  std::string in;
  std::string out;
  std::size_t anchors = 10000;
};

void cmd_align(const Globals& g, const AlignOpts& o) {
  const fs::path in = resolve(g, o.in, "temporal");
  require_artifact(in, "temporal spaces", "run `chronoshift train` or `chronoshift synth`");
  const AlignedSeries aligned = align_series(load_year_spaces(in), AnchorPolicy{o.anchors});
  const fs::path out = resolve(g, o.out, "aligned");
  save_year_spaces(aligned.spaces(), out);
  Log().info("aligned {} years into {}", aligned.years().size(), out.string());
}

struct ProjectOpts {
  std::string global;
  std::string aligned;
  std::string out;
  double ridge = -1.0;  // < 0 selects the default ridge
};

void cmd_project(const Globals& g, const ProjectOpts& o) {
  const EmbeddingSpace global = load_global(resolve(g, o.global, "global.temb"));
  const AlignedSeries aligned = load_aligned(resolve(g, o.aligned, "aligned"));
  const fs::path out = resolve(g, o.out, "projected");
  fs::create_directories(out);
  const auto years = aligned.years();
  std::optional<double> ridge;
  if (o.ridge >= 0) ridge = o.ridge;
  parallel_for(years.size(), g.workers, [&](std::size_t i) {
    const int y = years[i];
    ProjectionMap map = fit_projection(global, aligned.at(y), ridge);
    save_projection(map, out / (std::to_string(y) + ".tprj"));
    save_space(apply_projection(global, map, y), out / (std::to_string(y) + ".temb"), VectorFormat::kBinary);
  });
}

// ---------------------------------------------------------------- detect

struct DetectOpts {
  std::vector<std::string> words;
  bool all = false;
  std::string method = "embedding";
  int k = 20;
  DetectParams detect;
  std::string aligned;
  std::string out;
};

void cmd_detect(const Globals& g, const DetectOpts& o) {
  const AlignedSeries aligned = load_aligned(resolve(g, o.aligned, "aligned"));
  ChangeParams cp{parse_change_method(o.method), o.k};
  o.detect.validate();
  std::vector<std::string> words = o.words;
  if (o.all) {
    std::set<std::string> every;
    for (const auto& [y, s] : aligned.spaces()) every.insert(s.vocab().tokens().begin(), s.vocab().tokens().end());
    words.assign(every.begin(), every.end());
  }
  Require(!words.empty(), errc::kConfig, "detect needs --word or --all");
  std::vector<std::vector<TurningPoint>> found(words.size());
  parallel_for(words.size(), g.workers, [&](std::size_t i) {
    const ChangeSeries s = change_series(aligned, words[i], cp);
    if (s.values.size() >= 3) found[i] = detect_turning_points(s, o.detect);
  });
  ojson j = ojson::array();
  for (const auto& points : found)
    for (const auto& p : points)
      j.push_back({{"word", p.word}, {"year", p.year}, {"score", p.score}, {"zscore", p.zscore}});
  emit(o.out, j.dump(2) + "\n");
}

// ---------------------------------------------------------------- shared timeline inputs

struct Artifacts {
  std::optional<AlignedSeries> aligned;
  std::optional<EventCatalog> catalog;
  std::optional<YearSpaces> projected;
  std::optional<EmbeddingSpace> global;
  std::optional<InfluenceModel> model;

  TimelineInputs inputs() const {
    TimelineInputs in;
    in.aligned = aligned ? &*aligned : nullptr;
    in.catalog = catalog ? &*catalog : nullptr;
    in.projected = projected ? &*projected : nullptr;
    in.global = global ? &*global : nullptr;
    in.model = model ? &*model : nullptr;
    return in;
  }
};

struct ArtifactPaths {
  std::string aligned;
  std::string projected;
  std::string events;
  std::string global;
  std::string model;
};

// Loads only what `method` needs so a missing optional artifact never blocks.
Artifacts load_for(const Globals& g, const ArtifactPaths& p, DescriptorMethod method) {
  Artifacts a;
  a.aligned = load_aligned(resolve(g, p.aligned, "aligned"));
  if (method == DescriptorMethod::kWordDescriptors) return a;
  a.catalog = load_catalog(resolve(g, p.events, "events.jsonl"));
  if (method == DescriptorMethod::kBaseEvents) return a;
  a.projected = load_projected(resolve(g, p.projected, "projected"));
  if (method == DescriptorMethod::kByKnnCls || method == DescriptorMethod::kByKnnGlobCls) {
    const fs::path model = resolve(g, p.model, "model.tclf");
    require_artifact(model, "influence model", "run `chronoshift classify train`");
    a.model = load_model(model);
    if (method == DescriptorMethod::kByKnnGlobCls) a.global = load_global(resolve(g, p.global, "global.temb"));
  }
  return a;
}

void add_artifact_paths(CLI::App* cmd, ArtifactPaths& p) {
  cmd->add_option("--aligned", p.aligned, "Aligned spaces directory [workspace/aligned]");
  cmd->add_option("--projected", p.projected, "Projected spaces directory [workspace/projected]");
  cmd->add_option("--events", p.events, "Events JSONL [workspace/events.jsonl]");
  cmd->add_option("--global", p.global, "Global space file [workspace/global.temb]");
  cmd->add_option("--model", p.model, "Influence model [workspace/model.tclf]");
}

struct TimelineOpts {
  std::vector<std::string> words;
  std::string words_file;
  std::string method = "byknn";
  std::string change_method = "embedding";
  TimelineConfig cfg;
  std::string format = "json";
  std::string out;
  ArtifactPaths paths;
};

void add_timeline_options(CLI::App* cmd, TimelineOpts& o) {
  cmd->add_option("--method", o.method, "words|byword|byknn|byknncls|byknnglobcls|baseevents")->capture_default_str();
  cmd->add_option("--change-method", o.change_method, "embedding|neighborhood")->capture_default_str();
  cmd->add_option("--lambda", o.cfg.detect.lambda, "Peak threshold in standard deviations")->capture_default_str();
  cmd->add_option("--floor", o.cfg.detect.floor, "Minimum change score of a turning point")->capture_default_str();
  cmd->add_option("--change-k", o.cfg.change.k, "Neighbourhood size for the neighborhood method")->capture_default_str();
  cmd->add_option("-n,--n", o.cfg.n, "Descriptors per turning point")->capture_default_str();
  cmd->add_option("-k,--k", o.cfg.k, "Neighbours for word descriptors and ByKNN")->capture_default_str();
  cmd->add_option("--window", o.cfg.window, "Event year window (+/- years)")->capture_default_str();
  cmd->add_option("--candidates", o.cfg.n_candidates, "ByKNN shortlist for reranking")->capture_default_str();
  cmd->add_flag("--keep-empty", o.cfg.keep_empty, "Keep turning points without descriptors");
  add_artifact_paths(cmd, o.paths);
}

TimelineConfig finish_config(const TimelineOpts& o) {
  TimelineConfig cfg = o.cfg;
  cfg.method = parse_descriptor_method(o.method);
  cfg.change.method = parse_change_method(o.change_method);
  std::vector<std::string> problems;
  if (cfg.n < 1) problems.push_back("n must be >= 1");
  if (cfg.k < 1) problems.push_back("k must be >= 1");
  if (cfg.change.k < 1) problems.push_back("change-k must be >= 1");
  if (cfg.window < 0) problems.push_back("window must be >= 0");
  if (cfg.n_candidates < 1) problems.push_back("candidates must be >= 1");
  if (!std::isfinite(cfg.detect.lambda) || cfg.detect.lambda < 0) problems.push_back("lambda must be >= 0");
  if (!problems.empty()) {
    std::string msg = "invalid timeline config:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw Error(errc::kConfig, msg);
  }
  return cfg;
}

std::vector<std::string> collect_words(const TimelineOpts& o) {
  std::vector<std::string> words = o.words;
  if (!o.words_file.empty()) {
    std::ifstream in(o.words_file);
    Require(in.is_open(), errc::kIo, "cannot open words file: " + o.words_file);
    for (std::string line; std::getline(in, line);)
      for (auto& w : tokenize(line, CorpusConfig{})) words.push_back(std::move(w));
  }
  Require(!words.empty(), errc::kConfig, "no words given (use --word or --words-file)");
  return words;
}

void cmd_timeline(const Globals& g, const TimelineOpts& o) {
  const TimelineConfig cfg = finish_config(o);
  const auto words = collect_words(o);
  Require(words.size() == 1, errc::kConfig, "timeline renders one word; use `pipeline` for several");
  const Artifacts a = load_for(g, o.paths, cfg.method);
  const Timeline tl = generate(words.front(), cfg, a.inputs());
  emit(o.out, render(tl, parse_render_format(o.format)));
}

void cmd_pipeline(const Globals& g, const TimelineOpts& o) {
  const TimelineConfig cfg = finish_config(o);
  const auto words = collect_words(o);
  const Artifacts a = load_for(g, o.paths, cfg.method);
  const fs::path out = resolve(g, o.out, "timelines");
  fs::create_directories(out);
  const RenderFormat format = parse_render_format(o.format);
  const std::string ext = format == RenderFormat::kJson ? ".json" : ".md";
  std::vector<std::string> rendered(words.size());
  parallel_for(words.size(), g.workers, [&](std::size_t i) {
    rendered[i] = render(generate(words[i], cfg, a.inputs()), format);
  });
  for (std::size_t i = 0; i < words.size(); ++i) write_text(out / (words[i] + ext), rendered[i]);
}

// ---------------------------------------------------------------- descriptors

struct DescriptorOpts {
  std::string word;
  int year = 0;
  TimelineOpts t;
};

void cmd_descriptors(const Globals& g, const DescriptorOpts& o) {
  TimelineOpts t = o.t;
  t.words = {o.word};
  const TimelineConfig cfg = finish_config(t);
  const Artifacts a = load_for(g, t.paths, cfg.method);
  const TimelineInputs in = a.inputs();
  DescriptorSet set;
  switch (cfg.method) {
    case DescriptorMethod::kWordDescriptors:
      set = word_descriptors(in.aligned->spaces(), o.word, o.year, cfg.k);
      break;
    case DescriptorMethod::kBaseEvents:
      set = base_events(o.word, o.year, *in.catalog, cfg.n, cfg.window);
      break;
    default: {
      auto it = in.projected->find(o.year);
      Require(it != in.projected->end(), errc::kMissingArtifact,
              "projected space for " + std::to_string(o.year) + " is missing");
      const JointSpace joint(in.aligned->at(o.year), it->second);
      if (cfg.method == DescriptorMethod::kByWord || cfg.method == DescriptorMethod::kByKnn) {
        set = top_events(o.word, o.year, EventQuery{cfg.method, cfg.n, cfg.k, cfg.window}, *in.catalog, joint);
      } else {
        const FeatureBuilder builder(*in.catalog, InfluenceSpaces{in.aligned, in.global, in.projected},
                                     in.model->source, in.model->categories);
        set = rank_by_knn_cls(o.word, o.year, *in.catalog, joint, *in.model, builder,
                              RerankParams{cfg.n_candidates, cfg.n, cfg.k, cfg.window});
      }
    }
  }
  emit(t.out, descriptor_set_json(set).dump(2) + "\n");
}

// ---------------------------------------------------------------- events

struct EventsOpts {
  std::string file;
  std::string out;
  std::int64_t min_views = 6000;
  std::int64_t min_ext_refs = 15;
};

void cmd_events_validate(const EventsOpts& o) {
  const EventCatalog c = load_events(o.file);
  ojson j{{"events", c.size()}, {"years", c.by_year().size()}};
  std::cout << j.dump() << "\n";
}

void cmd_events_filter(const Globals& g, const EventsOpts& o) {
  const EventCatalog c = load_catalog(resolve(g, o.file, "events.jsonl"));
  const EventCatalog kept = filter_significant(c, o.min_views, o.min_ext_refs);
  Require(!o.out.empty(), errc::kConfig, "events filter needs --out");
  save_events(kept, o.out);
  Log().info("kept {} of {} events", kept.size(), c.size());
}

// ---------------------------------------------------------------- classify

struct ClassifyOpts {
  std::string source = "projected";
  PairParams pairs;
  std::string dataset;
  std::string out;
  std::string kind = "mlp";
  std::size_t categories = 150;
  TrainConfig train;
  int folds = 10;
  std::string event;
  std::string word;
  int year = 0;
  std::string change_method = "embedding";
  int change_k = 20;
  DetectParams detect;
  ArtifactPaths paths;
};

struct InfluenceArtifacts {
  AlignedSeries aligned;
  EventCatalog catalog;
  std::optional<EmbeddingSpace> global;
  std::optional<YearSpaces> projected;
  InfluenceSpaces spaces() const {
    return {&aligned, global ? &*global : nullptr, projected ? &*projected : nullptr};
  }
};

InfluenceArtifacts load_influence(const Globals& g, const ArtifactPaths& p, EmbeddingSource source) {
  InfluenceArtifacts a{load_aligned(resolve(g, p.aligned, "aligned")), load_catalog(resolve(g, p.events, "events.jsonl")),
                       std::nullopt, std::nullopt};
  if (source == EmbeddingSource::kGlobal) a.global = load_global(resolve(g, p.global, "global.temb"));
  else a.projected = load_projected(resolve(g, p.projected, "projected"));
  return a;
}

EmbeddingSource dataset_source(const std::vector<TrainingPair>& pairs, const std::string& path) {
  Require(!pairs.empty(), errc::kInvalidArgument, "dataset " + path + " is empty");
  const EmbeddingSource s = pairs.front().source;
  for (const auto& p : pairs)
    Require(p.source == s, errc::kFormat, "dataset " + path + " mixes embedding sources");
  return s;
}

void cmd_build_dataset(const Globals& g, ClassifyOpts o) {
  o.pairs.source = parse_embedding_source(o.source);
  const InfluenceArtifacts a = load_influence(g, o.paths, o.pairs.source);
  const ChangeDetector detector(a.aligned, ChangeParams{parse_change_method(o.change_method), o.change_k}, o.detect);
  const auto pairs = build_training_pairs(a.catalog, a.spaces(), detector, o.pairs);
  const fs::path out = resolve(g, o.out, "dataset.jsonl");
  save_pairs(pairs, out);
  std::size_t pos = 0;
  for (const auto& p : pairs) pos += p.label;
  Log().info("{} pairs ({} affected) written to {}", pairs.size(), pos, out.string());
}

struct LoadedDataset {
  std::vector<TrainingPair> pairs;
  InfluenceArtifacts artifacts;
  std::unique_ptr<FeatureBuilder> builder;
};

LoadedDataset load_dataset(const Globals& g, const ClassifyOpts& o) {
  const fs::path path = resolve(g, o.dataset, "dataset.jsonl");
  require_artifact(path, "training dataset", "run `chronoshift classify build-dataset`");
  auto pairs = load_pairs(path);
  const EmbeddingSource source = dataset_source(pairs, path.string());
  LoadedDataset d{std::move(pairs), load_influence(g, o.paths, source), nullptr};
  d.builder = std::make_unique<FeatureBuilder>(d.artifacts.catalog, d.artifacts.spaces(), source,
                                               category_index(d.artifacts.catalog, o.categories));
  return d;
}

TrainConfig seeded(TrainConfig t, std::uint64_t seed) {
  t.logreg.seed = seed;
  t.mlp.seed = seed;
  return t;
}

void cmd_classify_train(const Globals& g, const ClassifyOpts& o) {
  const LoadedDataset d = load_dataset(g, o);
  const InfluenceModel model = train_influence(d.pairs, *d.builder, parse_model_kind(o.kind), seeded(o.train, g.seed));
  save_model(model, resolve(g, o.out, "model.tclf"));
}

void cmd_classify_cv(const Globals& g, const ClassifyOpts& o) {
  const LoadedDataset d = load_dataset(g, o);
  const EvalReport r = cross_validate(d.builder->matrix(d.pairs), labels_of(d.pairs), parse_model_kind(o.kind),
                                      seeded(o.train, g.seed), o.folds, g.seed, d.builder->popularity_columns());
  ojson j;
  j["kind"] = to_string(r.kind);
  j["source"] = to_string(d.builder->source());
  j["folds"] = r.folds;
  j["seed"] = r.seed;
  j["examples"] = d.pairs.size();
  j["mean"] = metrics_json(r.mean);
  j["per_fold"] = ojson::array();
  for (const auto& m : r.per_fold) j["per_fold"].push_back(metrics_json(m));
  emit(o.out, j.dump(2) + "\n");
}

void cmd_classify_predict(const Globals& g, const ClassifyOpts& o) {
  const fs::path path = resolve(g, o.paths.model, "model.tclf");
  require_artifact(path, "influence model", "run `chronoshift classify train`");
  const InfluenceModel model = load_model(path);
  const InfluenceArtifacts a = load_influence(g, o.paths, model.source);
  const FeatureBuilder builder(a.catalog, a.spaces(), model.source, model.categories);
  const double p = predict(model.classifier, builder.features(o.event, o.word, o.year));
  ojson j{{"event", o.event}, {"word", o.word}, {"year", o.year}, {"probability", p}};
  emit(o.out, j.dump() + "\n");
}

// ---------------------------------------------------------------- synth

struct SynthOpts {
  std::string kind = "world";
  std::string out;
  WorldSpec world;
  SeriesSpec series;
  std::string shifts;  // "word:year,word:year" for series
  double theta_deg = 60.0;
  CorpusSpec corpus;
};

void cmd_synth(const Globals& g, SynthOpts o) {
  const fs::path out = resolve(g, o.out, "");
  if (o.kind == "world") {
    o.world.seed = g.seed;
    write_world(gen_world(o.world), out);
  } else if (o.kind == "series") {
    o.series.seed = g.seed;
    for (const auto& item : split_list(o.shifts)) {
      const auto colon = item.find(':');
      Require(colon != std::string::npos, errc::kConfig, "shift '" + item + "' must look like word:year");
      o.series.shifts.push_back({item.substr(0, colon), std::stoi(item.substr(colon + 1)), o.theta_deg * M_PI / 180.0, {}});
    }
    const SynthSeries s = gen_series(o.series);
    save_year_spaces(s.spaces, out / "temporal");
    ojson j = ojson::array();
    for (const auto& t : s.truth) j.push_back({{"word", t.word}, {"year", t.year}, {"theta", t.theta}});
    write_text(out / "truth.json", j.dump(2) + "\n");
  } else if (o.kind == "corpus") {
    o.corpus.seed = g.seed;
    write_corpus(gen_corpus(o.corpus), out / "corpus");
  } else {
    throw Error(errc::kConfig, "unknown synth kind '" + o.kind + "' (expected world, series or corpus)");
  }
}

// ---------------------------------------------------------------- eval

struct EvalOpts {
  std::string timeline;
  std::string annotations;
  std::string timeline_id;
  int n_timelines = 1;
  std::string rank_a;
  std::string rank_b;
  std::string out;
};

void cmd_eval(const EvalOpts& o) {
  if (!o.rank_a.empty() || !o.rank_b.empty()) {
    auto parse = [](const std::string& s) {
      std::vector<double> v;
      for (const auto& x : split_list(s)) v.push_back(std::stod(x));
      return v;
    };
    emit(o.out, ojson{{"kendall_tau", kendall_tau(parse(o.rank_a), parse(o.rank_b))}}.dump() + "\n");
    return;
  }
  Require(!o.timeline.empty() && !o.annotations.empty(), errc::kConfig,
          "eval needs --timeline and --annotations (or --rank-a/--rank-b)");
  std::ifstream in(o.timeline);
  Require(in.is_open(), errc::kIo, "cannot open timeline: " + o.timeline);
  std::stringstream buf;
  buf << in.rdbuf();
  const Timeline tl = parse_timeline_json(buf.str());
  const AnnotationSet ann = load_annotations(o.annotations);
  const std::string id = o.timeline_id.empty() ? tl.word : o.timeline_id;
  auto it = ann.find(id);
  Require(it != ann.end(), errc::kNotFound, "no annotations for timeline '" + id + "'");
  const MetricRecord m = eval_metrics(tl, it->second, o.n_timelines);
  ojson j;
  j["timeline_id"] = id;
  j["evaluators"] = m.evaluators;
  j["accuracy"] = optional_json(m.accuracy);
  j["relevance"] = optional_json(m.relevance);
  j["missing"] = optional_json(m.missing);
  j["redundancy"] = optional_json(m.redundancy);
  j["ranking"] = optional_json(m.ranking);
  j["effectiveness"] = optional_json(m.effectiveness);
  emit(o.out, j.dump(2) + "\n");
}

spdlog::level::level_enum parse_level(const std::string& s) {
  const auto level = spdlog::level::from_str(s);
  Require(level != spdlog::level::off || s == "off", errc::kConfig, "unknown log level '" + s + "'");
  return level;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"chronoshift: timelines of semantic change from diachronic embeddings"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML-style configuration file (env CHRONOSHIFT_CONFIG)")
      ->envname("CHRONOSHIFT_CONFIG");

  Globals g;
  app.add_option("-w,--workspace", g.workspace, "Artifact directory")->capture_default_str();
  app.add_option("--workers", g.workers, "Worker threads (1 is deterministic)")->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|err|off")->capture_default_str();

  TrainOpts train;
  auto* c_train = app.add_subcommand("train", "Train per-year (or global) SGNS embeddings");
  c_train->add_option("--corpus", train.corpus, "Corpus directory with <year>.txt files");
  c_train->add_option("--global-corpus", train.global_corpus, "Single corpus file for the global space");
  c_train->add_option("--out", train.out, "Output directory (or file for --global-corpus)");
  c_train->add_option("--year", train.years, "Only these years");
  c_train->add_option("--year-start", train.year_start)->capture_default_str();
  c_train->add_option("--year-end", train.year_end)->capture_default_str();
  c_train->add_flag("--keep-case", train.keep_case, "Do not lowercase tokens");
  c_train->add_option("--dim", train.sgns.dim)->capture_default_str();
  c_train->add_option("--window", train.sgns.window)->capture_default_str();
  c_train->add_option("--negatives", train.sgns.negatives)->capture_default_str();
  c_train->add_option("--epochs", train.sgns.epochs)->capture_default_str();
  c_train->add_option("--lr", train.sgns.initial_lr)->capture_default_str();
  c_train->add_option("--subsample", train.sgns.subsample_t)->capture_default_str();
  c_train->add_option("--min-count", train.sgns.min_count)->capture_default_str();
  c_train->callback([&] { cmd_train(g, train); });

  AlignOpts align;
  auto* c_align = app.add_subcommand("align", "Rotate per-year spaces into the earliest year's frame");
  c_align->add_option("--in", align.in, "Temporal spaces [workspace/temporal]");
  c_align->add_option("--out", align.out, "Output directory [workspace/aligned]");
  c_align->add_option("--anchors", align.anchors, "Top shared tokens used as anchors")->capture_default_str();
  c_align->callback([&] { cmd_align(g, align); });

  ProjectOpts project;
  auto* c_project = app.add_subcommand("project", "Project the global space into every aligned year");
  c_project->add_option("--global", project.global, "Global space [workspace/global.temb]");
  c_project->add_option("--aligned", project.aligned, "Aligned spaces [workspace/aligned]");
  c_project->add_option("--out", project.out, "Output directory [workspace/projected]");
  c_project->add_option("--ridge", project.ridge, "Ridge strength (negative: 1e-3 trace(X^T X)/p)");
  c_project->callback([&] { cmd_project(g, project); });

  DetectOpts detect;
  auto* c_detect = app.add_subcommand("detect", "Detect turning points");
  c_detect->add_option("--word", detect.words, "Word(s) to analyse");
  c_detect->add_flag("--all", detect.all, "Analyse every word in the series");
  c_detect->add_option("--method", detect.method, "embedding|neighborhood")->capture_default_str();
  c_detect->add_option("-k,--k", detect.k, "Neighbourhood size")->capture_default_str();
  c_detect->add_option("--lambda", detect.detect.lambda)->capture_default_str();
  c_detect->add_option("--floor", detect.detect.floor)->capture_default_str();
  c_detect->add_option("--aligned", detect.aligned, "Aligned spaces [workspace/aligned]");
  c_detect->add_option("--out", detect.out, "Output file (default stdout)");
  c_detect->callback([&] { cmd_detect(g, detect); });

  DescriptorOpts desc;
  auto* c_desc = app.add_subcommand("descriptors", "Descriptors for one word and year");
  c_desc->add_option("--word", desc.word)->required();
  c_desc->add_option("--year", desc.year)->required();
  add_timeline_options(c_desc, desc.t);
  c_desc->add_option("--out", desc.t.out, "Output file (default stdout)");
  c_desc->callback([&] { cmd_descriptors(g, desc); });

  EventsOpts events;
  auto* c_events = app.add_subcommand("events", "Event catalog utilities");
  c_events->require_subcommand(1);
  auto* c_ev_validate = c_events->add_subcommand("validate", "Validate an events JSONL file");
  c_ev_validate->add_option("file", events.file)->required();
  c_ev_validate->callback([&] { cmd_events_validate(events); });
  auto* c_ev_filter = c_events->add_subcommand("filter", "Keep significant events");
  c_ev_filter->add_option("--in", events.file, "Events JSONL [workspace/events.jsonl]");
  c_ev_filter->add_option("--out", events.out)->required();
  c_ev_filter->add_option("--min-views", events.min_views)->capture_default_str();
  c_ev_filter->add_option("--min-ext-refs", events.min_ext_refs)->capture_default_str();
  c_ev_filter->callback([&] { cmd_events_filter(g, events); });

  ClassifyOpts cls;
  auto* c_cls = app.add_subcommand("classify", "Event-influence classifier");
  c_cls->require_subcommand(1);
  auto add_common = [&](CLI::App* cmd) {
    add_artifact_paths(cmd, cls.paths);
    cmd->add_option("--dataset", cls.dataset, "Dataset JSONL [workspace/dataset.jsonl]");
    cmd->add_option("--out", cls.out, "Output file");
  };
  auto add_training = [&](CLI::App* cmd) {
    cmd->add_option("--kind", cls.kind, "logreg|mlp")->capture_default_str();
    cmd->add_option("--categories", cls.categories, "Category BoW width")->capture_default_str();
    cmd->add_option("--logreg-lr", cls.train.logreg.lr)->capture_default_str();
    cmd->add_option("--logreg-epochs", cls.train.logreg.epochs)->capture_default_str();
    cmd->add_option("--logreg-l2", cls.train.logreg.l2)->capture_default_str();
    cmd->add_option("--hidden", cls.train.mlp.hidden)->capture_default_str();
    cmd->add_option("--mlp-lr", cls.train.mlp.lr)->capture_default_str();
    cmd->add_option("--mlp-epochs", cls.train.mlp.epochs)->capture_default_str();
    cmd->add_option("--mlp-batch", cls.train.mlp.batch)->capture_default_str();
    cmd->add_option("--mlp-l2", cls.train.mlp.l2)->capture_default_str();
  };
  auto* c_build = c_cls->add_subcommand("build-dataset", "Label (event, term) pairs");
  add_common(c_build);
  c_build->add_option("--source", cls.source, "projected|global")->capture_default_str();
  c_build->add_option("--per-event", cls.pairs.per_event)->capture_default_str();
  c_build->add_option("--sim-threshold", cls.pairs.sim_threshold)->capture_default_str();
  c_build->add_option("--horizon", cls.pairs.horizon)->capture_default_str();
  c_build->add_option("--change-method", cls.change_method)->capture_default_str();
  c_build->add_option("--change-k", cls.change_k)->capture_default_str();
  c_build->add_option("--lambda", cls.detect.lambda)->capture_default_str();
  c_build->add_option("--floor", cls.detect.floor)->capture_default_str();
  c_build->callback([&] { cmd_build_dataset(g, cls); });
  auto* c_ctrain = c_cls->add_subcommand("train", "Train a classifier on a dataset");
  add_common(c_ctrain);
  add_training(c_ctrain);
  c_ctrain->callback([&] { cmd_classify_train(g, cls); });
  auto* c_cv = c_cls->add_subcommand("cv", "Stratified cross-validation");
  add_common(c_cv);
  add_training(c_cv);
  c_cv->add_option("--folds", cls.folds)->capture_default_str();
  c_cv->callback([&] { cmd_classify_cv(g, cls); });
  auto* c_pred = c_cls->add_subcommand("predict", "Influence probability of one (event, word, year)");
  add_common(c_pred);
  c_pred->add_option("--event", cls.event)->required();
  c_pred->add_option("--word", cls.word)->required();
  c_pred->add_option("--year", cls.year)->required();
  c_pred->callback([&] { cmd_classify_predict(g, cls); });

  TimelineOpts tl;
  auto* c_tl = app.add_subcommand("timeline", "Build and render one timeline");
  c_tl->add_option("--word", tl.words)->required();
  add_timeline_options(c_tl, tl);
  c_tl->add_option("--format", tl.format, "json|markdown")->capture_default_str();
  c_tl->add_option("--out", tl.out, "Output file (default stdout)");
  c_tl->callback([&] { cmd_timeline(g, tl); });

  TimelineOpts pipe;
  auto* c_pipe = app.add_subcommand("pipeline", "detect, describe and render timelines for several words");
  c_pipe->add_option("--word", pipe.words, "Words (repeatable)");
  c_pipe->add_option("--words-file", pipe.words_file, "File with whitespace-separated words");
  add_timeline_options(c_pipe, pipe);
  c_pipe->add_option("--format", pipe.format, "json|markdown")->capture_default_str();
  c_pipe->add_option("--out", pipe.out, "Output directory [workspace/timelines]");
  c_pipe->callback([&] { cmd_pipeline(g, pipe); });

  SynthOpts synth;
  auto* c_synth = app.add_subcommand("synth", "Generate synthetic data with planted ground truth");
  c_synth->add_option("--kind", synth.kind, "world|series|corpus")->capture_default_str();
  c_synth->add_option("--out", synth.out, "Output directory [workspace]");
  c_synth->add_option("--vocab", synth.world.vocab_size, "World vocabulary size")->capture_default_str();
  c_synth->add_option("--dim", synth.world.dim, "World dimension")->capture_default_str();
  c_synth->add_option("--influential", synth.world.n_influential)->capture_default_str();
  c_synth->add_option("--distractors", synth.world.n_distractors)->capture_default_str();
  c_synth->add_option("--background", synth.world.n_background)->capture_default_str();
  c_synth->add_option("--cotimed", synth.world.n_cotimed)->capture_default_str();
  c_synth->add_option("--series-vocab", synth.series.vocab_size)->capture_default_str();
  c_synth->add_option("--series-dim", synth.series.dim)->capture_default_str();
  c_synth->add_option("--series-years", synth.series.n_years)->capture_default_str();
  c_synth->add_option("--series-noise", synth.series.noise)->capture_default_str();
  c_synth->add_option("--first-year", synth.series.first_year)->capture_default_str();
  c_synth->add_option("--shifts", synth.shifts, "Planted shifts word:year,...");
  c_synth->add_option("--theta", synth.theta_deg, "Shift angle in degrees")->capture_default_str();
  c_synth->add_option("--docs", synth.corpus.docs_per_year)->capture_default_str();
  c_synth->add_option("--doc-length", synth.corpus.doc_length)->capture_default_str();
  c_synth->callback([&] { cmd_synth(g, synth); });

  EvalOpts ev;
  auto* c_eval = app.add_subcommand("eval", "Timeline metrics from annotations, or Kendall's tau");
  c_eval->add_option("--timeline", ev.timeline, "Timeline JSON");
  c_eval->add_option("--annotations", ev.annotations, "Annotation CSV");
  c_eval->add_option("--timeline-id", ev.timeline_id, "Annotation timeline id (default: the word)");
  c_eval->add_option("--n-timelines", ev.n_timelines, "Timelines in the study")->capture_default_str();
  c_eval->add_option("--rank-a", ev.rank_a, "Comma-separated ranks");
  c_eval->add_option("--rank-b", ev.rank_b, "Comma-separated ranks");
  c_eval->add_option("--out", ev.out, "Output file (default stdout)");
  c_eval->callback([&] { cmd_eval(ev); });

  app.parse_complete_callback([&] { SetLogLevel(parse_level(g.log_level)); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> copy = args;
  std::vector<char*> argv;
  for (auto& a : copy) argv.push_back(a.data());
  argv.push_back(nullptr);
  return run_cli(static_cast<int>(copy.size()), argv.data());
}

}  // namespace chronoshift
