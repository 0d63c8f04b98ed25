#include "chronoshift/timeline.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "chronoshift/common.h"

namespace chronoshift {
namespace {

using ojson = nlohmann::ordered_json;

const EmbeddingSpace& projected_at(const TimelineInputs& in, int year) {
  Require(in.projected != nullptr, errc::kMissingArtifact, "projected spaces are required for this method");
  auto it = in.projected->find(year);
  Require(it != in.projected->end(), errc::kMissingArtifact,
          "projected space for " + std::to_string(year) + " is missing");
  return it->second;
}

DescriptorSet describe(const std::string& word, int year, const TimelineConfig& cfg, const TimelineInputs& in) {
  const AlignedSeries& aligned = *in.aligned;
  switch (cfg.method) {
    case DescriptorMethod::kWordDescriptors: {
      DescriptorSet set = word_descriptors(aligned.spaces(), word, year, cfg.k);
      if (set.items.size() > static_cast<std::size_t>(cfg.n)) set.items.resize(cfg.n);
      return set;
    }
    case DescriptorMethod::kBaseEvents:
      Require(in.catalog != nullptr, errc::kMissingArtifact, "event catalog is required for baseevents");
      return base_events(word, year, *in.catalog, cfg.n, cfg.window);
    case DescriptorMethod::kByWord:
    case DescriptorMethod::kByKnn: {
      Require(in.catalog != nullptr, errc::kMissingArtifact, "event catalog is required for event descriptors");
      const JointSpace joint(aligned.at(year), projected_at(in, year));
      EventQuery q;
      q.method = cfg.method;
      q.n = cfg.n;
      q.k = cfg.k;
      q.window = cfg.window;
      return top_events(word, year, q, *in.catalog, joint);
    }
    case DescriptorMethod::kByKnnCls:
    case DescriptorMethod::kByKnnGlobCls: {
      Require(in.catalog != nullptr, errc::kMissingArtifact, "event catalog is required for event descriptors");
      Require(in.model != nullptr, errc::kMissingArtifact, "a trained influence model is required");
      const bool wants_global = cfg.method == DescriptorMethod::kByKnnGlobCls;
      Require(wants_global == (in.model->source == EmbeddingSource::kGlobal), errc::kInvalidArgument,
              to_string(cfg.method) + " needs a model trained on " + (wants_global ? "global" : "projected") +
                  " features");
      const JointSpace joint(aligned.at(year), projected_at(in, year));
      InfluenceSpaces spaces{in.aligned, in.global, in.projected};
      if (wants_global)
        Require(in.global != nullptr, errc::kMissingArtifact, "global space is required for byknnglobcls");
      const FeatureBuilder builder(*in.catalog, spaces, in.model->source, in.model->categories);
      RerankParams rp;
      rp.n_candidates = cfg.n_candidates;
      rp.n_out = cfg.n;
      rp.k = cfg.k;
      rp.window = cfg.window;
      return rank_by_knn_cls(word, year, *in.catalog, joint, *in.model, builder, rp);
    }
  }
  throw Error(errc::kInvalidArgument, "unsupported descriptor method");
}

ojson descriptor_json(const DescriptorItem& item) {
  ojson d;
  d["label"] = item.label;
  if (item.title) d["title"] = *item.title;
  d["score"] = item.score;
  return d;
}

double parse_number(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    Require(used == text.size(), errc::kFormat, where + ": not a number: '" + text + "'");
    return v;
  } catch (const std::logic_error&) {
    throw Error(errc::kFormat, where + ": not a number: '" + text + "'");
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

ojson TimelineConfig::to_json() const {
  ojson j;
  j["method"] = to_string(method);
  j["change_method"] = to_string(change.method);
  j["change_k"] = change.k;
  j["lambda"] = detect.lambda;
  j["floor"] = detect.floor;
  j["n"] = n;
  j["k"] = k;
  j["window"] = window;
  j["n_candidates"] = n_candidates;
  j["keep_empty"] = keep_empty;
  return j;
}

Timeline generate(const std::string& word, const TimelineConfig& config, const TimelineInputs& inputs) {
  Require(inputs.aligned != nullptr, errc::kMissingArtifact, "aligned series is required");
  Require(config.n >= 1 && config.k >= 1 && config.window >= 0 && config.n_candidates >= 1,
          errc::kConfig, "timeline config: n, k, n_candidates >= 1 and window >= 0");
  Timeline tl;
  tl.word = word;
  tl.method = config.method;
  tl.config = config.to_json();

  const ChangeSeries series = change_series(*inputs.aligned, word, config.change);
  if (series.values.size() < 3) {
    Log().warn("'{}' has only {} defined change values; timeline is empty", word, series.values.size());
    return tl;
  }
  for (const auto& tp : detect_turning_points(series, config.detect)) {
    TimelineEntry entry{tp.year, tp.score, describe(word, tp.year, config, inputs)};
    if (entry.descriptors.items.empty() && !config.keep_empty) {
      Log().info("turning point {} of '{}' has no descriptors; dropped", tp.year, word);
      continue;
    }
    tl.entries.push_back(std::move(entry));
  }
  return tl;
}

RenderFormat parse_render_format(const std::string& name) {
  if (name == "json") return RenderFormat::kJson;
  if (name == "markdown" || name == "md") return RenderFormat::kMarkdown;
  throw Error(errc::kInvalidArgument, "unknown render format '" + name + "' (expected json or markdown)");
}

std::string render_json(const Timeline& tl) {
  ojson j;
  j["word"] = tl.word;
  j["method"] = to_string(tl.method);
  j["config"] = tl.config.is_null() ? ojson::object() : tl.config;
  j["entries"] = ojson::array();
  for (const auto& e : tl.entries) {
    ojson entry;
    entry["year"] = e.year;
    entry["turning_score"] = e.turning_score;
    entry["descriptors"] = ojson::array();
    for (const auto& item : e.descriptors.items) entry["descriptors"].push_back(descriptor_json(item));
    j["entries"].push_back(std::move(entry));
  }
  return j.dump(2) + "\n";
}

std::string render_markdown(const Timeline& tl) {
  std::ostringstream out;
  out << "# " << tl.word << " (" << to_string(tl.method) << ")\n\n";
  out << "| year | turning score | descriptors |\n|---|---|---|\n";
  char score[32];
  for (const auto& e : tl.entries) {
    std::snprintf(score, sizeof score, "%.3f", e.turning_score);
    out << "| " << e.year << " | " << score << " | ";
    for (std::size_t i = 0; i < e.descriptors.items.size(); ++i) {
      const auto& item = e.descriptors.items[i];
      if (i) out << "; ";
      out << (item.title ? *item.title : item.label);
    }
    out << " |\n";
  }
  return out.str();
}

std::string render(const Timeline& tl, RenderFormat format) {
  return format == RenderFormat::kJson ? render_json(tl) : render_markdown(tl);
}

Timeline parse_timeline_json(const std::string& text) {
  try {
    const auto j = ojson::parse(text);
    Timeline tl;
    tl.word = j.at("word").get<std::string>();
    tl.method = parse_descriptor_method(j.at("method").get<std::string>());
    if (j.contains("config")) tl.config = j.at("config");
    int previous = 0;
    for (const auto& e : j.at("entries")) {
      TimelineEntry entry;
      entry.year = e.at("year").get<int>();
      Require(tl.entries.empty() || entry.year > previous, errc::kFormat, "timeline years must increase");
      previous = entry.year;
      entry.turning_score = e.at("turning_score").get<double>();
      entry.descriptors.word = tl.word;
      entry.descriptors.year = entry.year;
      entry.descriptors.method = tl.method;
      entry.descriptors.kind = kind_of(tl.method);
      for (const auto& d : e.at("descriptors")) {
        DescriptorItem item;
        item.label = d.at("label").get<std::string>();
        item.score = d.at("score").get<double>();
        if (d.contains("title")) item.title = d.at("title").get<std::string>();
        entry.descriptors.items.push_back(std::move(item));
      }
      tl.entries.push_back(std::move(entry));
    }
    return tl;
  } catch (const nlohmann::json::exception& e) {
    throw Error(errc::kFormat, std::string("bad timeline JSON: ") + e.what());
  }
}

AnnotationSet parse_annotations(std::istream& in) {
  AnnotationSet out;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(trim(c));
    const std::string where = "annotations line " + std::to_string(line_no);
    Require(cols.size() == 4, errc::kFormat, where + ": expected 4 columns, got " + std::to_string(cols.size()));
    if (!header) {
      Require(cols[0] == "timeline_id" && cols[1] == "evaluator_id" && cols[2] == "descriptor_label" &&
                  cols[3] == "judged_true",
              errc::kFormat, where + ": missing header timeline_id,evaluator_id,descriptor_label,judged_true");
      header = true;
      continue;
    }
    EvaluatorAnnotation& a = out[cols[0]][cols[1]];
    const std::string& label = cols[2];
    const std::string& value = cols[3];
    if (!label.empty() && label[0] == '#') {
      const double v = parse_number(value, where);
      Require(v >= 0 || label.starts_with("#familiarity"), errc::kFormat, where + ": negative count or rank");
      if (label == "#missing") a.missing = v;
      else if (label == "#redundant") a.redundant = v;
      else if (label == "#relevance_rank") a.relevance_rank = v;
      else if (label == "#subjective_rank") a.subjective_rank = v;
      else if (label == "#familiarity_pre") a.familiarity_pre = v;
      else if (label == "#familiarity_post") a.familiarity_post = v;
      else throw Error(errc::kFormat, where + ": unknown reserved label '" + label + "'");
      continue;
    }
    if (value == "1" || value == "true") a.judgments[label] = true;
    else if (value == "0" || value == "false") a.judgments[label] = false;
    else throw Error(errc::kFormat, where + ": judged_true must be 1/0/true/false");
  }
  Require(header, errc::kFormat, "annotations file is empty");
  return out;
}

AnnotationSet load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  Require(in.is_open(), errc::kIo, "cannot open annotations: " + path.string());
  return parse_annotations(in);
}

MetricRecord eval_metrics(const Timeline& timeline, const std::map<std::string, EvaluatorAnnotation>& annotations,
                          int n_timelines) {
  std::size_t n_desc = 0;
  for (const auto& e : timeline.entries) n_desc += e.descriptors.items.size();
  Require(n_desc > 0, errc::kInvalidArgument,
          "metrics are undefined for timeline '" + timeline.word + "' without descriptors");
  Require(n_timelines >= 1, errc::kInvalidArgument, "number of timelines must be >= 1");
  Require(!annotations.empty(), errc::kInvalidArgument, "no annotations for timeline '" + timeline.word + "'");

  struct Mean {
    double sum = 0;
    int n = 0;
    void add(double v) { sum += v, ++n; }
    std::optional<double> get() const { return n ? std::optional<double>(sum / n) : std::nullopt; }
  } acc, rel, mis, red, rank, eff;
  const double d = static_cast<double>(n_desc), t = static_cast<double>(n_timelines);
  for (const auto& [evaluator, a] : annotations) {
    if (!a.judgments.empty()) {
      double yes = 0;
      for (const auto& [label, ok] : a.judgments) yes += ok ? 1 : 0;
      acc.add(yes / static_cast<double>(a.judgments.size()));
    }
    if (a.relevance_rank) rel.add(*a.relevance_rank / t);
    if (a.missing) mis.add(*a.missing / d);
    if (a.redundant) red.add(*a.redundant / d);
    if (a.subjective_rank) rank.add(*a.subjective_rank / t);
    if (a.familiarity_pre && a.familiarity_post) eff.add(*a.familiarity_post - *a.familiarity_pre);
  }
  MetricRecord m;
  m.accuracy = acc.get();
  m.relevance = rel.get();
  m.missing = mis.get();
  m.redundancy = red.get();
  m.ranking = rank.get();
  m.effectiveness = eff.get();
  m.evaluators = static_cast<int>(annotations.size());
  return m;
}

double kendall_tau(const std::vector<double>& a, const std::vector<double>& b) {
  Require(a.size() == b.size(), errc::kInvalidArgument, "kendall tau: rankings differ in length");
  Require(a.size() >= 2, errc::kInvalidArgument, "kendall tau needs at least two items");
  long long concordant = 0, discordant = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double s = (a[i] - a[j]) * (b[i] - b[j]);
      Require(s != 0.0, errc::kInvalidArgument, "kendall tau: tied ranks are not supported");
      (s > 0 ? concordant : discordant) += 1;
    }
  }
  const double pairs = static_cast<double>(a.size() * (a.size() - 1) / 2);
  return static_cast<double>(concordant - discordant) / pairs;
}

}  // namespace chronoshift
