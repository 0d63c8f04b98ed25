#include "chronoshift/influence.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "chronoshift/common.h"

namespace chronoshift {
namespace {

constexpr char kModelMagic[] = "TCLF1";
constexpr double kEpsilon = 1e-6;

struct Candidate {
  std::string term;
  double similarity;
};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  Require(static_cast<bool>(in), errc::kFormat, "truncated model file: " + path.string());
  return value;
}

}  // namespace

std::string to_string(EmbeddingSource source) {
  return source == EmbeddingSource::kGlobal ? "global" : "projected";
}

EmbeddingSource parse_embedding_source(const std::string& name) {
  if (name == "global") return EmbeddingSource::kGlobal;
  if (name == "projected") return EmbeddingSource::kProjected;
  throw Error(errc::kInvalidArgument, "unknown embedding source '" + name + "' (expected global or projected)");
}

void PairParams::validate() const {
  std::vector<std::string> problems;
  if (per_event < 1) problems.push_back("per_event must be >= 1");
  if (!(sim_threshold >= -1.0 && sim_threshold < 1.0)) problems.push_back("sim_threshold must lie in [-1, 1)");
  if (horizon < 1) problems.push_back("horizon must be >= 1");
  if (!problems.empty()) {
    std::string msg = "invalid dataset config:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw Error(errc::kConfig, msg);
  }
}

std::vector<TrainingPair> build_training_pairs(const EventCatalog& catalog, const InfluenceSpaces& spaces,
                                               const ChangeDetector& detector, const PairParams& params) {
  params.validate();
  Require(spaces.aligned != nullptr, errc::kInvalidArgument, "training pairs need the aligned series");
  const bool global = params.source == EmbeddingSource::kGlobal;
  Require(global ? spaces.global != nullptr : spaces.projected != nullptr, errc::kMissingArtifact,
          std::string("training pairs need the ") + (global ? "global space" : "projected spaces"));

  std::vector<TrainingPair> out;
  for (const auto& [id, event] : catalog.records()) {
    const int t = event.year;
    if (!spaces.aligned->has_year(t)) {
      Log().info("event '{}' ({}) outside series coverage; skipped", id, t);
      continue;
    }
    const EmbeddingSpace& temporal = spaces.aligned->at(t);
    const EmbeddingSpace* source = nullptr;
    if (global) {
      source = spaces.global;
    } else {
      auto it = spaces.projected->find(t);
      if (it == spaces.projected->end()) {
        Log().info("no projected space for {}; event '{}' skipped", t, id);
        continue;
      }
      source = &it->second;
    }
    if (!source->contains(id)) {
      Log().info("event '{}' has no vector in {}; skipped", id, source->label());
      continue;
    }
    const auto ev = source->vector(id);
    // Terms come from the source space's frame: the temporal vocabulary for
    // projected vectors, the global vocabulary (minus events) otherwise.
    const EmbeddingSpace& term_space = global ? *spaces.global : temporal;
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < term_space.size(); ++i) {
      const std::string& term = term_space.vocab().token(i);
      if (term == id || catalog.contains(term) || !temporal.contains(term)) continue;
      const double sim = cosine(term_space.row(i), ev);
      if (sim > params.sim_threshold) candidates.push_back({term, sim});
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.similarity != b.similarity) return a.similarity > b.similarity;
      return a.term < b.term;
    });

    int affected = 0, unaffected = 0;
    for (const auto& c : candidates) {
      if (affected >= params.per_event && unaffected >= params.per_event) break;
      const bool now = detector.changed_at(c.term, t).changed;
      if (now) {
        if (affected < params.per_event && !detector.changed_at(c.term, t - 1).changed) {
          out.push_back({id, c.term, t, 1, params.source});
          ++affected;
        }
        continue;
      }
      if (unaffected >= params.per_event) continue;
      bool later = false;
      for (int dt = 1; dt <= params.horizon && !later; ++dt) later = detector.changed_at(c.term, t + dt).changed;
      if (later) {
        out.push_back({id, c.term, t, 0, params.source});
        ++unaffected;
      }
    }
  }
  return out;
}

void save_pairs(const std::vector<TrainingPair>& pairs, const std::filesystem::path& path) {
  std::ofstream out(path);
  Require(out.is_open(), errc::kIo, "cannot open for writing: " + path.string());
  for (const auto& p : pairs) {
    nlohmann::ordered_json j;
    j["event_id"] = p.event_id;
    j["term"] = p.term;
    j["year"] = p.year;
    j["label"] = p.label;
    j["source"] = to_string(p.source);
    out << j.dump() << '\n';
  }
  Require(static_cast<bool>(out), errc::kIo, "write failed: " + path.string());
}

std::vector<TrainingPair> load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  Require(in.is_open(), errc::kIo, "cannot open dataset: " + path.string());
  std::vector<TrainingPair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    try {
      const auto j = nlohmann::json::parse(line);
      TrainingPair p;
      p.event_id = j.at("event_id").get<std::string>();
      p.term = j.at("term").get<std::string>();
      p.year = j.at("year").get<int>();
      p.label = j.at("label").get<int>();
      p.source = parse_embedding_source(j.at("source").get<std::string>());
      Require(p.label == 0 || p.label == 1, errc::kFormat, "label must be 0 or 1");
      Require(p.term != p.event_id, errc::kFormat, "term equals event id");
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw Error(errc::kFormat, where + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), where + e.what());
    }
  }
  return out;
}

FeatureBuilder::FeatureBuilder(const EventCatalog& catalog, const InfluenceSpaces& spaces,
                               EmbeddingSource source, CategoryIndex categories)
    : catalog_(catalog), spaces_(spaces), source_(source), categories_(std::move(categories)) {
  if (source_ == EmbeddingSource::kGlobal) {
    Require(spaces_.global != nullptr, errc::kMissingArtifact, "global features need the global space");
    dim_ = spaces_.global->dim();
  } else {
    Require(spaces_.aligned != nullptr && spaces_.projected != nullptr && !spaces_.projected->empty(),
            errc::kMissingArtifact, "projected features need aligned and projected spaces");
    dim_ = spaces_.projected->begin()->second.dim();
  }
}

std::span<const double> FeatureBuilder::event_vector(const std::string& event, int year) const {
  if (source_ == EmbeddingSource::kGlobal) {
    Require(spaces_.global->contains(event), errc::kNotFound, "event '" + event + "' missing from global space");
    return spaces_.global->vector(event);
  }
  auto it = spaces_.projected->find(year);
  Require(it != spaces_.projected->end(), errc::kMissingArtifact,
          "no projected space for " + std::to_string(year));
  Require(it->second.contains(event), errc::kNotFound,
          "event '" + event + "' missing from " + it->second.label());
  return it->second.vector(event);
}

std::span<const double> FeatureBuilder::term_vector(const std::string& term, int year) const {
  if (source_ == EmbeddingSource::kGlobal) {
    Require(spaces_.global->contains(term), errc::kNotFound, "term '" + term + "' missing from global space");
    return spaces_.global->vector(term);
  }
  const EmbeddingSpace& temporal = spaces_.aligned->at(year);
  Require(temporal.contains(term), errc::kNotFound,
          "term '" + term + "' missing from " + std::to_string(year));
  return temporal.vector(term);
}

Eigen::VectorXd FeatureBuilder::features(const std::string& event, const std::string& term, int year) const {
  const auto ve = event_vector(event, year);
  const auto vw = term_vector(term, year);
  const EventRecord& record = catalog_.at(event);
  Eigen::VectorXd f(static_cast<Eigen::Index>(length()));
  Eigen::Index c = 0;
  for (double v : ve) f(c++) = v;
  for (double v : vw) f(c++) = v;
  f(c++) = cosine(ve, vw);
  for (double v : categories_.bow(record)) f(c++) = v;
  f(c++) = std::log1p(static_cast<double>(record.internal_links));
  f(c++) = std::log1p(static_cast<double>(record.external_links));
  f(c++) = std::log1p(static_cast<double>(record.pageviews));
  return f;
}

Eigen::MatrixXd FeatureBuilder::matrix(const std::vector<TrainingPair>& pairs) const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(pairs.size()), static_cast<Eigen::Index>(length()));
  for (std::size_t i = 0; i < pairs.size(); ++i)
    x.row(i) = features(pairs[i].event_id, pairs[i].term, pairs[i].year).transpose();
  return x;
}

std::vector<Eigen::Index> FeatureBuilder::popularity_columns() const {
  const auto n = static_cast<Eigen::Index>(length());
  return {n - 3, n - 2, n - 1};
}

Eigen::VectorXd labels_of(const std::vector<TrainingPair>& pairs) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) y(i) = pairs[i].label;
  return y;
}

InfluenceModel train_influence(const std::vector<TrainingPair>& pairs, const FeatureBuilder& builder,
                               ModelKind kind, const TrainConfig& config) {
  InfluenceModel model;
  model.classifier = train_model(kind, builder.matrix(pairs), labels_of(pairs), config,
                                 builder.popularity_columns());
  model.source = builder.source();
  model.categories = builder.categories();
  model.dim = static_cast<std::uint32_t>(builder.dim());
  return model;
}

void save_model(const InfluenceModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  Require(out.is_open(), errc::kIo, "cannot open for writing: " + path.string());
  out.write(kModelMagic, 5);
  put<std::uint8_t>(out, model.source == EmbeddingSource::kGlobal ? 0 : 1);
  put<std::uint32_t>(out, model.dim);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.categories.width()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.categories.columns().size()));
  for (const auto& c : model.categories.columns()) {
    Require(c.size() <= 0xFFFF, errc::kInvalidArgument, "category name too long");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(c.size()));
    out.write(c.data(), static_cast<std::streamsize>(c.size()));
  }
  write_classifier(out, model.classifier);
  Require(static_cast<bool>(out), errc::kIo, "write failed: " + path.string());
}

InfluenceModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.is_open(), errc::kMissingArtifact, "model file not found: " + path.string());
  char magic[5] = {};
  in.read(magic, 5);
  Require(in && std::memcmp(magic, kModelMagic, 5) == 0, errc::kFormat, "not a model file: " + path.string());
  InfluenceModel model;
  const auto source = get<std::uint8_t>(in, path);
  Require(source <= 1, errc::kFormat, "bad embedding source tag in " + path.string());
  model.source = source == 0 ? EmbeddingSource::kGlobal : EmbeddingSource::kProjected;
  model.dim = get<std::uint32_t>(in, path);
  const auto width = get<std::uint32_t>(in, path);
  const auto count = get<std::uint32_t>(in, path);
  std::vector<std::string> columns;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string c(get<std::uint16_t>(in, path), '\0');
    in.read(c.data(), static_cast<std::streamsize>(c.size()));
    Require(static_cast<bool>(in), errc::kFormat, "truncated model file: " + path.string());
    columns.push_back(std::move(c));
  }
  model.categories = CategoryIndex(std::move(columns), width);
  model.classifier = read_classifier(in);
  Require(model.classifier.input_dim == static_cast<Eigen::Index>(2 * model.dim + 1 + width + 3),
          errc::kFormat, "model input size does not match its feature layout: " + path.string());
  return model;
}

DescriptorSet rank_by_knn_cls(const std::string& word, int year, const EventCatalog& catalog,
                              const JointSpace& joint, const InfluenceModel& model,
                              const FeatureBuilder& builder, const RerankParams& params) {
  Require(params.n_candidates >= 1 && params.n_out >= 1, errc::kInvalidArgument,
          "rerank needs n_candidates and n_out >= 1");
  Require(model.classifier.input_dim == static_cast<Eigen::Index>(builder.length()), errc::kInvalidArgument,
          "model expects " + std::to_string(model.classifier.input_dim) + " features, builder produces " +
              std::to_string(builder.length()));
  EventQuery query;
  query.method = DescriptorMethod::kByKnn;
  query.n = params.n_candidates;
  query.k = params.k;
  query.window = params.window;
  DescriptorSet base = top_events(word, year, query, catalog, joint);

  DescriptorSet out;
  out.word = word;
  out.year = year;
  out.kind = DescriptorKind::kEvents;
  out.method = model.source == EmbeddingSource::kGlobal ? DescriptorMethod::kByKnnGlobCls
                                                         : DescriptorMethod::kByKnnCls;
  out.no_candidates = base.no_candidates;
  if (base.items.empty()) return out;

  double lo = base.items.front().score, hi = lo;
  for (const auto& item : base.items) {
    lo = std::min(lo, item.score);
    hi = std::max(hi, item.score);
  }
  for (const auto& item : base.items) {
    const EventRecord& record = catalog.at(item.label);
    const double p = predict(model.classifier, builder.features(item.label, word, record.year));
    const double s = hi > lo ? (item.score - lo) / (hi - lo) : 1.0;
    out.items.push_back({item.label, std::sqrt(std::max(p, kEpsilon) * std::max(s, kEpsilon)), item.title});
  }
  std::sort(out.items.begin(), out.items.end(), [](const DescriptorItem& a, const DescriptorItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.label < b.label;
  });
  if (out.items.size() > static_cast<std::size_t>(params.n_out)) out.items.resize(params.n_out);
  return out;
}

}  // namespace chronoshift
