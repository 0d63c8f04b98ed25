// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "chronoshift/align.h"
#include "chronoshift/change.h"
#include "chronoshift/classifier.h"
#include "chronoshift/cli.h"
#include "chronoshift/influence.h"
#include "chronoshift/linalg.h"
#include "chronoshift/sgns.h"
#include "chronoshift/synthgen.h"
#include "chronoshift/timeline.h"
#include "test_util.h"

namespace chronoshift {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

Eigen::MatrixXd random_orthogonal(int n, std::uint64_t seed) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(testing::gaussian_matrix(n, n, seed));
  return qr.householderQ();
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// ------------------------------------------------------------------ 1

Outcome procrustes_recovery() {
  const auto start = Clock::now();
  const EmbeddingSpace base = testing::random_space(500, 50, 101, true);
  const Eigen::MatrixXd r_star = random_orthogonal(50, 102);
  const auto& anchors = base.vocab().tokens();

  RowMatrix moved = base.matrix() * r_star.transpose();
  const EmbeddingSpace clean(base.vocab(), moved, "clean", 1, true);
  const double err = (procrustes(clean, base, anchors) - r_star).norm();

  RowMatrix noisy = moved + 0.01 * testing::gaussian_matrix(500, 50, 103);
  const EmbeddingSpace noisy_space = normalize(EmbeddingSpace(base.vocab(), noisy, "noisy", 1));
  const Eigen::MatrixXd r = procrustes(noisy_space, base, anchors);
  const EmbeddingSpace back = transform_space(noisy_space, r, "back", true);
  double mean_cos = 0;
  for (const auto& t : anchors) mean_cos += cosine(back.vector(t), base.vector(t));
  mean_cos /= static_cast<double>(anchors.size());
  const double secs = seconds_since(start);
  return {err < 1e-6 && mean_cos > 0.99 && secs < 5,
          fmt("|R-R*|_F=%.2e (<1e-6), noisy mean anchor cos=%.5f (>0.99), %.2fs (<5s)", err, mean_cos, secs)};
}

// ------------------------------------------------------------------ 2

Outcome projection_recovery() {
  const auto start = Clock::now();
  const std::size_t n = 400, p = 40, d = 30;
  RowMatrix x = testing::gaussian_matrix(n + 1, p, 201);
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < n; ++i) tokens.push_back("g" + std::to_string(i));
  tokens.push_back("wiki:Event");
  const EmbeddingSpace global(Vocabulary(tokens), x, "global");
  const Eigen::MatrixXd t_star = testing::gaussian_matrix(p, d, 202);
  const RowMatrix y = x.topRows(n) * t_star;
  const EmbeddingSpace temporal(Vocabulary(std::vector<std::string>(tokens.begin(), tokens.end() - 1)), y,
                                "2000", 2000);
  const ProjectionMap map = fit_projection(global, temporal, 0.0);
  const double err = (map.matrix - t_star).norm();
  const EmbeddingSpace projected = apply_projection(global, map, 2000);
  const Eigen::VectorXd truth = x.row(n) * t_star;
  const double cos = cosine(projected.vector("wiki:Event"), std::span<const double>(truth.data(), truth.size()));
  const double secs = seconds_since(start);
  return {err < 1e-6 && cos > 0.999 && secs < 5,
          fmt("|T-T*|_F=%.2e (<1e-6), held-out event cos=%.9f (>0.999), %.2fs (<5s)", err, cos, secs)};
}

// ------------------------------------------------------------------ 3

Outcome svd_kernel() {
  double worst_res = 0, worst_orth = 0;
  for (auto [r, c, seed] : {std::tuple{20, 10, 301}, std::tuple{100, 40, 302}}) {
    const Eigen::MatrixXd a = testing::gaussian_matrix(r, c, seed);
    const Svd s = svd(a);
    worst_res = std::max(worst_res, (s.U * s.S.asDiagonal() * s.V.transpose() - a).norm() / a.norm());
    worst_orth = std::max({worst_orth, orthogonality_defect(s.U), orthogonality_defect(s.V)});
  }
  return {worst_res < 1e-8 && worst_orth < 1e-8,
          fmt("relative residual=%.2e (<1e-8), orthonormality defect=%.2e (<1e-8)", worst_res, worst_orth)};
}

// ------------------------------------------------------------------ 4

Outcome turning_points() {
  const auto start = Clock::now();
  SeriesSpec spec;
  spec.vocab_size = 50;
  spec.dim = 16;
  spec.n_years = 20;
  spec.noise = 0.02;
  spec.rotate = true;
  spec.seed = 401;
  const double theta = M_PI / 3;
  spec.shifts = {{"w0003", 1993, theta, {}}, {"w0011", 1996, theta, {}}, {"w0019", 1999, theta, {}},
                 {"w0027", 2002, theta, {}}, {"w0042", 2006, theta, {}}};
  const SynthSeries s = gen_series(spec);
  const AlignedSeries aligned = align_series(s.spaces);
  std::set<std::pair<std::string, int>> truth;
  for (const auto& t : s.truth) truth.emplace(t.word, t.year);

  auto run = [&](ChangeMethod method) {
    std::set<std::pair<std::string, int>> found;
    for (std::size_t i = 0; i < spec.vocab_size; ++i) {
      const auto series = change_series(aligned, synth_word(i), ChangeParams{method, 20});
      for (const auto& tp : detect_turning_points(series, DetectParams{1.5, 0.2})) found.emplace(tp.word, tp.year);
    }
    std::size_t hit = 0;
    for (const auto& f : found) hit += truth.count(f);
    const double precision = found.empty() ? 0.0 : static_cast<double>(hit) / found.size();
    const double recall = static_cast<double>(hit) / truth.size();
    return std::pair{precision, recall};
  };
  const auto [ep, er] = run(ChangeMethod::kEmbeddingSimilarity);
  const auto [np, nr] = run(ChangeMethod::kNeighborhood);
  const double secs = seconds_since(start);
  return {ep == 1.0 && er == 1.0 && nr >= 0.8 && secs < 30,
          fmt("embedding P=%.2f R=%.2f (=1), neighborhood P=%.2f R=%.2f (R>=0.8), %.2fs (<30s)", ep, er, np, nr,
              secs)};
}

// ------------------------------------------------------------------ 5

Outcome knn_exactness() {
  const EmbeddingSpace space = testing::random_space(10000, 64, 501);
  std::mt19937_64 rng(502);
  int mismatches = 0;
  for (int q = 0; q < 50; ++q) {
    const std::size_t id = rng() % space.size();
    const std::string word = space.vocab().token(id);
    const auto got = knn(space, word, 20);
    // Oracle: every cosine via the scalar formula, full sort, ties by token.
    std::vector<std::pair<double, std::string>> all;
    const auto qv = space.row(id);
    for (std::size_t i = 0; i < space.size(); ++i) {
      if (i == id) continue;
      double dot = 0, a = 0, b = 0;
      const auto v = space.row(i);
      for (std::size_t j = 0; j < 64; ++j) dot += qv[j] * v[j], a += qv[j] * qv[j], b += v[j] * v[j];
      all.emplace_back(-dot / std::sqrt(a * b), space.vocab().token(i));
    }
    std::sort(all.begin(), all.end());
    for (std::size_t r = 0; r < 20; ++r)
      if (got.entries[r].token != all[r].second || std::abs(got.entries[r].similarity + all[r].first) > 1e-12)
        ++mismatches;
  }
  return {mismatches == 0, fmt("%d mismatched entries over 50 queries x top-20 on 10000x64", mismatches)};
}

// ------------------------------------------------------------------ 6

Outcome sgns_end_to_end() {
  const auto start = Clock::now();
  CorpusSpec cs;
  cs.docs_per_year = 1000;
  cs.doc_length = 50;
  cs.words_per_topic = 20;
  cs.seed = 601;
  const YearCorpus corpus = make_year_corpus(2000, gen_corpus(cs).at(2000));
  SgnsConfig cfg;
  cfg.dim = 50;
  cfg.epochs = 5;
  cfg.min_count = 1;
  cfg.subsample_t = 0;  // 40 equally frequent words; subsampling would discard most tokens
  cfg.seed = 602;
  const EmbeddingSpace space = train_sgns(corpus, cfg);
  double intra = 0, inter = 0;
  int ni = 0, nx = 0;
  for (int a = 0; a < 20; ++a) {
    for (int b = 0; b < 20; ++b) {
      for (int t = 0; t < 2; ++t) {
        const auto u = space.vector("t" + std::to_string(t) + "w" + std::to_string(a));
        if (a != b) {
          intra += cosine(u, space.vector("t" + std::to_string(t) + "w" + std::to_string(b)));
          ++ni;
        }
        inter += cosine(u, space.vector("t" + std::to_string(1 - t) + "w" + std::to_string(b)));
        ++nx;
      }
    }
  }
  intra /= ni;
  inter /= nx;
  const double secs = seconds_since(start);
  return {corpus.total_tokens() >= 50000 && intra - inter >= 0.2 && secs < 120,
          fmt("%llu tokens, intra=%.3f inter=%.3f gap=%.3f (>=0.2), %.1fs (<120s)",
              static_cast<unsigned long long>(corpus.total_tokens()), intra, inter, intra - inter, secs)};
}

// ------------------------------------------------------------------ 7

Outcome gradient_checks() {
  const Eigen::MatrixXd x = testing::gaussian_matrix(30, 6, 701);
  Eigen::VectorXd y(30);
  for (int i = 0; i < 30; ++i) y(i) = (i * 7) % 3 == 0 ? 1 : 0;
  std::mt19937_64 rng(702);
  std::normal_distribution<double> g(0, 0.6);
  const double h = 1e-6, l2 = 0.01;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)}); };
  double worst_lr = 0, worst_mlp = 0;
  for (int point = 0; point < 10; ++point) {
    Eigen::VectorXd w(6);
    for (auto& v : w) v = g(rng);
    const double b = g(rng);
    Eigen::VectorXd gw;
    double gb;
    logreg_loss(w, b, x, y, l2, &gw, &gb);
    for (int j = 0; j < 6; ++j) {
      Eigen::VectorXd up = w, dn = w;
      up(j) += h;
      dn(j) -= h;
      worst_lr = std::max(worst_lr, rel(gw(j), (logreg_loss(up, b, x, y, l2) - logreg_loss(dn, b, x, y, l2)) / (2 * h)));
    }
    worst_lr = std::max(worst_lr, rel(gb, (logreg_loss(w, b + h, x, y, l2) - logreg_loss(w, b - h, x, y, l2)) / (2 * h)));

    MlpParams p;
    p.w1.resize(8, 6);
    p.b1.resize(8);
    p.w2.resize(8);
    for (auto& v : p.w1.reshaped()) v = g(rng);
    for (auto& v : p.b1) v = g(rng);
    for (auto& v : p.w2) v = g(rng);
    p.b2 = g(rng);
    MlpParams grad;
    mlp_loss(p, x, y, l2, &grad);
    auto check = [&](double analytic, const std::function<void(MlpParams&, double)>& poke) {
      MlpParams up = p, dn = p;
      poke(up, h);
      poke(dn, -h);
      const double num = (mlp_loss(up, x, y, l2) - mlp_loss(dn, x, y, l2)) / (2 * h);
      worst_mlp = std::max(worst_mlp, rel(analytic, num));
    };
    for (int i = 0; i < 8; ++i) {
      for (int j = 0; j < 6; ++j) check(grad.w1(i, j), [&](MlpParams& q, double d) { q.w1(i, j) += d; });
      check(grad.b1(i), [&](MlpParams& q, double d) { q.b1(i) += d; });
      check(grad.w2(i), [&](MlpParams& q, double d) { q.w2(i) += d; });
    }
    check(grad.b2, [&](MlpParams& q, double d) { q.b2 += d; });
  }
  return {worst_lr < 1e-4 && worst_mlp < 1e-4,
          fmt("max relative error logreg=%.2e mlp=%.2e (<1e-4) over 10 points", worst_lr, worst_mlp)};
}

// ------------------------------------------------------------------ 8

Outcome auc_checks() {
  const double exact = auc({0.9, 0.8, 0.4, 0.3}, {1, 0, 1, 0});
  const Eigen::MatrixXd x = testing::gaussian_matrix(2000, 20, 801);
  Eigen::VectorXd y(2000);
  for (int i = 0; i < 2000; ++i) y(i) = i < 1000 ? 1 : 0;
  std::vector<double> labels(y.data(), y.data() + y.size());
  std::shuffle(labels.begin(), labels.end(), std::mt19937_64(802));
  y = Eigen::Map<Eigen::VectorXd>(labels.data(), 2000);
  const EvalReport r = cross_validate(x, y, ModelKind::kLogReg, TrainConfig{}, 10, 803);
  return {exact == 0.75 && std::abs(r.mean.auc - 0.5) <= 0.05,
          fmt("hand example AUC=%.17g (=0.75), permutation-null mean CV AUC=%.3f (0.5+-0.05)", exact, r.mean.auc)};
}

// ------------------------------------------------------------------ 9 and 10 share one world

struct World {
  SynthWorld synth;
  AlignedSeries aligned;
  YearSpaces projected;
  InfluenceSpaces spaces() const { return {&aligned, &synth.global, &projected}; }
};

const World& world() {
  static const World w = [] {
    World out;
    out.synth = gen_world(WorldSpec{});
    out.aligned = align_series(out.synth.series);
    for (int y : out.aligned.years()) out.projected.emplace(y, project_global(out.synth.global, out.aligned.at(y)));
    return out;
  }();
  return w;
}

Outcome influence_classifier() {
  const auto start = Clock::now();
  const World& w = world();
  const ChangeDetector detector(w.aligned);
  auto evaluate_source = [&](EmbeddingSource source, ModelKind kind) {
    PairParams pp;
    pp.source = source;
    const auto pairs = build_training_pairs(w.synth.catalog, w.spaces(), detector, pp);
    const FeatureBuilder b(w.synth.catalog, w.spaces(), source, category_index(w.synth.catalog));
    return std::pair{cross_validate(b.matrix(pairs), labels_of(pairs), kind, TrainConfig{}, 10, 1,
                                    b.popularity_columns()),
                     pairs};
  };
  const auto [lr, pairs] = evaluate_source(EmbeddingSource::kProjected, ModelKind::kLogReg);
  const auto [mlp, unused] = evaluate_source(EmbeddingSource::kProjected, ModelKind::kMlp);
  const auto [glob, gpairs] = evaluate_source(EmbeddingSource::kGlobal, ModelKind::kMlp);
  (void)unused;
  // Precision of the labelling rules against the planted truth.
  std::size_t rule_pos = 0, rule_pos_true = 0;
  for (const auto& p : pairs)
    if (p.label == 1) ++rule_pos, rule_pos_true += w.synth.truth_label(p.event_id, p.term);
  const double rule_precision = rule_pos ? static_cast<double>(rule_pos_true) / rule_pos : 0.0;
  const double secs = seconds_since(start);
  const bool ok = lr.mean.auc >= 0.85 && mlp.mean.auc >= 0.9 && mlp.mean.auc >= lr.mean.auc &&
                  mlp.mean.auc > glob.mean.auc && secs < 300;
  return {ok, fmt("%zu pairs; logreg AUC=%.3f (>=0.85), MLP AUC=%.3f (>=0.9, >=logreg), global-source MLP "
                  "AUC=%.3f (<projected); rule precision=%.3f; %.1fs (<300s)",
                  pairs.size(), lr.mean.auc, mlp.mean.auc, glob.mean.auc, rule_precision, secs)};
}

struct FilterCount {
  int queries = 0, distractors = 0, above_before = 0, above_after = 0;
};

// Checks, for every planted (influential event, affected term) pair, that no
// distractor in the term's ByKNN top-30 outranks the event after reranking.
// `use` restricts the queried events; the model is trained on `train`.
FilterCount count_filtering(const std::vector<TrainingPair>& train, const FeatureBuilder& builder,
                            const std::function<bool(const std::string&)>& use) {
  const World& w = world();
  const InfluenceModel model = train_influence(train, builder, ModelKind::kMlp, TrainConfig{});
  auto position = [](const DescriptorSet& s, const std::string& id) {
    for (std::size_t i = 0; i < s.items.size(); ++i)
      if (s.items[i].label == id) return static_cast<int>(i);
    return -1;
  };
  FilterCount c;
  for (const auto& t : w.synth.influence) {
    if (t.label != 1 || !use(t.event_id)) continue;
    const JointSpace joint(w.aligned.at(t.year), w.projected.at(t.year));
    const DescriptorSet base =
        top_events(t.term, t.year, EventQuery{DescriptorMethod::kByKnn, 30, 20, 0}, w.synth.catalog, joint);
    const DescriptorSet ranked =
        rank_by_knn_cls(t.term, t.year, w.synth.catalog, joint, model, builder, RerankParams{30, 30, 20, 0});
    const int event_before = position(base, t.event_id);
    const int event_after = position(ranked, t.event_id);
    if (event_after < 0) continue;
    ++c.queries;
    for (const auto& item : ranked.items) {
      const EventRole role = w.synth.roles.at(item.label);
      if (role != EventRole::kDistractor && role != EventRole::kCoTimedDistractor) continue;
      ++c.distractors;
      if (position(base, item.label) < event_before) ++c.above_before;
      if (position(ranked, item.label) < event_after) ++c.above_after;
    }
  }
  return c;
}

Outcome knncls_filtering() {
  const World& w = world();
  const ChangeDetector detector(w.aligned);
  const auto pairs = build_training_pairs(w.synth.catalog, w.spaces(), detector, PairParams{});
  const FeatureBuilder builder(w.synth.catalog, w.spaces(), EmbeddingSource::kProjected,
                               category_index(w.synth.catalog));

  // Deployed setting: the model the CLI builds from the full rule-labelled dataset.
  const FilterCount full = count_filtering(pairs, builder, [](const std::string&) { return true; });

  // Stricter diagnostic: two folds over events, so the queried event never appears in training.
  std::vector<std::string> ids;
  for (const auto& [id, r] : w.synth.catalog.records()) ids.push_back(id);
  std::shuffle(ids.begin(), ids.end(), std::mt19937_64(1001));
  std::map<std::string, int> fold;
  for (std::size_t i = 0; i < ids.size(); ++i) fold[ids[i]] = static_cast<int>(i % 2);
  int held_out_above = 0;
  for (int f = 0; f < 2; ++f) {
    std::vector<TrainingPair> train;
    for (const auto& p : pairs)
      if (fold[p.event_id] != f) train.push_back(p);
    held_out_above +=
        count_filtering(train, builder, [&](const std::string& id) { return fold.at(id) == f; }).above_after;
  }
  return {full.queries > 0 && full.above_after == 0,
          fmt("%d (term, influential event) queries; %d distractors in ByKNN top-30; ranked above the "
              "event: %d before reranking, %d after (=0); event-held-out models: %d after",
              full.queries, full.distractors, full.above_before, full.above_after, held_out_above)};
}

// ------------------------------------------------------------------ 11

Outcome metric_formulas() {
  Timeline tl;
  tl.word = "cell";
  DescriptorSet d;
  d.items = {{"a", 0.4, {}}, {"b", 0.3, {}}, {"c", 0.2, {}}, {"e", 0.1, {}}};
  tl.entries = {{2000, 0.5, d}};
  std::stringstream csv(
      "timeline_id,evaluator_id,descriptor_label,judged_true\n"
      "cell,x,a,1\ncell,x,b,1\ncell,x,c,1\ncell,x,e,0\n"
      "cell,x,#missing,1\ncell,x,#redundant,2\ncell,x,#relevance_rank,3\n");
  const MetricRecord m = eval_metrics(tl, parse_annotations(csv).at("cell"), 6);
  const double tau = kendall_tau({1, 2, 3, 4}, {1, 3, 2, 4});
  const bool ok = m.accuracy == 0.75 && m.missing == 0.25 && m.redundancy == 0.5 && m.relevance == 0.5 &&
                  tau == 2.0 / 3.0;
  return {ok, fmt("accuracy=%.17g (0.75) missing=%.17g (0.25) redundancy=%.17g (0.5) relevance=%.17g (0.5) "
                  "tau=%.17g (2/3)",
                  m.accuracy.value_or(-1), m.missing.value_or(-1), m.redundancy.value_or(-1),
                  m.relevance.value_or(-1), tau)};
}

// ------------------------------------------------------------------ 12

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  std::vector<std::map<std::string, std::string>> outputs;
  std::string failure;
  for (int run = 0; run < 2; ++run) {
    const fs::path ws = testing::temp_dir("determinism_" + std::to_string(run));
    const std::string w = ws.string();
    const std::vector<std::vector<std::string>> steps{
        {"synth", "--kind", "world"},
        {"align"},
        {"project"},
        {"classify", "build-dataset"},
        {"classify", "train", "--kind", "mlp"},
        {"detect", "--all", "--out", (ws / "turning_points.json").string()},
    };
    for (auto step : steps) {
      step.insert(step.begin(), {"chronoshift", "--workspace", w, "--workers", "1", "--seed", "7"});
      if (run_cli(step) != 0) failure = "step '" + step[7] + "' failed";
    }
    // Timelines for the ten most frequently flagged words.
    const auto points = nlohmann::json::parse(slurp(ws / "turning_points.json"));
    std::set<std::string> words;
    for (const auto& p : points) {
      if (words.size() >= 10) break;
      words.insert(p["word"].get<std::string>());
    }
    std::vector<std::string> cmd{"chronoshift", "--workspace", w, "--workers", "1", "--seed", "7", "pipeline",
                                 "--method", "byknncls"};
    for (const auto& word : words) cmd.insert(cmd.end(), {"--word", word});
    if (run_cli(cmd) != 0) failure = "pipeline failed";
    std::map<std::string, std::string> files;
    for (const auto& e : fs::directory_iterator(ws / "timelines")) files[e.path().filename().string()] = slurp(e.path());
    outputs.push_back(std::move(files));
  }
  const bool same = outputs[0] == outputs[1];
  return {failure.empty() && same && !outputs[0].empty(),
          fmt("%zu timeline files per run, byte-identical=%s%s", outputs[0].size(), same ? "yes" : "no",
              failure.empty() ? "" : ("; " + failure).c_str())};
}

}  // namespace
}  // namespace chronoshift

int main() {
  using namespace chronoshift;
  SetLogLevel(spdlog::level::err);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"procrustes-recovery", procrustes_recovery},
      {"projection-recovery", projection_recovery},
      {"svd-kernel", svd_kernel},
      {"turning-point-detection", turning_points},
      {"knn-exactness", knn_exactness},
      {"sgns-end-to-end", sgns_end_to_end},
      {"gradient-checks", gradient_checks},
      {"auc-correctness", auc_checks},
      {"influence-classifier", influence_classifier},
      {"knncls-filtering", knncls_filtering},
      {"metric-formulas", metric_formulas},
      {"pipeline-determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << i + 1 << " " << criteria[i].first << ": " << o.detail << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
