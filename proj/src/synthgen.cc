#include "chronoshift/synthgen.h"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <fstream>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "chronoshift/common.h"

namespace chronoshift {
namespace {

using Rng = std::mt19937_64;

Eigen::VectorXd gaussian(std::size_t d, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
  return v;
}

Eigen::VectorXd random_unit(std::size_t d, Rng& rng) {
  Eigen::VectorXd v = gaussian(d, rng);
  return v / v.norm();
}

// Random unit vector orthogonal to every vector in `against`.
Eigen::VectorXd random_orthogonal_to(std::size_t d, Rng& rng, std::initializer_list<Eigen::VectorXd> against) {
  std::vector<Eigen::VectorXd> basis;
  for (const auto& a : against) {
    Eigen::VectorXd u = a;
    for (const auto& b : basis) u -= b.dot(u) * b;
    if (u.norm() > 1e-12) basis.push_back(u / u.norm());
  }
  Eigen::VectorXd v = gaussian(d, rng);
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& b : basis) v -= b.dot(v) * b;
  return v / v.norm();
}

Eigen::MatrixXd random_rotation(std::size_t d, Rng& rng) {
  Eigen::MatrixXd g(d, d);
  for (std::size_t j = 0; j < d; ++j) g.col(j) = gaussian(d, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd r = qr.matrixQR();
  for (std::size_t j = 0; j < d; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

std::vector<std::uint64_t> zipf_counts(std::size_t n) {
  std::vector<std::uint64_t> counts(n);
  for (std::size_t i = 0; i < n; ++i) counts[i] = 1'000'000 / (i + 1) + 1;
  return counts;
}

std::uint64_t year_seed(std::uint64_t seed, int year) {
  return seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(year) * 0xBF58476D1CE4E5B9ULL + 1;
}

struct ResolvedShift {
  std::size_t row;
  int year;
  double theta;
  Eigen::VectorXd target;
};

// Applies shifts year by year and renders noisy, independently rotated spaces.
YearSpaces render_years(const std::vector<std::string>& words, const std::vector<std::uint64_t>& counts,
                        const Eigen::MatrixXd& base, const std::vector<ResolvedShift>& shifts, int first_year,
                        int n_years, double noise, bool rotate, std::uint64_t seed,
                        const std::set<std::pair<std::string, int>>& dropouts) {
  const std::size_t d = static_cast<std::size_t>(base.cols());
  Eigen::MatrixXd clean = base;
  YearSpaces out;
  for (int y = first_year; y < first_year + n_years; ++y) {
    for (const auto& s : shifts) {
      if (s.year != y) continue;
      const Eigen::VectorXd v = clean.row(s.row).transpose();
      Eigen::VectorXd u = s.target - s.target.dot(v) * v;
      Require(u.norm() > 1e-9, errc::kInvalidArgument, "shift target is parallel to " + words[s.row]);
      u /= u.norm();
      clean.row(s.row) = (std::cos(s.theta) * v + std::sin(s.theta) * u).transpose();
    }
    Rng rng(year_seed(seed, y));
    std::normal_distribution<double> normal(0.0, noise > 0 ? noise : 1.0);
    Eigen::MatrixXd m = clean;
    if (noise > 0)
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) += normal(rng);
    if (rotate) m = m * random_rotation(d, rng);

    std::vector<std::string> toks;
    std::vector<std::uint64_t> cnts;
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (dropouts.count({words[i], y})) continue;
      toks.push_back(words[i]);
      cnts.push_back(counts[i]);
      rows.push_back(static_cast<Eigen::Index>(i));
    }
    RowMatrix kept = m(rows, Eigen::all);
    out.emplace(y, EmbeddingSpace(Vocabulary(std::move(toks), std::move(cnts)), std::move(kept),
                                  "synth-" + std::to_string(y), y));
  }
  return out;
}

std::vector<std::string> word_names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(synth_word(i));
  return out;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

std::string synth_word(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "w%04zu", index);
  return buf;
}

void SeriesSpec::validate() const {
  std::vector<std::string> problems;
  if (vocab_size < 2) problems.push_back("vocab_size must be >= 2");
  if (dim < 2) problems.push_back("dim must be >= 2");
  if (n_years < 1) problems.push_back("n_years must be >= 1");
  if (noise < 0) problems.push_back("noise must be >= 0");
  for (const auto& s : shifts) {
    if (!(s.theta > 0 && s.theta <= M_PI)) problems.push_back("shift of " + s.word + ": theta must lie in (0, pi]");
    if (s.year < first_year || s.year >= first_year + n_years)
      problems.push_back("shift of " + s.word + ": year outside the series");
    if (!s.target.empty() && s.target.size() != dim)
      problems.push_back("shift of " + s.word + ": target has the wrong dimension");
  }
  if (!problems.empty()) {
    std::string msg = "invalid series spec:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw Error(errc::kConfig, msg);
  }
}

SynthSeries gen_series(const SeriesSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const auto words = word_names(spec.vocab_size);
  const auto counts = zipf_counts(spec.vocab_size);
  Eigen::MatrixXd base(spec.vocab_size, spec.dim);
  for (std::size_t i = 0; i < spec.vocab_size; ++i) base.row(i) = random_unit(spec.dim, rng).transpose();

  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < words.size(); ++i) row_of[words[i]] = i;
  SynthSeries out;
  std::vector<ResolvedShift> shifts;
  for (const auto& s : spec.shifts) {
    auto it = row_of.find(s.word);
    Require(it != row_of.end(), errc::kInvalidArgument, "shift word '" + s.word + "' not in the synthetic vocabulary");
    Eigen::VectorXd target = s.target.empty() ? random_unit(spec.dim, rng)
                                              : Eigen::Map<const Eigen::VectorXd>(s.target.data(), spec.dim);
    shifts.push_back({it->second, s.year, s.theta, target});
    out.truth.push_back({s.word, s.year, s.theta});
  }
  const std::set<std::pair<std::string, int>> dropouts(spec.dropouts.begin(), spec.dropouts.end());
  out.spaces = render_years(words, counts, base, shifts, spec.first_year, spec.n_years, spec.noise, spec.rotate,
                            spec.seed, dropouts);
  out.base = EmbeddingSpace(Vocabulary(words, counts), RowMatrix(base), "synth-base", std::nullopt, true);
  return out;
}

std::map<int, std::vector<std::vector<std::string>>> gen_corpus(const CorpusSpec& spec) {
  Require(spec.topics >= 1 && spec.words_per_topic >= 1 && spec.doc_length >= 1 && spec.n_years >= 1,
          errc::kConfig, "corpus spec: topics, words_per_topic, doc_length and n_years must be >= 1");
  std::vector<std::vector<std::string>> topic_words(spec.topics);
  for (std::size_t k = 0; k < spec.topics; ++k)
    for (std::size_t i = 0; i < spec.words_per_topic; ++i)
      topic_words[k].push_back("t" + std::to_string(k) + "w" + std::to_string(i));
  for (const auto& s : spec.switches)
    Require(s.to_topic < spec.topics, errc::kConfig, "topic switch of '" + s.word + "' targets a missing topic");

  Rng rng(spec.seed);
  std::map<int, std::vector<std::vector<std::string>>> out;
  for (int y = spec.first_year; y < spec.first_year + spec.n_years; ++y) {
    auto members = topic_words;
    for (std::size_t i = 0; i < spec.switches.size(); ++i) {
      const auto& s = spec.switches[i];
      members[y >= s.year ? s.to_topic : i % spec.topics].push_back(s.word);
    }
    auto& docs = out[y];
    std::uniform_int_distribution<std::size_t> pick_topic(0, spec.topics - 1);
    for (std::size_t n = 0; n < spec.docs_per_year; ++n) {
      const auto& pool = members[pick_topic(rng)];
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      std::vector<std::string> doc;
      doc.reserve(spec.doc_length);
      for (std::size_t t = 0; t < spec.doc_length; ++t) doc.push_back(pool[pick(rng)]);
      docs.push_back(std::move(doc));
    }
  }
  return out;
}

void write_corpus(const std::map<int, std::vector<std::vector<std::string>>>& corpus,
                  const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [year, docs] : corpus) {
    const auto path = dir / (std::to_string(year) + ".txt");
    std::ofstream out(path);
    Require(out.is_open(), errc::kIo, "cannot open for writing: " + path.string());
    for (const auto& doc : docs) {
      for (std::size_t i = 0; i < doc.size(); ++i) out << (i ? " " : "") << doc[i];
      out << '\n';
    }
  }
}

std::string to_string(EventRole role) {
  switch (role) {
    case EventRole::kInfluential: return "influential";
    case EventRole::kDistractor: return "distractor";
    case EventRole::kCoTimedDistractor: return "cotimed-distractor";
    case EventRole::kBackground: return "background";
  }
  return "unknown";
}

void WorldSpec::validate() const {
  std::vector<std::string> problems;
  if (dim < 4) problems.push_back("dim must be >= 4");
  if (n_years < 8) problems.push_back("n_years must be >= 8");
  if (n_influential < 1) problems.push_back("n_influential must be >= 1");
  if (n_distractors < 0 || n_background < 0) problems.push_back("event counts must be >= 0");
  if (n_cotimed < 0 || n_cotimed > n_influential) problems.push_back("n_cotimed must lie in [0, n_influential]");
  if (affected_per_event < 1 || related_per_event < 0) problems.push_back("per-event term counts out of range");
  const std::size_t needed = static_cast<std::size_t>(n_influential) * (affected_per_event + related_per_event) +
                             static_cast<std::size_t>(n_distractors) * related_per_event;
  if (needed > vocab_size) problems.push_back("vocab_size too small for the planted terms");
  if (noise < 0 || global_noise < 0) problems.push_back("noise must be >= 0");
  if (!(std::cos(psi) + cotimed_margin < 1.0)) problems.push_back("cos(psi) + cotimed_margin must be < 1");
  if (!problems.empty()) {
    std::string msg = "invalid world spec:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw Error(errc::kConfig, msg);
  }
}

int SynthWorld::truth_label(const std::string& event, const std::string& term) const {
  for (const auto& t : influence)
    if (t.event_id == event && t.term == term) return t.label;
  return 0;
}

SynthWorld gen_world(const WorldSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t d = spec.dim;
  const auto words = word_names(spec.vocab_size);
  const auto counts = zipf_counts(spec.vocab_size);
  Eigen::MatrixXd base(spec.vocab_size, d);
  for (std::size_t i = 0; i < spec.vocab_size; ++i) base.row(i) = random_unit(d, rng).transpose();

  std::vector<std::size_t> pool(spec.vocab_size);
  std::iota(pool.begin(), pool.end(), 0);
  std::shuffle(pool.begin(), pool.end(), rng);
  std::size_t next_word = 0;
  auto take_word = [&] { return pool[next_word++]; };

  std::vector<int> years;
  for (int y = spec.first_year + 2; y <= spec.first_year + spec.n_years - 5; ++y) years.push_back(y);
  std::uniform_int_distribution<int> delay(1, 3);
  std::uniform_real_distribution<double> related_angle(spec.related_min, spec.related_max);

  SynthWorld world;
  std::vector<ResolvedShift> shifts;
  std::vector<EventRecord> records;
  std::vector<Eigen::VectorXd> event_dirs;
  std::map<std::string, std::vector<std::string>> event_terms;

  auto categories = [&](const std::string& pool_name) {
    std::uniform_int_distribution<int> pick(0, 7);
    const int a = pick(rng);
    int b = pick(rng);
    if (b == a) b = (a + 1) % 8;
    std::vector<std::string> cats{pool_name + "_" + std::to_string(a), pool_name + "_" + std::to_string(b)};
    if (rng() % 2) cats.push_back("shared_" + std::to_string(rng() % 4));
    return cats;
  };
  auto add_event = [&](const std::string& id, EventRole role, int year, const Eigen::VectorXd& dir,
                       const std::string& cat_pool) {
    EventRecord r;
    r.id = id;
    r.title = to_string(role) + " event " + id.substr(id.find(':') + 1);
    r.year = year;
    r.month = static_cast<int>(rng() % 12) + 1;
    r.categories = categories(cat_pool);
    r.internal_links = 20 + static_cast<std::int64_t>(rng() % 381);
    r.external_links = 16 + static_cast<std::int64_t>(rng() % 185);
    r.pageviews = 6001 + static_cast<std::int64_t>(rng() % 54000);
    records.push_back(std::move(r));
    event_dirs.push_back(dir);
    world.roles[id] = role;
    world.base_events[id] = to_std(dir);
  };
  auto shift = [&](std::size_t row, int year, const Eigen::VectorXd& target) {
    shifts.push_back({row, year, spec.shift_theta, target});
    world.shifts.push_back({words[row], year, spec.shift_theta});
  };
  auto id_for = [](char tag, int i) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "wiki:%c%03d", tag, i);
    return std::string(buf);
  };

  const double cpsi = std::cos(spec.psi), spsi = std::sin(spec.psi);
  const double cth = std::cos(spec.shift_theta), sth = std::sin(spec.shift_theta);
  std::vector<std::pair<std::string, std::size_t>> first_affected;  // per influential event
  for (int i = 0; i < spec.n_influential; ++i) {
    const std::string id = id_for('I', i);
    const int t = years[i % years.size()];
    const Eigen::VectorXd e = random_unit(d, rng);
    for (int a = 0; a < spec.affected_per_event; ++a) {
      const std::size_t row = take_word();
      const Eigen::VectorXd p = cpsi * e + spsi * random_orthogonal_to(d, rng, {e});
      base.row(row) = (cth * p + sth * random_orthogonal_to(d, rng, {p})).transpose();
      shift(row, t, p);
      world.influence.push_back({id, words[row], t, 1});
      world.post_shift[words[row]] = to_std(p);
      event_terms[id].push_back(words[row]);
      if (a == 0) first_affected.emplace_back(id, row);
    }
    for (int r = 0; r < spec.related_per_event; ++r) {
      const std::size_t row = take_word();
      const double phi = related_angle(rng);
      base.row(row) = (std::cos(phi) * e + std::sin(phi) * random_orthogonal_to(d, rng, {e})).transpose();
      shift(row, t + delay(rng), random_unit(d, rng));
      world.influence.push_back({id, words[row], t, 0});
      event_terms[id].push_back(words[row]);
    }
    add_event(id, EventRole::kInfluential, t, e, "infl");
  }

  const double cdr = std::cos(spec.distractor_related), sdr = std::sin(spec.distractor_related);
  for (int j = 0; j < spec.n_distractors; ++j) {
    const std::string id = id_for('D', j);
    const int t = years[(j + years.size() / 2) % years.size()];
    const Eigen::VectorXd e = random_unit(d, rng);
    for (int r = 0; r < spec.related_per_event; ++r) {
      const std::size_t row = take_word();
      base.row(row) = (cdr * e + sdr * random_orthogonal_to(d, rng, {e})).transpose();
      shift(row, t + delay(rng), random_unit(d, rng));
      world.influence.push_back({id, words[row], t, 0});
      event_terms[id].push_back(words[row]);
    }
    add_event(id, EventRole::kDistractor, t, e, "dist");
  }

  // Co-timed distractors: slightly closer to an affected term than its own
  // influential event, same year, but no influence.
  const double target_cos = cpsi + spec.cotimed_margin;
  for (int c = 0; c < spec.n_cotimed; ++c) {
    const auto& [event, row] = first_affected[static_cast<std::size_t>(c) * spec.n_influential / spec.n_cotimed];
    const Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(world.post_shift[words[row]].data(), d);
    const Eigen::VectorXd e = Eigen::Map<const Eigen::VectorXd>(world.base_events[event].data(), d);
    const Eigen::VectorXd dir =
        target_cos * p + std::sqrt(1.0 - target_cos * target_cos) * random_orthogonal_to(d, rng, {p, e});
    const std::string id = id_for('C', c);
    int year = 0;
    for (const auto& r : records)
      if (r.id == event) year = r.year;
    world.influence.push_back({id, words[row], year, 0});
    world.cotimed.push_back({id, event, words[row], year});
    event_terms[id].push_back(words[row]);
    add_event(id, EventRole::kCoTimedDistractor, year, dir, "dist");
  }

  for (int b = 0; b < spec.n_background; ++b)
    add_event(id_for('B', b), EventRole::kBackground, years[b % years.size()], random_unit(d, rng), "bg");

  // Page text mentions each related term a few times among random words.
  std::uniform_int_distribution<std::size_t> any_word(0, spec.vocab_size - 1);
  for (auto& r : records) {
    std::string text = r.title + ".";
    for (const auto& term : event_terms[r.id])
      for (std::size_t n = 1 + rng() % 3; n > 0; --n) text += " " + term;
    for (int n = 0; n < 20; ++n) text += " " + words[any_word(rng)];
    r.page_text = text;
  }

  // Global frame: pre-shift words and event directions under one rotation.
  Rng grng(year_seed(spec.seed, -1));
  const Eigen::MatrixXd m = random_rotation(d, grng);
  std::normal_distribution<double> gnoise(0.0, spec.global_noise > 0 ? spec.global_noise : 1.0);
  std::vector<std::string> gtokens = words;
  std::vector<std::uint64_t> gcounts = counts;
  RowMatrix g(spec.vocab_size + records.size(), d);
  g.topRows(spec.vocab_size) = base * m;
  for (std::size_t i = 0; i < records.size(); ++i) {
    g.row(spec.vocab_size + i) = event_dirs[i].transpose() * m;
    gtokens.push_back(records[i].id);
    gcounts.push_back(1);
  }
  if (spec.global_noise > 0)
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) += gnoise(grng);
  world.global = EmbeddingSpace(Vocabulary(std::move(gtokens), std::move(gcounts)), std::move(g), "global");

  world.series = render_years(words, counts, base, shifts, spec.first_year, spec.n_years, spec.noise, spec.rotate,
                              spec.seed, {});
  world.catalog = EventCatalog(std::move(records));
  return world;
}

void write_world(const SynthWorld& world, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_year_spaces(world.series, dir / "temporal");
  save_space(world.global, dir / "global.temb", VectorFormat::kBinary);
  save_events(world.catalog, dir / "events.jsonl");

  nlohmann::ordered_json j;
  j["shifts"] = nlohmann::ordered_json::array();
  for (const auto& s : world.shifts) j["shifts"].push_back({{"word", s.word}, {"year", s.year}, {"theta", s.theta}});
  j["events"] = nlohmann::ordered_json::array();
  for (const auto& [id, role] : world.roles) j["events"].push_back({{"id", id}, {"role", to_string(role)}});
  j["influence"] = nlohmann::ordered_json::array();
  for (const auto& t : world.influence)
    j["influence"].push_back({{"event_id", t.event_id}, {"term", t.term}, {"year", t.year}, {"label", t.label}});
  j["cotimed"] = nlohmann::ordered_json::array();
  for (const auto& c : world.cotimed)
    j["cotimed"].push_back({{"distractor", c.distractor}, {"event", c.event}, {"term", c.term}, {"year", c.year}});
  std::ofstream out(dir / "truth.json");
  Require(out.is_open(), errc::kIo, "cannot write truth.json in " + dir.string());
  out << j.dump(2) << '\n';
}

}  // namespace chronoshift
