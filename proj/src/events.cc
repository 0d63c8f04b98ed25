#include "chronoshift/events.h"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "chronoshift/common.h"

namespace chronoshift {
namespace {

using nlohmann::json;

template <typename T>
T required(const json& j, const char* field) {
  Require(j.contains(field), errc::kFormat, std::string("missing required field '") + field + "'");
  try {
    return j.at(field).get<T>();
  } catch (const json::exception&) {
    throw Error(errc::kFormat, std::string("field '") + field + "' has the wrong type");
  }
}

}  // namespace

EventCatalog::EventCatalog(std::vector<EventRecord> records) {
  for (auto& r : records) {
    Require(!r.id.empty(), errc::kFormat, "event with empty id");
    Require(r.internal_links >= 0 && r.external_links >= 0 && r.pageviews >= 0, errc::kFormat,
            "event '" + r.id + "' has a negative counter");
    Require(!r.month || (*r.month >= 1 && *r.month <= 12), errc::kFormat,
            "event '" + r.id + "' has month outside 1..12");
    const std::string id = r.id;
    const int year = r.year;
    Require(records_.emplace(id, std::move(r)).second, errc::kFormat, "duplicate event id '" + id + "'");
    by_year_[year].push_back(id);
  }
  for (auto& [year, ids] : by_year_) std::sort(ids.begin(), ids.end());
}

const EventRecord& EventCatalog::at(const std::string& id) const {
  auto it = records_.find(id);
  Require(it != records_.end(), errc::kNotFound, "unknown event '" + id + "'");
  return it->second;
}

EventRecord parse_event_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(errc::kFormat, std::string("malformed JSON: ") + e.what());
  }
  Require(j.is_object(), errc::kFormat, "event line is not a JSON object");
  EventRecord r;
  r.id = required<std::string>(j, "id");
  r.title = required<std::string>(j, "title");
  r.year = required<int>(j, "year");
  r.categories = required<std::vector<std::string>>(j, "categories");
  r.internal_links = required<std::int64_t>(j, "internal_links");
  r.external_links = required<std::int64_t>(j, "external_links");
  r.pageviews = required<std::int64_t>(j, "pageviews");
  if (j.contains("month") && !j["month"].is_null()) r.month = required<int>(j, "month");
  if (j.contains("page_text") && !j["page_text"].is_null())
    r.page_text = required<std::string>(j, "page_text");
  return r;
}

std::string event_to_json_line(const EventRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["title"] = r.title;
  j["year"] = r.year;
  if (r.month) j["month"] = *r.month;
  j["categories"] = r.categories;
  j["internal_links"] = r.internal_links;
  j["external_links"] = r.external_links;
  j["pageviews"] = r.pageviews;
  if (r.page_text) j["page_text"] = *r.page_text;
  return j.dump();
}

EventCatalog load_events(const std::filesystem::path& path) {
  std::ifstream in(path);
  Require(in.is_open(), errc::kIo, "cannot open events file: " + path.string());
  std::vector<EventRecord> records;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(parse_event_line(line));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    Require(seen.insert(records.back().id).second, errc::kFormat,
            path.string() + ":" + std::to_string(line_no) + ": duplicate event id '" +
                records.back().id + "'");
  }
  return EventCatalog(std::move(records));
}

void save_events(const EventCatalog& catalog, const std::filesystem::path& path) {
  std::ofstream out(path);
  Require(out.is_open(), errc::kIo, "cannot open for writing: " + path.string());
  for (const auto& [id, r] : catalog.records()) out << event_to_json_line(r) << '\n';
  Require(static_cast<bool>(out), errc::kIo, "write failed: " + path.string());
}

EventCatalog filter_significant(const EventCatalog& catalog, std::int64_t min_views,
                                std::int64_t min_ext_refs) {
  std::vector<EventRecord> kept;
  for (const auto& [id, r] : catalog.records())
    if (r.pageviews > min_views && r.external_links > min_ext_refs) kept.push_back(r);
  return EventCatalog(std::move(kept));
}

std::vector<std::string> events_in_year(const EventCatalog& catalog, int year) {
  return events_near_year(catalog, year, 0);
}

std::vector<std::string> events_near_year(const EventCatalog& catalog, int year, int window) {
  Require(window >= 0, errc::kInvalidArgument, "event window must be >= 0");
  std::vector<std::string> out;
  const auto& by_year = catalog.by_year();
  for (auto it = by_year.lower_bound(year - window); it != by_year.end() && it->first <= year + window; ++it)
    out.insert(out.end(), it->second.begin(), it->second.end());
  std::sort(out.begin(), out.end());
  return out;
}

CategoryIndex::CategoryIndex(std::vector<std::string> columns, std::size_t width)
    : columns_(std::move(columns)), width_(width) {
  Require(columns_.size() <= width_, errc::kInvalidArgument, "more category columns than width");
  for (std::size_t i = 0; i < columns_.size(); ++i)
    Require(lookup_.emplace(columns_[i], i).second, errc::kInvalidArgument,
            "duplicate category column '" + columns_[i] + "'");
}

std::optional<std::size_t> CategoryIndex::column(const std::string& category) const {
  auto it = lookup_.find(category);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::vector<double> CategoryIndex::bow(const EventRecord& record) const {
  std::vector<double> out(width_, 0.0);
  for (const auto& c : record.categories)
    if (auto col = column(c)) out[*col] = 1.0;
  return out;
}

CategoryIndex category_index(const EventCatalog& catalog, std::size_t n) {
  std::map<std::string, std::size_t> freq;
  for (const auto& [id, r] : catalog.records()) {
    const std::set<std::string> unique(r.categories.begin(), r.categories.end());
    for (const auto& c : unique) ++freq[c];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > n) ranked.resize(n);
  std::vector<std::string> columns;
  for (auto& kv : ranked) columns.push_back(std::move(kv.first));
  return CategoryIndex(std::move(columns), n);
}

}  // namespace chronoshift
