#pragma once

// Event catalog: JSONL ingestion, significance filtering, category index.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace chronoshift {

struct EventRecord {
  std::string id;  // global-vocabulary token
  std::string title;
  int year = 0;
  std::optional<int> month;
  std::vector<std::string> categories;
  std::int64_t internal_links = 0;
  std::int64_t external_links = 0;
  std::int64_t pageviews = 0;  // monthly
  std::optional<std::string> page_text;
};

class EventCatalog {
 public:
  EventCatalog() = default;
  // Throws on duplicate ids, empty ids or negative counters.
  explicit EventCatalog(std::vector<EventRecord> records);

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  bool contains(const std::string& id) const { return records_.count(id) > 0; }
  const EventRecord& at(const std::string& id) const;
  const std::map<std::string, EventRecord>& records() const { return records_; }
  const std::map<int, std::vector<std::string>>& by_year() const { return by_year_; }

 private:
  std::map<std::string, EventRecord> records_;
  std::map<int, std::vector<std::string>> by_year_;  // ids ascending
};

// One JSON object per line. Blank lines are ignored; errors name the line.
EventCatalog load_events(const std::filesystem::path& path);
void save_events(const EventCatalog& catalog, const std::filesystem::path& path);
EventRecord parse_event_line(const std::string& line);
std::string event_to_json_line(const EventRecord& record);

// Keeps pageviews > min_views and external_links > min_ext_refs.
EventCatalog filter_significant(const EventCatalog& catalog, std::int64_t min_views,
                                std::int64_t min_ext_refs);

// Ids dated in `year`, ascending.
std::vector<std::string> events_in_year(const EventCatalog& catalog, int year);
// Ids dated within [year - window, year + window], ascending.
std::vector<std::string> events_near_year(const EventCatalog& catalog, int year, int window);

// Top-N categories by number of events carrying them (ties lexicographic).
class CategoryIndex {
 public:
  CategoryIndex() = default;
  // `width` >= columns.size() fixes the BoW length; unused columns stay zero.
  CategoryIndex(std::vector<std::string> columns, std::size_t width);
  const std::vector<std::string>& columns() const { return columns_; }
  std::size_t width() const { return width_; }
  std::optional<std::size_t> column(const std::string& category) const;
  // 0/1 vector of length width().
  std::vector<double> bow(const EventRecord& record) const;

 private:
  std::vector<std::string> columns_;
  std::size_t width_ = 0;
  std::unordered_map<std::string, std::size_t> lookup_;
};

CategoryIndex category_index(const EventCatalog& catalog, std::size_t n = 150);

}  // namespace chronoshift
