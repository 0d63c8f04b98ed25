#include <fstream>

#include <gtest/gtest.h>

#include "chronoshift/events.h"
#include "test_util.h"

namespace chronoshift {
namespace {

using testing::error_code;
using testing::temp_dir;

EventRecord make(const std::string& id, int year, std::int64_t views, std::int64_t ext,
                 std::vector<std::string> cats = {}) {
  EventRecord r;
  r.id = id;
  r.title = "title " + id;
  r.year = year;
  r.pageviews = views;
  r.external_links = ext;
  r.categories = std::move(cats);
  return r;
}

TEST(EventJson, LineRoundTrip) {
  EventRecord r = make("wiki:Moon_landing", 1969, 9000, 40, {"Space", "Apollo"});
  r.month = 7;
  r.internal_links = 12;
  r.page_text = "Apollo 11 landed on the moon.";
  const EventRecord back = parse_event_line(event_to_json_line(r));
  EXPECT_EQ(back.id, r.id);
  EXPECT_EQ(back.month, 7);
  EXPECT_EQ(back.categories, r.categories);
  EXPECT_EQ(back.internal_links, 12);
  EXPECT_EQ(back.page_text, r.page_text);
  EXPECT_EQ(event_to_json_line(back), event_to_json_line(r));
}

TEST(EventJson, MissingFieldsAndBadTypes) {
  EXPECT_EQ(error_code([] { parse_event_line("{\"id\":\"a\"}"); }), errc::kFormat);
  EXPECT_EQ(error_code([] { parse_event_line("not json"); }), errc::kFormat);
  EXPECT_EQ(error_code([] {
              parse_event_line(R"({"id":"a","title":"t","year":"1999","categories":[],)"
                               R"("internal_links":0,"external_links":0,"pageviews":0})");
            }),
            errc::kFormat);
}

TEST(EventCatalog, ValidatesRecords) {
  EXPECT_NE(error_code([] { EventCatalog({make("a", 2000, 1, 1), make("a", 2001, 1, 1)}); }), "");
  EXPECT_NE(error_code([] { EventCatalog({make("", 2000, 1, 1)}); }), "");
  EXPECT_NE(error_code([] { EventCatalog({make("a", 2000, -1, 1)}); }), "");
  EventRecord bad_month = make("m", 2000, 1, 1);
  bad_month.month = 13;
  EXPECT_NE(error_code([&] { EventCatalog({bad_month}); }), "");
}

TEST(EventCatalog, FileRoundTripAndLineNumbers) {
  const auto dir = temp_dir("events_io");
  const EventCatalog c({make("b", 2001, 10, 2), make("a", 2000, 5, 1, {"x"})});
  save_events(c, dir / "events.jsonl");
  const EventCatalog back = load_events(dir / "events.jsonl");
  EXPECT_EQ(back.size(), 2u);
  EXPECT_EQ(back.at("a").categories, (std::vector<std::string>{"x"}));

  std::ofstream(dir / "broken.jsonl") << event_to_json_line(make("a", 2000, 1, 1)) << "\n\n{oops\n";
  try {
    load_events(dir / "broken.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::kFormat);
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
  EXPECT_EQ(error_code([&] { load_events(dir / "absent.jsonl"); }), errc::kIo);
}

TEST(Filter, StrictThresholds) {
  const EventCatalog c({make("edge_views", 2000, 6000, 50), make("edge_refs", 2000, 9000, 15),
                        make("kept", 2000, 6001, 16), make("low", 2000, 10, 1)});
  const EventCatalog kept = filter_significant(c, 6000, 15);
  EXPECT_EQ(kept.size(), 1u);
  EXPECT_TRUE(kept.contains("kept"));
}

TEST(YearQueries, InYearAndWindow) {
  const EventCatalog c({make("c", 2000, 1, 1), make("a", 2000, 1, 1), make("b", 2002, 1, 1),
                        make("d", 1997, 1, 1)});
  EXPECT_EQ(events_in_year(c, 2000), (std::vector<std::string>{"a", "c"}));
  EXPECT_EQ(events_near_year(c, 2001, 1), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_TRUE(events_in_year(c, 1999).empty());
}

TEST(Categories, TopNByFrequencyAndFixedWidthBow) {
  const EventCatalog c({make("a", 2000, 1, 1, {"war", "politics"}), make("b", 2000, 1, 1, {"war", "art"}),
                        make("c", 2000, 1, 1, {"politics", "war", "music"})});
  const CategoryIndex idx = category_index(c, 3);
  EXPECT_EQ(idx.columns(), (std::vector<std::string>{"war", "politics", "art"}));
  EXPECT_EQ(idx.width(), 3u);
  EXPECT_EQ(idx.bow(c.at("c")), (std::vector<double>{1, 1, 0}));
  const CategoryIndex wide = category_index(c, 150);
  EXPECT_EQ(wide.width(), 150u);
  EXPECT_EQ(wide.columns().size(), 4u);
  const auto bow = wide.bow(c.at("b"));
  ASSERT_EQ(bow.size(), 150u);
  EXPECT_EQ(bow[*wide.column("art")], 1.0);
  EXPECT_EQ(bow[*wide.column("music")], 0.0);
  EXPECT_FALSE(wide.column("sports").has_value());
}

}  // namespace
}  // namespace chronoshift
