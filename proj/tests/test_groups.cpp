#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "mcmix/groups.hpp"

using namespace mcmix;
using namespace mcmix::testing;

TEST(Members, EmptyClauseListSelectsAll) {
  const auto ds = demographic({5, 3, 5}, {0, 1, 1}, {0, 1, 0});
  const IndexList idx{0, 1, 2};
  EXPECT_EQ(members(make_group({}), ds, idx), idx);
}

TEST(Members, SingleClause) {
  const auto ds = demographic({5, 3, 5}, {0, 1, 1}, {0, 1, 0});
  const IndexList idx{0, 1, 2};
  EXPECT_EQ(members(make_group({{"race", 5}}), ds, idx), (IndexList{0, 2}));
}

TEST(Members, ConjunctionIsIntersection) {
  const auto ds = random_demographic(500, 3);
  const auto idx = iota_rows(ds.rows());
  const auto a = members(make_group({{"race", 1}}), ds, idx);
  const auto b = members(make_group({{"dis", 1}}), ds, idx);
  IndexList both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
  EXPECT_EQ(members(make_group({{"race", 1}, {"dis", 1}}), ds, idx), both);
}

TEST(Members, SortedAndUniqueForUnsortedInput) {
  const auto ds = random_demographic(100, 4);
  const IndexList idx{50, 3, 99, 3, 20, 7};
  const auto m = members(make_group({}), ds, idx);
  EXPECT_TRUE(std::is_sorted(m.begin(), m.end()));
  EXPECT_EQ(std::adjacent_find(m.begin(), m.end()), m.end());
}

TEST(Members, UnknownColumnThrows) {
  const auto ds = random_demographic(10, 1);
  EXPECT_THROW(members(make_group({{"nope", 1}}), ds, iota_rows(10)), DataError);
}

TEST(Groups, RepeatedColumnRejected) { EXPECT_THROW(make_group({{"race", 1}, {"race", 2}}), DataError); }

TEST(Groups, FormatParseRoundTrip) {
  const auto g = make_group({{"race", 3}, {"dis", 1}});
  EXPECT_EQ(g.label, "race=3&dis=1");
  EXPECT_EQ(parse_group(format_group(g)), g);
}

TEST(Groups, CollectionRoundTrip) {
  const auto ds = random_demographic(4000, 8);
  const std::vector<Splits> s{split(ds, {0.6, 0.2, 0.2, 0.0, 0})};
  const auto C = build_collection(ds, s, Setting::all);
  std::stringstream text;
  write_groups(text, C);
  const auto back = read_groups(text);
  EXPECT_EQ(back.setting, C.setting);
  EXPECT_EQ(back.groups, C.groups);
}

TEST(Groups, DuplicateLabelsRejected) {
  std::stringstream text("a: race=1\na: race=2\n");
  EXPECT_THROW(read_groups(text), DataError);
}

TEST(Collection, SettingSizes) {
  const auto ds = random_demographic(4000, 9);
  const std::vector<Splits> s{split(ds, {0.6, 0.2, 0.2, 0.0, 0}), split(ds, {0.6, 0.2, 0.2, 0.0, 1})};
  const auto races = possible_races(ds, s);
  ASSERT_EQ(races.size(), 4u);
  EXPECT_EQ(build_collection(ds, s, Setting::dis).size(), 1u);
  EXPECT_EQ(build_collection(ds, s, Setting::all).size(), 2 * races.size() + 1);
  EXPECT_EQ(build_collection(ds, s, Setting::dlfr).size(), 3u);
  const auto big = build_collection(ds, s, Setting::big, {}, 0.1);
  const auto small = build_collection(ds, s, Setting::small, {}, 0.1);
  EXPECT_EQ(big.size() + small.size(), 2 * races.size() + 2);
}

TEST(Collection, DlfrPicksLeastFrequentThenLowestCode) {
  const std::vector<int> race{0, 0, 0, 0, 0, 0, 1, 1, 1, 2, 2, 2};
  const auto ds = demographic(race, std::vector<int>(12, 1), {0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1}, 3);
  Splits s;
  s.train = {0, 1, 6, 9};
  s.val = {2, 3, 7, 10};
  s.test = {4, 5, 8, 11};
  const std::vector<Splits> all{s};
  EXPECT_EQ(build_collection(ds, all, Setting::dlfr).groups[1].label, "race=1");

  // Without a test member race 1 is not possible; race 2 becomes the LFR.
  s.test = {4, 5, 11};
  s.val = {2, 3, 7, 8, 10};
  const std::vector<Splits> reduced{s};
  const auto C = build_collection(ds, reduced, Setting::dlfr);
  ASSERT_EQ(C.size(), 3u);
  EXPECT_EQ(C.groups[0].label, "dis=1");
  EXPECT_EQ(C.groups[1].label, "race=2");
  EXPECT_EQ(C.groups[2].label, "race=2&dis=1");
}

TEST(Collection, EveryGroupPopulatedInEverySplit) {
  const auto ds = random_demographic(3000, 12, 6);
  std::vector<Splits> s;
  for (std::uint64_t seed = 0; seed < 5; ++seed) s.push_back(split(ds, {0.6, 0.2, 0.2, 0.0, seed}));
  const auto C = build_collection(ds, s, Setting::all);
  for (const auto& g : C.groups) {
    for (const auto& sp : s) {
      EXPECT_FALSE(members(g, ds, sp.training_pool()).empty()) << g.label;
      EXPECT_FALSE(members(g, ds, sp.val).empty()) << g.label;
      EXPECT_FALSE(members(g, ds, sp.test).empty()) << g.label;
    }
  }
}

TEST(Collection, AllWithoutPossibleRaceThrows) {
  const auto ds = demographic({0, 1, 0, 1}, {0, 0, 0, 0}, {0, 1, 1, 0}, 2);
  Splits s;
  s.train = {0};
  s.val = {1, 2};
  s.test = {3};
  const std::vector<Splits> v{s};
  EXPECT_THROW(build_collection(ds, v, Setting::all), DataError);
  EXPECT_EQ(build_collection(ds, v, Setting::dis).size(), 1u);
}

TEST(Setting, ParsesCaseInsensitively) {
  EXPECT_EQ(parse_setting("DLFR"), Setting::dlfr);
  EXPECT_EQ(parse_setting("big"), Setting::big);
  EXPECT_THROW(parse_setting("huge"), std::exception);
}
