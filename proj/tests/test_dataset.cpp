#include <doctest.h>

#include <algorithm>
#include <set>

#include "test_support.hpp"
#include "vibrec/dataset.hpp"

using namespace vibrec;
using testsupport::TempDir;
using testsupport::write_file;

TEST_SUITE_BEGIN("dataset");

TEST_CASE("movielens loader builds dense indices, discards timestamps") {
  TempDir dir;
  auto p = write_file(dir, "u.data",
                      "a\t10\t3\t881250949\n"
                      "a\t20\t5\t891717742\n"
                      "b\t10\t1\t878887116\n");
  Dataset ds = load_movielens(p);
  CHECK(ds.n_users == 2);
  CHECK(ds.n_items == 2);
  CHECK(ds.triples.size() == 3);
  CHECK(ds.r_min == 1.0);
  CHECK(ds.r_max == 5.0);
  CHECK(ds.user_index.at("a") == 0);
  CHECK(ds.user_index.at("b") == 1);
  CHECK(ds.item_index.at("10") == 0);
  CHECK(ds.item_index.at("20") == 1);
  CHECK(ds.triples[1].rating == 5.0);
}

TEST_CASE("movielens loader rejects empty files and bad lines") {
  TempDir dir;
  CHECK_THROWS_WITH_AS(load_movielens(write_file(dir, "empty.data", "")),
                       doctest::Contains("no triples"), ParseError);
  CHECK_THROWS_AS(load_movielens(dir.file("missing.data")), ParseError);

  auto bad_cols = write_file(dir, "bad.data", "a\t10\t3\t1\nb\t20\t4\n");
  CHECK_THROWS_WITH_AS(load_movielens(bad_cols), doctest::Contains(":2"), ParseError);

  auto bad_range = write_file(dir, "range.data", "a\t10\t6\t1\n");
  CHECK_THROWS_WITH_AS(load_movielens(bad_range), doctest::Contains("outside"), ParseError);

  auto bad_rating = write_file(dir, "nonnum.data", "a\t10\tquux\t1\n");
  CHECK_THROWS_WITH_AS(load_movielens(bad_rating), doctest::Contains("malformed rating"), ParseError);
}

TEST_CASE("filmtrust loader parses space-separated triples in [0.5, 4]") {
  TempDir dir;
  Dataset ds = load_filmtrust(write_file(dir, "ft.txt", "1 1 4.0\n"));
  CHECK(ds.triples.size() == 1);
  CHECK(ds.triples[0].rating == 4.0);
  CHECK(ds.r_min == 0.5);
  CHECK(ds.r_max == 4.0);

  CHECK_THROWS_WITH_AS(load_filmtrust(write_file(dir, "ft_bad.txt", "1 1 4.5\n")),
                       doctest::Contains("outside"), ParseError);
  CHECK_THROWS_WITH_AS(load_filmtrust(write_file(dir, "ft_cols.txt", "1 1\n")),
                       doctest::Contains(":1"), ParseError);
}

TEST_CASE("epinions loader ignores extra columns and reports duplicates") {
  TempDir dir;
  Dataset ds = load_epinions(write_file(dir, "ep.txt",
                                        "7 100 5 extra stuff\n"
                                        "7 200 3\n"
                                        "7 100 2\n"));
  CHECK(ds.triples.size() == 2);
  CHECK(ds.duplicates_dropped == 1);
  // last occurrence wins, first position kept
  CHECK(ds.triples[0].user == 0);
  CHECK(ds.triples[0].item == 0);
  CHECK(ds.triples[0].rating == 2.0);

  CHECK_THROWS_WITH_AS(load_epinions(write_file(dir, "ep_bad.txt", "7 100 5\n8 300\n")),
                       doctest::Contains(":2"), ParseError);
}

TEST_CASE("index density holds for loaded datasets") {
  TempDir dir;
  auto p = write_file(dir, "dense.txt",
                      "u9 i7 3\n"
                      "u2 i7 2\n"
                      "u9 i1 5\n"
                      "u5 i9 1\n");
  Dataset ds = load_epinions(p);
  std::set<std::int32_t> users, items;
  for (const Triple& t : ds.triples) {
    users.insert(t.user);
    items.insert(t.item);
  }
  REQUIRE(static_cast<std::int32_t>(users.size()) == ds.n_users);
  REQUIRE(static_cast<std::int32_t>(items.size()) == ds.n_items);
  CHECK(*users.begin() == 0);
  CHECK(*users.rbegin() == ds.n_users - 1);
  CHECK(*items.begin() == 0);
  CHECK(*items.rbegin() == ds.n_items - 1);
}

TEST_CASE("canonical round-trip is the identity on triples, ranges and index maps") {
  TempDir dir;
  std::string raw;
  for (int i = 0; i < 10; ++i) {
    raw += "user" + std::to_string(i % 4) + " item" + std::to_string(i % 3) + " " +
           std::to_string(1 + (i % 4)) + "\n";
  }
  Dataset ds = load_epinions(write_file(dir, "orig.txt", raw));
  auto canon = dir.file("ds.canonical");
  write_canonical(ds, canon);
  Dataset back = read_canonical(canon);

  REQUIRE(back.triples.size() == ds.triples.size());
  for (std::size_t t = 0; t < ds.triples.size(); ++t) {
    CHECK(back.triples[t].user == ds.triples[t].user);
    CHECK(back.triples[t].item == ds.triples[t].item);
    CHECK(back.triples[t].rating == ds.triples[t].rating);
  }
  CHECK(back.r_min == ds.r_min);
  CHECK(back.r_max == ds.r_max);
  CHECK(back.user_index == ds.user_index);
  CHECK(back.item_index == ds.item_index);
}

TEST_CASE("canonical reader rejects bad headers and header-only files") {
  TempDir dir;
  CHECK_THROWS_WITH_AS(read_canonical(write_file(dir, "bad1.canonical", "#something else\n")),
                       doctest::Contains("header mismatch"), ParseError);
  CHECK_THROWS_WITH_AS(read_canonical(write_file(dir, "bad2.canonical", "#vibrec-ratings v1\nuser,item,rating\n")),
                       doctest::Contains("range metadata"), ParseError);
  CHECK_THROWS_WITH_AS(
      read_canonical(write_file(dir, "bad3.canonical",
                                "#vibrec-ratings v1 r_min=1 r_max=5\nuser,item,rating\n")),
      doctest::Contains("empty dataset"), ParseError);
}

TEST_CASE("holdout split partitions exactly and deterministically") {
  TempDir dir;
  std::string raw;
  for (int i = 0; i < 200; ++i) {
    raw += "u" + std::to_string(i % 25) + " i" + std::to_string(i) + " 3\n";
  }
  Dataset ds = load_epinions(write_file(dir, "h.txt", raw));

  HoldoutSplit s = holdout_split(ds, 0.9, 7);
  CHECK(s.train.size() == 180);
  CHECK(s.test.size() == 20);

  std::set<std::int64_t> seen(s.train.indices.begin(), s.train.indices.end());
  for (std::int64_t idx : s.test.indices) {
    CHECK(seen.insert(idx).second);  // disjoint
  }
  CHECK(seen.size() == ds.triples.size());  // covering

  HoldoutSplit again = holdout_split(ds, 0.9, 7);
  CHECK(again.train.indices == s.train.indices);
  CHECK(again.test.indices == s.test.indices);

  HoldoutSplit other = holdout_split(ds, 0.9, 8);
  CHECK(other.train.indices != s.train.indices);

  CHECK_THROWS_AS(holdout_split(ds, 0.0, 7), std::invalid_argument);
  CHECK_THROWS_AS(holdout_split(ds, 1.0, 7), std::invalid_argument);

  Dataset tiny = load_epinions(write_file(dir, "tiny.txt", "a b 3\n"));
  CHECK_THROWS_AS(holdout_split(tiny, 0.9, 7), std::invalid_argument);
}

TEST_CASE("synth with zero noise reproduces the planted rating function exactly") {
  SyntheticData synth = synth_generate(20, 30, 4, 0.0, 0.5, 0.5, 4.0, 99);
  const Dataset& ds = synth.dataset;
  CHECK(ds.triples.size() == 300);
  for (const Triple& t : ds.triples) {
    const double d = (synth.user_positions.row(t.user) - synth.item_positions.row(t.item)).norm();
    double expected = std::clamp(4.0 - d, 0.5, 4.0);
    expected = 0.5 + std::round((expected - 0.5) / 0.5) * 0.5;
    expected = std::clamp(expected, 0.5, 4.0);
    CHECK(t.rating == expected);
    CHECK(t.rating >= ds.r_min);
    CHECK(t.rating <= ds.r_max);
  }
}

TEST_CASE("synth density one rates every pair; fixed seed reproduces bit-identically") {
  SyntheticData a = synth_generate(8, 11, 3, 0.2, 1.0, 1.0, 5.0, 1234);
  CHECK(a.dataset.triples.size() == 8 * 11);

  SyntheticData b = synth_generate(8, 11, 3, 0.2, 1.0, 1.0, 5.0, 1234);
  REQUIRE(b.dataset.triples.size() == a.dataset.triples.size());
  for (std::size_t t = 0; t < a.dataset.triples.size(); ++t) {
    CHECK(a.dataset.triples[t].user == b.dataset.triples[t].user);
    CHECK(a.dataset.triples[t].item == b.dataset.triples[t].item);
    CHECK(a.dataset.triples[t].rating == b.dataset.triples[t].rating);
  }
  CHECK(a.user_positions == b.user_positions);
  CHECK(a.item_positions == b.item_positions);

  CHECK_THROWS_AS(synth_generate(0, 5, 2, 0.0, 0.5, 1.0, 5.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(synth_generate(5, 5, 2, 0.0, 0.0, 1.0, 5.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(synth_generate(5, 5, 2, 0.0, 0.5, 5.0, 1.0, 1), std::invalid_argument);
}

TEST_CASE("views expose parent counts and mean rating") {
  TempDir dir;
  Dataset ds = load_epinions(write_file(dir, "v.txt", "a x 2\na y 4\nb x 3\n"));
  DatasetView v = full_view(ds);
  CHECK(v.size() == 3);
  CHECK(v.n_users() == 2);
  CHECK(v.n_items() == 2);
  CHECK(v.mean_rating() == doctest::Approx(3.0));
}

TEST_SUITE_END();
