#include "synthetic.hpp"

#include "travelemb/dataset.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

using namespace travelemb;

namespace {

RawTable parse(const std::string& text) {
  std::istringstream in(text);
  return parse_raw(in);
}

const std::string kHeader =
    "GROUP,SURVEY,SP,ID,PURPOSE,FIRST,TICKET,WHO,LUGGAGE,AGE,MALE,INCOME,GA,ORIGIN,DEST,TRAIN_AV,CAR_AV,SM_AV,"
    "TRAIN_TT,TRAIN_CO,TRAIN_HE,SM_TT,SM_CO,SM_HE,SM_SEATS,CAR_TT,CAR_CO,CHOICE\n";

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("tab separated minimal table") {
    const auto t = parse("A\tB\n1\t2\n");
    CHECK(t.row_count() == 1);
    CHECK(t.columns == std::vector<std::string>{"A", "B"});
    CHECK(t.rows[0] == std::vector<double>{1.0, 2.0});
    CHECK(t.column_index("B") == 1);
    CHECK_FALSE(t.find_column("C").has_value());
    CHECK_THROWS_AS(t.column_index("C"), Error);
  }

  TEST_CASE("comma separated with CRLF line endings") {
    const auto t = parse("A,B\r\n1.5,-2\r\n3,4\r\n");
    REQUIRE(t.row_count() == 2);
    CHECK(t.rows[0][0] == 1.5);
    CHECK(t.rows[0][1] == -2.0);
  }

  TEST_CASE("empty input is a malformed header") {
    try {
      parse("");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("malformed header") != std::string::npos);
      CHECK(e.line() == 1);
    }
  }

  TEST_CASE("non-numeric cell reports line and column") {
    try {
      parse("A,B\n1,2\n3,x\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
      CHECK(e.column() == "B");
    }
  }

  TEST_CASE("ragged row is rejected") { CHECK_THROWS_AS(parse("A,B\n1,2,3\n"), ParseError); }

  TEST_CASE("category maps are sorted bijections") {
    const auto m = CategoryMap::from_observed("X", {"b", "a", "c", "a"});
    CHECK(m.labels == std::vector<std::string>{"a", "b", "c"});
    CHECK(m.index("c") == 2);
    CHECK_FALSE(m.find("d").has_value());
    CHECK_THROWS_AS(m.index("d"), Error);
  }

  TEST_CASE("filter drops invalid rows and derives features") {
    const auto row = "2,0,1,1,1,0,1,1,2,3,0,0,0,2,1,1,1,1,120,48,60,63,52,20,1,117,65,2\n";
    std::string text = kHeader + row;
    text += "2,0,1,2,1,0,1,1,0,3,0,2,0,1,2,1,1,1,100,50,60,60,50,20,0,100,50,0\n";  // CHOICE 0
    text += "2,0,1,3,1,0,1,1,0,6,0,2,0,1,2,1,1,1,100,50,60,60,50,20,0,100,50,1\n";  // AGE 6
    text += "2,0,1,4,9,0,1,1,0,3,0,2,0,1,2,1,1,1,100,50,60,60,50,20,0,100,50,1\n";  // PURPOSE 9
    text += "2,0,1,5,1,0,1,1,0,3,0,2,0,1,2,1,0,1,100,50,60,60,50,20,0,100,50,3\n";  // car chosen, unavailable
    const auto data = filter_and_derive(parse(text));
    REQUIRE(data.size() == 1);
    CHECK(data.feature("TRAIN_TT")[0] == doctest::Approx(2.0));
    CHECK(data.feature("TRAIN_COST")[0] == doctest::Approx(0.48));
    CHECK(data.feature("CAR_COST")[0] == doctest::Approx(0.65));
    CHECK(data.feature("SM_HE")[0] == doctest::Approx(20.0 / 60.0));
    CHECK(data.feature("SURVEY_TRAIN")[0] == 1.0);
    CHECK(data.feature("FIRST_FALSE")[0] == 1.0);
    CHECK(data.choices()[0] == 1);
    CHECK(data.label("OD", 0) == "2_1");
    CHECK(data.label("INCOME", 0) == "1");
    CHECK(data.respondent_ids()[0] == 1);
  }

  TEST_CASE("GA holders pay nothing for train and Swissmetro") {
    const auto row = "2,0,1,1,1,0,1,1,0,3,0,2,1,2,1,1,1,1,120,48,60,63,52,20,1,117,65,2\n";
    const auto data = filter_and_derive(parse(kHeader + row));
    CHECK(data.feature("TRAIN_COST")[0] == 0.0);
    CHECK(data.feature("SM_COST")[0] == 0.0);
    CHECK(data.feature("CAR_COST")[0] == doctest::Approx(0.65));
  }

  TEST_CASE("OD labels are directed") {
    std::string text = kHeader;
    text += "2,0,1,1,1,0,1,1,0,3,0,2,0,1,2,1,1,1,100,50,60,60,50,20,0,100,50,1\n";
    text += "2,0,1,2,1,0,1,1,0,3,0,2,0,2,1,1,1,1,100,50,60,60,50,20,0,100,50,1\n";
    const auto data = filter_and_derive(parse(text));
    CHECK(data.label("OD", 0) == "1_2");
    CHECK(data.label("OD", 1) == "2_1");
    CHECK(data.category_map("OD").size() == 2);
  }

  TEST_CASE("missing raw column is an error") { CHECK_THROWS_AS(filter_and_derive(parse("A,B\n1,2\n")), Error); }

  TEST_CASE("synthetic data survives the filter except the invalid rows") {
    testing::SyntheticOptions opts;
    opts.respondents = 20;
    opts.include_invalid = true;
    const auto data = testing::synthetic_dataset(opts);
    CHECK(data.size() == 20u * 9u);
    for (std::size_t i = 0; i < data.size(); ++i) {
      CHECK(data.availability()[i][static_cast<std::size_t>(data.choices()[i])]);
    }
  }

  TEST_CASE("split of ten rows") {
    const auto s = split_indices(10, SplitSpec{{0.6, 0.2, 0.2}, 7});
    CHECK(s.train.size() == 6);
    CHECK(s.dev.size() == 2);
    CHECK(s.test.size() == 2);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    all.insert(s.dev.begin(), s.dev.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == 10);
    CHECK(std::is_sorted(s.train.begin(), s.train.end()));
  }

  TEST_CASE("split is deterministic and seed dependent") {
    const auto a = split_indices(500, SplitSpec{{0.6, 0.2, 0.2}, 7});
    const auto b = split_indices(500, SplitSpec{{0.6, 0.2, 0.2}, 7});
    const auto c = split_indices(500, SplitSpec{{0.6, 0.2, 0.2}, 8});
    CHECK(a.train == b.train);
    CHECK(a.dev == b.dev);
    CHECK(a.test == b.test);
    CHECK(a.train != c.train);
  }

  TEST_CASE("split sizes track the ratios") {
    for (std::size_t n : {1u, 2u, 3u, 7u, 99u, 10692u}) {
      const auto s = split_indices(n, SplitSpec{{0.6, 0.2, 0.2}, 3});
      CHECK(s.train.size() + s.dev.size() + s.test.size() == n);
      CHECK(std::abs(static_cast<double>(s.train.size()) - 0.6 * static_cast<double>(n)) <= 1.0);
    }
  }

  TEST_CASE("invalid ratios are rejected") {
    CHECK_THROWS_AS(SplitSpec({{0.5, 0.2, 0.2}, 0}).validate(), Error);
    CHECK_THROWS_AS(SplitSpec({{1.2, -0.1, -0.1}, 0}).validate(), Error);
  }

  TEST_CASE("subset keeps category maps") {
    const auto data = testing::synthetic_dataset();
    const std::vector<std::size_t> rows{5, 1, 3};
    const auto sub = data.subset(rows);
    REQUIRE(sub.size() == 3);
    CHECK(sub.choices()[0] == data.choices()[5]);
    CHECK(sub.category_map("OD").labels == data.category_map("OD").labels);
  }

  TEST_CASE("encoding set validation") {
    CHECK_NOTHROW(validate_encoding_set({{"A", 1, 2}, {"B", 2, 5}}));
    CHECK_THROWS_AS(validate_encoding_set({{"A", 2, 2}}), Error);
    CHECK_THROWS_AS(validate_encoding_set({{"A", 0, 3}}), Error);
    CHECK_THROWS_AS(validate_encoding_set({{"A", 1, 3}, {"A", 1, 3}}), Error);
    const auto data = testing::synthetic_dataset();
    const auto resolved = resolve_encoding_set({{"WHO", 1}}, data);
    REQUIRE(resolved.size() == 1);
    CHECK(resolved[0].original_dim == static_cast<int>(data.category_map("WHO").size()));
  }

  TEST_CASE("prepared dataset round trip") {
    const auto data = testing::synthetic_dataset();
    const SplitSpec spec{{0.6, 0.2, 0.2}, 11};
    const auto idx = split_indices(data.size(), spec);
    const auto dir = testing::scratch_dir("dataset-roundtrip");
    save_dataset(dir, data, spec, idx);
    const auto back = load_dataset(dir);
    REQUIRE(back.data.size() == data.size());
    CHECK(back.split.has_value());
    CHECK(back.split->train == idx.train);
    for (const auto& name : data.feature_names()) {
      const auto a = data.feature(name);
      const auto b = back.data.feature(name);
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
    for (const auto& v : swissmetro_categoricals()) {
      for (std::size_t i = 0; i < data.size(); ++i) CHECK(data.label(v, i) == back.data.label(v, i));
    }
    CHECK(std::vector<int>(back.data.choices().begin(), back.data.choices().end()) ==
          std::vector<int>(data.choices().begin(), data.choices().end()));
  }
}
