#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "bdt/dataset.hpp"
#include "bdt/errors.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace bdt;
using bdt::test::make_data;

namespace {

std::set<double> column_values(const Dataset& d, std::size_t f) {
  std::set<double> out;
  for (std::size_t i = 0; i < d.point_count; ++i) out.insert(d.value(i, f));
  return out;
}

Dataset random_continuous(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 3.0);
  std::vector<std::vector<double>> rows(n, std::vector<double>(d));
  std::vector<std::uint32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& x : rows[i]) x = g(rng);
    labels[i] = static_cast<std::uint32_t>(i % 2);
  }
  return make_data(rows, labels);
}

}  // namespace

TEST_CASE("iris csv loads with four features and three classes") {
  Dataset d = load_csv(std::string(BDT_DATA_DIR) + "/iris.csv");
  CHECK(d.point_count == 150);
  CHECK(d.feature_count == 4);
  CHECK(d.class_count == 3);
  CHECK(d.class_names == std::vector<std::string>{"setosa", "versicolor", "virginica"});
  CHECK(d.feature_names.front() == "sepal_length");
  CHECK(d.value(0, 0) == doctest::Approx(5.1));
  CHECK(std::count(d.labels.begin(), d.labels.end(), 0U) == 50);
}

TEST_CASE("a one-row file gives a one-point dataset") {
  Dataset d = parse_csv("x,y\n3.5,a\n");
  CHECK(d.point_count == 1);
  CHECK(d.feature_count == 1);
  CHECK(d.class_count == 2);
  CHECK(d.labels == std::vector<std::uint32_t>{0});
  CHECK_NOTHROW(d.validate());
}

TEST_CASE("csv error paths") {
  CHECK_THROWS_AS(parse_csv("x,y\n1,a\nfoo,b\n"), InputError);
  CHECK_THROWS_AS(parse_csv("x,y\n1,a\n2,a\n"), InputError);
  CHECK_THROWS_AS(parse_csv("x,y\n1,a\n2\n"), InputError);
  CHECK_THROWS_AS(parse_csv("x,y\n"), InputError);
  CHECK_THROWS_AS(parse_csv("x\n1\n"), InputError);
  CHECK_THROWS_AS(parse_csv("x,y\n1,a\n2,b\n", {.label_column = "z"}), InputError);
  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv"), InputError);
}

TEST_CASE("label column may be chosen by name or index") {
  const std::string text = "lab,x,z\nb,1,7\na,2,8\nb,3,9\n";
  Dataset by_name = parse_csv(text, {.label_column = "lab"});
  Dataset by_index = parse_csv(text, {.label_column = "0"});
  CHECK(by_name == by_index);
  CHECK(by_name.feature_names == std::vector<std::string>{"x", "z"});
  CHECK(by_name.labels == std::vector<std::uint32_t>{1, 0, 1});
}

TEST_CASE("numeric labels are ordered numerically") {
  Dataset d = parse_csv("x,y\n1,10\n2,9\n3,10\n");
  CHECK(d.class_names == std::vector<std::string>{"9", "10"});
  CHECK(d.labels == std::vector<std::uint32_t>{1, 0, 1});
}

TEST_CASE("categorical columns are encoded in order of first appearance") {
  Dataset d = parse_csv("time,y\nlate,0\ntimely,1\nlate,1\npremature,0\n", {.categorical_columns = {"time"}});
  CHECK(d.features == std::vector<double>{0, 1, 0, 2});
  CHECK_THROWS_AS(parse_csv("time,y\nlate,0\n", {.categorical_columns = {"nope"}}), InputError);
}

TEST_CASE("comment lines are skipped and written data reads back") {
  Dataset d = make_data({{0.5, 1}, {1.25, 0}, {-3, 2}}, {0, 1, 1});
  std::ostringstream out;
  out << "# produced by a test\n";
  write_csv(d, out);
  Dataset back = parse_csv(out.str());
  CHECK(back.features == d.features);
  CHECK(back.labels == d.labels);
}

TEST_CASE("bucketize: 1..100 to ten buckets") {
  std::vector<std::vector<double>> rows;
  std::vector<std::uint32_t> labels;
  for (int v = 1; v <= 100; ++v) {
    rows.push_back({static_cast<double>(v)});
    labels.push_back(v % 2);
  }
  for (auto strategy : {BinStrategy::EqualWidth, BinStrategy::Quantile}) {
    Dataset b = bucketize(make_data(rows, labels), 10, strategy);
    auto values = column_values(b, 0);
    CHECK(values.size() == 10);
    CHECK(*values.begin() == 0);
    CHECK(*values.rbegin() == 9);
  }
}

TEST_CASE("bucketize leaves small domains alone") {
  Dataset d = make_data({{0, 5}, {1, 5}, {1, 6}, {0, 7}}, {0, 1, 0, 1});
  Dataset b = bucketize(d, 10);
  CHECK(b.features == d.features);
  CHECK(std::all_of(b.bins.begin(), b.bins.end(), [](const BinMap& m) { return m.identity; }));
}

TEST_CASE("equal-width buckets follow right-closed cut semantics") {
  // Expected buckets computed with pandas.cut(values, bins, labels=False).
  std::vector<std::vector<double>> rows;
  for (int v = 0; v <= 10; ++v) rows.push_back({static_cast<double>(v)});
  Dataset a = bucketize(make_data(rows, std::vector<std::uint32_t>(11, 0), 2), 5);
  CHECK(a.features == std::vector<double>{0, 0, 0, 1, 1, 2, 2, 3, 3, 4, 4});

  Dataset b = bucketize(make_data({{1.0}, {1.5}, {2.2}, {3.9}, {4.0}, {7.3}, {10.0}}, {0, 1, 0, 1, 0, 1, 0}), 3);
  CHECK(b.features == std::vector<double>{0, 0, 0, 0, 0, 2, 2});
}

TEST_CASE("iris buckets match pandas cut on the first row") {
  Dataset b = bucketize(load_csv(std::string(BDT_DATA_DIR) + "/iris.csv"), 10);
  CHECK(std::vector<double>(b.row(0).begin(), b.row(0).end()) == std::vector<double>{2, 6, 0, 0});
  for (std::size_t f = 0; f < 4; ++f) CHECK(column_values(b, f).size() <= 10);
}

TEST_CASE("bucketize to five values keeps at most five per column") {
  Dataset d = random_continuous(310, 6, 3);
  for (auto strategy : {BinStrategy::EqualWidth, BinStrategy::Quantile}) {
    Dataset b = bucketize(d, 5, strategy);
    for (std::size_t f = 0; f < 6; ++f) CHECK(column_values(b, f).size() <= 5);
  }
}

TEST_CASE("bucketize is idempotent and routes training rows to their buckets") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Dataset d = random_continuous(120, 3, seed);
    for (auto strategy : {BinStrategy::EqualWidth, BinStrategy::Quantile}) {
      Dataset once = bucketize(d, 7, strategy);
      Dataset twice = bucketize(once, 7, strategy);
      CHECK(twice.features == once.features);
      for (std::size_t i = 0; i < d.point_count; ++i) {
        auto routed = once.route(d.row(i));
        CHECK(std::equal(routed.begin(), routed.end(), once.row(i).begin()));
        auto routed_twice = twice.route(d.row(i));
        CHECK(std::equal(routed_twice.begin(), routed_twice.end(), once.row(i).begin()));
      }
    }
  }
  CHECK_THROWS_AS(bucketize(random_continuous(5, 1, 0), 1), InputError);
}

TEST_CASE("route rejects a query of the wrong dimension") {
  Dataset d = make_data({{0, 1}, {1, 0}}, {0, 1});
  std::vector<double> q{1.0};
  CHECK_THROWS_AS(d.route(q), InputError);
}

TEST_CASE("xor labels are the parity of the first k bits") {
  Dataset d = generate_xor({.n = 1000, .d = 20, .k = 4, .seed = 11});
  CHECK(d.point_count == 1000);
  CHECK(d.feature_count == 20);
  for (std::size_t i = 0; i < d.point_count; ++i) {
    std::uint32_t parity = 0;
    for (std::size_t f = 0; f < 4; ++f) parity ^= static_cast<std::uint32_t>(d.value(i, f));
    CHECK(d.labels[i] == parity);
    for (std::size_t f = 0; f < 20; ++f) CHECK((d.value(i, f) == 0 || d.value(i, f) == 1));
  }
  auto ones = std::count(d.features.begin(), d.features.end(), 1.0);
  CHECK(ones == doctest::Approx(10000).epsilon(0.05));
}

TEST_CASE("xor exhaustive grid and degenerate k") {
  Dataset grid = generate_xor({.d = 2, .k = 2, .exhaustive = true});
  CHECK(grid.features == std::vector<double>{0, 0, 0, 1, 1, 0, 1, 1});
  CHECK(grid.labels == std::vector<std::uint32_t>{0, 1, 1, 0});

  Dataset one = generate_xor({.n = 50, .d = 3, .k = 1, .seed = 2});
  for (std::size_t i = 0; i < one.point_count; ++i) CHECK(one.labels[i] == one.value(i, 0));

  CHECK(generate_xor({.n = 64, .d = 5, .k = 3, .seed = 9}) == generate_xor({.n = 64, .d = 5, .k = 3, .seed = 9}));
  CHECK_THROWS_AS(generate_xor({.n = 4, .d = 2, .k = 3}), InputError);
}

TEST_CASE("kfold split sizes and determinism") {
  Dataset iris = load_csv(std::string(BDT_DATA_DIR) + "/iris.csv");
  FoldPlan plan = kfold_split(iris, 10, 4);
  std::vector<std::size_t> seen;
  for (std::size_t f = 0; f < 10; ++f) {
    auto test = plan.test_indices(f);
    CHECK(test.size() == 15);
    CHECK(plan.train_indices(f).size() == 135);
    seen.insert(seen.end(), test.begin(), test.end());
  }
  std::sort(seen.begin(), seen.end());
  for (std::size_t i = 0; i < 150; ++i) CHECK(seen[i] == i);

  CHECK(kfold_split(iris, 10, 4).assignments == plan.assignments);
  CHECK(kfold_split(iris, 10, 5).assignments != plan.assignments);

  Dataset ten = make_data(std::vector<std::vector<double>>(10, {0.0}), {0, 1, 0, 1, 0, 1, 0, 1, 0, 1});
  FoldPlan loo = kfold_split(ten, 10, 0);
  for (std::size_t f = 0; f < 10; ++f) CHECK(loo.test_indices(f).size() == 1);

  CHECK_THROWS_AS(kfold_split(ten, 11, 0), InputError);
  CHECK_THROWS_AS(kfold_split(ten, 1, 0), InputError);
}

TEST_CASE("subset keeps the full class set") {
  Dataset d = make_data({{0}, {1}, {2}}, {0, 1, 2}, 3);
  std::vector<std::size_t> rows{0, 2};
  Dataset s = d.subset(rows);
  CHECK(s.point_count == 2);
  CHECK(s.class_count == 3);
  CHECK(s.labels == std::vector<std::uint32_t>{0, 2});
}
