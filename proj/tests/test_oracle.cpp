#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "bdt/errors.hpp"
#include "bdt/grammar.hpp"
#include "bdt/oracle.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace bdt;
using bdt::test::make_data;

namespace {

// t(S) = 1 + sum over distinct single-threshold partitions of t(A) t(B):
// the score recursion with L = 1 and phi = 1, written independently.
double count_trees(const Dataset& d, const std::vector<std::size_t>& s,
                   std::map<std::vector<std::size_t>, double>& memo) {
  if (auto it = memo.find(s); it != memo.end()) return it->second;
  std::set<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> parts;
  for (std::size_t f = 0; f < d.feature_count; ++f) {
    for (auto t : s) {
      std::vector<std::size_t> l, r;
      for (auto i : s) (d.value(i, f) < d.value(t, f) ? l : r).push_back(i);
      if (l.empty() || r.empty()) continue;
      if (l.front() > r.front()) std::swap(l, r);
      parts.insert({l, r});
    }
  }
  double total = 1;
  for (const auto& [l, r] : parts) total += count_trees(d, l, memo) * count_trees(d, r, memo);
  return memo[s] = total;
}

double count_trees(const Dataset& d) {
  std::vector<std::size_t> all(d.point_count);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::map<std::vector<std::size_t>, double> memo;
  return count_trees(d, all, memo);
}

Dataset xor4() { return make_data({{0, 0}, {0, 1}, {1, 0}, {1, 1}}, {0, 1, 1, 0}); }

}  // namespace

TEST_CASE("enumeration counts") {
  CHECK(enumerate_trees(single_point_dataset(), Hyperparams::uniform(2)).size() == 1);
  auto two = enumerate_trees(two_point_dataset(), Hyperparams::uniform(2));
  REQUIRE(two.size() == 2);
  CHECK(two[0].tree.node_count() == 1);
  CHECK(two[0].log_weight == doctest::Approx(std::log(1.0 / 6) - 2));
  CHECK(two[1].tree.node_count() == 3);
  CHECK(two[1].log_weight == doctest::Approx(std::log(0.25) - 4));

  auto grid = enumerate_trees(xor4(), Hyperparams::uniform(2));
  CHECK(static_cast<double>(grid.size()) == count_trees(xor4()));
  CHECK(grid.size() == 9);
}

TEST_CASE("enumeration counts agree with the count recursion on every fixture") {
  for (const auto& f : standard_fixtures(40, 5)) {
    CAPTURE(f.name);
    CHECK(static_cast<double>(enumerate_trees(f.data, f.hp).size()) == count_trees(f.data));
  }
}

TEST_CASE("enumeration cap is explicit") {
  CHECK_THROWS_AS(enumerate_trees(xor4(), Hyperparams::uniform(2), 5), EnumerationCapExceeded);
}

TEST_CASE("two-point posterior") {
  OraclePosterior post = oracle_posterior(two_point_dataset(), Hyperparams::uniform(2));
  REQUIRE(post.trees.size() == 2);
  CHECK(post.texts[0] == "(leaf 1 1)");
  CHECK(post.probabilities[0] == doctest::Approx(0.8312).epsilon(1e-4));
  CHECK(post.probabilities[1] == doctest::Approx(0.1688).epsilon(1e-3));
  const double a = 1.0 / 6, b = std::exp(-2.0) / 4;
  CHECK(post.probabilities[0] == doctest::Approx(a / (a + b)).epsilon(1e-12));
  auto [idx, unique] = post.argmax();
  CHECK(idx == 0);
  CHECK(unique);
}

TEST_CASE("posteriors are normalized, ordered and scale invariant") {
  for (const auto& f : standard_fixtures(20, 9)) {
    OraclePosterior post = oracle_posterior(f.data, f.hp);
    double total = 0;
    for (double p : post.probabilities) total += p;
    CHECK(std::abs(total - 1.0) < 1e-12);
    CHECK(std::is_sorted(post.texts.begin(), post.texts.end()));

    Dataset scaled = f.data;
    for (double& x : scaled.features) x = 10.0 * x * x * x + 1.0;
    OraclePosterior other = oracle_posterior(scaled, f.hp);
    auto p = post.probabilities, q = other.probabilities;
    std::sort(p.begin(), p.end());
    std::sort(q.begin(), q.end());
    REQUIRE(p.size() == q.size());
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-12));
  }
}

TEST_CASE("tied maxima are reported as not unique") {
  // With a negative log penalty the two depth-two XOR trees split first on
  // either feature and tie.
  OraclePosterior post = oracle_posterior(xor4(), Hyperparams::uniform(2, 1.0, -1.0));
  CHECK_FALSE(post.argmax().second);
}

TEST_CASE("oracle predictive examples") {
  std::vector<double> q{0.0};
  auto single = oracle_predictive(q, single_point_dataset(), Hyperparams::uniform(2));
  auto leaf = leaf_predictive({{1, 0}}, Hyperparams::uniform(2));
  CHECK(single == leaf);
  auto two = oracle_predictive(q, two_point_dataset(), Hyperparams::uniform(2));
  CHECK(two[0] == doctest::Approx(0.5281).epsilon(1e-4));
  CHECK(two[1] == doctest::Approx(0.4719).epsilon(1e-4));
}

TEST_CASE("dynamic program and enumeration agree on every fixture") {
  for (const auto& f : standard_fixtures(20, 1)) {
    CAPTURE(f.name);
    MemoTable m = compute_scores(f.data, f.hp);
    OracleComparison c = compare_with_oracle(m);
    CHECK(c.q_error <= 1e-9);
    CHECK(c.q_max_error <= 1e-9);
    if (c.argmax_unique) CHECK(c.map_matches);
    CHECK(c.predictive_error <= 1e-9);
    CHECK(c.passed());
  }
}

TEST_CASE("standard fixtures are small and deterministic") {
  auto a = standard_fixtures(20, 1), b = standard_fixtures(20, 1);
  REQUIRE(a.size() == 23);
  CHECK(a[0].name == "single");
  CHECK(a[1].name == "two-point");
  CHECK(a[2].name == "xor4");
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].data == b[i].data);
    CHECK(a[i].hp == b[i].hp);
    CHECK(a[i].data.point_count <= 6);
    CHECK(a[i].data.feature_count <= 2);
    CHECK_NOTHROW(a[i].data.validate());
  }
}
