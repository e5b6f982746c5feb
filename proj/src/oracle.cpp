#include "bdt/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "bdt/boxes.hpp"
#include "bdt/errors.hpp"
#include "bdt/grammar.hpp"

namespace bdt {

namespace {

struct Subtree {
  Tree tree;
  double log_l_sum = 0.0;
  std::size_t leaves = 0;
};

class Enumerator {
 public:
  Enumerator(const Dataset& data, const Hyperparams& hp, std::size_t cap)
      : data_(data), hp_(hp), index_(data), cap_(cap) {}

  const std::vector<Subtree>& trees_of(const PointSet& points) {
    if (auto it = memo_.find(points); it != memo_.end()) return it->second;
    std::vector<Subtree> out;

    LabelCounts counts{std::vector<std::uint32_t>(data_.class_count, 0)};
    for (std::size_t i : points.indices()) ++counts.counts[data_.labels[i]];
    Subtree leaf;
    leaf.tree.nodes.push_back(TreeNode{true, {}, 0, 0, counts});
    leaf.log_l_sum = log_leaf_likelihood(counts, hp_);
    leaf.leaves = 1;
    out.push_back(std::move(leaf));

    for (const auto& part : candidate_partitions(points, index_)) {
      const auto& lefts = trees_of(part.left);
      const auto& rights = trees_of(part.right);
      if (out.size() + lefts.size() * rights.size() > cap_) {
        throw EnumerationCapExceeded("tree enumeration exceeds cap of " + std::to_string(cap_));
      }
      for (const auto& l : lefts) {
        for (const auto& r : rights) out.push_back(join(part.split, l, r));
      }
    }
    return memo_.emplace(points, std::move(out)).first->second;
  }

 private:
  static Subtree join(const Split& split, const Subtree& l, const Subtree& r) {
    Subtree s;
    s.tree.nodes.reserve(1 + l.tree.nodes.size() + r.tree.nodes.size());
    const auto left_base = std::uint32_t{1};
    const auto right_base = static_cast<std::uint32_t>(1 + l.tree.nodes.size());
    s.tree.nodes.push_back(TreeNode{false, split, left_base, right_base, {}});
    for (auto [src, base] : {std::pair{&l, left_base}, std::pair{&r, right_base}}) {
      for (TreeNode n : src->tree.nodes) {
        if (!n.leaf) {
          n.left += base;
          n.right += base;
        }
        s.tree.nodes.push_back(std::move(n));
      }
    }
    s.log_l_sum = l.log_l_sum + r.log_l_sum;
    s.leaves = l.leaves + r.leaves;
    return s;
  }

  const Dataset& data_;
  const Hyperparams& hp_;
  FeatureIndex index_;
  std::size_t cap_;
  std::map<PointSet, std::vector<Subtree>> memo_;
};

}  // namespace

std::vector<WeightedTree> enumerate_trees(const Dataset& data, const Hyperparams& hp,
                                          std::size_t max_trees) {
  data.validate();
  hp.validate(data.class_count);
  Enumerator e(data, hp, max_trees);
  const auto& all = e.trees_of(PointSet::all(data.point_count));
  std::vector<WeightedTree> out;
  out.reserve(all.size());
  for (const auto& s : all) {
    out.push_back({s.tree, s.log_l_sum - static_cast<double>(s.leaves) * hp.ln_phi});
  }
  return out;
}

std::pair<std::size_t, bool> OraclePosterior::argmax(double tolerance) const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < trees.size(); ++i) {
    if (trees[i].log_weight > trees[best].log_weight) best = i;
  }
  bool unique = true;
  for (std::size_t i = 0; i < trees.size(); ++i) {
    if (i != best && trees[best].log_weight - trees[i].log_weight <= tolerance) unique = false;
  }
  return {best, unique};
}

OraclePosterior oracle_posterior(const Dataset& data, const Hyperparams& hp, std::size_t max_trees) {
  auto trees = enumerate_trees(data, hp, max_trees);
  std::vector<std::string> texts;
  texts.reserve(trees.size());
  for (const auto& t : trees) texts.push_back(serialize_tree(t.tree));
  std::vector<std::size_t> order(trees.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return texts[a] < texts[b]; });

  OraclePosterior post;
  std::vector<double> logs;
  for (std::size_t i : order) {
    post.trees.push_back(std::move(trees[i]));
    post.texts.push_back(std::move(texts[i]));
    logs.push_back(post.trees.back().log_weight);
  }
  post.log_evidence = log_sum_exp(logs);
  for (double lw : logs) post.probabilities.push_back(std::exp(lw - post.log_evidence));
  return post;
}

std::vector<double> oracle_predictive(std::span<const double> raw_query, const OraclePosterior& posterior,
                                      const Dataset& data, const Hyperparams& hp) {
  const auto q = data.route(raw_query);
  std::vector<double> out(data.class_count, 0.0);
  for (std::size_t t = 0; t < posterior.trees.size(); ++t) {
    const Tree& tree = posterior.trees[t].tree;
    auto pred = leaf_predictive(tree.nodes[tree.leaf_for(q)].counts, hp);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += posterior.probabilities[t] * pred[c];
  }
  return out;
}

std::vector<double> oracle_predictive(std::span<const double> raw_query, const Dataset& data,
                                      const Hyperparams& hp, std::size_t max_trees) {
  return oracle_predictive(raw_query, oracle_posterior(data, hp, max_trees), data, hp);
}

namespace {

Dataset make_dataset(std::size_t d, std::size_t classes, std::vector<double> features,
                     std::vector<std::uint32_t> labels) {
  Dataset data;
  data.feature_count = d;
  data.class_count = classes;
  data.point_count = labels.size();
  data.features = std::move(features);
  data.labels = std::move(labels);
  for (std::size_t f = 0; f < d; ++f) data.feature_names.push_back("x" + std::to_string(f));
  for (std::size_t c = 0; c < classes; ++c) data.class_names.push_back(std::to_string(c));
  data.bins.assign(d, BinMap{});
  return data;
}

// Every distinct value of a feature, the midpoints between them, and one
// value beyond each end.
std::vector<double> probe_values(const FeatureIndex& index, std::size_t f) {
  const auto& v = index.values(f);
  std::vector<double> out{v.front() - 1.0};
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(v[i]);
    if (i + 1 < v.size()) out.push_back((v[i] + v[i + 1]) / 2);
  }
  out.push_back(v.back() + 1.0);
  return out;
}

}  // namespace

Dataset single_point_dataset() { return make_dataset(1, 2, {0.0}, {0}); }

Dataset two_point_dataset() { return make_dataset(1, 2, {0.0, 1.0}, {0, 1}); }

std::vector<Fixture> standard_fixtures(std::size_t random_count, std::uint64_t seed) {
  std::vector<Fixture> out;
  out.push_back({"single", single_point_dataset(), Hyperparams::uniform(2)});
  out.push_back({"two-point", two_point_dataset(), Hyperparams::uniform(2)});
  out.push_back({"xor4", make_dataset(2, 2, {0, 0, 0, 1, 1, 0, 1, 1}, {0, 1, 1, 0}), Hyperparams::uniform(2)});

  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  for (std::size_t r = 0; r < random_count; ++r) {
    const std::size_t n = pick(1, 6);
    const std::size_t d = pick(1, 2);
    const std::size_t classes = pick(2, 3);
    std::vector<double> features(n * d);
    for (double& x : features) x = static_cast<double>(pick(0, 3));
    std::vector<std::uint32_t> labels(n);
    for (auto& y : labels) y = static_cast<std::uint32_t>(pick(0, classes - 1));
    Hyperparams hp;
    for (std::size_t c = 0; c < classes; ++c) hp.alpha.push_back(std::uniform_real_distribution<double>(0.5, 2.0)(rng));
    hp.ln_phi = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    out.push_back({"random-" + std::to_string(r), make_dataset(d, classes, std::move(features), std::move(labels)), hp});
  }
  return out;
}

bool OracleComparison::passed(double tolerance) const {
  return q_error <= tolerance && q_max_error <= tolerance && (!argmax_unique || map_matches) &&
         predictive_error <= tolerance;
}

OracleComparison compare_with_oracle(const MemoTable& memo, std::size_t max_trees) {
  const Dataset& data = memo.data();
  const Hyperparams& hp = memo.hyperparams();
  const OraclePosterior post = oracle_posterior(data, hp, max_trees);
  OracleComparison out;
  out.tree_count = post.trees.size();

  const MemoEntry& root = memo.entry(memo.root());
  out.q_error = std::abs(root.log_q - (hp.ln_phi + post.log_evidence));
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& t : post.trees) best = std::max(best, t.log_weight);
  out.q_max_error = std::abs(root.log_q_max - (hp.ln_phi + best));

  auto [idx, unique] = post.argmax();
  out.argmax_unique = unique;
  out.map_matches = extract_map_tree(memo) == post.trees[idx].tree;

  // Queries go through the same routing on both sides, so model-space
  // probe values are compared consistently even for bucketed data.
  std::vector<std::vector<double>> queries;
  for (std::size_t i = 0; i < data.point_count; ++i) {
    auto r = data.row(i);
    queries.emplace_back(r.begin(), r.end());
  }
  if (data.feature_count <= 3) {
    std::vector<std::vector<double>> grid{{}};
    for (std::size_t f = 0; f < data.feature_count; ++f) {
      std::vector<std::vector<double>> next;
      for (const auto& prefix : grid) {
        for (double v : probe_values(memo.index(), f)) {
          next.push_back(prefix);
          next.back().push_back(v);
        }
      }
      grid = std::move(next);
    }
    queries.insert(queries.end(), grid.begin(), grid.end());
  }
  for (const auto& q : queries) {
    auto exact = ensemble_exact_predict(q, memo);
    auto brute = oracle_predictive(q, post, data, hp);
    for (std::size_t c = 0; c < exact.size(); ++c) {
      out.predictive_error = std::max(out.predictive_error, std::abs(exact[c] - brute[c]));
    }
  }
  return out;
}

}  // namespace bdt
