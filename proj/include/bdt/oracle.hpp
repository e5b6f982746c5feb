#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bdt/dataset.hpp"
#include "bdt/score.hpp"
#include "bdt/tree.hpp"

namespace bdt {

/// A tree with its unnormalized log posterior: sum of leaf log L - b(T) ln phi.
struct WeightedTree {
  Tree tree;
  double log_weight = 0.0;
};

/// Every tree on `data` that satisfies the tree constraints, one per
/// equivalence class, in enumeration order. Throws EnumerationCapExceeded
/// past `max_trees`.
std::vector<WeightedTree> enumerate_trees(const Dataset& data, const Hyperparams& hp,
                                          std::size_t max_trees = 1'000'000);

struct OraclePosterior {
  std::vector<WeightedTree> trees;
  std::vector<std::string> texts;
  std::vector<double> probabilities;
  /// log of the sum of all tree weights.
  double log_evidence = 0.0;

  /// Index of the highest-weight tree, and whether it is strictly unique.
  std::pair<std::size_t, bool> argmax(double tolerance = 1e-12) const;
};

/// Normalized posterior over all trees, sorted by serialized text.
OraclePosterior oracle_posterior(const Dataset& data, const Hyperparams& hp,
                                 std::size_t max_trees = 1'000'000);

/// Posterior-weighted leaf predictive for a raw query, summed tree by tree.
std::vector<double> oracle_predictive(std::span<const double> raw_query, const OraclePosterior& posterior,
                                      const Dataset& data, const Hyperparams& hp);
std::vector<double> oracle_predictive(std::span<const double> raw_query, const Dataset& data,
                                      const Hyperparams& hp, std::size_t max_trees = 1'000'000);

/// A tiny dataset with the hyperparameters it is checked under.
struct Fixture {
  std::string name;
  Dataset data;
  Hyperparams hp;
};

/// The hand-built single-point, two-point and 4-point XOR grid fixtures,
/// followed by `random_count` random ones with n <= 6 and d <= 2.
std::vector<Fixture> standard_fixtures(std::size_t random_count = 20, std::uint64_t seed = 1);

/// Fixture with one feature and points x = 0 (class 0) and x = 1 (class 1).
Dataset two_point_dataset();
Dataset single_point_dataset();

/// Differences between the dynamic program and brute-force enumeration.
struct OracleComparison {
  std::size_t tree_count = 0;
  /// |log Q(root) - (ln phi + log sum of tree weights)|
  double q_error = 0.0;
  /// |log Q_max(root) - (ln phi + max tree weight)|
  double q_max_error = 0.0;
  bool argmax_unique = false;
  bool map_matches = false;
  /// Largest per-class gap between exact ensemble and oracle predictives,
  /// over every training point and every cell midpoint of the feature grid.
  double predictive_error = 0.0;

  bool passed(double tolerance = 1e-9) const;
};

OracleComparison compare_with_oracle(const MemoTable& memo, std::size_t max_trees = 1'000'000);

}  // namespace bdt
