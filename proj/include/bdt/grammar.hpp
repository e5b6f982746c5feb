#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "bdt/score.hpp"
#include "bdt/tree.hpp"

namespace bdt {

/// Production probabilities of one box: stop, or split j of its candidates.
struct RuleDistribution {
  double stop_logp = 0.0;
  std::vector<double> split_logps;
  std::vector<SplitRef> splits;
};

RuleDistribution rule_distribution(EntryId id, const MemoTable& memo);
/// Throws InputError for a key the memo does not hold.
RuleDistribution rule_distribution(const PointSet& key, const MemoTable& memo);

/// Picks a production for a box: 0 means stop, j + 1 means split j.
using ProductionChooser = std::function<std::size_t(EntryId, const RuleDistribution&)>;

/// Chooser that draws productions from their PCFG probabilities.
ProductionChooser random_chooser(std::mt19937_64& rng);

/// Expands the grammar from the root, asking `choose` at every box.
Tree grow_tree(const MemoTable& memo, const ProductionChooser& choose);
/// Follows a single root-to-leaf path toward `model_query`; returns the leaf box.
EntryId walk_path(std::span<const double> model_query, const MemoTable& memo,
                  const ProductionChooser& choose);

/// Draws a full tree; its probability equals its posterior probability.
Tree sample_tree(const MemoTable& memo, std::mt19937_64& rng);

enum class PathMode { LabelDraw, Distribution };

struct PathPrediction {
  EntryId leaf = 0;
  std::vector<double> distribution;
  /// Drawn from `distribution` in LabelDraw mode, its argmax otherwise.
  std::size_t label = 0;
};

/// Samples only the path that a raw query follows through an implicit tree.
PathPrediction sample_path_predict(std::span<const double> raw_query, const MemoTable& memo,
                                   std::mt19937_64& rng, PathMode mode = PathMode::Distribution);

/// Leaf box of the MAP tree that holds the raw query.
EntryId map_path_leaf(std::span<const double> raw_query, const MemoTable& memo);
/// MAP tree response; ties between classes go to the smallest index.
std::size_t map_path_predict(std::span<const double> raw_query, const MemoTable& memo);

Tree extract_map_tree(const MemoTable& memo);

/// Exact posterior predictive averaged over every supported tree.
std::vector<double> ensemble_exact_predict(std::span<const double> raw_query, const MemoTable& memo);

/// Posterior mean of the total node count, by one bottom-up pass.
double expected_tree_size(const MemoTable& memo);

/// Dirichlet-categorical predictive (n_c + alpha_c) / (n + sum alpha).
std::vector<double> leaf_predictive(const LabelCounts& counts, const Hyperparams& hp);

std::size_t argmax(std::span<const double> values);

}  // namespace bdt
