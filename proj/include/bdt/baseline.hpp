#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "bdt/dataset.hpp"
#include "bdt/tree.hpp"

namespace bdt {

struct BaselineParams {
  std::optional<std::size_t> max_depth;
  std::size_t min_samples_split = 2;
  std::size_t tree_count = 100;
  /// Fraction of features tried at each split; 0 selects sqrt(d)/d.
  double feature_subsample = 0.0;
  bool bootstrap = true;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  /// Features tried per split for a d-feature dataset.
  std::size_t features_per_split(std::size_t d) const;
  void validate() const;
};

/// Greedy top-down CART with the Gini criterion. A node becomes a leaf when
/// no split lowers weighted impurity.
Tree cart_train(const Dataset& data, const BaselineParams& params = {});

using Forest = std::vector<Tree>;

/// Bagged trees with per-split feature subsampling. Each tree draws from its
/// own seeded stream, so the result does not depend on `params.threads`.
Forest rf_train(const Dataset& data, const BaselineParams& params);
/// Majority vote of the trees; ties go to the smallest class index.
std::size_t forest_predict(const Forest& forest, std::span<const double> model_query,
                           std::size_t class_count);

struct Metrics {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;
  double size = 0.0;
};

/// Accuracy of `predict` (called with raw rows) on `test`; `size` is the
/// model's total node count. Throws InputError on an empty test set.
Metrics evaluate(const std::function<std::size_t(std::span<const double>)>& predict,
                 const Dataset& test, double size = 0.0);

struct MeanInterval {
  double mean = 0.0;
  /// Half-width of the two-sided 95% Student-t interval; 0 below two samples.
  double half_width = 0.0;
  std::size_t samples = 0;
};

MeanInterval mean_ci95(std::span<const double> values);

}  // namespace bdt
