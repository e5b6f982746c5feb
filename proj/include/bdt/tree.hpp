#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bdt/boxes.hpp"
#include "bdt/score.hpp"

namespace bdt {

struct TreeNode {
  bool leaf = true;
  Split split{};
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  /// Training label counts; only meaningful on leaves.
  LabelCounts counts;
};

/// Explicit binary decision tree, nodes stored in preorder with the root at 0.
struct Tree {
  std::vector<TreeNode> nodes;

  std::size_t node_count() const noexcept { return nodes.size(); }
  std::size_t leaf_count() const noexcept;
  /// Index of the leaf reached by a query given in model space.
  std::size_t leaf_for(std::span<const double> query) const;
  /// Majority class of the query's leaf; ties go to the smallest class index.
  std::size_t predict(std::span<const double> query) const;

  /// Structural equality (split features, thresholds and leaf counts).
  bool operator==(const Tree& other) const;
};

/// One-line s-expression: `(leaf c0 c1 ..)` or `(node f=<int> t=<decimal> L R)`.
std::string serialize_tree(const Tree& tree);
/// Throws ParseError with the offending line and column.
Tree parse_tree(std::string_view text);

}  // namespace bdt
