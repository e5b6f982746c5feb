#include "bdt/grammar.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "bdt/errors.hpp"

namespace bdt {

RuleDistribution rule_distribution(EntryId id, const MemoTable& memo) {
  const MemoEntry& e = memo.entry(id);
  const double ln_phi = memo.hyperparams().ln_phi;
  RuleDistribution d;
  d.stop_logp = e.log_l - e.log_q;
  d.splits = memo.splits(id);
  d.split_logps.reserve(d.splits.size());
  for (const auto& s : d.splits) {
    d.split_logps.push_back(memo.entry(s.left).log_q + memo.entry(s.right).log_q - ln_phi - e.log_q);
  }
  return d;
}

RuleDistribution rule_distribution(const PointSet& key, const MemoTable& memo) {
  return rule_distribution(memo.require(key), memo);
}

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t draw_production(const RuleDistribution& d, double u) {
  double acc = std::exp(d.stop_logp);
  if (u < acc) return 0;
  std::size_t last = 0;
  for (std::size_t j = 0; j < d.split_logps.size(); ++j) {
    const double p = std::exp(d.split_logps[j]);
    if (p > 0.0) last = j + 1;
    acc += p;
    if (u < acc) return j + 1;
  }
  // u fell in the rounding gap above the cumulative sum.
  return last;
}

std::size_t draw_class(std::span<const double> dist, double u) {
  double acc = 0.0;
  for (std::size_t c = 0; c < dist.size(); ++c) {
    acc += dist[c];
    if (u < acc) return c;
  }
  return dist.size() - 1;
}

struct GrowTask {
  EntryId id;
  std::uint32_t parent;
  bool is_left;
};

constexpr std::uint32_t kNoParent = std::numeric_limits<std::uint32_t>::max();

template <typename Decide>
Tree build_tree(const MemoTable& memo, Decide&& decide) {
  Tree tree;
  std::vector<GrowTask> todo{{memo.root(), kNoParent, false}};
  while (!todo.empty()) {
    GrowTask task = todo.back();
    todo.pop_back();
    auto at = static_cast<std::uint32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (task.parent != kNoParent) {
      auto& p = tree.nodes[task.parent];
      (task.is_left ? p.left : p.right) = at;
    }
    std::optional<SplitRef> split = decide(task.id);
    if (!split) {
      tree.nodes[at].counts = memo.label_counts(task.id);
      continue;
    }
    tree.nodes[at].leaf = false;
    tree.nodes[at].split = split->split;
    todo.push_back({split->right, at, false});
    todo.push_back({split->left, at, true});
  }
  return tree;
}

}  // namespace

ProductionChooser random_chooser(std::mt19937_64& rng) {
  return [&rng](EntryId, const RuleDistribution& d) { return draw_production(d, uniform01(rng)); };
}

Tree grow_tree(const MemoTable& memo, const ProductionChooser& choose) {
  return build_tree(memo, [&](EntryId id) -> std::optional<SplitRef> {
    RuleDistribution d = rule_distribution(id, memo);
    if (d.splits.empty()) return std::nullopt;
    std::size_t pick = choose(id, d);
    if (pick == 0) return std::nullopt;
    return d.splits.at(pick - 1);
  });
}

EntryId walk_path(std::span<const double> model_query, const MemoTable& memo,
                  const ProductionChooser& choose) {
  if (model_query.size() != memo.data().feature_count) {
    throw InputError("query dimension does not match the model");
  }
  EntryId at = memo.root();
  for (;;) {
    RuleDistribution d = rule_distribution(at, memo);
    std::size_t pick = d.splits.empty() ? 0 : choose(at, d);
    if (pick == 0) return at;
    const SplitRef& s = d.splits.at(pick - 1);
    at = s.split.goes_left(model_query) ? s.left : s.right;
  }
}

Tree sample_tree(const MemoTable& memo, std::mt19937_64& rng) {
  return grow_tree(memo, random_chooser(rng));
}

PathPrediction sample_path_predict(std::span<const double> raw_query, const MemoTable& memo,
                                   std::mt19937_64& rng, PathMode mode) {
  auto q = memo.data().route(raw_query);
  PathPrediction out;
  out.leaf = walk_path(q, memo, random_chooser(rng));
  out.distribution = leaf_predictive(memo.label_counts(out.leaf), memo.hyperparams());
  out.label = mode == PathMode::LabelDraw ? draw_class(out.distribution, uniform01(rng))
                                          : argmax(out.distribution);
  return out;
}

EntryId map_path_leaf(std::span<const double> raw_query, const MemoTable& memo) {
  auto q = memo.data().route(raw_query);
  EntryId at = memo.root();
  while (!memo.entry(at).best.stop) {
    const BestAction& b = memo.entry(at).best;
    at = b.split.goes_left(q) ? b.left : b.right;
  }
  return at;
}

std::size_t map_path_predict(std::span<const double> raw_query, const MemoTable& memo) {
  EntryId leaf = map_path_leaf(raw_query, memo);
  return argmax(leaf_predictive(memo.label_counts(leaf), memo.hyperparams()));
}

Tree extract_map_tree(const MemoTable& memo) {
  return build_tree(memo, [&](EntryId id) -> std::optional<SplitRef> {
    const BestAction& b = memo.entry(id).best;
    if (b.stop) return std::nullopt;
    return SplitRef{b.split, b.left, b.right};
  });
}

std::vector<double> ensemble_exact_predict(std::span<const double> raw_query, const MemoTable& memo) {
  const auto q = memo.data().route(raw_query);
  const std::size_t classes = memo.data().class_count;
  const double ln_phi = memo.hyperparams().ln_phi;

  // log W_c(N) over every box on some path the query can take.
  std::unordered_map<EntryId, std::vector<double>> log_w;
  struct Frame {
    EntryId id;
    std::vector<SplitRef> splits;
    std::size_t next = 0;
  };
  std::vector<Frame> stack;
  stack.push_back({memo.root(), memo.splits(memo.root()), 0});
  std::vector<double> terms;
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next < top.splits.size()) {
      const SplitRef& s = top.splits[top.next];
      const EntryId toward = s.split.goes_left(q) ? s.left : s.right;
      if (log_w.contains(toward)) {
        ++top.next;
      } else {
        auto child_splits = memo.splits(toward);
        stack.push_back({toward, std::move(child_splits), 0});
      }
      continue;
    }
    const MemoEntry& e = memo.entry(top.id);
    auto pred = leaf_predictive(memo.label_counts(top.id), memo.hyperparams());
    std::vector<double> w(classes);
    for (std::size_t c = 0; c < classes; ++c) {
      terms.clear();
      terms.push_back(e.log_l + std::log(pred[c]));
      for (const auto& s : top.splits) {
        const bool left = s.split.goes_left(q);
        const EntryId toward = left ? s.left : s.right;
        const EntryId away = left ? s.right : s.left;
        terms.push_back(memo.entry(away).log_q + log_w.at(toward)[c] - ln_phi);
      }
      w[c] = log_sum_exp(terms);
    }
    log_w.emplace(top.id, std::move(w));
    stack.pop_back();
  }
  const auto& root_w = log_w.at(memo.root());
  const double log_q_root = memo.entry(memo.root()).log_q;
  std::vector<double> out(classes);
  for (std::size_t c = 0; c < classes; ++c) out[c] = std::exp(root_w[c] - log_q_root);
  return out;
}

double expected_tree_size(const MemoTable& memo) {
  // Children always hold fewer points than their parent.
  std::vector<EntryId> order(memo.size());
  std::iota(order.begin(), order.end(), EntryId{0});
  std::vector<std::size_t> sizes(memo.size());
  for (EntryId id = 0; id < memo.size(); ++id) sizes[id] = memo.key(id).size();
  std::stable_sort(order.begin(), order.end(), [&](EntryId a, EntryId b) { return sizes[a] < sizes[b]; });
  std::vector<double> expected(memo.size(), 0.0);
  for (EntryId id : order) {
    RuleDistribution d = rule_distribution(id, memo);
    double e = 1.0;
    for (std::size_t j = 0; j < d.splits.size(); ++j) {
      e += std::exp(d.split_logps[j]) * (expected[d.splits[j].left] + expected[d.splits[j].right]);
    }
    expected[id] = e;
  }
  return expected[memo.root()];
}

std::vector<double> leaf_predictive(const LabelCounts& counts, const Hyperparams& hp) {
  if (counts.counts.size() != hp.alpha.size()) {
    throw InputError("label counts and alpha differ in dimension");
  }
  double denom = 0.0;
  for (std::size_t c = 0; c < hp.alpha.size(); ++c) denom += counts.counts[c] + hp.alpha[c];
  std::vector<double> out(hp.alpha.size());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = (counts.counts[c] + hp.alpha[c]) / denom;
  return out;
}

std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

}  // namespace bdt
