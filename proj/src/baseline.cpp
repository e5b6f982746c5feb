#include "bdt/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

#include "bdt/errors.hpp"

namespace bdt {

std::size_t BaselineParams::features_per_split(std::size_t d) const {
  const double frac = feature_subsample > 0.0 ? feature_subsample : std::sqrt(static_cast<double>(d)) / d;
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(frac * d)), 1, d);
}

void BaselineParams::validate() const {
  if (tree_count < 1) throw InputError("forest needs at least one tree");
  if (feature_subsample < 0.0 || feature_subsample > 1.0) {
    throw InputError("feature_subsample must lie in (0, 1]");
  }
  if (min_samples_split < 2) throw InputError("min_samples_split must be at least 2");
}

namespace {

constexpr double kMinDecrease = 1e-12;
constexpr std::uint32_t kNoParent = std::numeric_limits<std::uint32_t>::max();

double gini(std::span<const std::uint32_t> counts, double total) {
  if (total <= 0.0) return 0.0;
  double s = 1.0;
  for (auto c : counts) {
    const double p = c / total;
    s -= p * p;
  }
  return s;
}

struct Task {
  std::vector<std::size_t> rows;
  std::size_t depth;
  std::uint32_t parent;
  bool is_left;
};

/// Grows a tree over `rows` (duplicates allowed). With a non-null `rng`, each
/// split only considers a random subset of `mtry` features.
Tree grow(const Dataset& data, std::vector<std::size_t> rows, const BaselineParams& params,
          std::mt19937_64* rng, std::size_t mtry) {
  const std::size_t classes = data.class_count;
  Tree tree;
  std::vector<Task> todo;
  todo.push_back({std::move(rows), 0, kNoParent, false});
  std::vector<std::size_t> features(data.feature_count);
  std::vector<std::uint32_t> left(classes), right(classes);

  while (!todo.empty()) {
    Task task = std::move(todo.back());
    todo.pop_back();
    auto at = static_cast<std::uint32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (task.parent != kNoParent) {
      auto& p = tree.nodes[task.parent];
      (task.is_left ? p.left : p.right) = at;
    }
    LabelCounts counts{std::vector<std::uint32_t>(classes, 0)};
    for (auto r : task.rows) ++counts.counts[data.labels[r]];
    const double m = static_cast<double>(task.rows.size());
    const double parent_gini = gini(counts.counts, m);

    bool can_split = task.rows.size() >= params.min_samples_split && parent_gini > 0.0 &&
                     (!params.max_depth || task.depth < *params.max_depth);
    double best_decrease = kMinDecrease;
    std::optional<Split> best;
    if (can_split) {
      std::iota(features.begin(), features.end(), std::size_t{0});
      std::size_t considered = features.size();
      if (rng && mtry < features.size()) {
        for (std::size_t j = 0; j < mtry; ++j) {
          std::uniform_int_distribution<std::size_t> pick(j, features.size() - 1);
          std::swap(features[j], features[pick(*rng)]);
        }
        considered = mtry;
        std::sort(features.begin(), features.begin() + static_cast<std::ptrdiff_t>(mtry));
      }
      std::vector<std::size_t> sorted = task.rows;
      for (std::size_t k = 0; k < considered; ++k) {
        const std::size_t f = features[k];
        std::stable_sort(sorted.begin(), sorted.end(),
                         [&](std::size_t a, std::size_t b) { return data.value(a, f) < data.value(b, f); });
        std::fill(left.begin(), left.end(), 0);
        right = counts.counts;
        for (std::size_t p = 1; p < sorted.size(); ++p) {
          const auto y = data.labels[sorted[p - 1]];
          ++left[y];
          --right[y];
          const double lo = data.value(sorted[p - 1], f);
          const double hi = data.value(sorted[p], f);
          if (lo == hi) continue;
          const double nl = static_cast<double>(p);
          const double nr = m - nl;
          const double weighted = (nl * gini(left, nl) + nr * gini(right, nr)) / m;
          const double decrease = parent_gini - weighted;
          if (decrease > best_decrease) {
            best_decrease = decrease;
            best = Split{f, (lo + hi) / 2.0};
          }
        }
      }
    }
    if (!best) {
      tree.nodes[at].counts = std::move(counts);
      continue;
    }
    std::vector<std::size_t> l, r;
    for (auto row : task.rows) (best->goes_left(data.row(row)) ? l : r).push_back(row);
    tree.nodes[at].leaf = false;
    tree.nodes[at].split = *best;
    todo.push_back({std::move(r), task.depth + 1, at, false});
    todo.push_back({std::move(l), task.depth + 1, at, true});
  }
  return tree;
}

}  // namespace

Tree cart_train(const Dataset& data, const BaselineParams& params) {
  data.validate();
  std::vector<std::size_t> rows(data.point_count);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return grow(data, std::move(rows), params, nullptr, data.feature_count);
}

Forest rf_train(const Dataset& data, const BaselineParams& params) {
  data.validate();
  params.validate();
  const std::size_t mtry = params.features_per_split(data.feature_count);
  Forest forest(params.tree_count);
  auto train_one = [&](std::size_t t) {
    std::seed_seq seq{params.seed, static_cast<std::uint64_t>(t)};
    std::mt19937_64 rng(seq);
    std::vector<std::size_t> rows(data.point_count);
    if (params.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, data.point_count - 1);
      for (auto& r : rows) r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    forest[t] = grow(data, std::move(rows), params, &rng, mtry);
  };
  const std::size_t workers = std::clamp<std::size_t>(params.threads, 1, params.tree_count);
  if (workers == 1) {
    for (std::size_t t = 0; t < params.tree_count; ++t) train_one(t);
    return forest;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t t = w; t < params.tree_count; t += workers) train_one(t);
    });
  }
  pool.clear();
  return forest;
}

std::size_t forest_predict(const Forest& forest, std::span<const double> model_query,
                           std::size_t class_count) {
  std::vector<std::size_t> votes(class_count, 0);
  for (const auto& t : forest) ++votes.at(t.predict(model_query));
  return static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

Metrics evaluate(const std::function<std::size_t(std::span<const double>)>& predict,
                 const Dataset& test, double size) {
  if (test.point_count == 0) throw InputError("cannot evaluate on an empty test set");
  Metrics m;
  m.total = test.point_count;
  for (std::size_t i = 0; i < test.point_count; ++i) {
    if (predict(test.row(i)) == test.labels[i]) ++m.correct;
  }
  m.accuracy = static_cast<double>(m.correct) / static_cast<double>(m.total);
  m.size = size;
  return m;
}

MeanInterval mean_ci95(std::span<const double> values) {
  MeanInterval out;
  out.samples = values.size();
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  boost::math::students_t dist(static_cast<double>(values.size() - 1));
  const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
  out.half_width = t * sd / std::sqrt(static_cast<double>(values.size()));
  return out;
}

}  // namespace bdt
