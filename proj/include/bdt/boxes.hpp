#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "bdt/dataset.hpp"

namespace bdt {

/// A set of datapoint indices drawn from {0..universe-1}, stored as a bitset.
///
/// This is the identity of a bounding box: two boxes holding the same
/// points are interchangeable everywhere scores are concerned.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(std::size_t universe);

  /// Throws InputError unless `indices` is strictly increasing and in range.
  static PointSet from_indices(std::size_t universe, std::span<const std::size_t> indices);
  static PointSet all(std::size_t universe);
  static PointSet from_words(std::size_t universe, std::span<const std::uint64_t> words);

  static std::size_t word_count(std::size_t universe) { return (universe + 63) / 64; }

  std::size_t universe() const noexcept { return universe_; }
  std::size_t size() const noexcept;
  bool empty() const noexcept;
  bool contains(std::size_t index) const noexcept;
  /// Smallest member; undefined on an empty set.
  std::size_t first() const noexcept;
  void insert(std::size_t index);
  std::vector<std::size_t> indices() const;
  std::span<const std::uint64_t> words() const noexcept { return words_; }

  std::uint64_t hash() const noexcept;

  bool operator==(const PointSet&) const = default;
  /// Lexicographic order of the sorted index lists.
  std::strong_ordering operator<=>(const PointSet& other) const;

 private:
  std::size_t universe_ = 0;
  std::vector<std::uint64_t> words_;
};

std::uint64_t hash_words(std::span<const std::uint64_t> words) noexcept;

struct PointSetHash {
  std::size_t operator()(const PointSet& p) const noexcept { return p.hash(); }
};

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool contains(double v) const { return lo <= v && v < hi; }
  bool operator==(const Interval&) const = default;
};

/// Axis-aligned box with half-open bounds per feature and its residents.
struct Box {
  std::vector<Interval> bounds;
  PointSet points;
};

/// Predicate x[feature] < threshold; points satisfying it go left.
struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;

  bool goes_left(std::span<const double> x) const { return x[feature] < threshold; }
  bool operator==(const Split&) const = default;
  auto operator<=>(const Split&) const = default;
};

/// Per-feature rank tables and bitset masks over a dataset, built once and
/// shared by every split enumeration on that dataset.
class FeatureIndex {
 public:
  explicit FeatureIndex(const Dataset& data);

  std::size_t point_count() const noexcept { return n_; }
  std::size_t feature_count() const noexcept { return values_.size(); }
  std::size_t class_count() const noexcept { return class_masks_.size() / words_; }
  std::size_t words() const noexcept { return words_; }

  /// Sorted distinct values of feature f.
  std::span<const double> values(std::size_t f) const { return values_[f]; }
  /// Points whose value of feature f has rank exactly r.
  std::span<const std::uint64_t> equal_mask(std::size_t f, std::size_t r) const;
  /// Points whose value of feature f has rank below r, for r in 0..R_f.
  std::span<const std::uint64_t> below_mask(std::size_t f, std::size_t r) const;
  std::span<const std::uint64_t> class_mask(std::size_t c) const;

  std::vector<std::uint32_t> label_counts(std::span<const std::uint64_t> points) const;

 private:
  std::size_t n_ = 0;
  std::size_t words_ = 0;
  std::vector<std::vector<double>> values_;
  std::vector<std::size_t> mask_offset_;
  std::vector<std::uint64_t> equal_;
  std::vector<std::uint64_t> below_;
  std::vector<std::uint64_t> class_masks_;
};

/// Reusable buffers for split enumeration. After `enumerate_splits`, entry j
/// of `splits` owns words [j*W, (j+1)*W) of `left` and `right`.
struct SplitScratch {
  std::vector<Split> splits;
  std::vector<std::uint64_t> left;
  std::vector<std::uint64_t> right;
  std::vector<std::uint64_t> keys;
  std::vector<std::size_t> ranks;

  std::span<const std::uint64_t> left_of(std::size_t j, std::size_t w) const {
    return {left.data() + j * w, w};
  }
  std::span<const std::uint64_t> right_of(std::size_t j, std::size_t w) const {
    return {right.data() + j * w, w};
  }
};

/// Enumerates one split per distinct partition of `points`, ordered by
/// (feature, threshold). Thresholds sit midway between consecutive distinct
/// resident values. Splits that divide the residents into the same two
/// sets, in either orientation, keep only the first representative.
void enumerate_splits(std::span<const std::uint64_t> points, const FeatureIndex& index,
                      SplitScratch& scratch);

struct CandidatePartition {
  Split split;
  PointSet left;
  PointSet right;
};

std::vector<CandidatePartition> candidate_partitions(const PointSet& points,
                                                     const FeatureIndex& index);

Box root_box(const Dataset& data);
std::vector<Split> candidate_splits(const Box& box, const Dataset& data);
/// Throws InputError when `split` leaves either side empty.
std::pair<Box, Box> apply_split(const Box& box, const Split& split, const Dataset& data);
PointSet canonical_key(const Box& box);

}  // namespace bdt
