#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace bdt {

/// Maps a raw feature value onto the model's (possibly bucketed) value space.
///
/// An identity map passes values through. Otherwise the bucket index is the
/// number of boundaries that are <= the raw value, so bucket b covers
/// [boundaries[b-1], boundaries[b]).
struct BinMap {
  bool identity = true;
  std::vector<double> boundaries;

  double apply(double raw) const;
  bool operator==(const BinMap&) const = default;
};

/// Classification data with ordinal features stored row-major.
///
/// `features` always holds model-space values; `bins` records how a raw
/// query value is routed into that space.
struct Dataset {
  std::size_t point_count = 0;
  std::size_t feature_count = 0;
  std::size_t class_count = 0;
  std::vector<double> features;
  std::vector<std::uint32_t> labels;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
  std::vector<BinMap> bins;

  double value(std::size_t point, std::size_t feature) const {
    return features[point * feature_count + feature];
  }
  std::span<const double> row(std::size_t point) const {
    return {features.data() + point * feature_count, feature_count};
  }

  /// Rows `indices` in the given order; class set and bin maps are kept.
  Dataset subset(std::span<const std::size_t> indices) const;

  /// Applies the stored bin maps to a raw query vector.
  std::vector<double> route(std::span<const double> raw) const;

  /// Throws InputError when an invariant is broken.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

struct CsvOptions {
  /// Column name or zero-based index; empty selects the last column.
  std::string label_column;
  /// Columns whose string values are ordinal-encoded in first-appearance order.
  std::vector<std::string> categorical_columns;
};

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
Dataset parse_csv(const std::string& text, const CsvOptions& options = {});
void write_csv(const Dataset& data, std::ostream& out);

enum class BinStrategy {
  /// max_bins intervals of equal width over the observed range, closed on
  /// the right like pandas.cut.
  EqualWidth,
  /// Equal-frequency bins over the empirical distribution.
  Quantile,
};

/// Buckets every feature with more than `max_bins` distinct values; other
/// features pass through unchanged. The raw-to-bucket mapping is kept in
/// `bins` for routing queries.
Dataset bucketize(const Dataset& data, std::size_t max_bins,
                  BinStrategy strategy = BinStrategy::EqualWidth);

struct XorOptions {
  std::size_t n = 1000;
  std::size_t d = 20;
  std::size_t k = 4;
  std::uint64_t seed = 0;
  /// Emit every one of the 2^d binary patterns once, in counting order with
  /// feature 0 as the most significant bit. `n` and `seed` are ignored.
  bool exhaustive = false;
};

Dataset generate_xor(const XorOptions& options);

struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::size_t> assignments;
  std::uint64_t seed = 0;

  std::vector<std::size_t> train_indices(std::size_t fold) const;
  std::vector<std::size_t> test_indices(std::size_t fold) const;
};

FoldPlan kfold_split(const Dataset& data, std::size_t k, std::uint64_t seed);

}  // namespace bdt
