#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bdt/boxes.hpp"
#include "bdt/dataset.hpp"

namespace bdt {

/// Dirichlet pseudo-counts over the classes and the log of the per-leaf
/// size penalty phi.
struct Hyperparams {
  std::vector<double> alpha;
  double ln_phi = 2.0;

  static Hyperparams uniform(std::size_t classes, double alpha = 1.0, double ln_phi = 2.0);
  /// Throws InputError on a bad alpha vector or non-finite ln_phi.
  void validate(std::size_t classes) const;
  bool operator==(const Hyperparams&) const = default;
};

struct LabelCounts {
  std::vector<std::uint32_t> counts;

  std::uint64_t total() const;
  bool operator==(const LabelCounts&) const = default;
};

/// log of the multivariate beta function, sum log Gamma(g_i) - log Gamma(sum g_i).
double log_beta_c(std::span<const double> gamma);

/// Dirichlet-categorical evidence of a leaf: log beta(n + alpha) - log beta(alpha).
double log_leaf_likelihood(const LabelCounts& counts, const Hyperparams& hp);

double log_sum_exp(std::span<const double> terms);

using EntryId = std::uint32_t;
inline constexpr EntryId kNoEntry = std::numeric_limits<EntryId>::max();

/// Q_max argmax for a box: stop, or the split (with its child entries).
struct BestAction {
  bool stop = true;
  Split split{};
  EntryId left = kNoEntry;
  EntryId right = kNoEntry;
};

struct MemoEntry {
  double log_l = 0.0;
  double log_q = 0.0;
  double log_q_max = 0.0;
  BestAction best;
};

struct SplitRef {
  Split split;
  EntryId left = kNoEntry;
  EntryId right = kNoEntry;
};

struct MemoStats {
  std::size_t entries = 0;
  std::size_t max_depth = 0;
  std::uint64_t lookups = 0;
  std::uint64_t hits = 0;

  double hit_rate() const { return lookups ? static_cast<double>(hits) / lookups : 0.0; }
};

struct ScoreOptions {
  std::size_t memo_cap = 10'000'000;
};

/// Log-space scores L, Q and Q_max for every point set reachable from the
/// root by recursive splitting, keyed by point set.
///
/// The table owns a copy of the training data so split partitions can be
/// recomputed on demand instead of being stored per entry. Entry 0 is the
/// root. Immutable once built.
class MemoTable {
 public:
  const Dataset& data() const noexcept { return data_; }
  const Hyperparams& hyperparams() const noexcept { return hp_; }
  const FeatureIndex& index() const noexcept { return index_; }
  const MemoStats& stats() const noexcept { return stats_; }

  std::size_t size() const noexcept { return entries_.size(); }
  EntryId root() const noexcept { return 0; }
  const MemoEntry& entry(EntryId id) const { return entries_.at(id); }
  std::span<const std::uint64_t> key_words(EntryId id) const {
    return {arena_.data() + static_cast<std::size_t>(id) * words_, words_};
  }
  PointSet key(EntryId id) const;

  std::optional<EntryId> find(std::span<const std::uint64_t> words) const;
  std::optional<EntryId> find(const PointSet& key) const { return find(key.words()); }
  /// Throws InputError for a point set that is not in the table.
  EntryId require(const PointSet& key) const;

  LabelCounts label_counts(EntryId id) const;
  /// Candidate splits of the box in enumeration order, with child entries.
  std::vector<SplitRef> splits(EntryId id) const;

 private:
  friend MemoTable compute_scores(const Dataset&, const Hyperparams&, const ScoreOptions&);
  friend MemoTable read_memo(std::istream&);

  MemoTable(Dataset data, Hyperparams hp);
  /// Returns the entry for `words`, creating a blank one when absent.
  std::pair<EntryId, bool> get_or_insert(std::span<const std::uint64_t> words, std::size_t cap);
  void grow_slots();

  Dataset data_;
  Hyperparams hp_;
  FeatureIndex index_;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> arena_;
  std::vector<MemoEntry> entries_;
  std::vector<EntryId> slots_;
  MemoStats stats_;
};

/// Runs the score recursion bottom-up with an explicit work stack.
/// Throws MemoCapExceeded when more than `options.memo_cap` entries are needed.
MemoTable compute_scores(const Dataset& data, const Hyperparams& hp,
                         const ScoreOptions& options = {});

MemoStats memo_stats(const MemoTable& memo);

void write_memo(const MemoTable& memo, std::ostream& out);
/// Throws InputError on a truncated, corrupted or inconsistent dump.
MemoTable read_memo(std::istream& in);

/// Recomputes every entry from the embedded data and lists mismatches
/// beyond `tolerance` (empty when the table is consistent).
std::vector<std::string> verify_memo(const MemoTable& memo, double tolerance = 1e-9);

}  // namespace bdt
