#include "bdt/boxes.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

#include "bdt/errors.hpp"

namespace bdt {

PointSet::PointSet(std::size_t universe) : universe_(universe), words_(word_count(universe), 0) {}

PointSet PointSet::from_indices(std::size_t universe, std::span<const std::size_t> indices) {
  PointSet p(universe);
  for (std::size_t j = 0; j < indices.size(); ++j) {
    if (indices[j] >= universe) throw InputError("point index out of range");
    if (j > 0 && indices[j] <= indices[j - 1]) {
      throw InputError("point indices must be strictly increasing");
    }
    p.insert(indices[j]);
  }
  return p;
}

PointSet PointSet::all(std::size_t universe) {
  PointSet p(universe);
  for (std::size_t i = 0; i < universe; ++i) p.insert(i);
  return p;
}

PointSet PointSet::from_words(std::size_t universe, std::span<const std::uint64_t> words) {
  PointSet p(universe);
  std::copy(words.begin(), words.end(), p.words_.begin());
  return p;
}

std::size_t PointSet::size() const noexcept {
  std::size_t s = 0;
  for (auto w : words_) s += static_cast<std::size_t>(std::popcount(w));
  return s;
}

bool PointSet::empty() const noexcept {
  return std::all_of(words_.begin(), words_.end(), [](std::uint64_t w) { return w == 0; });
}

bool PointSet::contains(std::size_t index) const noexcept {
  return index < universe_ && ((words_[index / 64] >> (index % 64)) & 1U);
}

std::size_t PointSet::first() const noexcept {
  for (std::size_t w = 0; w < words_.size(); ++w) {
    if (words_[w]) return w * 64 + static_cast<std::size_t>(std::countr_zero(words_[w]));
  }
  return universe_;
}

void PointSet::insert(std::size_t index) { words_[index / 64] |= std::uint64_t{1} << (index % 64); }

std::vector<std::size_t> PointSet::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t w = 0; w < words_.size(); ++w) {
    for (std::uint64_t bits = words_[w]; bits; bits &= bits - 1) {
      out.push_back(w * 64 + static_cast<std::size_t>(std::countr_zero(bits)));
    }
  }
  return out;
}

std::uint64_t hash_words(std::span<const std::uint64_t> words) noexcept {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ words.size();
  for (auto w : words) {
    std::uint64_t z = w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    h ^= z ^ (z >> 31);
  }
  return h;
}

std::uint64_t PointSet::hash() const noexcept { return hash_words(words_); }

std::strong_ordering PointSet::operator<=>(const PointSet& other) const {
  auto a = indices();
  auto b = other.indices();
  return std::lexicographical_compare_three_way(a.begin(), a.end(), b.begin(), b.end());
}

FeatureIndex::FeatureIndex(const Dataset& data)
    : n_(data.point_count), words_(PointSet::word_count(data.point_count)) {
  values_.resize(data.feature_count);
  std::size_t offset = 0;
  for (std::size_t f = 0; f < data.feature_count; ++f) {
    auto& vals = values_[f];
    for (std::size_t i = 0; i < n_; ++i) vals.push_back(data.value(i, f));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    mask_offset_.push_back(offset);
    offset += vals.size() + 1;
  }
  equal_.assign(offset * words_, 0);
  below_.assign(offset * words_, 0);
  for (std::size_t f = 0; f < data.feature_count; ++f) {
    const auto& vals = values_[f];
    for (std::size_t i = 0; i < n_; ++i) {
      auto r = static_cast<std::size_t>(
          std::lower_bound(vals.begin(), vals.end(), data.value(i, f)) - vals.begin());
      equal_[(mask_offset_[f] + r) * words_ + i / 64] |= std::uint64_t{1} << (i % 64);
    }
    // below(r) = union of equal(0..r-1)
    for (std::size_t r = 1; r <= vals.size(); ++r) {
      for (std::size_t w = 0; w < words_; ++w) {
        below_[(mask_offset_[f] + r) * words_ + w] =
            below_[(mask_offset_[f] + r - 1) * words_ + w] |
            equal_[(mask_offset_[f] + r - 1) * words_ + w];
      }
    }
  }
  class_masks_.assign(data.class_count * words_, 0);
  for (std::size_t i = 0; i < n_; ++i) {
    class_masks_[data.labels[i] * words_ + i / 64] |= std::uint64_t{1} << (i % 64);
  }
}

std::span<const std::uint64_t> FeatureIndex::equal_mask(std::size_t f, std::size_t r) const {
  return {equal_.data() + (mask_offset_[f] + r) * words_, words_};
}

std::span<const std::uint64_t> FeatureIndex::below_mask(std::size_t f, std::size_t r) const {
  return {below_.data() + (mask_offset_[f] + r) * words_, words_};
}

std::span<const std::uint64_t> FeatureIndex::class_mask(std::size_t c) const {
  return {class_masks_.data() + c * words_, words_};
}

std::vector<std::uint32_t> FeatureIndex::label_counts(std::span<const std::uint64_t> points) const {
  std::vector<std::uint32_t> counts(class_count(), 0);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    auto mask = class_mask(c);
    std::uint32_t k = 0;
    for (std::size_t w = 0; w < words_; ++w) k += static_cast<std::uint32_t>(std::popcount(points[w] & mask[w]));
    counts[c] = k;
  }
  return counts;
}

namespace {

bool intersects(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  for (std::size_t w = 0; w < a.size(); ++w) {
    if (a[w] & b[w]) return true;
  }
  return false;
}

std::size_t first_member(std::span<const std::uint64_t> a) {
  for (std::size_t w = 0; w < a.size(); ++w) {
    if (a[w]) return w * 64 + static_cast<std::size_t>(std::countr_zero(a[w]));
  }
  return a.size() * 64;
}

}  // namespace

void enumerate_splits(std::span<const std::uint64_t> points, const FeatureIndex& index,
                      SplitScratch& scratch) {
  const std::size_t w = index.words();
  scratch.splits.clear();
  scratch.left.clear();
  scratch.right.clear();
  scratch.keys.clear();
  const std::size_t first = first_member(points);
  if (first >= index.point_count()) return;
  const std::uint64_t first_bit = std::uint64_t{1} << (first % 64);
  const std::size_t first_word = first / 64;

  for (std::size_t f = 0; f < index.feature_count(); ++f) {
    auto vals = index.values(f);
    scratch.ranks.clear();
    for (std::size_t r = 0; r < vals.size(); ++r) {
      if (intersects(points, index.equal_mask(f, r))) scratch.ranks.push_back(r);
    }
    for (std::size_t j = 1; j < scratch.ranks.size(); ++j) {
      const std::size_t lo = scratch.ranks[j - 1];
      const std::size_t hi = scratch.ranks[j];
      auto below = index.below_mask(f, hi);
      const std::size_t base = scratch.left.size();
      scratch.left.resize(base + w);
      scratch.right.resize(base + w);
      for (std::size_t k = 0; k < w; ++k) {
        scratch.left[base + k] = points[k] & below[k];
        scratch.right[base + k] = points[k] & ~below[k];
      }
      // Orientation-free partition key: the side holding the first resident.
      const bool left_has_first = scratch.left[base + first_word] & first_bit;
      const std::uint64_t* key = left_has_first ? &scratch.left[base] : &scratch.right[base];
      bool duplicate = false;
      for (std::size_t s = 0; s < scratch.splits.size() && !duplicate; ++s) {
        duplicate = std::memcmp(&scratch.keys[s * w], key, w * sizeof(std::uint64_t)) == 0;
      }
      if (duplicate) {
        scratch.left.resize(base);
        scratch.right.resize(base);
        continue;
      }
      scratch.keys.insert(scratch.keys.end(), key, key + w);
      scratch.splits.push_back(Split{f, (vals[lo] + vals[hi]) / 2.0});
    }
  }
}

std::vector<CandidatePartition> candidate_partitions(const PointSet& points,
                                                     const FeatureIndex& index) {
  SplitScratch scratch;
  enumerate_splits(points.words(), index, scratch);
  std::vector<CandidatePartition> out;
  const std::size_t w = index.words();
  for (std::size_t j = 0; j < scratch.splits.size(); ++j) {
    out.push_back({scratch.splits[j], PointSet::from_words(points.universe(), scratch.left_of(j, w)),
                   PointSet::from_words(points.universe(), scratch.right_of(j, w))});
  }
  return out;
}

Box root_box(const Dataset& data) {
  if (data.point_count == 0) throw InputError("root box of an empty dataset");
  return Box{std::vector<Interval>(data.feature_count), PointSet::all(data.point_count)};
}

std::vector<Split> candidate_splits(const Box& box, const Dataset& data) {
  FeatureIndex index(data);
  SplitScratch scratch;
  enumerate_splits(box.points.words(), index, scratch);
  return scratch.splits;
}

std::pair<Box, Box> apply_split(const Box& box, const Split& split, const Dataset& data) {
  if (split.feature >= data.feature_count) throw InputError("split feature out of range");
  Box left{box.bounds, PointSet(data.point_count)};
  Box right{box.bounds, PointSet(data.point_count)};
  for (std::size_t i : box.points.indices()) {
    (split.goes_left(data.row(i)) ? left : right).points.insert(i);
  }
  if (left.points.empty() || right.points.empty()) {
    throw InputError("split leaves a child box empty");
  }
  auto& lb = left.bounds[split.feature];
  lb.hi = std::min(lb.hi, split.threshold);
  auto& rb = right.bounds[split.feature];
  rb.lo = std::max(rb.lo, split.threshold);
  return {std::move(left), std::move(right)};
}

PointSet canonical_key(const Box& box) { return box.points; }

}  // namespace bdt
