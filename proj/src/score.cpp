#include "bdt/score.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "bdt/errors.hpp"

namespace bdt {

Hyperparams Hyperparams::uniform(std::size_t classes, double alpha, double ln_phi) {
  return Hyperparams{std::vector<double>(classes, alpha), ln_phi};
}

void Hyperparams::validate(std::size_t classes) const {
  if (alpha.size() != classes) {
    throw InputError("alpha has " + std::to_string(alpha.size()) + " entries for " +
                     std::to_string(classes) + " classes");
  }
  for (double a : alpha) {
    if (!(a > 0.0) || !std::isfinite(a)) throw InputError("alpha entries must be positive");
  }
  if (!std::isfinite(ln_phi)) throw InputError("ln_phi must be finite");
}

std::uint64_t LabelCounts::total() const {
  std::uint64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

double log_beta_c(std::span<const double> gamma) {
  double sum = 0.0;
  double acc = 0.0;
  for (double g : gamma) {
    if (!(g > 0.0)) throw InputError("beta function arguments must be positive");
    acc += std::lgamma(g);
    sum += g;
  }
  return acc - std::lgamma(sum);
}

double log_leaf_likelihood(const LabelCounts& counts, const Hyperparams& hp) {
  if (counts.counts.size() != hp.alpha.size()) {
    throw InputError("label counts and alpha differ in dimension");
  }
  std::vector<double> shifted(hp.alpha.size());
  for (std::size_t c = 0; c < shifted.size(); ++c) shifted[c] = counts.counts[c] + hp.alpha[c];
  return log_beta_c(shifted) - log_beta_c(hp.alpha);
}

double log_sum_exp(std::span<const double> terms) {
  if (terms.empty()) return -std::numeric_limits<double>::infinity();
  double m = *std::max_element(terms.begin(), terms.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

MemoTable::MemoTable(Dataset data, Hyperparams hp)
    : data_(std::move(data)),
      hp_(std::move(hp)),
      index_(data_),
      words_(PointSet::word_count(data_.point_count)) {
  slots_.assign(1024, kNoEntry);
}

PointSet MemoTable::key(EntryId id) const {
  return PointSet::from_words(data_.point_count, key_words(id));
}

std::optional<EntryId> MemoTable::find(std::span<const std::uint64_t> words) const {
  if (words.size() != words_) return std::nullopt;
  const std::size_t mask = slots_.size() - 1;
  for (std::size_t s = hash_words(words) & mask;; s = (s + 1) & mask) {
    EntryId id = slots_[s];
    if (id == kNoEntry) return std::nullopt;
    if (std::memcmp(arena_.data() + static_cast<std::size_t>(id) * words_, words.data(),
                    words_ * sizeof(std::uint64_t)) == 0) {
      return id;
    }
  }
}

EntryId MemoTable::require(const PointSet& key) const {
  auto id = find(key);
  if (!id) throw InputError("point set is not present in the memo table");
  return *id;
}

void MemoTable::grow_slots() {
  std::vector<EntryId> bigger(slots_.size() * 2, kNoEntry);
  const std::size_t mask = bigger.size() - 1;
  for (EntryId id = 0; id < entries_.size(); ++id) {
    std::size_t s = hash_words(key_words(id)) & mask;
    while (bigger[s] != kNoEntry) s = (s + 1) & mask;
    bigger[s] = id;
  }
  slots_ = std::move(bigger);
}

std::pair<EntryId, bool> MemoTable::get_or_insert(std::span<const std::uint64_t> words,
                                                  std::size_t cap) {
  ++stats_.lookups;
  const std::size_t mask = slots_.size() - 1;
  std::size_t s = hash_words(words) & mask;
  for (;; s = (s + 1) & mask) {
    EntryId id = slots_[s];
    if (id == kNoEntry) break;
    if (std::memcmp(arena_.data() + static_cast<std::size_t>(id) * words_, words.data(),
                    words_ * sizeof(std::uint64_t)) == 0) {
      ++stats_.hits;
      return {id, false};
    }
  }
  if (entries_.size() >= cap) throw MemoCapExceeded(cap);
  auto id = static_cast<EntryId>(entries_.size());
  arena_.insert(arena_.end(), words.begin(), words.end());
  entries_.emplace_back();
  slots_[s] = id;
  if (entries_.size() * 10 > slots_.size() * 7) grow_slots();
  return {id, true};
}

LabelCounts MemoTable::label_counts(EntryId id) const {
  return LabelCounts{index_.label_counts(key_words(id))};
}

std::vector<SplitRef> MemoTable::splits(EntryId id) const {
  SplitScratch scratch;
  enumerate_splits(key_words(id), index_, scratch);
  std::vector<SplitRef> out;
  out.reserve(scratch.splits.size());
  for (std::size_t j = 0; j < scratch.splits.size(); ++j) {
    auto l = find(scratch.left_of(j, words_));
    auto r = find(scratch.right_of(j, words_));
    if (!l || !r) throw InputError("memo table is missing a child entry");
    out.push_back({scratch.splits[j], *l, *r});
  }
  return out;
}

namespace {

enum class State : std::uint8_t { Fresh, Open, Done };

struct Frame {
  EntryId id;
  std::vector<SplitRef> splits;
  std::size_t next = 0;
};

}  // namespace

MemoTable compute_scores(const Dataset& data, const Hyperparams& hp, const ScoreOptions& options) {
  data.validate();
  hp.validate(data.class_count);
  MemoTable memo(data, hp);
  const std::size_t w = memo.words_;
  const double ln_phi = hp.ln_phi;

  std::vector<State> state;
  std::vector<Frame> stack;
  SplitScratch scratch;
  std::vector<std::uint64_t> parent(w);
  std::vector<double> terms;

  auto open = [&](EntryId id) {
    std::copy_n(memo.key_words(id).begin(), w, parent.begin());
    enumerate_splits(parent, memo.index_, scratch);
    Frame frame{id, {}, 0};
    frame.splits.reserve(scratch.splits.size());
    for (std::size_t j = 0; j < scratch.splits.size(); ++j) {
      auto [l, l_new] = memo.get_or_insert(scratch.left_of(j, w), options.memo_cap);
      auto [r, r_new] = memo.get_or_insert(scratch.right_of(j, w), options.memo_cap);
      if (state.size() < memo.entries_.size()) state.resize(memo.entries_.size(), State::Fresh);
      frame.splits.push_back({scratch.splits[j], l, r});
    }
    state[id] = State::Open;
    stack.push_back(std::move(frame));
    memo.stats_.max_depth = std::max(memo.stats_.max_depth, stack.size());
  };

  auto finish = [&](const Frame& frame) {
    MemoEntry& e = memo.entries_[frame.id];
    e.log_l = log_leaf_likelihood(memo.label_counts(frame.id), hp);
    terms.clear();
    terms.push_back(e.log_l);
    double best = e.log_l;
    e.best = BestAction{};
    for (const auto& s : frame.splits) {
      const MemoEntry& l = memo.entries_[s.left];
      const MemoEntry& r = memo.entries_[s.right];
      terms.push_back(l.log_q + r.log_q - ln_phi);
      const double v = l.log_q_max + r.log_q_max - ln_phi;
      // Strict comparison: stop wins ties, then the earliest split.
      if (v > best) {
        best = v;
        e.best = BestAction{false, s.split, s.left, s.right};
      }
    }
    e.log_q = log_sum_exp(terms);
    e.log_q_max = best;
    state[frame.id] = State::Done;
  };

  auto [root, fresh] = memo.get_or_insert(PointSet::all(data.point_count).words(), options.memo_cap);
  (void)fresh;
  state.assign(memo.entries_.size(), State::Fresh);
  open(root);

  while (!stack.empty()) {
    const std::size_t top = stack.size() - 1;
    bool descended = false;
    while (stack[top].next < 2 * stack[top].splits.size()) {
      const auto& s = stack[top].splits[stack[top].next / 2];
      const EntryId child = (stack[top].next % 2 == 0) ? s.left : s.right;
      if (state[child] == State::Done) {
        ++stack[top].next;
        continue;
      }
      open(child);
      descended = true;
      break;
    }
    if (descended) continue;
    finish(stack[top]);
    stack.pop_back();
  }
  memo.stats_.entries = memo.entries_.size();
  return memo;
}

MemoStats memo_stats(const MemoTable& memo) {
  MemoStats s = memo.stats();
  s.entries = memo.size();
  return s;
}

namespace {

constexpr char kMagic[8] = {'B', 'D', 'T', 'M', 'E', 'M', 'O', '\0'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  template <typename T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  std::string& buffer() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view buf) : buf_(buf) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > buf_.size()) throw InputError("memo dump is truncated");
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    auto len = get<std::uint32_t>();
    if (pos_ + len > buf_.size()) throw InputError("memo dump is truncated");
    std::string s(buf_.substr(pos_, len));
    pos_ += len;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  std::string_view buf_;
  std::size_t pos_ = 0;
};

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void put_dataset(Writer& w, const Dataset& d, const Hyperparams& hp) {
  w.put(static_cast<std::uint64_t>(d.point_count));
  w.put(static_cast<std::uint64_t>(d.feature_count));
  w.put(static_cast<std::uint64_t>(d.class_count));
  for (const auto& s : d.feature_names) w.put_string(s);
  for (const auto& s : d.class_names) w.put_string(s);
  for (double v : d.features) w.put(v);
  for (auto y : d.labels) w.put(y);
  for (const auto& b : d.bins) {
    w.put(static_cast<std::uint8_t>(b.identity));
    w.put(static_cast<std::uint32_t>(b.boundaries.size()));
    for (double v : b.boundaries) w.put(v);
  }
  for (double a : hp.alpha) w.put(a);
  w.put(hp.ln_phi);
}

std::pair<Dataset, Hyperparams> get_dataset(Reader& r) {
  Dataset d;
  d.point_count = r.get<std::uint64_t>();
  d.feature_count = r.get<std::uint64_t>();
  d.class_count = r.get<std::uint64_t>();
  if (d.point_count > (1ULL << 32) || d.feature_count > (1ULL << 20) || d.class_count > (1ULL << 20) ||
      d.point_count * d.feature_count * sizeof(double) > r.remaining()) {
    throw InputError("memo dump header has implausible dimensions");
  }
  for (std::size_t f = 0; f < d.feature_count; ++f) d.feature_names.push_back(r.get_string());
  for (std::size_t c = 0; c < d.class_count; ++c) d.class_names.push_back(r.get_string());
  d.features.resize(d.point_count * d.feature_count);
  for (auto& v : d.features) v = r.get<double>();
  d.labels.resize(d.point_count);
  for (auto& y : d.labels) y = r.get<std::uint32_t>();
  d.bins.resize(d.feature_count);
  for (auto& b : d.bins) {
    b.identity = r.get<std::uint8_t>() != 0;
    auto count = r.get<std::uint32_t>();
    if (count * sizeof(double) > r.remaining()) throw InputError("memo dump is truncated");
    b.boundaries.resize(count);
    for (auto& v : b.boundaries) v = r.get<double>();
  }
  Hyperparams hp;
  hp.alpha.resize(d.class_count);
  for (auto& a : hp.alpha) a = r.get<double>();
  hp.ln_phi = r.get<double>();
  d.validate();
  hp.validate(d.class_count);
  return {std::move(d), std::move(hp)};
}

}  // namespace

void write_memo(const MemoTable& memo, std::ostream& out) {
  Writer w;
  w.buffer().append(kMagic, sizeof kMagic);
  w.put(kVersion);
  put_dataset(w, memo.data(), memo.hyperparams());
  w.put(static_cast<std::uint64_t>(memo.size()));
  Writer rec;
  for (EntryId id = 0; id < memo.size(); ++id) {
    rec.buffer().clear();
    auto idx = memo.key(id).indices();
    rec.put(static_cast<std::uint32_t>(idx.size()));
    for (auto i : idx) rec.put(static_cast<std::uint32_t>(i));
    const MemoEntry& e = memo.entry(id);
    rec.put(e.log_l);
    rec.put(e.log_q);
    rec.put(e.log_q_max);
    rec.put(static_cast<std::int32_t>(e.best.stop ? -1 : static_cast<std::int32_t>(e.best.split.feature)));
    rec.put(e.best.stop ? 0.0 : e.best.split.threshold);
    w.put(static_cast<std::uint32_t>(rec.buffer().size()));
    w.buffer().append(rec.buffer());
  }
  w.put(fnv1a(w.buffer()));
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw InputError("failed writing memo dump");
}

MemoTable read_memo(std::istream& in) {
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  if (bytes.size() < sizeof kMagic + sizeof(std::uint32_t) + sizeof(std::uint64_t) ||
      std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw InputError("not a memo dump (bad magic)");
  }
  const std::string_view body(bytes.data(), bytes.size() - sizeof(std::uint64_t));
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body.size(), sizeof stored);
  if (stored != fnv1a(body)) throw InputError("memo dump checksum mismatch");

  Reader r(body);
  r.get<std::array<char, 8>>();
  if (auto v = r.get<std::uint32_t>(); v != kVersion) {
    throw InputError("unsupported memo dump version " + std::to_string(v));
  }
  auto [data, hp] = get_dataset(r);
  MemoTable memo(std::move(data), std::move(hp));
  const std::size_t n = memo.data_.point_count;
  const auto count = r.get<std::uint64_t>();
  std::vector<std::pair<std::int32_t, double>> actions;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto record_bytes = r.get<std::uint32_t>();
    const std::size_t start = r.pos();
    const auto m = r.get<std::uint32_t>();
    std::vector<std::size_t> idx(m);
    for (auto& i : idx) i = r.get<std::uint32_t>();
    auto key = PointSet::from_indices(n, idx);
    if (key.empty()) throw InputError("memo dump holds an empty point set");
    auto [id, fresh] = memo.get_or_insert(key.words(), std::numeric_limits<std::size_t>::max());
    if (!fresh) throw InputError("memo dump repeats a point set");
    MemoEntry& e = memo.entries_[id];
    e.log_l = r.get<double>();
    e.log_q = r.get<double>();
    e.log_q_max = r.get<double>();
    auto feature = r.get<std::int32_t>();
    auto threshold = r.get<double>();
    actions.emplace_back(feature, threshold);
    if (r.pos() - start != record_bytes) throw InputError("memo dump record length mismatch");
  }
  if (r.remaining() != 0) throw InputError("memo dump has trailing bytes");
  if (memo.size() == 0 || memo.key(0) != PointSet::all(n)) {
    throw InputError("memo dump does not start with the root point set");
  }
  for (EntryId id = 0; id < memo.size(); ++id) {
    auto [feature, threshold] = actions[id];
    if (feature < 0) continue;
    if (static_cast<std::size_t>(feature) >= memo.data_.feature_count) {
      throw InputError("memo dump best action names an unknown feature");
    }
    Split s{static_cast<std::size_t>(feature), threshold};
    PointSet left(n), right(n);
    for (std::size_t i : memo.key(id).indices()) {
      (s.goes_left(memo.data_.row(i)) ? left : right).insert(i);
    }
    auto l = memo.find(left);
    auto rt = memo.find(right);
    if (left.empty() || right.empty() || !l || !rt) {
      throw InputError("memo dump best action does not resolve to stored children");
    }
    memo.entries_[id].best = BestAction{false, s, *l, *rt};
  }
  memo.stats_.entries = memo.size();
  return memo;
}

std::vector<std::string> verify_memo(const MemoTable& memo, double tolerance) {
  std::vector<std::string> problems;
  MemoTable fresh = compute_scores(memo.data(), memo.hyperparams());
  if (fresh.size() != memo.size()) {
    problems.push_back("entry count " + std::to_string(memo.size()) + " differs from recomputed " +
                       std::to_string(fresh.size()));
  }
  for (EntryId id = 0; id < memo.size() && problems.size() < 20; ++id) {
    auto other = fresh.find(memo.key_words(id));
    if (!other) {
      problems.push_back("entry " + std::to_string(id) + " is not reachable from the root");
      continue;
    }
    const MemoEntry& a = memo.entry(id);
    const MemoEntry& b = fresh.entry(*other);
    auto off = [&](double x, double y) { return !(std::abs(x - y) <= tolerance); };
    if (off(a.log_l, b.log_l) || off(a.log_q, b.log_q) || off(a.log_q_max, b.log_q_max)) {
      problems.push_back("entry " + std::to_string(id) + " scores differ from recomputation");
    } else if (a.best.stop != b.best.stop || (!a.best.stop && a.best.split != b.best.split)) {
      problems.push_back("entry " + std::to_string(id) + " best action differs from recomputation");
    }
  }
  return problems;
}

}  // namespace bdt
