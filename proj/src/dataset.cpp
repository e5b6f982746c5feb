#include "bdt/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include "bdt/errors.hpp"

namespace bdt {

double BinMap::apply(double raw) const {
  if (identity) return raw;
  auto it = std::upper_bound(boundaries.begin(), boundaries.end(), raw);
  return static_cast<double>(it - boundaries.begin());
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.point_count = indices.size();
  out.feature_count = feature_count;
  out.class_count = class_count;
  out.feature_names = feature_names;
  out.class_names = class_names;
  out.bins = bins;
  out.features.reserve(indices.size() * feature_count);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    auto r = row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.labels.push_back(labels[i]);
  }
  return out;
}

std::vector<double> Dataset::route(std::span<const double> raw) const {
  if (raw.size() != feature_count) {
    throw InputError("query has " + std::to_string(raw.size()) + " features, model expects " +
                     std::to_string(feature_count));
  }
  std::vector<double> out(raw.size());
  for (std::size_t f = 0; f < raw.size(); ++f) out[f] = bins[f].apply(raw[f]);
  return out;
}

void Dataset::validate() const {
  if (point_count < 1) throw InputError("dataset has no rows");
  if (feature_count < 1) throw InputError("dataset has no feature columns");
  if (class_count < 2) throw InputError("dataset needs at least two classes");
  if (features.size() != point_count * feature_count || labels.size() != point_count) {
    throw InputError("dataset storage does not match its dimensions");
  }
  if (bins.size() != feature_count) throw InputError("dataset is missing bin maps");
  for (auto y : labels) {
    if (y >= class_count) throw InputError("label index out of range");
  }
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_record(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* b = s.data();
  const char* e = b + s.size();
  if (*b == '+') ++b;
  double v = 0.0;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e) return std::nullopt;
  return v;
}

std::size_t select_label_column(const std::vector<std::string>& header,
                                 const std::string& selector) {
  if (selector.empty()) return header.size() - 1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == selector) return i;
  }
  std::size_t idx = 0;
  auto [p, ec] = std::from_chars(selector.data(), selector.data() + selector.size(), idx);
  if (ec == std::errc() && p == selector.data() + selector.size() && idx < header.size()) {
    return idx;
  }
  throw InputError("label column '" + selector + "' not found");
}

bool is_comment(const std::string& line) {
  auto t = trim(line);
  return !t.empty() && t.front() == '#';
}

}  // namespace

Dataset parse_csv(const std::string& text, const CsvOptions& options) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_comment(line)) continue;
    if (!trim(line).empty()) {
      header = split_record(line);
      break;
    }
  }
  if (header.size() < 2) throw InputError("CSV needs a header with a feature and a label column");
  const std::size_t label_col = select_label_column(header, options.label_column);

  std::vector<bool> categorical(header.size(), false);
  for (const auto& name : options.categorical_columns) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw InputError("categorical column '" + name + "' not found");
    categorical[static_cast<std::size_t>(it - header.begin())] = true;
  }

  Dataset data;
  data.feature_count = header.size() - 1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != label_col) data.feature_names.push_back(header[c]);
  }

  std::vector<std::map<std::string, double>> codes(header.size());
  std::vector<std::string> raw_labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || is_comment(line)) continue;
    auto cells = split_record(line);
    if (cells.size() != header.size()) {
      throw InputError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " cells, found " +
                       std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == label_col) {
        if (cells[c].empty()) throw InputError("line " + std::to_string(line_no) + ": empty label");
        raw_labels.push_back(cells[c]);
        continue;
      }
      if (categorical[c]) {
        auto& table = codes[c];
        auto [it, fresh] = table.try_emplace(cells[c], static_cast<double>(table.size()));
        data.features.push_back(it->second);
        continue;
      }
      auto v = parse_number(cells[c]);
      if (!v) {
        throw InputError("line " + std::to_string(line_no) + ": non-numeric value '" + cells[c] +
                         "' in column '" + header[c] + "'");
      }
      data.features.push_back(*v);
    }
  }
  data.point_count = raw_labels.size();
  if (data.point_count == 0) throw InputError("CSV has no data rows");

  // Classes are numbered in sorted order; numerically when every label is a number.
  std::vector<std::string> classes(raw_labels.begin(), raw_labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  bool numeric = std::all_of(classes.begin(), classes.end(),
                             [](const std::string& s) { return parse_number(s).has_value(); });
  if (numeric) {
    std::stable_sort(classes.begin(), classes.end(), [](const std::string& a, const std::string& b) {
      return *parse_number(a) < *parse_number(b);
    });
  }
  if (classes.size() < 2 && data.point_count > 1) {
    throw InputError("label column has a single class; the posterior would be trivial");
  }
  std::map<std::string, std::uint32_t> class_of;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    class_of[classes[i]] = static_cast<std::uint32_t>(i);
  }
  data.class_names = classes;
  // A lone row still gets a two-class label space.
  if (data.class_names.size() < 2) data.class_names.push_back("<unobserved>");
  data.class_count = data.class_names.size();
  for (const auto& y : raw_labels) data.labels.push_back(class_of.at(y));
  data.bins.assign(data.feature_count, BinMap{});
  data.validate();
  return data;
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), options);
}

void write_csv(const Dataset& data, std::ostream& out) {
  for (const auto& name : data.feature_names) out << name << ',';
  out << "label\n";
  char buf[64];
  for (std::size_t i = 0; i < data.point_count; ++i) {
    for (std::size_t f = 0; f < data.feature_count; ++f) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, data.value(i, f));
      out.write(buf, p - buf);
      out << ',';
    }
    out << data.class_names[data.labels[i]] << '\n';
  }
}

Dataset bucketize(const Dataset& data, std::size_t max_bins, BinStrategy strategy) {
  if (max_bins < 2) throw InputError("bucketize needs max_bins >= 2");
  Dataset out = data;
  std::vector<double> column(data.point_count);
  for (std::size_t f = 0; f < data.feature_count; ++f) {
    for (std::size_t i = 0; i < data.point_count; ++i) column[i] = data.value(i, f);
    std::sort(column.begin(), column.end());
    std::size_t distinct = column.empty() ? 0 : 1;
    for (std::size_t i = 1; i < column.size(); ++i) distinct += column[i] != column[i - 1];
    if (distinct <= max_bins) continue;

    std::vector<double> cut;
    const std::size_t n = column.size();
    if (strategy == BinStrategy::Quantile) {
      // Bucket q starts at the value sitting at sorted position ceil(q n / B).
      for (std::size_t q = 1; q < max_bins; ++q) {
        std::size_t pos = (q * n + max_bins - 1) / max_bins;
        if (pos >= n) break;
        double b = column[pos];
        if (b <= column.front()) continue;
        if (!cut.empty() && b <= cut.back()) continue;
        cut.push_back(b);
      }
    } else {
      // Edge values belong to the lower bucket, so each boundary sits one ulp above its edge.
      const double lo = column.front();
      const double step = (column.back() - lo) / static_cast<double>(max_bins);
      for (std::size_t q = 1; q < max_bins; ++q) {
        cut.push_back(std::nextafter(static_cast<double>(q) * step + lo,
                                     std::numeric_limits<double>::infinity()));
      }
    }
    BinMap local{false, cut};
    for (std::size_t i = 0; i < data.point_count; ++i) {
      out.features[i * data.feature_count + f] = local.apply(data.value(i, f));
    }
    // Compose with any earlier map so raw queries route in a single lookup.
    const BinMap& prior = data.bins[f];
    if (prior.identity) {
      out.bins[f] = local;
    } else {
      BinMap composed{false, {}};
      for (double b : cut) {
        // Integer bucket j satisfies j >= b exactly when j >= ceil(b).
        auto idx = static_cast<std::size_t>(std::ceil(b));
        composed.boundaries.push_back(prior.boundaries.at(idx - 1));
      }
      out.bins[f] = composed;
    }
  }
  return out;
}

Dataset generate_xor(const XorOptions& options) {
  if (options.k > options.d) throw InputError("XOR informative bits k exceeds dimension d");
  if (options.d == 0) throw InputError("XOR dimension must be positive");
  Dataset data;
  data.feature_count = options.d;
  data.class_count = 2;
  data.class_names = {"0", "1"};
  for (std::size_t f = 0; f < options.d; ++f) data.feature_names.push_back("x" + std::to_string(f));
  data.bins.assign(options.d, BinMap{});

  auto emit = [&](auto&& bit_of) {
    std::uint32_t parity = 0;
    for (std::size_t f = 0; f < options.d; ++f) {
      std::uint32_t b = bit_of(f);
      data.features.push_back(static_cast<double>(b));
      if (f < options.k) parity ^= b;
    }
    data.labels.push_back(parity);
  };

  if (options.exhaustive) {
    if (options.d > 24) throw InputError("exhaustive XOR grid limited to d <= 24");
    data.point_count = std::size_t{1} << options.d;
    for (std::size_t i = 0; i < data.point_count; ++i) {
      emit([&](std::size_t f) { return static_cast<std::uint32_t>((i >> (options.d - 1 - f)) & 1U); });
    }
  } else {
    if (options.n == 0) throw InputError("XOR dataset needs n >= 1");
    data.point_count = options.n;
    std::mt19937_64 rng(options.seed);
    for (std::size_t i = 0; i < options.n; ++i) {
      emit([&](std::size_t) { return static_cast<std::uint32_t>(rng() >> 63); });
    }
  }
  return data;
}

std::vector<std::size_t> FoldPlan::train_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] != fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::test_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] == fold) out.push_back(i);
  }
  return out;
}

FoldPlan kfold_split(const Dataset& data, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw InputError("k-fold split needs k >= 2");
  if (data.point_count < k) {
    throw InputError("cannot split " + std::to_string(data.point_count) + " rows into " +
                     std::to_string(k) + " folds");
  }
  std::vector<std::size_t> order(data.point_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  FoldPlan plan{k, std::vector<std::size_t>(data.point_count), seed};
  for (std::size_t j = 0; j < order.size(); ++j) plan.assignments[order[j]] = j % k;
  return plan;
}

}  // namespace bdt
