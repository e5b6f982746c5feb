#include "bdt/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "bdt/errors.hpp"
#include "bdt/grammar.hpp"
#include "bdt/oracle.hpp"
#include "bdt/tree.hpp"

namespace bdt {

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, ',')) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

double parse_double(const std::string& text, const std::string& what) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size()) {
    throw InputError(what + ": '" + text + "' is not a number");
  }
  return v;
}

std::string join_doubles(std::span<const double> values) {
  std::ostringstream s;
  s << std::setprecision(17);
  for (std::size_t i = 0; i < values.size(); ++i) s << (i ? "," : "") << values[i];
  return s.str();
}

const char* strategy_name(BinStrategy s) { return s == BinStrategy::Quantile ? "quantile" : "equal-width"; }

}  // namespace

EnsembleMode EnsembleMode::parse(const std::string& text) {
  if (text == "exact") return {};
  const std::string prefix = "committee:";
  if (text.rfind(prefix, 0) == 0) {
    std::size_t k = 0;
    const char* b = text.data() + prefix.size();
    const char* e = text.data() + text.size();
    auto [p, ec] = std::from_chars(b, e, k);
    if (ec == std::errc{} && p == e && k > 0) return {k};
  }
  throw InputError("ensemble mode must be 'exact' or 'committee:<k>', got '" + text + "'");
}

std::string EnsembleMode::str() const { return exact() ? "exact" : "committee:" + std::to_string(committee); }

Hyperparams RunConfig::hyperparams(std::size_t classes) const {
  Hyperparams hp;
  hp.ln_phi = ln_phi;
  if (alpha.size() == 1) {
    hp.alpha.assign(classes, alpha.front());
  } else if (alpha.size() == classes) {
    hp.alpha = alpha;
  } else {
    throw InputError("alpha has " + std::to_string(alpha.size()) + " values but the data has " +
                     std::to_string(classes) + " classes");
  }
  hp.validate(classes);
  return hp;
}

std::string RunConfig::echo() const {
  std::ostringstream s;
  s << "alpha=" << join_doubles(alpha) << " ln_phi=" << ln_phi << " bins=" << bins
    << " bin_strategy=" << strategy_name(bin_strategy) << " folds=" << folds << " trials=" << trials
    << " seed=" << seed << " memo_cap=" << memo_cap << " threads=" << threads
    << " ensemble=" << ensemble.str();
  return s.str();
}

namespace {

Dataset prepare_training(const Dataset& raw, const RunConfig& config) {
  return config.bins == 0 ? raw : bucketize(raw, config.bins, config.bin_strategy);
}

struct FoldScore {
  double accuracy = 0.0;
  double size = 0.0;
};

// Scores of every method on one fold, keyed by method name.
std::map<std::string, FoldScore> score_fold(const Dataset& train, const Dataset& test,
                                            const RunConfig& config, const BenchmarkOptions& options,
                                            std::uint64_t stream) {
  std::map<std::string, FoldScore> out;
  auto wants = [&](const char* m) {
    return std::find(options.methods.begin(), options.methods.end(), m) != options.methods.end();
  };
  auto record = [&](const char* m, const Metrics& metrics) { out[m] = {metrics.accuracy, metrics.size}; };

  if (wants("cart")) {
    Tree tree = cart_train(train);
    record("cart", evaluate([&](auto raw) { return tree.predict(train.route(raw)); }, test,
                            static_cast<double>(tree.node_count())));
  }
  if (wants("rf")) {
    BaselineParams p;
    p.tree_count = options.forest_size;
    p.seed = stream;
    p.threads = config.threads;
    Forest forest = rf_train(train, p);
    double nodes = 0.0;
    for (const auto& t : forest) nodes += static_cast<double>(t.node_count());
    record("rf", evaluate([&](auto raw) { return forest_predict(forest, train.route(raw), train.class_count); },
                          test, nodes / static_cast<double>(forest.size())));
  }
  if (!wants("bcart-map") && !wants("bcart-ensemble")) return out;

  const MemoTable memo = compute_scores(train, config.hyperparams(train.class_count), {config.memo_cap});
  if (wants("bcart-map")) {
    Tree map = extract_map_tree(memo);
    record("bcart-map", evaluate([&](auto raw) { return map_path_predict(raw, memo); }, test,
                                 static_cast<double>(map.node_count())));
  }
  if (wants("bcart-ensemble")) {
    if (config.ensemble.exact()) {
      record("bcart-ensemble", evaluate([&](auto raw) { return argmax(ensemble_exact_predict(raw, memo)); },
                                        test, expected_tree_size(memo)));
    } else {
      std::mt19937_64 rng(stream);
      Forest committee;
      double nodes = 0.0;
      for (std::size_t i = 0; i < config.ensemble.committee; ++i) {
        committee.push_back(sample_tree(memo, rng));
        nodes += static_cast<double>(committee.back().node_count());
      }
      record("bcart-ensemble",
             evaluate([&](auto raw) { return forest_predict(committee, train.route(raw), train.class_count); },
                      test, nodes / static_cast<double>(committee.size())));
    }
  }
  return out;
}

const std::vector<std::string> kMethods{"cart", "bcart-map", "rf", "bcart-ensemble"};

}  // namespace

std::vector<BenchmarkRow> run_benchmark(const Dataset& raw, const std::string& name, const RunConfig& config,
                                        const BenchmarkOptions& options) {
  for (const auto& m : options.methods) {
    if (std::find(kMethods.begin(), kMethods.end(), m) == kMethods.end()) {
      throw InputError("unknown benchmark method '" + m + "'");
    }
  }
  if (config.folds < 2) throw InputError("benchmark needs at least 2 folds");
  if (config.trials < 1) throw InputError("benchmark needs at least 1 trial");

  struct Job {
    std::size_t trial, fold;
    FoldPlan plan;
  };
  std::vector<Job> jobs;
  for (std::size_t t = 0; t < config.trials; ++t) {
    FoldPlan plan = kfold_split(raw, config.folds, config.seed + t);
    const std::size_t folds = options.fold_limit ? std::min(options.fold_limit, config.folds) : config.folds;
    for (std::size_t f = 0; f < folds; ++f) jobs.push_back({t, f, plan});
  }

  std::vector<std::map<std::string, FoldScore>> scores(jobs.size());
  auto run = [&](std::size_t j) {
    const Job& job = jobs[j];
    auto train_idx = job.plan.train_indices(job.fold);
    auto test_idx = job.plan.test_indices(job.fold);
    const Dataset train = prepare_training(raw.subset(train_idx), config);
    const Dataset test = raw.subset(test_idx);
    scores[j] = score_fold(train, test, config, options, config.seed * 1000003 + job.trial * 1009 + job.fold);
  };
  const std::size_t workers = std::clamp<std::size_t>(config.threads, 1, jobs.size());
  if (workers == 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) run(j);
  } else {
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t j = w; j < jobs.size(); j += workers) {
          try {
            run(j);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
  }

  std::vector<BenchmarkRow> rows;
  for (const auto& m : kMethods) {
    if (std::find(options.methods.begin(), options.methods.end(), m) == options.methods.end()) continue;
    std::vector<double> acc, size;
    for (const auto& s : scores) {
      acc.push_back(s.at(m).accuracy);
      size.push_back(s.at(m).size);
    }
    rows.push_back({name, m, mean_ci95(acc), mean_ci95(size)});
  }
  return rows;
}

void print_benchmark_table(const std::vector<BenchmarkRow>& rows, std::ostream& out) {
  out << std::left << std::setw(16) << "dataset" << std::setw(16) << "method" << std::setw(22) << "accuracy"
      << "size\n";
  for (const auto& r : rows) {
    std::ostringstream acc, size;
    acc << std::fixed << std::setprecision(4) << r.accuracy.mean << " +- " << r.accuracy.half_width;
    size << std::fixed << std::setprecision(1) << r.size.mean << " +- " << r.size.half_width;
    out << std::setw(16) << r.dataset << std::setw(16) << r.method << std::setw(22) << acc.str() << size.str()
        << '\n';
  }
  out << std::right;
}

void print_benchmark_tsv(const std::vector<BenchmarkRow>& rows, std::ostream& out) {
  out << "dataset\tmethod\tfolds\taccuracy_mean\taccuracy_ci95\tsize_mean\tsize_ci95\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.dataset << '\t' << r.method << '\t' << r.accuracy.samples << '\t' << r.accuracy.mean << '\t'
        << r.accuracy.half_width << '\t' << r.size.mean << '\t' << r.size.half_width << '\n';
  }
}

namespace {

struct CliState {
  RunConfig config;
  std::string alpha_text = "1";
  std::string strategy_text = "equal-width";
  std::string ensemble_text = "exact";
  std::string label_column;
  std::string categorical;

  void finalize() {
    config.alpha.clear();
    for (const auto& a : split_list(alpha_text)) config.alpha.push_back(parse_double(a, "alpha"));
    if (config.alpha.empty()) throw InputError("alpha needs at least one value");
    if (strategy_text == "equal-width") {
      config.bin_strategy = BinStrategy::EqualWidth;
    } else if (strategy_text == "quantile") {
      config.bin_strategy = BinStrategy::Quantile;
    } else {
      throw InputError("bin strategy must be 'equal-width' or 'quantile'");
    }
    config.ensemble = EnsembleMode::parse(ensemble_text);
    if (config.bins == 1) throw InputError("bins must be 0 (no bucketing) or at least 2");
  }

  CsvOptions csv() const { return {label_column, split_list(categorical)}; }
};

void add_config_options(CLI::App* cmd, CliState& s) {
  cmd->add_option("--alpha", s.alpha_text, "Dirichlet pseudo-count, one value or one per class")
      ->envname("BDT_ALPHA")
      ->capture_default_str();
  cmd->add_option("--ln-phi", s.config.ln_phi, "log of the per-leaf penalty phi")
      ->envname("BDT_LN_PHI")
      ->capture_default_str();
  cmd->add_option("--bins", s.config.bins, "max distinct values per feature, 0 disables bucketing")
      ->envname("BDT_BINS")
      ->capture_default_str();
  cmd->add_option("--bin-strategy", s.strategy_text, "equal-width or quantile")
      ->envname("BDT_BIN_STRATEGY")
      ->capture_default_str();
  cmd->add_option("--folds", s.config.folds, "cross-validation folds")->envname("BDT_FOLDS")->capture_default_str();
  cmd->add_option("--trials", s.config.trials, "repeated cross-validation trials")
      ->envname("BDT_TRIALS")
      ->capture_default_str();
  cmd->add_option("--seed", s.config.seed, "random seed")->envname("BDT_SEED")->capture_default_str();
  cmd->add_option("--memo-cap", s.config.memo_cap, "maximum memo entries")
      ->envname("BDT_MEMO_CAP")
      ->capture_default_str();
  cmd->add_option("--threads", s.config.threads, "worker threads for folds and forests")
      ->envname("BDT_THREADS")
      ->capture_default_str();
  cmd->add_option("--ensemble-mode", s.ensemble_text, "exact or committee:<k>")
      ->envname("BDT_ENSEMBLE_MODE")
      ->capture_default_str();
}

void add_csv_options(CLI::App* cmd, CliState& s) {
  cmd->add_option("--label", s.label_column, "label column name or index (default: last)");
  cmd->add_option("--categorical", s.categorical, "comma-separated columns to ordinal-encode");
}

std::string memo_echo(const MemoTable& memo) {
  const auto& hp = memo.hyperparams();
  std::ostringstream s;
  s << "alpha=" << join_doubles(hp.alpha) << " ln_phi=" << hp.ln_phi << " points=" << memo.data().point_count
    << " features=" << memo.data().feature_count << " classes=" << memo.data().class_count
    << " entries=" << memo.size();
  return s.str();
}

MemoTable load_memo(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open memo file '" + path + "'");
  return read_memo(in);
}

std::vector<Tree> load_trees(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open tree file '" + path + "'");
  std::vector<Tree> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      out.push_back(parse_tree(line));
    } catch (const ParseError& e) {
      throw ParseError(std::string(e.what()) + " (file line " + std::to_string(line_no) + ")", line_no,
                       e.column());
    }
  }
  if (out.empty()) throw InputError("tree file '" + path + "' holds no tree");
  return out;
}

// Query rows for a model with `names` features. Columns are matched by
// name when the header contains them all, otherwise by position.
std::vector<std::vector<double>> load_queries(const std::string& path, const std::vector<std::string>& names) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open query file '" + path + "'");
  std::string line;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> columns;
  std::size_t line_no = 0;
  auto cells_of = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cur;
    std::istringstream s(l);
    while (std::getline(s, cur, ',')) {
      auto b = cur.find_first_not_of(" \t\r");
      auto e = cur.find_last_not_of(" \t\r");
      cells.push_back(b == std::string::npos ? "" : cur.substr(b, e - b + 1));
    }
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  while (std::getline(in, line)) {
    ++line_no;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    auto cells = cells_of(line);
    if (header.empty()) {
      header = cells;
      bool by_name = true;
      for (const auto& n : names) {
        auto it = std::find(header.begin(), header.end(), n);
        if (it == header.end()) {
          by_name = false;
          break;
        }
        columns.push_back(static_cast<std::size_t>(it - header.begin()));
      }
      if (!by_name) {
        if (header.size() < names.size()) {
          throw InputError("query file has " + std::to_string(header.size()) + " columns, model needs " +
                           std::to_string(names.size()));
        }
        columns.resize(names.size());
        for (std::size_t f = 0; f < names.size(); ++f) columns[f] = f;
      }
      continue;
    }
    if (cells.size() != header.size()) {
      throw InputError("query line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                       " cells, found " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    for (std::size_t c : columns) {
      double v = parse_double(cells[c], "query line " + std::to_string(line_no));
      if (!std::isfinite(v)) throw InputError("query line " + std::to_string(line_no) + ": non-finite value");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (header.empty()) throw InputError("query file '" + path + "' is empty");
  return rows;
}

class OutputTarget {
 public:
  OutputTarget(const std::string& path, std::ostream& fallback) : out_(&fallback) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw InputError("cannot write '" + path + "'");
      out_ = &file_;
    }
  }
  std::ostream& operator*() { return *out_; }

 private:
  std::ofstream file_;
  std::ostream* out_;
};

int cmd_generate_xor(const XorOptions& opts, const std::string& output, std::ostream& out) {
  Dataset data = generate_xor(opts);
  OutputTarget target(output, out);
  *target << "# bdt generate-xor n=" << data.point_count << " d=" << opts.d << " k=" << opts.k
          << " seed=" << opts.seed << " exhaustive=" << (opts.exhaustive ? "true" : "false") << '\n';
  write_csv(data, *target);
  return kExitOk;
}

int cmd_train(const CliState& s, const std::string& input, const std::string& output, std::ostream& out) {
  const Dataset raw = load_csv(input, s.csv());
  const Dataset train = prepare_training(raw, s.config);
  const auto start = std::chrono::steady_clock::now();
  const MemoTable memo = compute_scores(train, s.config.hyperparams(train.class_count), {s.config.memo_cap});
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!output.empty()) {
    std::ofstream file(output, std::ios::binary);
    if (!file) throw InputError("cannot write '" + output + "'");
    write_memo(memo, file);
    if (!file) throw std::runtime_error("failed writing memo to '" + output + "'");
  }
  const MemoStats st = memo_stats(memo);
  const MemoEntry& root = memo.entry(memo.root());
  out << "# bdt train " << s.config.echo() << '\n';
  out << "points " << train.point_count << "\nfeatures " << train.feature_count << "\nclasses "
      << train.class_count << "\nentries " << st.entries << "\nmax_depth " << st.max_depth << "\nlookups "
      << st.lookups << "\nhits " << st.hits << "\nhit_rate " << st.hit_rate() << "\nlog_q_root "
      << std::setprecision(17) << root.log_q << "\nlog_q_max_root " << root.log_q_max << std::setprecision(6)
      << "\nmap_nodes " << extract_map_tree(memo).node_count() << "\nexpected_nodes " << expected_tree_size(memo)
      << "\nseconds " << seconds << '\n';
  if (!output.empty()) out << "memo " << output << '\n';
  return kExitOk;
}

int cmd_map(const std::string& memo_path, const std::string& output, std::ostream& out) {
  const MemoTable memo = load_memo(memo_path);
  const Tree tree = extract_map_tree(memo);
  OutputTarget target(output, out);
  *target << "# bdt map " << memo_echo(memo) << " nodes=" << tree.node_count() << '\n'
          << serialize_tree(tree) << '\n';
  return kExitOk;
}

int cmd_sample(const std::string& memo_path, std::size_t count, std::uint64_t seed, const std::string& output,
               std::ostream& out) {
  const MemoTable memo = load_memo(memo_path);
  std::mt19937_64 rng(seed);
  OutputTarget target(output, out);
  *target << "# bdt sample " << memo_echo(memo) << " count=" << count << " seed=" << seed << '\n';
  for (std::size_t i = 0; i < count; ++i) *target << serialize_tree(sample_tree(memo, rng)) << '\n';
  return kExitOk;
}

struct PredictRequest {
  std::string memo_path;
  std::string tree_path;
  std::string query_path;
  std::string mode = "ensemble-exact";
  std::string output;
};

int cmd_predict(const CliState& s, const PredictRequest& req, std::ostream& out) {
  if (req.memo_path.empty() && req.tree_path.empty()) throw InputError("predict needs --memo or --tree");
  std::optional<MemoTable> memo;
  if (!req.memo_path.empty()) memo = load_memo(req.memo_path);
  std::optional<Tree> tree;
  if (!req.tree_path.empty()) tree = load_trees(req.tree_path).front();

  std::size_t paths = 0;
  std::string mode = req.mode;
  if (tree) {
    mode = "tree";
  } else if (mode.rfind("sampled-path", 0) == 0) {
    paths = 1000;
    if (mode.size() > 12) {
      if (mode[12] != ':') throw InputError("mode must be sampled-path or sampled-path:<k>");
      paths = static_cast<std::size_t>(parse_double(mode.substr(13), "sampled-path count"));
      if (paths == 0) throw InputError("sampled-path count must be positive");
    }
    mode = "sampled-path";
  } else if (mode != "map-path" && mode != "ensemble-exact") {
    throw InputError("unknown predict mode '" + mode + "'");
  }

  std::vector<std::string> names;
  std::vector<std::string> classes;
  std::size_t class_count = 0;
  Hyperparams hp;
  if (memo) {
    names = memo->data().feature_names;
    classes = memo->data().class_names;
    class_count = memo->data().class_count;
    hp = memo->hyperparams();
  } else {
    const auto& leaf =
        std::find_if(tree->nodes.begin(), tree->nodes.end(), [](const TreeNode& n) { return n.leaf; })->counts;
    class_count = leaf.counts.size();
    for (std::size_t c = 0; c < class_count; ++c) classes.push_back(std::to_string(c));
    std::size_t d = 0;
    for (const auto& n : tree->nodes) {
      if (!n.leaf) d = std::max<std::size_t>(d, n.split.feature + 1);
    }
    for (std::size_t f = 0; f < d; ++f) names.push_back("x" + std::to_string(f));
    hp = s.config.hyperparams(class_count);
  }
  const auto queries = load_queries(req.query_path, names);

  OutputTarget target(req.output, out);
  std::ostream& o = *target;
  o << "# bdt predict mode=" << mode;
  if (paths) o << " paths=" << paths;
  o << " seed=" << s.config.seed << ' ' << (memo ? memo_echo(*memo) : "alpha=" + join_doubles(hp.alpha)) << '\n';
  o << "row,label";
  for (const auto& c : classes) o << ",p_" << c;
  o << '\n' << std::setprecision(10);

  std::mt19937_64 rng(s.config.seed);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& q = queries[i];
    std::vector<double> dist;
    if (tree) {
      auto routed = memo ? memo->data().route(q) : q;
      if (routed.size() < names.size()) throw InputError("query dimension does not match the tree");
      dist = leaf_predictive(tree->nodes[tree->leaf_for(routed)].counts, hp);
    } else if (mode == "map-path") {
      dist = leaf_predictive(memo->label_counts(map_path_leaf(q, *memo)), hp);
    } else if (mode == "ensemble-exact") {
      dist = ensemble_exact_predict(q, *memo);
    } else {
      dist.assign(class_count, 0.0);
      for (std::size_t p = 0; p < paths; ++p) {
        auto pred = sample_path_predict(q, *memo, rng);
        for (std::size_t c = 0; c < class_count; ++c) dist[c] += pred.distribution[c] / static_cast<double>(paths);
      }
    }
    o << i << ',' << classes[argmax(dist)];
    for (double p : dist) o << ',' << p;
    o << '\n';
  }
  return kExitOk;
}

int cmd_benchmark(const CliState& s, const std::vector<std::string>& inputs, const BenchmarkOptions& options,
                  const std::string& tsv_path, std::ostream& out) {
  std::vector<BenchmarkRow> rows;
  for (const auto& path : inputs) {
    const Dataset raw = load_csv(path, s.csv());
    std::string name = std::filesystem::path(path).stem().string();
    auto part = run_benchmark(raw, name, s.config, options);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  out << "# bdt benchmark " << s.config.echo() << " fold_limit=" << options.fold_limit
      << " forest_size=" << options.forest_size << '\n';
  print_benchmark_table(rows, out);
  out << '\n';
  print_benchmark_tsv(rows, out);
  if (!tsv_path.empty()) {
    std::ofstream file(tsv_path);
    if (!file) throw InputError("cannot write '" + tsv_path + "'");
    file << "# bdt benchmark " << s.config.echo() << '\n';
    print_benchmark_tsv(rows, file);
  }
  return kExitOk;
}

int cmd_oracle_check(const std::string& fixture, std::size_t random_count, std::uint64_t seed,
                     const std::string& memo_path, std::ostream& out) {
  bool ok = true;
  auto report = [&](const std::string& name, const OracleComparison& c) {
    const bool pass = c.passed();
    ok = ok && pass;
    out << (pass ? "PASS " : "FAIL ") << name << " trees=" << c.tree_count << " q_error=" << c.q_error
        << " q_max_error=" << c.q_max_error << " map="
        << (c.argmax_unique ? (c.map_matches ? "match" : "mismatch") : "tied")
        << " predictive_error=" << c.predictive_error << '\n';
  };

  if (!memo_path.empty()) {
    out << "# bdt oracle-check memo=" << memo_path << '\n';
    std::optional<MemoTable> memo;
    try {
      memo = load_memo(memo_path);
    } catch (const InputError& e) {
      out << "FAIL memo unreadable: " << e.what() << '\n';
      return kExitCheckFailed;
    }
    auto problems = verify_memo(*memo);
    for (const auto& p : problems) out << "FAIL " << p << '\n';
    ok = problems.empty();
    out << (ok ? "PASS" : "FAIL") << " memo identities over " << memo->size() << " entries\n";
    if (memo->data().point_count <= 8) {
      try {
        report("memo-vs-enumeration", compare_with_oracle(*memo, 100'000));
      } catch (const EnumerationCapExceeded&) {
        out << "SKIP memo-vs-enumeration: too many trees to enumerate\n";
      }
    }
    return ok ? kExitOk : kExitCheckFailed;
  }

  out << "# bdt oracle-check fixture=" << fixture << " random_count=" << random_count << " seed=" << seed << '\n';
  bool matched = false;
  for (const auto& f : standard_fixtures(random_count, seed)) {
    const bool random = f.name.rfind("random-", 0) == 0;
    if (fixture != "all" && fixture != f.name && !(fixture == "random" && random)) continue;
    matched = true;
    const MemoTable memo = compute_scores(f.data, f.hp);
    auto problems = verify_memo(memo);
    for (const auto& p : problems) out << "FAIL " << f.name << ": " << p << '\n';
    ok = ok && problems.empty();
    report(f.name, compare_with_oracle(memo));
  }
  if (!matched) throw InputError("unknown fixture '" + fixture + "'");
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exact Bayesian decision trees over canonical point sets", "bdt"};
  app.require_subcommand(1);
  CliState state;
  std::function<int()> action;

  XorOptions xor_opts;
  std::string output;
  auto* gen = app.add_subcommand("generate-xor", "write a synthetic k-bit parity dataset as CSV");
  gen->add_option("--n", xor_opts.n, "points")->capture_default_str();
  gen->add_option("--d", xor_opts.d, "binary features")->capture_default_str();
  gen->add_option("--k", xor_opts.k, "informative leading features")->capture_default_str();
  gen->add_option("--seed", xor_opts.seed, "random seed")->envname("BDT_SEED")->capture_default_str();
  gen->add_flag("--exhaustive", xor_opts.exhaustive, "emit every binary pattern once");
  gen->add_option("-o,--output", output, "output CSV (default stdout)");
  gen->callback([&] { action = [&] { return cmd_generate_xor(xor_opts, output, out); }; });

  std::string input;
  auto* train = app.add_subcommand("train", "score a CSV dataset and write the memo table");
  train->add_option("data", input, "training CSV")->required();
  train->add_option("-o,--output", output, "memo file to write");
  add_config_options(train, state);
  add_csv_options(train, state);
  train->callback([&] { action = [&] { return cmd_train(state, input, output, out); }; });

  std::string memo_path;
  auto* map = app.add_subcommand("map", "print the MAP tree of a memo file");
  map->add_option("memo", memo_path, "memo file")->required();
  map->add_option("-o,--output", output, "tree file (default stdout)");
  map->callback([&] { action = [&] { return cmd_map(memo_path, output, out); }; });

  std::size_t count = 1;
  auto* sample = app.add_subcommand("sample", "draw trees from the posterior");
  sample->add_option("memo", memo_path, "memo file")->required();
  sample->add_option("--count", count, "trees to draw")->capture_default_str();
  sample->add_option("-o,--output", output, "tree file (default stdout)");
  add_config_options(sample, state);
  sample->callback([&] { action = [&] { return cmd_sample(memo_path, count, state.config.seed, output, out); }; });

  PredictRequest req;
  auto* predict = app.add_subcommand("predict", "predict labels for a query CSV");
  predict->add_option("queries", req.query_path, "query CSV with a header row")->required();
  predict->add_option("--memo", req.memo_path, "memo file");
  predict->add_option("--tree", req.tree_path, "tree file; its first tree is used");
  predict->add_option("--mode", req.mode, "map-path, sampled-path[:k] or ensemble-exact")->capture_default_str();
  predict->add_option("-o,--output", req.output, "predictions CSV (default stdout)");
  add_config_options(predict, state);
  predict->callback([&] { action = [&] { return cmd_predict(state, req, out); }; });

  std::vector<std::string> inputs;
  BenchmarkOptions bench;
  std::string methods = "cart,bcart-map,rf,bcart-ensemble";
  std::string tsv_path;
  auto* benchmark = app.add_subcommand("benchmark", "cross-validate every method on one or more CSV files");
  benchmark->add_option("data", inputs, "dataset CSVs")->required();
  benchmark->add_option("--methods", methods, "comma-separated methods")->capture_default_str();
  benchmark->add_option("--fold-limit", bench.fold_limit, "evaluate only the first folds of each trial");
  benchmark->add_option("--forest-size", bench.forest_size, "trees per random forest")->capture_default_str();
  benchmark->add_option("--tsv", tsv_path, "also write TSV rows to this file");
  add_config_options(benchmark, state);
  add_csv_options(benchmark, state);
  benchmark->callback([&] {
    action = [&] {
      bench.methods = split_list(methods);
      return cmd_benchmark(state, inputs, bench, tsv_path, out);
    };
  });

  std::string fixture = "all";
  std::size_t random_count = 20;
  auto* check = app.add_subcommand("oracle-check", "compare the dynamic program with brute-force enumeration");
  check->add_option("--fixture", fixture, "all, single, two-point, xor4, random or random-<i>")
      ->capture_default_str();
  check->add_option("--random-count", random_count, "random fixtures to generate")->capture_default_str();
  check->add_option("--memo", memo_path, "check a memo file instead of the fixtures");
  add_config_options(check, state);
  check->callback([&] {
    action = [&] { return cmd_oracle_check(fixture, random_count, state.config.seed, memo_path, out); };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitInputError;
  }

  try {
    state.finalize();
    return action ? action() : kExitFailure;
  } catch (const MemoCapExceeded& e) {
    err << "error: " << e.what() << '\n';
    return kExitMemoCap;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace bdt
