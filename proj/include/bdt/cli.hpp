#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bdt/baseline.hpp"
#include "bdt/dataset.hpp"
#include "bdt/score.hpp"

namespace bdt {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitInputError = 2,
  kExitMemoCap = 3,
  kExitCheckFailed = 4,
};

/// How the Bayesian ensemble turns the posterior into a prediction:
/// exactly, or by majority vote over `committee` sampled trees.
struct EnsembleMode {
  std::size_t committee = 0;

  bool exact() const noexcept { return committee == 0; }
  /// Accepts "exact" or "committee:<k>" with k >= 1.
  static EnsembleMode parse(const std::string& text);
  std::string str() const;
};

/// Settings shared by every subcommand.
struct RunConfig {
  /// One value broadcast to every class, or one per class.
  std::vector<double> alpha{1.0};
  double ln_phi = 2.0;
  std::size_t bins = 10;
  BinStrategy bin_strategy = BinStrategy::EqualWidth;
  std::size_t folds = 10;
  std::size_t trials = 5;
  std::uint64_t seed = 0;
  std::size_t memo_cap = 10'000'000;
  std::size_t threads = 1;
  EnsembleMode ensemble;

  Hyperparams hyperparams(std::size_t classes) const;
  /// Single-line `key=value` summary echoed into every output.
  std::string echo() const;
};

struct BenchmarkOptions {
  std::vector<std::string> methods{"cart", "bcart-map", "rf", "bcart-ensemble"};
  /// Evaluate only the first folds of each trial; 0 runs them all.
  std::size_t fold_limit = 0;
  std::size_t forest_size = 100;
};

struct BenchmarkRow {
  std::string dataset;
  std::string method;
  MeanInterval accuracy;
  MeanInterval size;
};

/// Repeated k-fold cross-validation. Bucketing is fit on each training fold
/// and held-out rows are routed through it. Intervals pool the per-fold
/// scores of every trial.
std::vector<BenchmarkRow> run_benchmark(const Dataset& raw, const std::string& name,
                                        const RunConfig& config, const BenchmarkOptions& options = {});

void print_benchmark_table(const std::vector<BenchmarkRow>& rows, std::ostream& out);
void print_benchmark_tsv(const std::vector<BenchmarkRow>& rows, std::ostream& out);

/// Entry point of the `bdt` tool; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bdt
