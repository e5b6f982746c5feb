#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <unistd.h>

#include "bdt/cli.hpp"
#include "bdt/tree.hpp"
#include "doctest.h"

using namespace bdt;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run bdt_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("bdt-cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(file(name)) << text;
    return file(name);
  }

 private:
  fs::path path_;
  static inline int counter_ = 0;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const std::string& text, bool skip_comments = true) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || (skip_comments && line[0] == '#')) continue;
    out.push_back(line);
  }
  return out;
}

std::vector<double> cells_after_label(const std::string& line) {
  std::vector<double> out;
  std::istringstream in(line);
  std::string cell;
  for (int i = 0; std::getline(in, cell, ','); ++i) {
    if (i >= 2) out.push_back(std::stod(cell));
  }
  return out;
}

const std::string kIris = std::string(BDT_DATA_DIR) + "/iris.csv";

}  // namespace

TEST_CASE("generate-xor writes the requested dataset") {
  TempDir dir;
  auto r = bdt_run({"generate-xor", "--n", "1000", "--d", "20", "--k", "4", "--seed", "3", "-o", dir.file("x.csv")});
  REQUIRE(r.code == 0);
  Dataset d = load_csv(dir.file("x.csv"));
  CHECK(d.point_count == 1000);
  CHECK(d.feature_count == 20);
  CHECK(slurp(dir.file("x.csv")).rfind("# bdt generate-xor", 0) == 0);

  auto grid = bdt_run({"generate-xor", "--d", "2", "--k", "2", "--n", "4", "--exhaustive"});
  REQUIRE(grid.code == 0);
  CHECK(lines_of(grid.out) == std::vector<std::string>{"x0,x1,label", "0,0,0", "0,1,1", "1,0,1", "1,1,0"});

  auto a = bdt_run({"generate-xor", "--n", "30", "--d", "3", "--k", "2", "--seed", "8"});
  auto b = bdt_run({"generate-xor", "--n", "30", "--d", "3", "--k", "2", "--seed", "8"});
  auto c = bdt_run({"generate-xor", "--n", "30", "--d", "3", "--k", "2", "--seed", "9"});
  CHECK(a.out == b.out);
  CHECK(a.out != c.out);
  CHECK(bdt_run({"generate-xor", "--d", "2", "--k", "3"}).code == kExitInputError);
}

TEST_CASE("train, map and sample on iris") {
  TempDir dir;
  auto t = bdt_run({"train", kIris, "-o", dir.file("iris.memo")});
  REQUIRE(t.code == 0);
  CHECK(t.out.rfind("# bdt train alpha=1 ln_phi=2 bins=10", 0) == 0);
  CHECK(t.out.find("map_nodes 7") != std::string::npos);

  auto again = bdt_run({"train", kIris, "-o", dir.file("again.memo")});
  REQUIRE(again.code == 0);
  CHECK(slurp(dir.file("iris.memo")) == slurp(dir.file("again.memo")));

  auto m = bdt_run({"map", dir.file("iris.memo")});
  REQUIRE(m.code == 0);
  CHECK(m.out.rfind("# bdt map", 0) == 0);
  auto trees = lines_of(m.out);
  REQUIRE(trees.size() == 1);
  CHECK(parse_tree(trees[0]).node_count() == 7);

  auto s1 = bdt_run({"sample", dir.file("iris.memo"), "--count", "5", "--seed", "2"});
  auto s2 = bdt_run({"sample", dir.file("iris.memo"), "--count", "5", "--seed", "2"});
  REQUIRE(s1.code == 0);
  CHECK(lines_of(s1.out).size() == 5);
  CHECK(s1.out == s2.out);
  for (const auto& line : lines_of(s1.out)) CHECK_NOTHROW(parse_tree(line));
}

TEST_CASE("a single-point csv trains to a one-entry memo") {
  TempDir dir;
  auto csv = dir.write("one.csv", "x,y\n1.5,a\n");
  auto r = bdt_run({"train", csv, "-o", dir.file("one.memo")});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("entries 1\n") != std::string::npos);
  auto check = bdt_run({"oracle-check", "--memo", dir.file("one.memo")});
  CHECK(check.code == 0);
}

TEST_CASE("prediction modes") {
  TempDir dir;
  // All rows share one feature value, so the posterior is the lone leaf.
  auto flat = dir.write("flat.csv", "x,y\n1,a\n1,b\n1,a\n");
  REQUIRE(bdt_run({"train", flat, "-o", dir.file("flat.memo")}).code == 0);
  auto queries = dir.write("q.csv", "x\n0\n1\n5\n");
  std::vector<std::vector<std::string>> outputs;
  for (std::string mode : {"map-path", "ensemble-exact", "sampled-path:50"}) {
    auto r = bdt_run({"predict", queries, "--memo", dir.file("flat.memo"), "--mode", mode});
    REQUIRE(r.code == 0);
    auto rows = lines_of(r.out);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0] == "row,label,p_a,p_b");
    outputs.push_back({rows.begin() + 1, rows.end()});
  }
  for (std::size_t i = 0; i < 3; ++i) {
    auto a = cells_after_label(outputs[0][i]);
    for (std::size_t m = 1; m < 3; ++m) {
      auto b = cells_after_label(outputs[m][i]);
      for (std::size_t c = 0; c < 2; ++c) CHECK(a[c] == doctest::Approx(b[c]).epsilon(1e-12));
    }
  }

  REQUIRE(bdt_run({"train", kIris, "-o", dir.file("iris.memo")}).code == 0);
  auto iq = dir.write("iq.csv", "species,petal_width,petal_length,sepal_width,sepal_length\n"
                                "x,0.2,1.4,3.5,5.1\nx,1.5,4.9,3.0,6.3\nx,1.8,5.1,3.0,6.0\n");
  auto exact = bdt_run({"predict", iq, "--memo", dir.file("iris.memo")});
  auto sampled = bdt_run({"predict", iq, "--memo", dir.file("iris.memo"), "--mode", "sampled-path:100000"});
  auto map1 = bdt_run({"predict", iq, "--memo", dir.file("iris.memo"), "--mode", "map-path"});
  auto map2 = bdt_run({"predict", iq, "--memo", dir.file("iris.memo"), "--mode", "map-path"});
  REQUIRE(exact.code == 0);
  REQUIRE(sampled.code == 0);
  CHECK(map1.out == map2.out);
  auto e = lines_of(exact.out), s = lines_of(sampled.out);
  CHECK(e[1].find(",setosa,") != std::string::npos);
  for (std::size_t i = 1; i < e.size(); ++i) {
    auto pe = cells_after_label(e[i]), ps = cells_after_label(s[i]);
    for (std::size_t c = 0; c < pe.size(); ++c) CHECK(std::abs(pe[c] - ps[c]) < 0.01);
  }

  auto tree_file = dir.write("t.txt", "# a comment\n(node f=0 t=0.5 (leaf 3 0) (leaf 0 3))\n");
  auto tq = dir.write("tq.csv", "x0\n0\n1\n");
  auto byt = bdt_run({"predict", tq, "--tree", tree_file});
  REQUIRE(byt.code == 0);
  auto rows = lines_of(byt.out);
  CHECK(rows[1].rfind("0,0,", 0) == 0);
  CHECK(rows[2].rfind("1,1,", 0) == 0);

  CHECK(bdt_run({"predict", tq, "--memo", dir.file("iris.memo")}).code == kExitInputError);
  CHECK(bdt_run({"predict", tq}).code == kExitInputError);
  CHECK(bdt_run({"predict", iq, "--memo", dir.file("iris.memo"), "--mode", "psychic"}).code == kExitInputError);
  auto bad_tree = dir.write("bad.txt", "(node f=0 t=0.5 (leaf 3 0)\n");
  CHECK(bdt_run({"predict", tq, "--tree", bad_tree}).code == kExitInputError);
}

TEST_CASE("benchmark smoke run and table consistency") {
  TempDir dir;
  auto r = bdt_run({"benchmark", kIris, "--folds", "5", "--fold-limit", "1", "--trials", "1", "--forest-size", "5",
                    "--tsv", dir.file("rows.tsv")});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("# bdt benchmark", 0) == 0);
  auto lines = lines_of(r.out);
  REQUIRE(lines.size() == 10);
  CHECK(lines[0].rfind("dataset", 0) == 0);
  CHECK(lines[0].find("accuracy") != std::string::npos);
  CHECK(lines[0].find("size") != std::string::npos);
  CHECK(lines[5] == "dataset\tmethod\tfolds\taccuracy_mean\taccuracy_ci95\tsize_mean\tsize_ci95");
  for (int i = 0; i < 4; ++i) {
    std::istringstream tsv(lines[6 + i]);
    std::string dataset, method, folds;
    double acc = 0, acc_ci = 0;
    std::getline(tsv, dataset, '\t');
    std::getline(tsv, method, '\t');
    std::getline(tsv, folds, '\t');
    tsv >> acc >> acc_ci;
    CHECK(dataset == "iris");
    CHECK(folds == "1");
    // The human row carries the same values.
    std::ostringstream cell;
    cell << std::fixed << std::setprecision(4) << acc;
    CHECK(lines[1 + i].find(method) != std::string::npos);
    CHECK(lines[1 + i].find(cell.str()) != std::string::npos);
  }
  CHECK(lines_of(slurp(dir.file("rows.tsv"))).size() == 5);

  auto xr = bdt_run({"generate-xor", "--n", "512", "--d", "8", "--k", "4", "--seed", "7", "-o", dir.file("xor.csv")});
  REQUIRE(xr.code == 0);
  auto x = bdt_run({"benchmark", dir.file("xor.csv"), "--methods", "bcart-map", "--folds", "4", "--trials", "1"});
  REQUIRE(x.code == 0);
  CHECK(x.out.find("xor\tbcart-map\t4\t1\t0\t31\t0") != std::string::npos);

  auto committee = bdt_run({"benchmark", dir.file("xor.csv"), "--methods", "bcart-ensemble", "--folds", "2",
                            "--fold-limit", "1", "--trials", "1", "--ensemble-mode", "committee:5"});
  REQUIRE(committee.code == 0);
  CHECK(committee.out.find("ensemble=committee:5") != std::string::npos);
  CHECK(bdt_run({"benchmark", kIris, "--methods", "nope"}).code == kExitInputError);
}

TEST_CASE("oracle-check reports") {
  auto all = bdt_run({"oracle-check"});
  CHECK(all.code == 0);
  CHECK(all.out.find("FAIL") == std::string::npos);
  CHECK(lines_of(all.out).size() == 23);
  auto two = bdt_run({"oracle-check", "--fixture", "two-point"});
  CHECK(two.code == 0);
  CHECK(two.out.find("PASS two-point trees=2") != std::string::npos);
  CHECK(bdt_run({"oracle-check", "--fixture", "single"}).code == 0);
  CHECK(bdt_run({"oracle-check", "--fixture", "nothing"}).code == kExitInputError);

  TempDir dir;
  auto csv = dir.write("small.csv", "a,b,y\n0,1,p\n1,0,q\n2,2,p\n1,1,q\n");
  REQUIRE(bdt_run({"train", csv, "-o", dir.file("s.memo")}).code == 0);
  auto ok = bdt_run({"oracle-check", "--memo", dir.file("s.memo")});
  CHECK(ok.code == 0);
  CHECK(ok.out.find("PASS memo-vs-enumeration") != std::string::npos);

  std::string bytes = slurp(dir.file("s.memo"));
  bytes[bytes.size() / 2] ^= 0x11;
  std::ofstream(dir.file("bad.memo"), std::ios::binary) << bytes;
  auto bad = bdt_run({"oracle-check", "--memo", dir.file("bad.memo")});
  CHECK(bad.code == kExitCheckFailed);
  CHECK(bad.out.find("FAIL") != std::string::npos);
}

TEST_CASE("exit codes for bad input") {
  CHECK(bdt_run({}).code == kExitInputError);
  CHECK(bdt_run({"frobnicate"}).code == kExitInputError);
  CHECK(bdt_run({"train"}).code == kExitInputError);
  CHECK(bdt_run({"train", "/no/such/file.csv"}).code == kExitInputError);
  CHECK(bdt_run({"train", kIris, "--bogus"}).code == kExitInputError);
  CHECK(bdt_run({"train", kIris, "--alpha", "1,2"}).code == kExitInputError);
  CHECK(bdt_run({"train", kIris, "--alpha", "-1"}).code == kExitInputError);
  CHECK(bdt_run({"train", kIris, "--ensemble-mode", "committee:0"}).code == kExitInputError);
  CHECK(bdt_run({"train", kIris, "--bin-strategy", "fancy"}).code == kExitInputError);
  CHECK(bdt_run({"map", "/no/such.memo"}).code == kExitInputError);
  auto cap = bdt_run({"train", kIris, "--memo-cap", "100"});
  CHECK(cap.code == kExitMemoCap);
  CHECK(cap.err.find("100") != std::string::npos);
  auto help = bdt_run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("oracle-check") != std::string::npos);
  CHECK(bdt_run({"train", "--help"}).code == 0);
}

TEST_CASE("environment variables override defaults but not flags") {
  TempDir dir;
  auto csv = dir.write("small.csv", "a,y\n0,p\n1,q\n2,p\n");
  ::setenv("BDT_LN_PHI", "0.5", 1);
  ::setenv("BDT_ALPHA", "2", 1);
  auto env = bdt_run({"train", csv});
  auto flag = bdt_run({"train", csv, "--ln-phi", "3"});
  ::unsetenv("BDT_LN_PHI");
  ::unsetenv("BDT_ALPHA");
  CHECK(env.out.find("alpha=2 ln_phi=0.5 ") != std::string::npos);
  CHECK(flag.out.find("alpha=2 ln_phi=3 ") != std::string::npos);
  CHECK(bdt_run({"train", csv}).out.find("alpha=1 ln_phi=2 ") != std::string::npos);
}

TEST_CASE("run config helpers") {
  RunConfig c;
  CHECK(c.folds == 10);
  CHECK(c.trials == 5);
  CHECK(c.bins == 10);
  CHECK(c.ln_phi == 2.0);
  CHECK(c.hyperparams(3).alpha == std::vector<double>{1, 1, 1});
  c.alpha = {1, 2};
  CHECK_THROWS(c.hyperparams(3));
  CHECK(EnsembleMode::parse("exact").exact());
  CHECK(EnsembleMode::parse("committee:7").committee == 7);
  CHECK(EnsembleMode::parse("committee:7").str() == "committee:7");
  CHECK_THROWS(EnsembleMode::parse("committee:"));
  CHECK_THROWS(EnsembleMode::parse("vote"));
}
