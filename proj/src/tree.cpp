#include "bdt/tree.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <utility>

#include "bdt/errors.hpp"

namespace bdt {

std::size_t Tree::leaf_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.leaf; }));
}

std::size_t Tree::leaf_for(std::span<const double> query) const {
  std::size_t at = 0;
  while (!nodes.at(at).leaf) {
    const TreeNode& n = nodes[at];
    if (n.split.feature >= query.size()) throw InputError("query is missing a split feature");
    at = n.split.goes_left(query) ? n.left : n.right;
  }
  return at;
}

std::size_t Tree::predict(std::span<const double> query) const {
  const auto& c = nodes[leaf_for(query)].counts.counts;
  return static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
}

bool Tree::operator==(const Tree& other) const {
  if (nodes.empty() || other.nodes.empty()) return nodes.empty() && other.nodes.empty();
  std::vector<std::pair<std::uint32_t, std::uint32_t>> todo{{0, 0}};
  while (!todo.empty()) {
    auto [a, b] = todo.back();
    todo.pop_back();
    const TreeNode& x = nodes[a];
    const TreeNode& y = other.nodes[b];
    if (x.leaf != y.leaf) return false;
    if (x.leaf) {
      if (x.counts != y.counts) return false;
      continue;
    }
    if (x.split != y.split) return false;
    todo.emplace_back(x.left, y.left);
    todo.emplace_back(x.right, y.right);
  }
  return true;
}

namespace {

void append_number(std::string& out, double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, p);
}

void write_node(const Tree& t, std::uint32_t at, std::string& out) {
  const TreeNode& n = t.nodes[at];
  if (n.leaf) {
    out += "(leaf";
    for (auto c : n.counts.counts) {
      out += ' ';
      out += std::to_string(c);
    }
    out += ')';
    return;
  }
  out += "(node f=";
  out += std::to_string(n.split.feature);
  out += " t=";
  append_number(out, n.split.threshold);
  out += ' ';
  write_node(t, n.left, out);
  out += ' ';
  write_node(t, n.right, out);
  out += ')';
}

class TreeParser {
 public:
  explicit TreeParser(std::string_view text) : text_(text) {}

  Tree run() {
    skip_space();
    parse_node();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected trailing text");
    return std::move(tree_);
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i) {
      if (text_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(what, line, col);
  }

  void skip_space() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\n' ||
                                   text_[pos_] == '\t' || text_[pos_] == '\r')) {
      ++pos_;
    }
  }

  void expect(char c) {
    if (pos_ >= text_.size() || text_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  bool consume_word(std::string_view w) {
    if (text_.substr(pos_, w.size()) == w) {
      pos_ += w.size();
      return true;
    }
    return false;
  }

  std::string_view token() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ' ' && text_[pos_] != '(' && text_[pos_] != ')' &&
           text_[pos_] != '\n' && text_[pos_] != '\t' && text_[pos_] != '\r') {
      ++pos_;
    }
    return text_.substr(start, pos_ - start);
  }

  template <typename T>
  T number(std::string_view tok, const char* what) {
    T v{};
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc() || p != tok.data() + tok.size()) {
      pos_ -= tok.size();
      fail(std::string("malformed ") + what);
    }
    return v;
  }

  std::uint32_t parse_node() {
    if (++depth_ > 10000) fail("tree nesting too deep");
    expect('(');
    auto at = static_cast<std::uint32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    if (consume_word("leaf")) {
      LabelCounts counts;
      skip_space();
      while (pos_ < text_.size() && text_[pos_] != ')') {
        counts.counts.push_back(number<std::uint32_t>(token(), "leaf count"));
        skip_space();
      }
      if (counts.counts.empty()) fail("leaf needs at least one count");
      if (classes_ == 0) classes_ = counts.counts.size();
      if (counts.counts.size() != classes_) fail("leaf count dimension differs from earlier leaves");
      expect(')');
      tree_.nodes[at].counts = std::move(counts);
    } else if (consume_word("node")) {
      skip_space();
      if (!consume_word("f=")) fail("expected 'f='");
      auto f = number<std::size_t>(token(), "feature index");
      skip_space();
      if (!consume_word("t=")) fail("expected 't='");
      auto t = number<double>(token(), "threshold");
      if (!std::isfinite(t)) fail("threshold must be finite");
      skip_space();
      auto l = parse_node();
      skip_space();
      auto r = parse_node();
      skip_space();
      expect(')');
      TreeNode& n = tree_.nodes[at];
      n.leaf = false;
      n.split = Split{f, t};
      n.left = l;
      n.right = r;
    } else {
      fail("expected 'leaf' or 'node'");
    }
    --depth_;
    return at;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t depth_ = 0;
  std::size_t classes_ = 0;
  Tree tree_;
};

}  // namespace

std::string serialize_tree(const Tree& tree) {
  std::string out;
  if (!tree.nodes.empty()) write_node(tree, 0, out);
  return out;
}

Tree parse_tree(std::string_view text) { return TreeParser(text).run(); }

}  // namespace bdt
