#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bdt/dataset.hpp"

namespace bdt::test {

inline Dataset make_data(const std::vector<std::vector<double>>& rows, const std::vector<std::uint32_t>& labels,
                         std::size_t classes = 2) {
  Dataset d;
  d.point_count = rows.size();
  d.feature_count = rows.empty() ? 0 : rows.front().size();
  d.class_count = classes;
  for (const auto& r : rows) d.features.insert(d.features.end(), r.begin(), r.end());
  d.labels = labels;
  for (std::size_t f = 0; f < d.feature_count; ++f) d.feature_names.push_back("x" + std::to_string(f));
  for (std::size_t c = 0; c < classes; ++c) d.class_names.push_back(std::to_string(c));
  d.bins.assign(d.feature_count, BinMap{});
  return d;
}

inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// Beta function of integer arguments by factorials: prod (g_i - 1)! / (sum g - 1)!
inline double int_beta(const std::vector<int>& g) {
  double num = 1.0;
  int total = 0;
  for (int x : g) {
    num *= factorial(x - 1);
    total += x;
  }
  return num / factorial(total - 1);
}

}  // namespace bdt::test
