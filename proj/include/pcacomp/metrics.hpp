#ifndef PCACOMP_METRICS_HPP
#define PCACOMP_METRICS_HPP

#include "common.hpp"
#include "data_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace pcacomp {

/// Cluster assignment produced by a clustering algorithm.
using Labeling = Labels;

namespace detail {

/// Contingency table between two labelings of the same n points.
struct Contingency {
  std::vector<std::vector<double>> table;  // ka x kb
  std::vector<double> row_sums, col_sums;
  double n = 0.0;
};

inline Contingency contingency(const Labeling& a, const Labeling& b) {
  require(a.size() == b.size(), "labelings cover different numbers of points");
  require(!a.ids.empty(), "labelings are empty");
  int ka = 0, kb = 0;
  for (int x : a.ids) ka = std::max(ka, x + 1);
  for (int x : b.ids) kb = std::max(kb, x + 1);
  Contingency c;
  c.table.assign(static_cast<std::size_t>(ka), std::vector<double>(static_cast<std::size_t>(kb), 0.0));
  c.row_sums.assign(static_cast<std::size_t>(ka), 0.0);
  c.col_sums.assign(static_cast<std::size_t>(kb), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    require(a[i] >= 0 && b[i] >= 0, "labels must be non-negative");
    c.table[static_cast<std::size_t>(a[i])][static_cast<std::size_t>(b[i])] += 1.0;
    c.row_sums[static_cast<std::size_t>(a[i])] += 1.0;
    c.col_sums[static_cast<std::size_t>(b[i])] += 1.0;
  }
  c.n = static_cast<double>(a.size());
  return c;
}

inline double choose2(double x) { return x * (x - 1.0) / 2.0; }

inline double entropy(const std::vector<double>& counts, double n) {
  double h = 0.0;
  for (double c : counts)
    if (c > 0.0) h -= (c / n) * std::log(c / n);
  return h;
}

/// Hungarian algorithm (shortest augmenting path form) on a square cost matrix;
/// returns assignment[row] = column minimizing total cost.
inline std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const int size = static_cast<int>(cost.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(size + 1), 0.0), v(static_cast<std::size_t>(size + 1), 0.0);
  std::vector<int> p(static_cast<std::size_t>(size + 1), 0), way(static_cast<std::size_t>(size + 1), 0);
  for (int i = 1; i <= size; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(size + 1), inf);
    std::vector<bool> used(static_cast<std::size_t>(size + 1), false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= size; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost[static_cast<std::size_t>(i0 - 1)][static_cast<std::size_t>(j - 1)] -
                           u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= size; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(static_cast<std::size_t>(size), -1);
  for (int j = 1; j <= size; ++j)
    if (p[static_cast<std::size_t>(j)] > 0) assignment[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return assignment;
}

}  // namespace detail

/// Adjusted Rand index. Two trivial partitions that agree score 1.
inline double ari(const Labeling& a, const Labeling& b) {
  const auto c = detail::contingency(a, b);
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& row : c.table)
    for (double x : row) index += detail::choose2(x);
  for (double x : c.row_sums) sum_a += detail::choose2(x);
  for (double x : c.col_sums) sum_b += detail::choose2(x);
  const double expected = sum_a * sum_b / detail::choose2(c.n);
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

/// Normalized mutual information, arithmetic-mean normalization.
inline double nmi(const Labeling& a, const Labeling& b) {
  const auto c = detail::contingency(a, b);
  const double ha = detail::entropy(c.row_sums, c.n);
  const double hb = detail::entropy(c.col_sums, c.n);
  if (ha + hb == 0.0) return 1.0;
  double mi = 0.0;
  for (std::size_t i = 0; i < c.table.size(); ++i)
    for (std::size_t j = 0; j < c.table[i].size(); ++j) {
      const double nij = c.table[i][j];
      if (nij > 0.0) mi += (nij / c.n) * std::log(c.n * nij / (c.row_sums[i] * c.col_sums[j]));
    }
  return std::clamp(2.0 * mi / (ha + hb), 0.0, 1.0);
}

/// Fraction of points agreeing under the best one-to-one matching of cluster ids.
inline double best_match_accuracy(const Labeling& a, const Labeling& b) {
  const auto c = detail::contingency(a, b);
  const std::size_t size = std::max(c.table.size(), c.col_sums.size());
  std::vector<std::vector<double>> cost(size, std::vector<double>(size, 0.0));
  for (std::size_t i = 0; i < c.table.size(); ++i)
    for (std::size_t j = 0; j < c.table[i].size(); ++j) cost[i][j] = -c.table[i][j];
  const auto assignment = detail::hungarian(cost);
  double matched = 0.0;
  for (std::size_t i = 0; i < c.table.size(); ++i) {
    const auto j = static_cast<std::size_t>(assignment[i]);
    if (j < c.col_sums.size()) matched += c.table[i][j];
  }
  return matched / c.n;
}

}  // namespace pcacomp

#endif
