#ifndef PCACOMP_CLUSTERING_HPP
#define PCACOMP_CLUSTERING_HPP

#include "common.hpp"
#include "data_matrix.hpp"
#include "metrics.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "svd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace pcacomp {

// ---------------------------------------------------------------------------
// k-means
// ---------------------------------------------------------------------------

struct KMeansOptions {
  int max_iterations = 300;
  /// Stop once an iteration lowers the inertia by less than tolerance * inertia.
  double tolerance = 1e-10;
  int restarts = 10;
};

struct KMeansResult {
  Labeling labels;
  Matrix centers;  // dims x k
  double inertia = 0.0;
  int iterations = 0;
  int best_restart = 0;
  /// Inertia after each assignment step of the winning restart.
  std::vector<double> inertia_history;
};

namespace detail {

inline Index nearest_center(const Matrix& points, Index i, const Matrix& centers, double& best_d2) {
  Index best = 0;
  best_d2 = std::numeric_limits<double>::infinity();
  for (Index c = 0; c < centers.cols(); ++c) {
    const double d2 = (points.col(i) - centers.col(c)).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = c;
    }
  }
  return best;
}

/// k-means++ seeding: first center uniform, then proportional to squared distance.
inline Matrix kmeanspp_seed(const Matrix& points, Index k, Philox& rng) {
  const Index n = points.cols();
  Matrix centers(points.rows(), k);
  Index first = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
  centers.col(0) = points.col(first);
  Vector d2(n);
  for (Index i = 0; i < n; ++i) d2[i] = (points.col(i) - centers.col(0)).squaredNorm();
  for (Index c = 1; c < k; ++c) {
    const double total = d2.sum();
    Index pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        target -= d2[i];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centers.col(c) = points.col(pick);
    for (Index i = 0; i < n; ++i) d2[i] = std::min(d2[i], (points.col(i) - centers.col(c)).squaredNorm());
  }
  return centers;
}

inline KMeansResult lloyd(const Matrix& points, Index k, Philox& rng, const KMeansOptions& opts) {
  const Index n = points.cols();
  KMeansResult out;
  out.centers = kmeanspp_seed(points, k, rng);
  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  Vector dist2(n);
  double previous = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opts.max_iterations; ++it) {
    bool changed = false;
    double inertia = 0.0;
    for (Index i = 0; i < n; ++i) {
      const int c = static_cast<int>(nearest_center(points, i, out.centers, dist2[i]));
      if (c != assign[static_cast<std::size_t>(i)]) changed = true;
      assign[static_cast<std::size_t>(i)] = c;
      inertia += dist2[i];
    }
    if (inertia > previous * (1.0 + 1e-12) + 1e-300)
      throw NumericalError("k-means inertia increased from " + std::to_string(previous) + " to " +
                           std::to_string(inertia));
    out.inertia_history.push_back(inertia);
    out.iterations = it;
    const bool converged = !changed || previous - inertia <= opts.tolerance * inertia;
    previous = inertia;
    if (converged && it > 1) break;

    // Update step; an empty cluster takes the point farthest from its own center.
    Matrix sums = Matrix::Zero(points.rows(), k);
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      sums.col(assign[static_cast<std::size_t>(i)]) += points.col(i);
      ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
    for (Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        out.centers.col(c) = sums.col(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      } else {
        Index far = 0;
        dist2.maxCoeff(&far);
        out.centers.col(c) = points.col(far);
        dist2[far] = 0.0;
      }
    }
  }
  out.labels = Labeling(std::move(assign), static_cast<int>(k));
  out.inertia = previous;
  return out;
}

}  // namespace detail

/// Lloyd's algorithm from k-means++ seeds, best inertia over restarts.
/// `points` holds one point per column. Deterministic in `seed`.
inline KMeansResult kmeans(const Matrix& points, Index k, std::uint64_t seed, const KMeansOptions& opts = {}) {
  detail::require(k >= 1 && k <= points.cols(), "k-means needs 1 <= k <= n");
  detail::require(opts.restarts >= 1, "k-means needs at least one restart");
  std::vector<KMeansResult> runs(static_cast<std::size_t>(opts.restarts));
  parallel_for_blocks(runs.size(), [&](std::size_t r) {
    Philox rng(seed, 0x6b6d0000ULL + r);
    runs[r] = detail::lloyd(points, k, rng, opts);
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].inertia < runs[best].inertia) best = r;
  runs[best].best_restart = static_cast<int>(best);
  return std::move(runs[best]);
}

// ---------------------------------------------------------------------------
// kNN graph
// ---------------------------------------------------------------------------

/// Undirected unweighted graph; adjacency lists sorted, no self-loops.
struct NeighborGraph {
  Index n = 0;
  std::vector<std::vector<Index>> adjacency;

  std::size_t edge_count() const {
    std::size_t twice = 0;
    for (const auto& a : adjacency) twice += a.size();
    return twice / 2;
  }

  bool has_edge(Index a, Index b) const {
    const auto& list = adjacency[static_cast<std::size_t>(a)];
    return std::binary_search(list.begin(), list.end(), b);
  }
};

/// Exact m nearest neighbours (Euclidean, ties broken by index), symmetrized by union.
inline NeighborGraph knn_graph(const Matrix& points, Index m) {
  const Index n = points.cols();
  detail::require(m >= 1 && m < n, "kNN graph needs 1 <= m < n");
  std::vector<std::vector<Index>> nearest(static_cast<std::size_t>(n));
  const Vector sq = points.colwise().squaredNorm().transpose();
  constexpr Index kBlock = 128;
  const auto blocks = static_cast<std::size_t>((n + kBlock - 1) / kBlock);
  parallel_for_blocks(blocks, [&](std::size_t b) {
    const Index i0 = static_cast<Index>(b) * kBlock;
    const Index i1 = std::min(n, i0 + kBlock);
    const Matrix cross = points.transpose() * points.middleCols(i0, i1 - i0);
    std::vector<std::pair<double, Index>> cand;
    for (Index i = i0; i < i1; ++i) {
      cand.clear();
      for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        double d2 = sq[i] + sq[j] - 2.0 * cross(j, i - i0);
        if (d2 < 1e-6 * (sq[i] + sq[j])) d2 = (points.col(i) - points.col(j)).squaredNorm();
        cand.emplace_back(std::max(0.0, d2), j);
      }
      std::partial_sort(cand.begin(), cand.begin() + m, cand.end());
      auto& out = nearest[static_cast<std::size_t>(i)];
      for (Index r = 0; r < m; ++r) out.push_back(cand[static_cast<std::size_t>(r)].second);
    }
  });
  NeighborGraph g;
  g.n = n;
  g.adjacency.assign(static_cast<std::size_t>(n), {});
  for (Index i = 0; i < n; ++i)
    for (Index j : nearest[static_cast<std::size_t>(i)]) {
      g.adjacency[static_cast<std::size_t>(i)].push_back(j);
      g.adjacency[static_cast<std::size_t>(j)].push_back(i);
    }
  for (auto& list : g.adjacency) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return g;
}

// ---------------------------------------------------------------------------
// Louvain community detection
// ---------------------------------------------------------------------------

struct CommunityResult {
  Labeling labels;
  double modularity = 0.0;
  /// Modularity after each level; never decreases.
  std::vector<double> modularity_history;
  int levels = 0;
};

namespace detail {

/// Weighted graph in adjacency form with explicit self-loop weights.
struct WeightedGraph {
  std::vector<std::vector<std::pair<Index, double>>> edges;  // neighbour, weight; excludes self
  std::vector<double> self_loop;                              // A_ii
  std::vector<double> degree;                                 // sum_j A_ij
  double total = 0.0;                                         // sum_ij A_ij = 2m

  Index size() const { return static_cast<Index>(edges.size()); }
};

inline WeightedGraph weighted_from(const NeighborGraph& g) {
  WeightedGraph w;
  w.edges.resize(static_cast<std::size_t>(g.n));
  w.self_loop.assign(static_cast<std::size_t>(g.n), 0.0);
  w.degree.assign(static_cast<std::size_t>(g.n), 0.0);
  for (Index i = 0; i < g.n; ++i)
    for (Index j : g.adjacency[static_cast<std::size_t>(i)]) {
      w.edges[static_cast<std::size_t>(i)].emplace_back(j, 1.0);
      w.degree[static_cast<std::size_t>(i)] += 1.0;
    }
  for (double d : w.degree) w.total += d;
  return w;
}

inline double modularity(const WeightedGraph& g, const std::vector<Index>& community) {
  if (g.total == 0.0) return 0.0;
  std::map<Index, double> internal, tot;
  for (Index i = 0; i < g.size(); ++i) {
    const auto ci = community[static_cast<std::size_t>(i)];
    tot[ci] += g.degree[static_cast<std::size_t>(i)];
    internal[ci] += g.self_loop[static_cast<std::size_t>(i)];
    for (const auto& [j, w] : g.edges[static_cast<std::size_t>(i)])
      if (community[static_cast<std::size_t>(j)] == ci) internal[ci] += w;
  }
  double q = 0.0;
  for (const auto& [c, t] : tot) q += internal[c] / g.total - (t / g.total) * (t / g.total);
  return q;
}

/// One level of local moves in fixed node order. Returns true if any node moved.
inline bool local_moves(const WeightedGraph& g, std::vector<Index>& community) {
  const Index n = g.size();
  std::vector<double> tot(static_cast<std::size_t>(n), 0.0);
  for (Index i = 0; i < n; ++i) tot[static_cast<std::size_t>(community[static_cast<std::size_t>(i)])] += g.degree[static_cast<std::size_t>(i)];
  std::vector<double> link(static_cast<std::size_t>(n), 0.0);
  std::vector<Index> touched;
  bool any = false;
  for (int pass = 0; pass < 1000; ++pass) {
    bool moved = false;
    for (Index i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const Index own = community[ui];
      const double ki = g.degree[ui];
      touched.clear();
      touched.push_back(own);
      link[static_cast<std::size_t>(own)] = 0.0;
      for (const auto& [j, w] : g.edges[ui]) {
        const Index cj = community[static_cast<std::size_t>(j)];
        if (link[static_cast<std::size_t>(cj)] == 0.0 && std::find(touched.begin(), touched.end(), cj) == touched.end())
          touched.push_back(cj);
        link[static_cast<std::size_t>(cj)] += w;
      }
      tot[static_cast<std::size_t>(own)] -= ki;
      Index best = own;
      double best_gain = link[static_cast<std::size_t>(own)] - tot[static_cast<std::size_t>(own)] * ki / g.total;
      std::sort(touched.begin(), touched.end());
      for (Index c : touched) {
        const double gain = link[static_cast<std::size_t>(c)] - tot[static_cast<std::size_t>(c)] * ki / g.total;
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best = c;
        }
      }
      tot[static_cast<std::size_t>(best)] += ki;
      if (best != own) {
        community[ui] = best;
        moved = true;
        any = true;
      }
      for (Index c : touched) link[static_cast<std::size_t>(c)] = 0.0;
    }
    if (!moved) break;
  }
  return any;
}

/// Relabels communities densely in order of first appearance.
inline Index renumber(std::vector<Index>& community) {
  std::map<Index, Index> ids;
  for (auto& c : community) {
    auto [it, inserted] = ids.emplace(c, static_cast<Index>(ids.size()));
    c = it->second;
  }
  return static_cast<Index>(ids.size());
}

inline WeightedGraph aggregate(const WeightedGraph& g, const std::vector<Index>& community, Index count) {
  WeightedGraph out;
  out.edges.resize(static_cast<std::size_t>(count));
  out.self_loop.assign(static_cast<std::size_t>(count), 0.0);
  out.degree.assign(static_cast<std::size_t>(count), 0.0);
  std::vector<std::map<Index, double>> acc(static_cast<std::size_t>(count));
  for (Index i = 0; i < g.size(); ++i) {
    const auto ci = community[static_cast<std::size_t>(i)];
    out.self_loop[static_cast<std::size_t>(ci)] += g.self_loop[static_cast<std::size_t>(i)];
    out.degree[static_cast<std::size_t>(ci)] += g.degree[static_cast<std::size_t>(i)];
    for (const auto& [j, w] : g.edges[static_cast<std::size_t>(i)]) {
      const auto cj = community[static_cast<std::size_t>(j)];
      if (cj == ci)
        out.self_loop[static_cast<std::size_t>(ci)] += w;
      else
        acc[static_cast<std::size_t>(ci)][cj] += w;
    }
  }
  for (Index c = 0; c < count; ++c)
    for (const auto& [d, w] : acc[static_cast<std::size_t>(c)]) out.edges[static_cast<std::size_t>(c)].emplace_back(d, w);
  out.total = g.total;
  return out;
}

}  // namespace detail

/// Louvain modularity optimization: local moves in node order, then aggregation,
/// until a level makes no move. Deterministic; disconnected components never merge.
inline CommunityResult community_detect(const NeighborGraph& graph) {
  detail::WeightedGraph g = detail::weighted_from(graph);
  std::vector<Index> membership(static_cast<std::size_t>(graph.n));
  std::iota(membership.begin(), membership.end(), Index{0});
  CommunityResult out;
  out.modularity_history.push_back(detail::modularity(g, std::vector<Index>(membership)));
  std::vector<Index> level_community(static_cast<std::size_t>(g.size()));
  for (int level = 0; level < 100; ++level) {
    std::iota(level_community.begin(), level_community.end(), Index{0});
    if (!detail::local_moves(g, level_community)) break;
    const Index count = detail::renumber(level_community);
    for (auto& m : membership) m = level_community[static_cast<std::size_t>(m)];
    g = detail::aggregate(g, level_community, count);
    std::vector<Index> identity(static_cast<std::size_t>(count));
    std::iota(identity.begin(), identity.end(), Index{0});
    const double q = detail::modularity(g, identity);
    if (q < out.modularity_history.back() - 1e-12)
      throw NumericalError("modularity decreased between Louvain levels");
    out.modularity_history.push_back(q);
    out.levels = level + 1;
    level_community.assign(static_cast<std::size_t>(count), 0);
  }
  detail::renumber(membership);
  std::vector<int> ids(membership.begin(), membership.end());
  out.labels = Labeling::from_ids(std::move(ids));
  out.modularity = out.modularity_history.back();
  return out;
}

// ---------------------------------------------------------------------------
// Raw vs PCA clustering comparison
// ---------------------------------------------------------------------------

struct ArmScore {
  std::string arm;  // "raw-kmeans", "pca-kmeans", "pca-knn-louvain"
  std::uint64_t seed = 0;
  double ari = 0.0;
  double nmi = 0.0;
  double accuracy = 0.0;
  int clusters_found = 0;
};

struct ComparisonReport {
  Index k = 0;
  Index pcs = 0;
  Index neighbors = 0;
  std::vector<ArmScore> scores;

  std::vector<double> values(const std::string& arm, double ArmScore::*field) const {
    std::vector<double> out;
    for (const auto& s : scores)
      if (s.arm == arm) out.push_back(s.*field);
    return out;
  }
};

inline double median(std::vector<double> v) {
  detail::require(!v.empty(), "median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

struct PipelineOptions {
  Index neighbors = 20;
  KMeansOptions kmeans;
  SvdOptions svd;
};

/// k-means on raw columns, k-means on k'-PC coordinates and kNN + Louvain on the
/// same coordinates, each scored against the ground-truth labels of A.
inline ComparisonReport pipeline_compare(const DataMatrix& a, Index k, Index pcs, const std::vector<std::uint64_t>& seeds,
                                         const PipelineOptions& opts = {}) {
  const Labels& truth = a.require_labels();
  ComparisonReport report;
  report.k = k;
  report.pcs = pcs;
  report.neighbors = std::min(opts.neighbors, a.cols() - 1);
  const Matrix raw = a.to_dense();
  const Projector projector = fit_uncentered_pca(a, pcs, opts.svd);
  const Matrix coords = projector.project_columns(a);
  const CommunityResult communities = community_detect(knn_graph(coords, report.neighbors));
  auto score = [&](const std::string& arm, std::uint64_t seed, const Labeling& found) {
    ArmScore s;
    s.arm = arm;
    s.seed = seed;
    s.ari = ari(truth, found);
    s.nmi = nmi(truth, found);
    s.accuracy = best_match_accuracy(truth, found);
    s.clusters_found = found.k;
    report.scores.push_back(s);
  };
  for (auto seed : seeds) {
    score("raw-kmeans", seed, kmeans(raw, k, seed, opts.kmeans).labels);
    score("pca-kmeans", seed, kmeans(coords, k, seed, opts.kmeans).labels);
    score("pca-knn-louvain", seed, communities.labels);
  }
  return report;
}

}  // namespace pcacomp

#endif
