#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace pcacomp;
using testing_support::random_matrix;

namespace {

NeighborGraph graph_from_edges(Index n, const std::vector<std::pair<Index, Index>>& edges) {
  NeighborGraph g;
  g.n = n;
  g.adjacency.assign(static_cast<std::size_t>(n), {});
  for (auto [a, b] : edges) {
    g.adjacency[static_cast<std::size_t>(a)].push_back(b);
    g.adjacency[static_cast<std::size_t>(b)].push_back(a);
  }
  for (auto& list : g.adjacency) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return g;
}

double assignment_inertia(const Matrix& points, const std::vector<int>& ids, int k) {
  double total = 0.0;
  for (int c = 0; c < k; ++c) {
    Vector sum = Vector::Zero(points.rows());
    int count = 0;
    for (Index i = 0; i < points.cols(); ++i)
      if (ids[static_cast<std::size_t>(i)] == c) {
        sum += points.col(i);
        ++count;
      }
    if (count == 0) return std::numeric_limits<double>::infinity();
    const Vector mean = sum / count;
    for (Index i = 0; i < points.cols(); ++i)
      if (ids[static_cast<std::size_t>(i)] == c) total += (points.col(i) - mean).squaredNorm();
  }
  return total;
}

void expect_graph_invariants(const NeighborGraph& g) {
  for (Index a = 0; a < g.n; ++a)
    for (Index b : g.adjacency[static_cast<std::size_t>(a)]) {
      EXPECT_NE(a, b);
      EXPECT_TRUE(g.has_edge(b, a));
    }
}

}  // namespace

TEST(KMeans, PointMassesAreRecoveredExactly) {
  Matrix points(2, 30);
  std::vector<int> truth;
  const double centers[3][2] = {{0, 0}, {10, 0}, {0, 10}};
  for (Index i = 0; i < 30; ++i) {
    const int c = static_cast<int>(i % 3);
    points(0, i) = centers[c][0];
    points(1, i) = centers[c][1];
    truth.push_back(c);
  }
  const auto result = kmeans(points, 3, 1);
  EXPECT_EQ(result.inertia, 0.0);
  EXPECT_EQ(ari(Labels(truth, 3), result.labels), 1.0);
}

TEST(KMeans, SingleClusterInertiaIsTotalScatter) {
  const Matrix points = random_matrix(4, 25, 2);
  const auto result = kmeans(points, 1, 3);
  const Vector mean = points.rowwise().mean();
  const double scatter = (points.colwise() - mean).squaredNorm();
  EXPECT_NEAR(result.inertia, scatter, 1e-10 * scatter);
  for (std::size_t i = 0; i < 25; ++i) EXPECT_EQ(result.labels[i], 0);
}

TEST(KMeans, MatchesBruteForceOptimum) {
  for (std::uint64_t seed : {4u, 5u, 6u}) {
    Matrix points = 0.6 * random_matrix(2, 12, seed);
    for (Index i = 0; i < 12; ++i) points(0, i) += 3.0 * static_cast<double>(i % 3);
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> ids(12, 0);
    for (int code = 0; code < 531441; ++code) {  // 3^12 assignments
      int rest = code;
      for (auto& id : ids) {
        id = rest % 3;
        rest /= 3;
      }
      best = std::min(best, assignment_inertia(points, ids, 3));
    }
    const auto result = kmeans(points, 3, seed);
    EXPECT_LE(result.inertia, best * (1.0 + 1e-9));
  }
}

TEST(KMeans, InertiaNonIncreasingAndDeterministic) {
  const auto model = sbm_rectangular(60, {30, 30, 30}, 0.6, 0.4);
  const Matrix points = generate_dataset(model, 7).dense();
  const auto a = kmeans(points, 3, 11);
  const auto b = kmeans(points, 3, 11);
  for (std::size_t t = 1; t < a.inertia_history.size(); ++t)
    EXPECT_LE(a.inertia_history[t], a.inertia_history[t - 1] * (1.0 + 1e-12));
  EXPECT_EQ(a.labels.ids, b.labels.ids);
  EXPECT_EQ(a.inertia, b.inertia);
  set_num_threads(4);
  const auto c = kmeans(points, 3, 11);
  set_num_threads(1);
  EXPECT_EQ(a.labels.ids, c.labels.ids);
  EXPECT_THROW(kmeans(points, 91, 1), InputError);
}

TEST(KMeans, DuplicatePointsDoNotLeaveEmptyClusters) {
  Matrix points = Matrix::Zero(2, 10);
  points.col(9) << 1.0, 1.0;
  const auto result = kmeans(points, 3, 2);
  const auto sizes = result.labels.cluster_sizes();
  EXPECT_EQ(result.inertia, 0.0);
  EXPECT_EQ(std::count(sizes.begin(), sizes.end(), 0u), 1);
}

TEST(KnnGraph, CollinearPoints) {
  Matrix points(1, 3);
  points << 0.0, 1.0, 3.0;
  const auto g = knn_graph(points, 1);
  EXPECT_TRUE(g.has_edge(0, 1));
  EXPECT_TRUE(g.has_edge(1, 2));  // 2's nearest neighbour is 1
  EXPECT_FALSE(g.has_edge(0, 2));
  EXPECT_EQ(g.edge_count(), 2u);
  expect_graph_invariants(g);
}

TEST(KnnGraph, MatchesQuadraticOracle) {
  const Matrix points = random_matrix(5, 100, 8);
  const Index m = 6;
  const auto g = knn_graph(points, m);
  std::vector<std::vector<Index>> oracle(100);
  for (Index i = 0; i < 100; ++i) {
    std::vector<std::pair<double, Index>> cand;
    for (Index j = 0; j < 100; ++j)
      if (j != i) cand.emplace_back((points.col(i) - points.col(j)).squaredNorm(), j);
    std::sort(cand.begin(), cand.end());
    for (Index r = 0; r < m; ++r) {
      oracle[static_cast<std::size_t>(i)].push_back(cand[static_cast<std::size_t>(r)].second);
      oracle[static_cast<std::size_t>(cand[static_cast<std::size_t>(r)].second)].push_back(i);
    }
  }
  for (auto& list : oracle) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  EXPECT_EQ(g.adjacency, oracle);
  expect_graph_invariants(g);
}

TEST(KnnGraph, FullNeighbourhoodIsComplete) {
  const auto g = knn_graph(random_matrix(3, 12, 9), 11);
  EXPECT_EQ(g.edge_count(), 66u);
  EXPECT_THROW(knn_graph(random_matrix(3, 12, 9), 12), InputError);
}

TEST(KnnGraph, DuplicatePointsTieByIndex) {
  const Matrix points = Matrix::Zero(2, 4);
  const auto g = knn_graph(points, 1);
  EXPECT_TRUE(g.has_edge(0, 1));
  EXPECT_TRUE(g.has_edge(0, 2));
  EXPECT_TRUE(g.has_edge(0, 3));
  EXPECT_EQ(g.edge_count(), 3u);
}

TEST(CommunityDetect, TwoCliquesJoinedByOneEdge) {
  std::vector<std::pair<Index, Index>> edges;
  for (Index a = 0; a < 5; ++a)
    for (Index b = a + 1; b < 5; ++b) {
      edges.emplace_back(a, b);
      edges.emplace_back(a + 5, b + 5);
    }
  edges.emplace_back(4, 5);
  const auto result = community_detect(graph_from_edges(10, edges));
  EXPECT_EQ(result.labels.k, 2);
  EXPECT_EQ(ari(result.labels, Labels({0, 0, 0, 0, 0, 1, 1, 1, 1, 1}, 2)), 1.0);
  for (std::size_t t = 1; t < result.modularity_history.size(); ++t)
    EXPECT_GE(result.modularity_history[t], result.modularity_history[t - 1] - 1e-12);
}

TEST(CommunityDetect, CompleteGraphIsOneCommunity) {
  const auto result = community_detect(knn_graph(random_matrix(2, 9, 10), 8));
  EXPECT_EQ(result.labels.k, 1);
}

TEST(CommunityDetect, DisconnectedComponentsStaySeparate) {
  const auto result = community_detect(graph_from_edges(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}}));
  EXPECT_EQ(result.labels.k, 2);
  EXPECT_NE(result.labels[0], result.labels[3]);
}

TEST(CommunityDetect, PlantedThreeBlockPartition) {
  std::vector<int> planted(30);
  for (int i = 0; i < 30; ++i) planted[static_cast<std::size_t>(i)] = i / 10;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Philox rng(seed, 3);
    std::vector<std::pair<Index, Index>> edges;
    for (Index a = 0; a < 30; ++a)
      for (Index b = a + 1; b < 30; ++b) {
        const double p = planted[static_cast<std::size_t>(a)] == planted[static_cast<std::size_t>(b)] ? 0.9 : 0.05;
        if (rng.uniform() < p) edges.emplace_back(a, b);
      }
    const auto result = community_detect(graph_from_edges(30, edges));
    EXPECT_EQ(ari(Labels(planted, 3), result.labels), 1.0) << "seed " << seed;
  }
}

TEST(Metrics, IdenticalLabelings) {
  const Labels a({0, 1, 1, 2, 2, 2}, 3);
  EXPECT_EQ(ari(a, a), 1.0);
  EXPECT_NEAR(nmi(a, a), 1.0, 1e-15);
  EXPECT_EQ(best_match_accuracy(a, a), 1.0);
}

TEST(Metrics, HandEvaluatedContingencyCase) {
  const Labels a({0, 0, 1, 1}, 2), b({0, 0, 1, 2}, 3);
  // index = C(2,2) = 1; row term = 2; column term = 1; expected = 2 / 6; max = 1.5.
  EXPECT_NEAR(ari(a, b), (1.0 - 1.0 / 3.0) / (1.5 - 1.0 / 3.0), 1e-15);
  EXPECT_NEAR(ari(a, b), 4.0 / 7.0, 1e-15);
  // H(a) = ln 2, H(b) = 1.5 ln 2, I = ln 2.
  EXPECT_NEAR(nmi(a, b), 2.0 / 2.5, 1e-15);
  EXPECT_EQ(best_match_accuracy(a, b), 0.75);
}

TEST(Metrics, ConstantLabelingScoresZero) {
  const Labels same({0, 0, 0, 0, 0, 0}, 1), split({0, 0, 0, 1, 1, 1}, 2);
  EXPECT_EQ(ari(same, split), 0.0);
  EXPECT_EQ(nmi(same, split), 0.0);
  EXPECT_EQ(best_match_accuracy(same, split), 0.5);
}

TEST(Metrics, SymmetricAndPermutationInvariant) {
  Philox rng(12, 0);
  std::vector<int> x(40), y(40);
  for (int i = 0; i < 40; ++i) {
    x[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(4));
    y[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(3));
  }
  const Labels a(x, 4), b(y, 3);
  std::vector<int> permuted = y;
  for (auto& v : permuted) v = (v + 1) % 3;
  const Labels c(permuted, 3);
  EXPECT_NEAR(ari(a, b), ari(b, a), 1e-15);
  EXPECT_NEAR(nmi(a, b), nmi(b, a), 1e-15);
  EXPECT_NEAR(best_match_accuracy(a, b), best_match_accuracy(b, a), 1e-15);
  EXPECT_NEAR(ari(a, b), ari(a, c), 1e-15);
  EXPECT_NEAR(nmi(a, b), nmi(a, c), 1e-15);
  EXPECT_NEAR(best_match_accuracy(a, b), best_match_accuracy(a, c), 1e-15);
}

TEST(Metrics, AccuracyMatchesPermutationSearch) {
  Philox rng(13, 0);
  std::vector<int> x(50), y(50);
  for (int i = 0; i < 50; ++i) {
    x[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(4));
    y[static_cast<std::size_t>(i)] = rng.uniform() < 0.7 ? x[static_cast<std::size_t>(i)] : static_cast<int>(rng.below(4));
  }
  std::array<int, 4> perm{0, 1, 2, 3};
  double best = 0.0;
  do {
    int hits = 0;
    for (int i = 0; i < 50; ++i) hits += perm[static_cast<std::size_t>(x[static_cast<std::size_t>(i)])] == y[static_cast<std::size_t>(i)];
    best = std::max(best, hits / 50.0);
  } while (std::next_permutation(perm.begin(), perm.end()));
  EXPECT_NEAR(best_match_accuracy(Labels(x, 4), Labels(y, 4)), best, 1e-15);
}

TEST(PipelineCompare, NoiselessSeparableDataIsPerfect) {
  auto model = sbm_rectangular(60, {20, 20, 20}, 0.9, 0.1);
  model.noise = {NoiseSpec{NoiseFamily::UniformSymmetric, {0.02}}};
  const DataMatrix a = generate_dataset(model, 1);
  PipelineOptions opts;
  opts.neighbors = 10;
  const auto report = pipeline_compare(a, 3, 3, {1, 2}, opts);
  EXPECT_EQ(report.scores.size(), 6u);
  for (const auto& s : report.scores) {
    EXPECT_EQ(s.ari, 1.0) << s.arm;
    EXPECT_EQ(s.accuracy, 1.0) << s.arm;
    EXPECT_EQ(s.clusters_found, 3);
  }
  EXPECT_EQ(report.values("pca-kmeans", &ArmScore::ari).size(), 2u);
}

TEST(PipelineCompare, Median) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_THROW(median({}), InputError);
}
