#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace pcacomp;
using testing_support::random_matrix;

namespace {

/// Two-sample Kolmogorov-Smirnov p-value (asymptotic distribution).
double ks_p_value(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double dmax = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    dmax = std::max(dmax, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  const double en = std::sqrt(static_cast<double>(a.size() * b.size()) / static_cast<double>(a.size() + b.size()));
  const double lambda = (en + 0.12 + 0.11 / en) * dmax;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) sum += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(sum, 0.0, 1.0);
}

}  // namespace

TEST(PairCompression, DuplicateColumnHasNoRatio) {
  Matrix a = random_matrix(5, 3, 1);
  a.col(2) = a.col(0);
  const DataMatrix data(a);
  const auto pairs = pair_compression(data, fit_uncentered_pca(data, 2));
  ASSERT_EQ(pairs.size(), 3u);
  const auto& dup = pairs[1];  // (0, 2)
  EXPECT_EQ(dup.i, 0);
  EXPECT_EQ(dup.j, 2);
  EXPECT_EQ(dup.pre, 0.0);
  EXPECT_EQ(dup.post, 0.0);
  EXPECT_FALSE(dup.ratio.has_value());
}

TEST(PairCompression, FullRankIsIsometric) {
  const DataMatrix data(random_matrix(7, 5, 2));
  for (const auto& s : pair_compression(data, fit_uncentered_pca(data, 5))) {
    ASSERT_TRUE(s.ratio.has_value());
    EXPECT_NEAR(*s.ratio, 1.0, 1e-9);
  }
}

TEST(PairCompression, MatchesBruteForceOracle) {
  const Matrix a = random_matrix(6, 4, 3);
  const DataMatrix data(a);
  const Projector p = fit_uncentered_pca(data, 2);
  const Matrix proj = p.components().transpose() * p.components();  // dense d x d projector
  const auto pairs = pair_compression(data, p);
  std::size_t r = 0;
  for (Index i = 0; i < 4; ++i)
    for (Index j = i + 1; j < 4; ++j, ++r) {
      const Vector diff = a.col(i) - a.col(j);
      const double pre = diff.norm();
      const double post = (proj * diff).norm();
      EXPECT_EQ(pairs[r].i, i);
      EXPECT_EQ(pairs[r].j, j);
      EXPECT_NEAR(pairs[r].pre, pre, 1e-12 * pre);
      EXPECT_NEAR(pairs[r].post, post, 1e-12 * pre);
      EXPECT_NEAR(*pairs[r].ratio, pre / post, 1e-10 * pre / post);
    }
}

TEST(PairCompression, GramAndDirectAgree) {
  Matrix a = random_matrix(40, 30, 4).array().abs() + 3.0;
  a.col(5) = a.col(4);
  a(0, 5) += 1e-7;  // near-duplicate: cancellation triggers the direct recomputation
  const DataMatrix data(a);
  const Projector p = fit_uncentered_pca(data, 3);
  const auto direct = pair_compression(data, p, PairPolicy::exact(), {PreDistanceMethod::Direct, 7});
  const auto gram = pair_compression(data, p, PairPolicy::exact(), {PreDistanceMethod::Gram, 7});
  ASSERT_EQ(direct.size(), gram.size());
  for (std::size_t r = 0; r < direct.size(); ++r) {
    EXPECT_NEAR(gram[r].pre, direct[r].pre, 1e-10 * direct[r].pre);
    EXPECT_EQ(gram[r].post, direct[r].post);
  }
  const auto it = std::find_if(gram.begin(), gram.end(), [](const PairStats& s) { return s.i == 4 && s.j == 5; });
  EXPECT_NEAR(it->pre, 1e-7, 1e-13);
}

TEST(PairCompression, SparseMatchesDense) {
  const SparseMatrix s = testing_support::random_sparse(50, 40, 0.2, 5);
  const DataMatrix sparse(s), dense{Matrix(s)};
  const Projector p = fit_uncentered_pca(dense, 4);
  for (auto method : {PreDistanceMethod::Direct, PreDistanceMethod::Gram}) {
    const auto a = pair_compression(sparse, p, PairPolicy::exact(), {method, 16});
    const auto b = pair_compression(dense, p, PairPolicy::exact(), {method, 16});
    for (std::size_t r = 0; r < a.size(); ++r) EXPECT_NEAR(a[r].pre, b[r].pre, 1e-12 * b[r].pre);
  }
}

TEST(PairCompression, DimensionMismatch) {
  const DataMatrix a(random_matrix(5, 4, 1));
  const Projector p(Matrix::Identity(2, 6), Vector::Ones(2));
  EXPECT_THROW(pair_compression(a, p), InputError);
}

TEST(PairCompression, ContractionAndMonotoneInPcs) {
  const auto model = sbm_rectangular(60, {20, 25}, 0.7, 0.3);
  const DataMatrix a = generate_dataset(model, 8);
  const Projector full = fit_uncentered_pca(a, 12);
  std::vector<std::vector<PairStats>> runs;
  for (Index k : {2, 5, 12}) runs.push_back(pair_compression(a, full.leading(k)));
  for (std::size_t r = 0; r < runs[0].size(); ++r) {
    EXPECT_LE(runs[2][r].post, runs[2][r].pre * (1.0 + 1e-12));
    EXPECT_LE(runs[0][r].post, runs[1][r].post + 1e-12);
    EXPECT_LE(runs[1][r].post, runs[2][r].post + 1e-12);
  }
}

TEST(PairCompression, SampledIsDeterministicAndConsistent) {
  const auto model = sbm_rectangular(80, {60, 60}, 0.7, 0.3);
  const DataMatrix a = generate_dataset(model, 9);
  const Projector p = fit_uncentered_pca(a, 2);
  const auto s1 = pair_compression(a, p, PairPolicy::sampled(3000, 4));
  const auto s2 = pair_compression(a, p, PairPolicy::sampled(3000, 4));
  ASSERT_EQ(s1.size(), 3000u);
  for (std::size_t r = 0; r < s1.size(); ++r) {
    EXPECT_EQ(s1[r].i, s2[r].i);
    EXPECT_EQ(s1[r].j, s2[r].j);
    EXPECT_LT(s1[r].i, s1[r].j);
  }
  const auto exact = pair_compression(a, p);
  double exact_mean = 0.0;
  for (const auto& s : exact) exact_mean += *s.ratio;
  exact_mean /= static_cast<double>(exact.size());
  double mean = 0.0, m2 = 0.0;
  for (const auto& s : s1) mean += *s.ratio;
  mean /= static_cast<double>(s1.size());
  for (const auto& s : s1) m2 += (*s.ratio - mean) * (*s.ratio - mean);
  const double se = std::sqrt(m2 / (s1.size() - 1.0) / static_cast<double>(s1.size()));
  EXPECT_LE(std::abs(mean - exact_mean), 3.0 * se);
}

TEST(PairRank, CoversAllPairsInOrder) {
  const Index n = 9;
  std::uint64_t r = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j, ++r) {
      const auto [a, b] = detail::pair_from_rank(r, n);
      EXPECT_EQ(a, i);
      EXPECT_EQ(b, j);
    }
  EXPECT_EQ(r, detail::pair_count(n));
}

TEST(ClusterSummary, AverageOfRatiosAgainstBruteForce) {
  const auto model = sbm_rectangular(30, {6, 7, 5}, 0.8, 0.2);
  const DataMatrix a = generate_dataset(model, 10);
  const Projector p = fit_uncentered_pca(a, 3);
  const auto pairs = pair_compression(a, p);
  const auto summary = cluster_summary(pairs, *a.labels());
  const auto& ids = a.labels()->ids;
  for (int c = 0; c < 3; ++c) {
    double intra_pre = 0, intra_ratio = 0, inter_post = 0, inter_ratio = 0;
    int intra_n = 0, inter_n = 0;
    for (const auto& s : pairs) {
      const int ci = ids[static_cast<std::size_t>(s.i)], cj = ids[static_cast<std::size_t>(s.j)];
      if (ci == c && cj == c) {
        intra_pre += s.pre;
        intra_ratio += *s.ratio;
        ++intra_n;
      } else if (ci == c || cj == c) {
        inter_post += s.post;
        inter_ratio += *s.ratio;
        ++inter_n;
      }
    }
    const auto& row = summary.rows[static_cast<std::size_t>(c)];
    EXPECT_EQ(row.intra->pairs, static_cast<std::size_t>(intra_n));
    EXPECT_EQ(row.inter->pairs, static_cast<std::size_t>(inter_n));
    EXPECT_NEAR(row.intra->pre_avg, intra_pre / intra_n, 1e-12);
    EXPECT_NEAR(*row.intra->ratio_avg, intra_ratio / intra_n, 1e-12);
    EXPECT_NEAR(row.inter->post_avg, inter_post / inter_n, 1e-12);
    EXPECT_NEAR(*row.inter->ratio_avg, inter_ratio / inter_n, 1e-12);
    EXPECT_NEAR(*row.intra->ratio_of_averages, row.intra->pre_avg / row.intra->post_avg, 1e-12);
  }
  EXPECT_EQ(summary.rows[0].size, 6u);
  EXPECT_EQ(summary.rows[0].name, "C1");
}

TEST(ClusterSummary, SingletonClusters) {
  const DataMatrix a(random_matrix(4, 2, 11), Labels({0, 1}, 2));
  const auto summary = cluster_summary(pair_compression(a, fit_uncentered_pca(a, 1)), *a.labels());
  for (const auto& row : summary.rows) {
    EXPECT_FALSE(row.intra.has_value());
    ASSERT_TRUE(row.inter.has_value());
    EXPECT_EQ(row.inter->pairs, 1u);
  }
}

TEST(ClusterSummary, ExcludedPairsAreCounted) {
  Matrix m = random_matrix(5, 4, 12);
  m.col(1) = m.col(0);
  const DataMatrix a(m, Labels({0, 0, 1, 1}, 2));
  const auto summary = cluster_summary(pair_compression(a, fit_uncentered_pca(a, 2)), *a.labels());
  EXPECT_EQ(summary.rows[0].intra->excluded, 1u);
  EXPECT_FALSE(summary.rows[0].intra->ratio_avg.has_value());
}

TEST(ClusterSummary, StreamingEqualsBatchAndThreadIndependent) {
  const auto model = sbm_rectangular(50, {40, 50, 30}, 0.7, 0.3);
  const DataMatrix a = generate_dataset(model, 13);
  const Projector p = fit_uncentered_pca(a, 5);
  set_num_threads(1);
  const auto batch = cluster_summary(pair_compression(a, p), *a.labels());
  const auto stream1 = summarize_compression(a, p, {PreDistanceMethod::Gram, 16});
  set_num_threads(4);
  const auto stream4 = summarize_compression(a, p, {PreDistanceMethod::Gram, 16});
  set_num_threads(1);
  for (std::size_t c = 0; c < batch.rows.size(); ++c) {
    for (const auto* other : {&stream1, &stream4}) {
      const auto& x = other->rows[c];
      EXPECT_EQ(*x.intra->ratio_avg, *stream1.rows[c].intra->ratio_avg);
      EXPECT_EQ(x.inter->pre_avg, stream1.rows[c].inter->pre_avg);
    }
    EXPECT_NEAR(*batch.rows[c].intra->ratio_avg, *stream1.rows[c].intra->ratio_avg, 1e-12);
  }
  const auto stream_direct = summarize_compression(a, p, {PreDistanceMethod::Direct, 64});
  for (std::size_t c = 0; c < batch.rows.size(); ++c)
    EXPECT_EQ(*batch.rows[c].intra->ratio_avg, *stream_direct.rows[c].intra->ratio_avg);
}

TEST(PointwiseSummary, SinglePair) {
  const DataMatrix a(random_matrix(3, 2, 14), Labels({0, 1}, 2));
  const auto pts = pointwise_summary(pair_compression(a, fit_uncentered_pca(a, 1)), *a.labels());
  ASSERT_EQ(pts.size(), 2u);
  for (const auto& p : pts) {
    EXPECT_EQ(p.inter_partners, 1u);
    EXPECT_EQ(p.intra_partners, 0u);
    EXPECT_FALSE(p.intra_avg.has_value());
    EXPECT_TRUE(p.inter_avg.has_value());
  }
}

TEST(PointwiseSummary, NoiselessSeparatedClusters) {
  auto model = sbm_rectangular(40, {8, 8, 8}, 0.9, 0.1);
  model.noise = {NoiseSpec{NoiseFamily::BernoulliResidual, {0.0}}};
  const DataMatrix a = generate_dataset(model, 1);
  const auto pts = pointwise_summary(pair_compression(a, fit_uncentered_pca(a, 3)), *a.labels());
  for (const auto& p : pts) {
    EXPECT_FALSE(p.intra_avg.has_value());
    EXPECT_EQ(p.intra_excluded, 7u);
    ASSERT_TRUE(p.inter_avg.has_value());
    EXPECT_NEAR(*p.inter_avg, 1.0, 1e-9);
  }
}

TEST(PointwiseSummary, IdenticalClustersAreIndistinguishable) {
  RandomVectorModel model;
  model.centers = Matrix::Constant(200, 2, 0.5);
  model.sizes = {60, 60};
  model.noise = {NoiseSpec{}};
  const DataMatrix a = generate_dataset(model, 15);
  const auto pts = pointwise_summary(pair_compression(a, fit_uncentered_pca(a, 10)), *a.labels());
  std::vector<double> intra, inter;
  for (const auto& p : pts) {
    intra.push_back(*p.intra_avg);
    inter.push_back(*p.inter_avg);
  }
  EXPECT_GT(ks_p_value(intra, inter), 0.01);
}

TEST(PointwiseSummary, RequiresExactPairs) {
  const auto model = sbm_rectangular(20, {10, 10}, 0.7, 0.3);
  const DataMatrix a = generate_dataset(model, 1);
  const auto sampled = pair_compression(a, fit_uncentered_pca(a, 2), PairPolicy::sampled(10, 1));
  EXPECT_THROW(pointwise_summary(sampled, *a.labels()), InputError);
}

TEST(IntraFractionCurve, SingleClusterIsAllIntra) {
  const DataMatrix a(random_matrix(5, 8, 16), Labels(std::vector<int>(8, 0), 1));
  const auto grid = default_curve_grid();
  const auto curve = intra_fraction_curve(pair_compression(a, fit_uncentered_pca(a, 2)), *a.labels(), grid);
  ASSERT_EQ(curve.size(), 100u);
  for (const auto& pt : curve) EXPECT_EQ(pt.y, 1.0);
  EXPECT_NEAR(curve.front().x, 0.01, 1e-15);
  EXPECT_EQ(curve.back().x, 1.0);
}

TEST(IntraFractionCurve, AbsentRatiosRankFirst) {
  const Labels labels({0, 0, 1, 1}, 2);
  std::vector<PairStats> pairs;
  auto add = [&](Index i, Index j, std::optional<double> ratio) {
    PairStats s;
    s.i = i;
    s.j = j;
    s.ratio = ratio;
    pairs.push_back(s);
  };
  add(0, 2, 5.0);           // inter, highest finite ratio
  add(0, 1, std::nullopt);  // intra, collapsed
  add(1, 3, 1.0);
  add(2, 3, 2.0);           // intra
  const std::vector<double> grid{0.25, 0.5, 0.75, 1.0};
  const auto curve = intra_fraction_curve(pairs, labels, grid);
  EXPECT_EQ(curve[0].y, 1.0);
  EXPECT_EQ(curve[1].y, 0.5);
  EXPECT_NEAR(curve[2].y, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(curve[3].y, 0.5);
}

TEST(CenteringComparison, MeanDominatedData) {
  Vector mean = Vector::LinSpaced(30, 0.2, 0.8);
  Matrix m = (0.001 * random_matrix(30, 40, 17)).colwise() + mean;
  std::vector<int> ids(40);
  for (int i = 0; i < 40; ++i) ids[static_cast<std::size_t>(i)] = i % 2;
  const auto r = centering_comparison(DataMatrix(m, Labels(ids, 2)), 3);
  ASSERT_TRUE(r.mean_cosine.has_value());
  EXPECT_GE(*r.mean_cosine, 0.999);
  EXPECT_EQ(r.cells.size(), 2u);
}

TEST(CenteringComparison, ZeroMeanHasNoCosine) {
  // Columns come in +-y pairs of integers, so the row means are exactly zero.
  Matrix y = (10.0 * random_matrix(8, 6, 18)).array().round();
  Matrix m(8, 12);
  m << y, -y;
  const DataMatrix a(m, Labels({0, 0, 0, 1, 1, 1, 0, 0, 0, 1, 1, 1}, 2));
  EXPECT_EQ(a.row_means().norm(), 0.0);
  const auto r = centering_comparison(a, 3);
  EXPECT_FALSE(r.mean_cosine.has_value());
  EXPECT_LE(principal_angle(fit_uncentered_pca(a, 3), fit_centered_pca(a, 3)), 1e-8);
  for (const auto& c : r.cells) EXPECT_NEAR(*c.intra_relative_delta(), 0.0, 1e-9);
}

TEST(ExtraPcSplit, EqualRankHasNoTrailingPart) {
  const DataMatrix a(random_matrix(8, 6, 19));
  const Projector p = fit_uncentered_pca(a, 3);
  for (const auto& s : extra_pc_split(a, p, 3)) {
    EXPECT_EQ(s.trailing, 0.0);
    EXPECT_NEAR(s.leading, s.total, 1e-15 * (1.0 + s.total));
  }
}

TEST(ExtraPcSplit, MatchesDenseProjectorOracle) {
  const Matrix m = random_matrix(10, 9, 20);
  const DataMatrix a(m);
  const Projector p = fit_uncentered_pca(a, 6);
  const Matrix head = p.components().topRows(2);
  const Matrix tail = p.components().bottomRows(4);
  std::size_t r = 0;
  const auto split = extra_pc_split(a, p, 2);
  for (Index i = 0; i < 9; ++i)
    for (Index j = i + 1; j < 9; ++j, ++r) {
      const Vector diff = m.col(i) - m.col(j);
      const double lead = (head.transpose() * head * diff).norm();
      const double trail = (tail.transpose() * tail * diff).norm();
      EXPECT_NEAR(split[r].leading, lead, 1e-12 * diff.norm());
      EXPECT_NEAR(split[r].trailing, trail, 1e-12 * diff.norm());
      const double total2 = split[r].total * split[r].total;
      EXPECT_NEAR(total2, lead * lead + trail * trail, 1e-9 * total2);
    }
}

TEST(ExtraPcSplit, NoiselessRankKHasNoTrailingEnergy) {
  auto model = sbm_rectangular(30, {6, 6, 6, 6}, 0.8, 0.2);
  const DataMatrix a(mean_matrix(model), model.labels());
  const Projector p = fit_uncentered_pca(a, 7);
  for (const auto& s : extra_pc_split(a, p, 4)) EXPECT_LE(s.trailing, 1e-9);
}

TEST(ExtraPcSplit, RejectsSplitBeyondRank) {
  const DataMatrix a(random_matrix(8, 6, 21));
  const Projector p = fit_uncentered_pca(a, 3);
  EXPECT_THROW(extra_pc_split(a, p, 4), InputError);
  EXPECT_THROW(extra_pc_split(a, p, 0), InputError);
}
