#ifndef PCACOMP_COMPRESSION_HPP
#define PCACOMP_COMPRESSION_HPP

#include "accumulate.hpp"
#include "common.hpp"
#include "data_matrix.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "svd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pcacomp {

/// One unordered pair (i < j) before and after projection.
struct PairStats {
  Index i = 0;
  Index j = 0;
  double pre = 0.0;   // ||u_i - u_j||
  double post = 0.0;  // ||P(u_i) - P(u_j)||
  /// pre / post; absent when post <= 1e-12 * pre (the pair collapsed under projection).
  std::optional<double> ratio;
  bool same_cluster = false;
};

/// Relative threshold below which a post-projection distance counts as zero.
inline constexpr double kDegenerateRelative = 1e-12;

inline std::optional<double> compression_ratio(double pre, double post) {
  if (post <= kDegenerateRelative * pre || post == 0.0) return std::nullopt;
  return pre / post;
}

struct PairPolicy {
  enum class Kind { Exact, Sampled };
  Kind kind = Kind::Exact;
  std::size_t samples = 0;
  std::uint64_t seed = 0;

  static PairPolicy exact() { return {}; }
  static PairPolicy sampled(std::size_t m, std::uint64_t seed) { return {Kind::Sampled, m, seed}; }
};

/// How pre-projection distances are evaluated on the exact path.
enum class PreDistanceMethod {
  /// Subtract columns directly (sorted-index merge for sparse data).
  Direct,
  /// ||u||^2 + ||v||^2 - 2<u,v> from Gram panels, with a direct recomputation
  /// whenever cancellation could cost more than ~1e-4 of the squared norms.
  Gram,
  /// Gram once d * n^2 / 2 exceeds 2e9 multiply-adds, Direct below.
  Auto,
};

struct PairOptions {
  PreDistanceMethod method = PreDistanceMethod::Auto;
  Index block_columns = 64;
};

namespace detail {

inline std::uint64_t pair_count(Index n) {
  return static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n - 1) / 2;
}

/// Maps r in [0, n(n-1)/2) to the r-th pair in (i, j) lexicographic order.
inline std::pair<Index, Index> pair_from_rank(std::uint64_t r, Index n) {
  auto offset = [n](std::uint64_t i) { return i * static_cast<std::uint64_t>(n) - i * (i + 1) / 2; };
  std::uint64_t lo = 0, hi = static_cast<std::uint64_t>(n - 1);
  while (lo + 1 < hi) {
    const std::uint64_t mid = (lo + hi) / 2;
    if (offset(mid) <= r)
      lo = mid;
    else
      hi = mid;
  }
  const auto i = static_cast<Index>(lo);
  const auto j = static_cast<Index>(r - offset(lo)) + i + 1;
  return {i, j};
}

inline bool use_gram(const DataMatrix& a, PreDistanceMethod method) {
  if (method == PreDistanceMethod::Direct) return false;
  if (method == PreDistanceMethod::Gram) return true;
  const double work = static_cast<double>(a.rows()) * static_cast<double>(a.cols()) * static_cast<double>(a.cols()) / 2.0;
  return work > 2e9;
}

}  // namespace detail

/// Streams PairStats for every unordered pair (exact) or a seeded uniform sample.
///
/// Columns are projected once (k' x n coordinates). Exact enumeration visits
/// pairs in (i, j) lexicographic order regardless of thread count; blocks of rows
/// are computed in parallel and handed to `visit` in order.
template <typename Visitor>
void for_each_pair(const DataMatrix& a, const Projector& p, const PairPolicy& policy, Visitor&& visit,
                   const PairOptions& opts = {}) {
  detail::require(a.rows() == p.dimension(), "data has " + std::to_string(a.rows()) +
                                                 " rows but the projector expects " + std::to_string(p.dimension()));
  const Index n = a.cols();
  const Matrix coords = p.project_columns(a);
  const std::vector<int>* labels = a.has_labels() ? &a.labels()->ids : nullptr;
  auto make = [&](Index i, Index j, double pre2) {
    PairStats s;
    s.i = i;
    s.j = j;
    s.pre = std::sqrt(std::max(0.0, pre2));
    s.post = (coords.col(i) - coords.col(j)).norm();
    s.ratio = compression_ratio(s.pre, s.post);
    s.same_cluster = labels && (*labels)[static_cast<std::size_t>(i)] == (*labels)[static_cast<std::size_t>(j)];
    return s;
  };

  if (policy.kind == PairPolicy::Kind::Sampled) {
    detail::require(policy.samples >= 1, "sampled pair policy needs at least one sample");
    Philox rng(policy.seed, 1);
    const auto total = detail::pair_count(n);
    for (std::size_t s = 0; s < policy.samples; ++s) {
      const auto [i, j] = detail::pair_from_rank(rng.below(total), n);
      visit(make(i, j, a.squared_distance(i, j)));
    }
    return;
  }

  const bool gram = detail::use_gram(a, opts.method);
  const Vector sq = gram ? a.column_squared_norms() : Vector();
  const Index block = std::max<Index>(1, opts.block_columns);
  const auto num_blocks = static_cast<std::size_t>((n + block - 1) / block);
  const auto wave = static_cast<std::size_t>(std::max(1, num_threads()));
  std::vector<std::vector<PairStats>> buffers(wave);

  for (std::size_t first = 0; first < num_blocks; first += wave) {
    const std::size_t count = std::min(wave, num_blocks - first);
    parallel_for_blocks(count, [&](std::size_t slot) {
      const Index i0 = static_cast<Index>(first + slot) * block;
      const Index i1 = std::min(n, i0 + block);
      auto& out = buffers[slot];
      out.clear();
      Matrix panel;
      if (gram) {
        // panel(r, c) = <u_{i0 + r}, u_{i0 + c}> for columns i0.. n-1 against the block.
        const Matrix cols = a.dense_columns(i0, i1 - i0);
        if (a.is_sparse())
          panel = a.sparse().rightCols(n - i0).transpose() * cols;
        else
          panel = a.dense().rightCols(n - i0).transpose() * cols;
      }
      for (Index i = i0; i < i1; ++i) {
        for (Index j = i + 1; j < n; ++j) {
          double pre2;
          if (gram) {
            const double norms = sq[i] + sq[j];
            pre2 = norms - 2.0 * panel(j - i0, i - i0);
            if (pre2 < 1e-4 * norms) pre2 = a.squared_distance(i, j);
          } else {
            pre2 = a.squared_distance(i, j);
          }
          out.push_back(make(i, j, pre2));
        }
      }
    });
    for (std::size_t slot = 0; slot < count; ++slot)
      for (const auto& s : buffers[slot]) visit(s);
  }
}

inline std::vector<PairStats> pair_compression(const DataMatrix& a, const Projector& p,
                                               const PairPolicy& policy = PairPolicy::exact(),
                                               const PairOptions& opts = {}) {
  std::vector<PairStats> pairs;
  if (policy.kind == PairPolicy::Kind::Exact)
    pairs.reserve(static_cast<std::size_t>(detail::pair_count(a.cols())));
  else
    pairs.reserve(policy.samples);
  for_each_pair(a, p, policy, [&](const PairStats& s) { pairs.push_back(s); }, opts);
  return pairs;
}

/// Averages over one pair set (a cluster's intra or inter pairs).
struct DistanceAverages {
  std::size_t pairs = 0;
  std::size_t excluded = 0;  // pairs without a defined ratio
  double pre_avg = 0.0;
  double post_avg = 0.0;
  /// Mean of per-pair ratios over pairs with a defined ratio.
  std::optional<double> ratio_avg;
  /// pre_avg / post_avg, reported alongside for comparison.
  std::optional<double> ratio_of_averages;
};

class DistanceAccumulator {
 public:
  void add(const PairStats& s) {
    ++pairs_;
    pre_.add(s.pre);
    post_.add(s.post);
    if (s.ratio) {
      ratio_.add(*s.ratio);
      ++ratios_;
    }
  }

  std::optional<DistanceAverages> finish() const {
    if (pairs_ == 0) return std::nullopt;
    DistanceAverages out;
    out.pairs = pairs_;
    out.excluded = pairs_ - ratios_;
    out.pre_avg = pre_.value() / static_cast<double>(pairs_);
    out.post_avg = post_.value() / static_cast<double>(pairs_);
    if (ratios_ > 0) out.ratio_avg = ratio_.value() / static_cast<double>(ratios_);
    out.ratio_of_averages = compression_ratio(out.pre_avg, out.post_avg);
    return out;
  }

 private:
  std::size_t pairs_ = 0;
  std::size_t ratios_ = 0;
  CompensatedSum pre_, post_, ratio_;
};

struct ClusterRow {
  int cluster = 0;
  std::string name;
  std::size_t size = 0;
  std::optional<DistanceAverages> inter;  // pairs (u in V_j, v not in V_j)
  std::optional<DistanceAverages> intra;  // unordered pairs within V_j; absent for singletons
};

struct ClusterSummary {
  std::vector<ClusterRow> rows;
  std::size_t total_pairs = 0;
};

/// Streaming per-cluster aggregation; feeding pairs one by one equals the batch call.
class ClusterSummaryBuilder {
 public:
  explicit ClusterSummaryBuilder(const Labels& labels)
      : labels_(labels), inter_(static_cast<std::size_t>(labels.k)), intra_(static_cast<std::size_t>(labels.k)) {}

  void add(const PairStats& s) {
    ++total_;
    const auto a = static_cast<std::size_t>(labels_[static_cast<std::size_t>(s.i)]);
    const auto b = static_cast<std::size_t>(labels_[static_cast<std::size_t>(s.j)]);
    if (a == b) {
      intra_[a].add(s);
    } else {
      inter_[a].add(s);
      inter_[b].add(s);
    }
  }

  ClusterSummary finish() const {
    ClusterSummary out;
    out.total_pairs = total_;
    const auto sizes = labels_.cluster_sizes();
    for (int j = 0; j < labels_.k; ++j) {
      ClusterRow row;
      row.cluster = j;
      row.name = labels_.name(j);
      row.size = sizes[static_cast<std::size_t>(j)];
      row.inter = inter_[static_cast<std::size_t>(j)].finish();
      row.intra = intra_[static_cast<std::size_t>(j)].finish();
      out.rows.push_back(std::move(row));
    }
    return out;
  }

 private:
  const Labels& labels_;
  std::vector<DistanceAccumulator> inter_, intra_;
  std::size_t total_ = 0;
};

inline ClusterSummary cluster_summary(std::span<const PairStats> pairs, const Labels& labels) {
  ClusterSummaryBuilder builder(labels);
  for (const auto& s : pairs) builder.add(s);
  return builder.finish();
}

/// Per-point mean compression ratio against same-cluster and other-cluster partners.
struct PointSummary {
  Index point = 0;
  int cluster = 0;
  std::optional<double> intra_avg;
  std::optional<double> inter_avg;
  std::size_t intra_partners = 0;
  std::size_t inter_partners = 0;
  std::size_t intra_excluded = 0;
  std::size_t inter_excluded = 0;
};

/// Requires the exact pair set: every point must see all n - 1 partners.
inline std::vector<PointSummary> pointwise_summary(std::span<const PairStats> pairs, const Labels& labels) {
  const std::size_t n = labels.size();
  detail::require(pairs.size() == static_cast<std::size_t>(detail::pair_count(static_cast<Index>(n))),
                  "pointwise summary needs the exact pair set");
  std::vector<CompensatedSum> intra(n), inter(n);
  std::vector<PointSummary> out(n);
  for (std::size_t p = 0; p < n; ++p) {
    out[p].point = static_cast<Index>(p);
    out[p].cluster = labels[p];
  }
  auto credit = [&](std::size_t p, const PairStats& s) {
    auto& row = out[p];
    if (s.same_cluster) {
      ++row.intra_partners;
      if (s.ratio) intra[p].add(*s.ratio);
      else ++row.intra_excluded;
    } else {
      ++row.inter_partners;
      if (s.ratio) inter[p].add(*s.ratio);
      else ++row.inter_excluded;
    }
  };
  for (const auto& s : pairs) {
    PairStats t = s;
    t.same_cluster = labels[static_cast<std::size_t>(s.i)] == labels[static_cast<std::size_t>(s.j)];
    credit(static_cast<std::size_t>(s.i), t);
    credit(static_cast<std::size_t>(s.j), t);
  }
  for (std::size_t p = 0; p < n; ++p) {
    auto& row = out[p];
    const auto intra_defined = row.intra_partners - row.intra_excluded;
    const auto inter_defined = row.inter_partners - row.inter_excluded;
    if (intra_defined > 0) row.intra_avg = intra[p].value() / static_cast<double>(intra_defined);
    if (inter_defined > 0) row.inter_avg = inter[p].value() / static_cast<double>(inter_defined);
  }
  return out;
}

struct CurvePoint {
  double x = 0.0;  // top fraction of pairs by descending ratio
  double y = 0.0;  // fraction of those pairs that are intra-cluster
};

/// x = 0.01, 0.02, ..., 1.00.
inline std::vector<double> default_curve_grid() {
  std::vector<double> grid;
  for (int g = 1; g <= 100; ++g) grid.push_back(g / 100.0);
  return grid;
}

/// Sorts pairs by ratio descending (collapsed pairs first, ties by enumeration
/// order) and reports the cumulative intra-cluster fraction at each grid point.
inline std::vector<CurvePoint> intra_fraction_curve(std::span<const PairStats> pairs, const Labels& labels,
                                                    std::span<const double> grid) {
  detail::require(!pairs.empty(), "curve needs at least one pair");
  std::vector<std::uint32_t> order(pairs.size());
  for (std::size_t p = 0; p < order.size(); ++p) order[p] = static_cast<std::uint32_t>(p);
  auto key = [&](std::uint32_t p) {
    return pairs[p].ratio ? *pairs[p].ratio : std::numeric_limits<double>::infinity();
  };
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return key(a) > key(b); });

  std::vector<std::size_t> cumulative(order.size() + 1, 0);
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& s = pairs[order[r]];
    const bool same = labels[static_cast<std::size_t>(s.i)] == labels[static_cast<std::size_t>(s.j)];
    cumulative[r + 1] = cumulative[r] + (same ? 1 : 0);
  }
  std::vector<CurvePoint> curve;
  const auto total = static_cast<double>(pairs.size());
  for (double x : grid) {
    detail::require(x > 0.0 && x <= 1.0, "curve grid values must lie in (0, 1]");
    auto m = static_cast<std::size_t>(std::ceil(x * total - 1e-9));
    m = std::clamp<std::size_t>(m, 1, pairs.size());
    curve.push_back({x, static_cast<double>(cumulative[m]) / static_cast<double>(m)});
  }
  return curve;
}

/// Exact pairs + cluster table in one pass without storing the pairs.
inline ClusterSummary summarize_compression(const DataMatrix& a, const Projector& p, const PairOptions& opts = {}) {
  ClusterSummaryBuilder builder(a.require_labels());
  for_each_pair(a, p, PairPolicy::exact(), [&](const PairStats& s) { builder.add(s); }, opts);
  return builder.finish();
}

struct CenteringCell {
  int cluster = 0;
  std::optional<double> intra_uncentered, intra_centered;
  std::optional<double> inter_uncentered, inter_centered;

  static std::optional<double> relative_delta(const std::optional<double>& base, const std::optional<double>& other) {
    if (!base || !other || *base == 0.0) return std::nullopt;
    return (*other - *base) / *base;
  }
  std::optional<double> intra_relative_delta() const { return relative_delta(intra_uncentered, intra_centered); }
  std::optional<double> inter_relative_delta() const { return relative_delta(inter_uncentered, inter_centered); }
};

struct CenteringReport {
  Index pcs = 0;
  /// |cos(top uncentered PC, c_m)|; absent when the row-mean vector is zero.
  std::optional<double> mean_cosine;
  ClusterSummary uncentered;
  ClusterSummary centered;
  std::vector<CenteringCell> cells;
};

inline CenteringReport centering_comparison(const DataMatrix& a, Index pcs, const SvdOptions& svd = {},
                                            const PairOptions& opts = {}) {
  CenteringReport report;
  report.pcs = pcs;
  const Projector plain = fit_uncentered_pca(a, pcs, svd);
  const Projector centered = fit_centered_pca(a, pcs, svd);
  const Vector& mean = *centered.mean_vector();
  const double mean_norm = mean.norm();
  if (mean_norm > 0.0) report.mean_cosine = std::abs(plain.components().row(0).dot(mean)) / mean_norm;
  report.uncentered = summarize_compression(a, plain, opts);
  report.centered = summarize_compression(a, centered, opts);
  for (std::size_t r = 0; r < report.uncentered.rows.size(); ++r) {
    const auto& u = report.uncentered.rows[r];
    const auto& c = report.centered.rows[r];
    CenteringCell cell;
    cell.cluster = u.cluster;
    if (u.intra) cell.intra_uncentered = u.intra->ratio_avg;
    if (c.intra) cell.intra_centered = c.intra->ratio_avg;
    if (u.inter) cell.inter_uncentered = u.inter->ratio_avg;
    if (c.inter) cell.inter_centered = c.inter->ratio_avg;
    report.cells.push_back(cell);
  }
  return report;
}

/// Post-projection distance of one pair split into leading-k and trailing parts.
struct PcSplit {
  Index i = 0;
  Index j = 0;
  double leading = 0.0;   // ||P^k (u - v)||
  double trailing = 0.0;  // ||P^(k+1, k') (u - v)||
  double total = 0.0;     // ||P^k' (u - v)||
  bool same_cluster = false;
};

/// Splits every pair's k'-PC distance at component k and checks
/// total^2 = leading^2 + trailing^2 to 1e-9 relative.
inline std::vector<PcSplit> extra_pc_split(const DataMatrix& a, const Projector& p, Index k) {
  detail::require(k >= 1 && k <= p.rank(), "split point k must satisfy 1 <= k <= k'");
  detail::require(a.rows() == p.dimension(), "data and projector dimensions differ");
  const Matrix coords = p.project_columns(a);
  const Index n = a.cols();
  const std::vector<int>* labels = a.has_labels() ? &a.labels()->ids : nullptr;
  std::vector<PcSplit> out;
  out.reserve(static_cast<std::size_t>(detail::pair_count(n)));
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const Vector diff = coords.col(i) - coords.col(j);
      PcSplit s;
      s.i = i;
      s.j = j;
      s.leading = diff.head(k).norm();
      s.trailing = diff.tail(p.rank() - k).norm();
      s.total = diff.norm();
      s.same_cluster = labels && (*labels)[static_cast<std::size_t>(i)] == (*labels)[static_cast<std::size_t>(j)];
      const double lhs = s.total * s.total;
      const double rhs = s.leading * s.leading + s.trailing * s.trailing;
      if (std::abs(lhs - rhs) > 1e-9 * std::max(lhs, std::numeric_limits<double>::min()) && lhs > 0.0)
        throw NumericalError("Pythagorean split identity failed for pair (" + std::to_string(i) + ", " +
                             std::to_string(j) + ")");
      out.push_back(s);
    }
  return out;
}

}  // namespace pcacomp

#endif
