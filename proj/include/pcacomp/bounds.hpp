#ifndef PCACOMP_BOUNDS_HPP
#define PCACOMP_BOUNDS_HPP

#include "common.hpp"
#include "compression.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "svd.hpp"
#include "symmetric.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace pcacomp {

/// Bound parameters for one model. Logarithms are natural.
struct BoundParams {
  Index d = 0;
  Index n = 0;
  Index k = 0;
  double sigma = 0.0;             // max per-coordinate standard deviation
  std::vector<double> sigma_j;    // per-cluster sqrt(mean coordinate variance)
  Matrix separations;             // k x k, ||c_j - c_j'||
  double s_k = 0.0;               // k-th singular value (mean-matrix by default)
  double C0 = 1.0;                // calibration constant of the random-matrix norm bound
  double c0 = 4.0;                // random-projection exponent

  static BoundParams from_stats(const ModelStats& stats, double C0 = 1.0) {
    BoundParams p;
    p.d = stats.d;
    p.n = stats.n;
    p.k = stats.k;
    p.sigma = stats.sigma_max();
    for (Index j = 0; j < stats.k; ++j) p.sigma_j.push_back(stats.sigma_j(j));
    p.separations = stats.center_separations;
    p.s_k = stats.s_k;
    p.C0 = C0;
    return p;
  }

  /// side condition sigma >= C0 log n / n (flagged, not enforced).
  bool sigma_condition_met() const {
    return sigma >= C0 * std::log(static_cast<double>(n)) / static_cast<double>(n);
  }

  double var_j(Index j) const {
    const double s = sigma_j.at(static_cast<std::size_t>(j));
    return s * s;
  }
  double separation(Index a, Index b) const { return separations(a, b); }
};

/// A closed-form bound; `value` is withheld when a radicand or denominator
/// makes the expression certify nothing.
struct BoundValue {
  std::optional<double> value;
  bool vacuous = false;
};

namespace detail {

inline double dd(Index x) { return static_cast<double>(x); }

inline void require_positive_sk(const BoundParams& p) {
  require(p.s_k > 0.0 && std::isfinite(p.s_k), "bound needs s_k > 0");
}

/// sqrt(k) (sigma + sqrt(16 log(nk))): the projected-noise term with c0 = 4.
inline double projected_noise(const BoundParams& p) {
  return std::sqrt(dd(p.k)) * (p.sigma + std::sqrt(16.0 * std::log(dd(p.n) * dd(p.k))));
}

inline double pre_intra_radicand(const BoundParams& p, Index j) {
  return 2.0 * dd(p.d) * p.var_j(j) - 12.0 * std::sqrt(dd(p.d)) * std::log(dd(p.n));
}

inline double pre_inter_radicand(const BoundParams& p, Index j, Index jp) {
  const double sep = p.separation(j, jp);
  return dd(p.d) * (p.var_j(j) + p.var_j(jp)) + sep * sep + 12.0 * std::sqrt(dd(p.d)) * std::log(dd(p.n));
}

}  // namespace detail

/// Intra-cluster pre-projection distance lower bound sqrt(max(0, 2d sigma_j^2 - 12 sqrt(d) log n)).
inline BoundValue pre_pca_intra_lower(const BoundParams& p, Index j) {
  const double r = detail::pre_intra_radicand(p, j);
  return {std::sqrt(std::max(0.0, r)), r <= 0.0};
}

/// Inter-cluster pre-projection distance upper bound.
inline BoundValue pre_pca_inter_upper(const BoundParams& p, Index j, Index jp) {
  detail::require(j != jp, "inter-cluster bound needs two distinct clusters");
  return {std::sqrt(detail::pre_inter_radicand(p, j, jp)), false};
}

/// Intra-cluster post-projection distance upper bound (carries sigma * sigma_j).
inline BoundValue post_pca_intra_upper(const BoundParams& p, Index j) {
  detail::require_positive_sk(p);
  const double d = detail::dd(p.d), n = detail::dd(p.n);
  const double spread = p.C0 * p.sigma * p.sigma_j.at(static_cast<std::size_t>(j)) * std::sqrt(d * (d + n)) / p.s_k;
  return {2.0 * std::numbers::sqrt2 * (detail::projected_noise(p) + spread), false};
}

/// Inter-cluster post-projection distance lower bound; both corrections reduce the separation.
inline BoundValue post_pca_inter_lower(const BoundParams& p, Index j, Index jp) {
  detail::require(j != jp, "inter-cluster bound needs two distinct clusters");
  detail::require_positive_sk(p);
  const double d = detail::dd(p.d), n = detail::dd(p.n);
  const double sep = p.separation(j, jp);
  const double spread = 2.0 * p.C0 * p.sigma * p.sigma *
                        std::sqrt(2.0 * (d + n) * (sep * sep + d * (p.var_j(j) + p.var_j(jp)))) / p.s_k;
  const double value = sep - 2.0 * detail::projected_noise(p) - spread;
  return {value, value <= 0.0};
}

/// Lower bound on the k-PC compression ratio of every intra-cluster pair of V_j.
///
/// Denominator term C0 sigma^2 sqrt(d(d+n)) / s_k; the post-projection
/// intra bound uses C0 sigma sigma_j instead.
inline BoundValue ratio_intra_lower(const BoundParams& p, Index j) {
  detail::require_positive_sk(p);
  const double d = detail::dd(p.d), n = detail::dd(p.n);
  const double r = detail::pre_intra_radicand(p, j);
  const double denom = 2.0 * std::numbers::sqrt2 *
                       (detail::projected_noise(p) + p.C0 * p.sigma * p.sigma * std::sqrt(d * (d + n)) / p.s_k);
  if (r <= 0.0 || denom <= 0.0) return {std::nullopt, true};
  return {std::sqrt(r) / denom, false};
}

/// Upper bound on the k-PC compression ratio of every pair (u in V_j, v in V_j').
///
/// Denominator sqrt(2) (sep - 2 (noise - C0 sigma^2 sqrt(2(d+n)(sep^2 + d(s_j^2 + s_j'^2))) / s_k)),
/// so the s_k correction enters with a plus sign, unlike post_pca_inter_lower.
inline BoundValue ratio_inter_upper(const BoundParams& p, Index j, Index jp) {
  detail::require(j != jp, "inter-cluster bound needs two distinct clusters");
  detail::require_positive_sk(p);
  const double d = detail::dd(p.d), n = detail::dd(p.n);
  const double sep = p.separation(j, jp);
  const double correction =
      p.C0 * p.sigma * p.sigma * std::sqrt(2.0 * (d + n) * (sep * sep + d * (p.var_j(j) + p.var_j(jp)))) / p.s_k;
  const double denom = std::numbers::sqrt2 * (sep - 2.0 * (detail::projected_noise(p) - correction));
  if (denom <= 0.0) return {std::nullopt, true};
  return {std::sqrt(detail::pre_inter_radicand(p, j, jp)) / denom, false};
}

/// ||P e|| <= sqrt(k') (sigma + sqrt(4 c0 log(n k'))) for P independent of e.
inline double random_projection_ub(Index pcs, double sigma, Index n, double c0) {
  detail::require(c0 > 1.0, "random projection exponent c0 must exceed 1");
  detail::require(pcs >= 1 && n >= 1, "random projection bound needs k' >= 1 and n >= 1");
  const double nk = detail::dd(n) * detail::dd(pcs);
  return std::sqrt(detail::dd(pcs)) * (sigma + std::sqrt(4.0 * c0 * std::log(nk)));
}

/// Failure probability (n k')^(1 - c0) attached to random_projection_ub.
inline double random_projection_failure_probability(Index pcs, Index n, double c0) {
  return std::pow(detail::dd(n) * detail::dd(pcs), 1.0 - c0);
}

struct ExtraPcBound {
  double slack = 0.0;         // C0^2 sigma^2 (d+n) c^2 f^2
  double pair_budget = 0.0;   // c^2 / f^4 intra pairs allowed to exceed

  double threshold(double leading) const { return std::sqrt(leading * leading + slack); }
};

/// Per-pair threshold for k' = k + c components, excepting O(c^2 / f^4) intra pairs.
inline ExtraPcBound extra_pc_pair_bound(const BoundParams& p, double c, double f) {
  detail::require(f > 0.0 && f < 1.0, "fraction f must lie in (0, 1)");
  detail::require(c >= 0.0, "extra component count c must be non-negative");
  const double d = detail::dd(p.d), n = detail::dd(p.n);
  ExtraPcBound b;
  b.slack = p.C0 * p.C0 * p.sigma * p.sigma * (d + n) * c * c * f * f;
  b.pair_budget = c * c / (f * f * f * f);
  return b;
}

// ---------------------------------------------------------------------------
// Monte-Carlo verifiers
// ---------------------------------------------------------------------------

/// Noise matrix E = A_hat - A of one draw.
inline Matrix noise_matrix(const RandomVectorModel& model, const DataMatrix& draw) {
  return draw.dense() - mean_matrix(model);
}

/// ||M||_2 via the largest eigenvalue of the smaller Gram matrix.
inline double matrix_spectral_norm(const Matrix& m, double tolerance = 1e-10) {
  Matrix gram;
  if (m.cols() <= m.rows()) {
    gram = Matrix::Zero(m.cols(), m.cols());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(m.transpose());
  } else {
    gram = Matrix::Zero(m.rows(), m.rows());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(m);
  }
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
  SpectralNormOptions opts;
  opts.tolerance = tolerance;
  return std::sqrt(spectral_norm(DenseSymmetricOperator(std::move(gram)), opts).value);
}

struct NoiseNormCheck {
  double norm = 0.0;   // ||E_B|| = ||E||
  double bound = 0.0;  // C0 sigma sqrt(d + n)
  bool pass = false;
};

/// Compares the symmetric-embedding noise norm of one draw with C0 sigma sqrt(d + n).
inline NoiseNormCheck noise_norm_check(const RandomVectorModel& model, std::uint64_t seed, double C0) {
  const auto stats = model_stats(model);
  const DataMatrix draw = generate_dataset(model, seed);
  NoiseNormCheck out;
  out.norm = matrix_spectral_norm(noise_matrix(model, draw));
  out.bound = C0 * stats.sigma_max() * std::sqrt(detail::dd(model.d() + model.n()));
  out.pass = out.norm <= out.bound;
  return out;
}

struct CalibrationResult {
  double C0 = 0.0;                 // smallest constant passing every seed
  std::vector<double> ratios;      // ||E|| / (sigma sqrt(d + n)) per seed
};

/// Smallest C0 with noise_norm_check passing on all of `seeds`.
inline CalibrationResult calibrate_c0(const RandomVectorModel& model, const std::vector<std::uint64_t>& seeds) {
  detail::require(!seeds.empty(), "calibration needs at least one seed");
  const auto stats = model_stats(model);
  const double scale = stats.sigma_max() * std::sqrt(detail::dd(model.d() + model.n()));
  detail::require(scale > 0.0, "calibration needs a model with nonzero noise");
  CalibrationResult out;
  for (auto seed : seeds) {
    const DataMatrix draw = generate_dataset(model, seed);
    const double ratio = matrix_spectral_norm(noise_matrix(model, draw)) / scale;
    out.ratios.push_back(ratio);
    out.C0 = std::max(out.C0, ratio);
  }
  return out;
}

inline std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  for (std::size_t s = 0; s < count; ++s) seeds[s] = first + s;
  return seeds;
}

/// One bound checked against its empirical extreme over all seeds.
struct BoundRecord {
  std::string bound;       // e.g. "ratio-intra"
  int cluster = 0;
  std::optional<int> other_cluster;
  std::optional<double> analytic;  // bound value at the first seed
  bool vacuous = false;
  bool lower = true;               // true: empirical values must stay above the bound
  std::optional<double> empirical; // min (lower bounds) or max (upper bounds) over all seeds
  std::size_t violations = 0;
  std::size_t trials = 0;

  bool passed() const { return !vacuous && violations == 0; }
};

struct BoundReport {
  std::vector<BoundRecord> records;
  std::size_t seeds = 0;
  Index pcs = 0;
  double C0 = 1.0;
  double s_k_mean_matrix = 0.0;
  std::vector<double> s_k_data;    // k-th singular value of each draw
  bool used_data_s_k = false;
  bool sigma_condition_met = false;

  const BoundRecord* find(const std::string& bound, int cluster, std::optional<int> other = std::nullopt) const {
    for (const auto& r : records)
      if (r.bound == bound && r.cluster == cluster && r.other_cluster == other) return &r;
    return nullptr;
  }

  std::size_t violations(const std::string& bound) const {
    std::size_t v = 0;
    for (const auto& r : records)
      if (r.bound == bound) v += r.violations;
    return v;
  }

  std::size_t vacuous_count(const std::string& bound) const {
    std::size_t v = 0;
    for (const auto& r : records)
      if (r.bound == bound && r.vacuous) ++v;
    return v;
  }

  std::size_t record_count(const std::string& bound) const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [&](const auto& r) { return r.bound == bound; }));
  }
};

struct VerifyOptions {
  /// Evaluate bounds with s_k of each draw instead of the mean-matrix.
  bool use_data_s_k = false;
  SvdOptions svd;
  PairOptions pairs;
};

namespace detail {

class RecordTable {
 public:
  BoundRecord& at(const std::string& bound, int a, std::optional<int> b, bool lower) {
    for (auto& r : records)
      if (r.bound == bound && r.cluster == a && r.other_cluster == b) return r;
    BoundRecord r;
    r.bound = bound;
    r.cluster = a;
    r.other_cluster = b;
    r.lower = lower;
    records.push_back(r);
    return records.back();
  }

  /// Registers the bound for this seed; returns the numeric value when usable.
  static std::optional<double> arm(BoundRecord& r, const BoundValue& v, bool first_seed) {
    if (first_seed) r.analytic = v.value;
    if (v.vacuous || !v.value) {
      r.vacuous = true;
      return std::nullopt;
    }
    return v.value;
  }

  static void observe(BoundRecord& r, const std::optional<double>& bound, double value) {
    ++r.trials;
    if (!r.empirical)
      r.empirical = value;
    else
      r.empirical = r.lower ? std::min(*r.empirical, value) : std::max(*r.empirical, value);
    if (!bound) return;
    const bool violated = r.lower ? value < *bound : value > *bound;
    if (violated) ++r.violations;
  }

  std::vector<BoundRecord> records;
};

}  // namespace detail

/// Draws one instance per seed, fits uncentered PCA with `pcs` components and
/// checks every pair against the ratio bounds and the four pre/post
/// distance bounds. Vacuous bounds are flagged and never counted as passes.
inline BoundReport verify_bounds(const RandomVectorModel& model, const std::vector<std::uint64_t>& seeds, Index pcs,
                                 double C0, const VerifyOptions& opts = {}) {
  detail::require(!seeds.empty(), "bound verification needs at least one seed");
  const auto stats = model_stats(model);
  const Index k = model.k();
  detail::require(pcs >= 1, "bound verification needs at least one component");
  BoundReport report;
  report.seeds = seeds.size();
  report.pcs = pcs;
  report.C0 = C0;
  report.s_k_mean_matrix = stats.s_k;
  report.used_data_s_k = opts.use_data_s_k;
  detail::RecordTable table;
  const double inf = std::numeric_limits<double>::infinity();

  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const bool first = s == 0;
    const DataMatrix draw = generate_dataset(model, seeds[s]);
    const Index fit_rank = std::max(pcs, std::min(k, std::min(draw.rows(), draw.cols())));
    const auto triplets = svd_triplets(draw, fit_rank, opts.svd);
    const double data_s_k = triplets.values[std::min<Index>(k, triplets.values.size()) - 1];
    report.s_k_data.push_back(data_s_k);
    const Projector projector(triplets.left.leftCols(pcs).transpose(), triplets.values.head(pcs));

    BoundParams params = BoundParams::from_stats(stats, C0);
    if (opts.use_data_s_k) params.s_k = data_s_k;
    if (first) report.sigma_condition_met = params.sigma_condition_met();

    // Record slots: per cluster (intra) and per unordered cluster pair (inter).
    const auto kk = static_cast<std::size_t>(k);
    struct Slot {
      std::size_t record;
      std::optional<double> bound;
    };
    auto arm = [&](const char* name, int a, std::optional<int> b, bool lower, const BoundValue& v) {
      auto& r = table.at(name, a, b, lower);
      const auto value = detail::RecordTable::arm(r, v, first);
      return Slot{static_cast<std::size_t>(&r - table.records.data()), value};
    };
    std::vector<std::array<Slot, 3>> intra(kk), inter(kk * kk);
    for (Index j = 0; j < k; ++j) {
      const int jj = static_cast<int>(j);
      auto& slots = intra[static_cast<std::size_t>(j)];
      slots[0] = arm("ratio-intra", jj, std::nullopt, true, ratio_intra_lower(params, j));
      slots[1] = arm("pre-intra-lower", jj, std::nullopt, true, pre_pca_intra_lower(params, j));
      slots[2] = arm("post-intra-upper", jj, std::nullopt, false, post_pca_intra_upper(params, j));
    }
    for (Index a = 0; a < k; ++a)
      for (Index b = a + 1; b < k; ++b) {
        const int ia = static_cast<int>(a), ib = static_cast<int>(b);
        auto& slots = inter[static_cast<std::size_t>(a) * kk + static_cast<std::size_t>(b)];
        slots[0] = arm("ratio-inter", ia, ib, false, ratio_inter_upper(params, a, b));
        slots[1] = arm("pre-inter-upper", ia, ib, false, pre_pca_inter_upper(params, a, b));
        slots[2] = arm("post-inter-lower", ia, ib, true, post_pca_inter_lower(params, a, b));
      }
    // Every record exists now, so indices into table.records stay valid.
    const auto& labels = draw.labels()->ids;
    for_each_pair(
        draw, projector, PairPolicy::exact(),
        [&](const PairStats& pr) {
          const auto a = static_cast<std::size_t>(labels[static_cast<std::size_t>(pr.i)]);
          const auto b = static_cast<std::size_t>(labels[static_cast<std::size_t>(pr.j)]);
          const double ratio = pr.ratio ? *pr.ratio : inf;
          const auto& slots = a == b ? intra[a] : inter[std::min(a, b) * kk + std::max(a, b)];
          const double observed[3] = {ratio, pr.pre, pr.post};
          for (int t = 0; t < 3; ++t)
            detail::RecordTable::observe(table.records[slots[t].record], slots[t].bound, observed[t]);
        },
        opts.pairs);
  }
  report.records = std::move(table.records);
  return report;
}

struct PrePcaConcentration {
  std::size_t intra_pairs = 0;
  std::size_t inter_pairs = 0;
  std::size_t intra_violations = 0;  // pre distance below the intra lower bound
  std::size_t inter_violations = 0;  // pre distance above the inter upper bound
  std::size_t intra_vacuous = 0;     // sampled intra pairs whose cluster bound is vacuous

  double intra_fraction() const { return intra_pairs ? static_cast<double>(intra_violations) / static_cast<double>(intra_pairs) : 0.0; }
  double inter_fraction() const { return inter_pairs ? static_cast<double>(inter_violations) / static_cast<double>(inter_pairs) : 0.0; }
};

/// Samples `per_kind` intra and inter pairs of one draw and counts violations of
/// the pre-projection distance bounds.
inline PrePcaConcentration pre_pca_concentration(const RandomVectorModel& model, std::uint64_t seed, std::size_t per_kind) {
  const auto stats = model_stats(model);
  const auto params = BoundParams::from_stats(stats, 1.0);
  const DataMatrix draw = generate_dataset(model, seed);
  const auto& labels = draw.labels()->ids;
  const Index n = draw.cols();
  Philox rng(seed, 0xb0b0);
  PrePcaConcentration out;
  const bool want_intra = model.k() >= 1 && std::any_of(model.sizes.begin(), model.sizes.end(), [](Index s) { return s >= 2; });
  const bool want_inter = model.k() >= 2;
  const std::size_t cap = 1000 * per_kind + 100000;
  for (std::size_t draws = 0; draws < cap; ++draws) {
    const bool intra_full = !want_intra || out.intra_pairs >= per_kind;
    const bool inter_full = !want_inter || out.inter_pairs >= per_kind;
    if (intra_full && inter_full) break;
    const auto [i, j] = detail::pair_from_rank(rng.below(detail::pair_count(n)), n);
    const auto a = static_cast<Index>(labels[static_cast<std::size_t>(i)]);
    const auto b = static_cast<Index>(labels[static_cast<std::size_t>(j)]);
    if (a == b && out.intra_pairs < per_kind) {
      ++out.intra_pairs;
      const auto bound = pre_pca_intra_lower(params, a);
      if (bound.vacuous) ++out.intra_vacuous;
      if (std::sqrt(draw.squared_distance(i, j)) < *bound.value) ++out.intra_violations;
    } else if (a != b && out.inter_pairs < per_kind) {
      ++out.inter_pairs;
      const auto bound = pre_pca_inter_upper(params, a, b);
      if (std::sqrt(draw.squared_distance(i, j)) > *bound.value) ++out.inter_violations;
    }
  }
  return out;
}

struct RandomProjectionCheck {
  std::size_t trials = 0;
  std::size_t violations = 0;
  double bound = 0.0;
  double predicted_rate = 0.0;
  double max_norm = 0.0;

  double rate() const { return trials ? static_cast<double>(violations) / static_cast<double>(trials) : 0.0; }
};

/// Independent random orthonormal P (k' x d) against uniform zero-mean noise of
/// half-width `half_width` (sigma = half_width / sqrt(3)); counts ||P e|| above the bound.
inline RandomProjectionCheck random_projection_check(Index d, Index pcs, Index n, double c0, double half_width,
                                                     std::size_t trials, std::uint64_t seed) {
  detail::require(pcs >= 1 && pcs <= d, "need 1 <= k' <= d");
  RandomProjectionCheck out;
  const double sigma = half_width / std::sqrt(3.0);
  out.bound = random_projection_ub(pcs, sigma, n, c0);
  out.predicted_rate = random_projection_failure_probability(pcs, n, c0);
  out.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    Philox rng(seed, t);
    Matrix g(d, pcs);
    for (Index c = 0; c < pcs; ++c)
      for (Index r = 0; r < d; ++r) g(r, c) = rng.normal();
    const Matrix basis = detail::orthonormal_basis(g);
    Vector e(d);
    for (Index r = 0; r < d; ++r) e[r] = half_width * (2.0 * rng.uniform() - 1.0);
    const double norm = (basis.transpose() * e).norm();
    out.max_norm = std::max(out.max_norm, norm);
    if (norm > out.bound) ++out.violations;
  }
  return out;
}

struct ExtraPcCheck {
  std::size_t intra_pairs = 0;
  std::size_t exceedances = 0;
  double pair_budget = 0.0;
  double max_identity_error = 0.0;  // relative error of the Pythagorean split
};

/// Fits k + c components to one draw and counts intra pairs whose (k+c)-PC
/// distance exceeds the per-pair threshold.
inline ExtraPcCheck extra_pc_check(const RandomVectorModel& model, std::uint64_t seed, Index c, double f, double C0,
                                   const SvdOptions& svd = {}) {
  const auto stats = model_stats(model);
  const auto params = BoundParams::from_stats(stats, C0);
  const auto bound = extra_pc_pair_bound(params, static_cast<double>(c), f);
  const DataMatrix draw = generate_dataset(model, seed);
  const Projector projector = fit_uncentered_pca(draw, model.k() + c, svd);
  ExtraPcCheck out;
  out.pair_budget = bound.pair_budget;
  for (const auto& s : extra_pc_split(draw, projector, model.k())) {
    const double lhs = s.total * s.total;
    if (lhs > 0.0)
      out.max_identity_error =
          std::max(out.max_identity_error, std::abs(lhs - s.leading * s.leading - s.trailing * s.trailing) / lhs);
    if (!s.same_cluster) continue;
    ++out.intra_pairs;
    if (s.total > bound.threshold(s.leading)) ++out.exceedances;
  }
  return out;
}

struct DavisKahanCheck {
  double sin_theta = 0.0;   // largest principal angle sine between top-k subspaces of A and A_hat
  double bound = 0.0;       // 2 ||E|| / s_k(A)
  bool pass = false;
};

/// Subspace perturbation check: top-k left singular subspaces of the mean-matrix and a draw.
inline DavisKahanCheck davis_kahan_check(const RandomVectorModel& model, std::uint64_t seed) {
  const auto stats = model_stats(model);
  detail::require(stats.s_k > 0.0, "Davis-Kahan check needs a rank-k mean-matrix");
  const DataMatrix draw = generate_dataset(model, seed);
  const DataMatrix clean(mean_matrix(model));
  SvdOptions opts;
  const Projector truth = truncated_svd(clean, model.k(), opts);
  const Projector noisy = truncated_svd(draw, model.k(), opts);
  DavisKahanCheck out;
  out.sin_theta = principal_angle(truth, noisy);
  out.bound = 2.0 * matrix_spectral_norm(noise_matrix(model, draw)) / stats.s_k;
  out.pass = out.sin_theta <= out.bound;
  return out;
}

inline nlohmann::json bound_value_json(const std::optional<double>& v) {
  if (v && std::isfinite(*v)) return *v;
  if (v) return *v > 0 ? "inf" : "-inf";
  return nullptr;
}

inline nlohmann::json bound_report_to_json(const BoundReport& report) {
  nlohmann::json j;
  j["seeds"] = report.seeds;
  j["pcs"] = report.pcs;
  j["C0"] = report.C0;
  j["s_k_mean_matrix"] = report.s_k_mean_matrix;
  j["s_k_data"] = report.s_k_data;
  j["s_k_source"] = report.used_data_s_k ? "data" : "mean-matrix";
  j["sigma_condition_met"] = report.sigma_condition_met;
  auto records = nlohmann::json::array();
  for (const auto& r : report.records) {
    nlohmann::json e;
    e["bound"] = r.bound;
    e["cluster"] = r.cluster;
    e["other_cluster"] = r.other_cluster ? nlohmann::json(*r.other_cluster) : nlohmann::json(nullptr);
    e["kind"] = r.lower ? "lower" : "upper";
    e["analytic"] = bound_value_json(r.analytic);
    e["vacuous"] = r.vacuous;
    e["empirical_extreme"] = bound_value_json(r.empirical);
    e["violations"] = r.violations;
    e["trials"] = r.trials;
    e["passed"] = r.passed();
    records.push_back(e);
  }
  j["records"] = records;
  return j;
}

}  // namespace pcacomp

#endif
