#ifndef PCACOMP_MODEL_HPP
#define PCACOMP_MODEL_HPP

#include "common.hpp"
#include "data_matrix.hpp"
#include "parallel.hpp"
#include "rng.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace pcacomp {

/// Zero-mean noise families whose samples stay inside [0, 1] around any center in [0, 1].
enum class NoiseFamily {
  /// x ~ Bernoulli(c) with probability `scale`, else x = c. Variance scale * c(1-c).
  BernoulliResidual,
  /// e ~ U[-a, a]; requires a <= min(c, 1-c).
  UniformSymmetric,
  /// N(0, s^2) truncated symmetrically to [-min(c,1-c), min(c,1-c)]; the symmetric
  /// truncation keeps the mean exactly zero.
  TruncatedGaussian,
};

inline std::string to_string(NoiseFamily f) {
  switch (f) {
    case NoiseFamily::BernoulliResidual: return "bernoulli-residual";
    case NoiseFamily::UniformSymmetric: return "uniform-symmetric";
    case NoiseFamily::TruncatedGaussian: return "truncated-gaussian";
  }
  return "unknown";
}

inline NoiseFamily parse_noise_family(const std::string& name) {
  if (name == "bernoulli-residual") return NoiseFamily::BernoulliResidual;
  if (name == "uniform-symmetric") return NoiseFamily::UniformSymmetric;
  if (name == "truncated-gaussian") return NoiseFamily::TruncatedGaussian;
  throw InputError("unknown noise family '" + name + "'");
}

struct NoiseSpec {
  NoiseFamily family = NoiseFamily::BernoulliResidual;
  /// One value broadcast to every coordinate, or one per coordinate.
  std::vector<double> scale{1.0};

  double scale_at(Index l) const {
    return scale.size() == 1 ? scale.front() : scale[static_cast<std::size_t>(l)];
  }
};

namespace detail {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

inline double half_width(double center) { return std::max(0.0, std::min(center, 1.0 - center)); }

/// Variance of one coordinate's noise.
inline double coordinate_variance(NoiseFamily family, double center, double scale) {
  switch (family) {
    case NoiseFamily::BernoulliResidual: return scale * center * (1.0 - center);
    case NoiseFamily::UniformSymmetric: return scale * scale / 3.0;
    case NoiseFamily::TruncatedGaussian: {
      const double h = half_width(center);
      if (scale == 0.0 || h == 0.0) return 0.0;
      const double beta = h / scale;
      const double mass = 2.0 * normal_cdf(beta) - 1.0;
      if (mass < 1e-8) return h * h / 3.0;  // the density is flat on [-h, h]
      return scale * scale * (1.0 - 2.0 * beta * normal_pdf(beta) / mass);
    }
  }
  return 0.0;
}

inline double sample_coordinate(NoiseFamily family, double center, double scale, Philox& rng) {
  switch (family) {
    case NoiseFamily::BernoulliResidual: {
      if (scale < 1.0 && rng.uniform() >= scale) return center;
      return rng.uniform() < center ? 1.0 : 0.0;
    }
    case NoiseFamily::UniformSymmetric: {
      if (scale == 0.0) return center;
      return std::clamp(center + scale * (2.0 * rng.uniform() - 1.0), 0.0, 1.0);
    }
    case NoiseFamily::TruncatedGaussian: {
      const double h = half_width(center);
      if (scale == 0.0 || h == 0.0) return center;
      const double beta = h / scale;
      double e;
      if (beta >= 0.3) {
        do {
          e = scale * rng.normal();
        } while (std::abs(e) > h);
      } else {
        for (;;) {
          e = h * (2.0 * rng.uniform() - 1.0);
          if (rng.uniform() < std::exp(-0.5 * (e / scale) * (e / scale))) break;
        }
      }
      // Clamp only absorbs rounding in c + e; e itself already lies in [-h, h].
      return std::clamp(center + e, 0.0, 1.0);
    }
  }
  return center;
}

}  // namespace detail

/// k clusters in R^d: column i of a draw is c_{j(i)} + e_i with e_i from cluster j's noise.
struct RandomVectorModel {
  Matrix centers;  // d x k, entries in [0, 1]
  std::vector<Index> sizes;
  std::vector<NoiseSpec> noise;  // one per cluster, or a single spec for all

  /// When the model came from sbm_rectangular, the generating parameters (kept for compact JSON).
  struct SbmOrigin {
    double p = 0.0;
    double q = 0.0;
  };
  std::optional<SbmOrigin> sbm;

  Index d() const { return centers.rows(); }
  Index k() const { return centers.cols(); }
  Index n() const { return std::accumulate(sizes.begin(), sizes.end(), Index{0}); }

  const NoiseSpec& noise_for(Index j) const {
    return noise.size() == 1 ? noise.front() : noise[static_cast<std::size_t>(j)];
  }

  /// Columns are grouped by cluster: the first sizes[0] columns belong to cluster 0, and so on.
  Labels labels() const {
    std::vector<int> ids;
    ids.reserve(static_cast<std::size_t>(n()));
    for (Index j = 0; j < k(); ++j) ids.insert(ids.end(), static_cast<std::size_t>(sizes[static_cast<std::size_t>(j)]), static_cast<int>(j));
    return Labels(std::move(ids), static_cast<int>(k()));
  }

  double variance(Index j, Index l) const {
    const auto& spec = noise_for(j);
    return detail::coordinate_variance(spec.family, centers(l, j), spec.scale_at(l));
  }

  void validate() const {
    using detail::require;
    require(d() >= 1, "model dimension must be positive");
    require(k() >= 1, "model needs at least one cluster");
    require(static_cast<Index>(sizes.size()) == k(), "one size per cluster required");
    for (Index s : sizes) require(s >= 1, "every cluster needs at least one member");
    require(n() >= 2, "model must produce at least two columns");
    require(noise.size() == 1 || static_cast<Index>(noise.size()) == k(), "noise must be one spec or one per cluster");
    require(centers.allFinite() && centers.minCoeff() >= 0.0 && centers.maxCoeff() <= 1.0,
            "center entries must lie in [0, 1]");
    for (Index j = 0; j < k(); ++j) {
      const auto& spec = noise_for(j);
      require(spec.scale.size() == 1 || static_cast<Index>(spec.scale.size()) == d(),
              "noise scale must be a scalar or have one entry per coordinate");
      for (Index l = 0; l < d(); ++l) {
        const double s = spec.scale_at(l);
        require(std::isfinite(s) && s >= 0.0, "noise scale must be finite and non-negative");
        if (spec.family == NoiseFamily::BernoulliResidual)
          require(s <= 1.0, "bernoulli-residual mixing scale must lie in [0, 1]");
        if (spec.family == NoiseFamily::UniformSymmetric)
          require(s <= detail::half_width(centers(l, j)) + 1e-15,
                  "uniform-symmetric half-width " + std::to_string(s) + " leaves [0,1] around center " +
                      std::to_string(centers(l, j)) + " (cluster " + std::to_string(j) + ", coordinate " +
                      std::to_string(l) + ")");
      }
    }
  }
};

/// Mean-matrix: every column replaced by its cluster center.
inline Matrix mean_matrix(const RandomVectorModel& model) {
  Matrix a(model.d(), model.n());
  Index col = 0;
  for (Index j = 0; j < model.k(); ++j)
    for (Index c = 0; c < model.sizes[static_cast<std::size_t>(j)]; ++c) a.col(col++) = model.centers.col(j);
  return a;
}

/// Draws one dataset. Column i uses Philox substream (seed, i), so the output is
/// identical for any thread count.
inline DataMatrix generate_dataset(const RandomVectorModel& model, std::uint64_t seed) {
  model.validate();
  const Index d = model.d();
  const Index n = model.n();
  const Labels labels = model.labels();
  Matrix values(d, n);
  constexpr Index kBlock = 64;
  const auto blocks = static_cast<std::size_t>((n + kBlock - 1) / kBlock);
  parallel_for_blocks(blocks, [&](std::size_t b) {
    const Index first = static_cast<Index>(b) * kBlock;
    const Index last = std::min(n, first + kBlock);
    for (Index i = first; i < last; ++i) {
      const Index j = labels[static_cast<std::size_t>(i)];
      const auto& spec = model.noise_for(j);
      Philox rng(seed, static_cast<std::uint64_t>(i));
      for (Index l = 0; l < d; ++l)
        values(l, i) = detail::sample_coordinate(spec.family, model.centers(l, j), spec.scale_at(l), rng);
    }
  });
  return DataMatrix(std::move(values), labels);
}

/// Rectangular stochastic-block special case: d coordinates split into k blocks in
/// proportion to the cluster sizes; center j is p on its own block, q elsewhere.
inline RandomVectorModel sbm_rectangular(Index d, const std::vector<Index>& sizes, double p, double q) {
  detail::require(0.0 <= q && q < p && p <= 1.0, "SBM requires 0 <= q < p <= 1");
  detail::require(!sizes.empty(), "SBM needs at least one block");
  const auto k = static_cast<Index>(sizes.size());
  detail::require(d >= k, "SBM needs at least one coordinate per block");
  const double n = static_cast<double>(std::accumulate(sizes.begin(), sizes.end(), Index{0}));

  // Largest-remainder apportionment of d coordinates; ties favour the lower block.
  std::vector<Index> widths(static_cast<std::size_t>(k));
  std::vector<std::pair<double, Index>> remainders;
  Index assigned = 0;
  for (Index j = 0; j < k; ++j) {
    const double exact = static_cast<double>(d) * static_cast<double>(sizes[static_cast<std::size_t>(j)]) / n;
    widths[static_cast<std::size_t>(j)] = static_cast<Index>(std::floor(exact));
    assigned += widths[static_cast<std::size_t>(j)];
    remainders.emplace_back(exact - std::floor(exact), j);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (Index r = 0; r < d - assigned; ++r) ++widths[static_cast<std::size_t>(remainders[static_cast<std::size_t>(r)].second)];

  RandomVectorModel model;
  model.centers = Matrix::Constant(d, k, q);
  Index row = 0;
  for (Index j = 0; j < k; ++j) {
    const Index w = widths[static_cast<std::size_t>(j)];
    model.centers.block(row, j, w, 1).setConstant(p);
    row += w;
  }
  model.sizes = sizes;
  model.noise = {NoiseSpec{NoiseFamily::BernoulliResidual, {1.0}}};
  model.sbm = RandomVectorModel::SbmOrigin{p, q};
  model.validate();
  return model;
}

/// Analytic summary of a model's noise and geometry.
struct ModelStats {
  double sigma_max2 = 0.0;          // max per-coordinate variance over all clusters
  std::vector<double> sigma_j2;     // per-cluster mean per-coordinate variance
  Matrix center_separations;        // k x k, ||c_j - c_j'||
  Vector mean_singular_values;      // all k singular values of the mean-matrix
  double s_k = 0.0;                 // k-th singular value of the mean-matrix
  Index d = 0, n = 0, k = 0;

  double sigma_max() const { return std::sqrt(sigma_max2); }
  double sigma_j(Index j) const { return std::sqrt(sigma_j2[static_cast<std::size_t>(j)]); }

  /// Smallest separation between distinct centers; absent when k = 1.
  std::optional<double> min_separation() const {
    if (k < 2) return std::nullopt;
    double best = std::numeric_limits<double>::infinity();
    for (Index a = 0; a < k; ++a)
      for (Index b = a + 1; b < k; ++b) best = std::min(best, center_separations(a, b));
    return best;
  }
};

/// sigma_j^2 is the average (not the sum) of the coordinate variances.
inline ModelStats model_stats(const RandomVectorModel& model) {
  model.validate();
  ModelStats stats;
  stats.d = model.d();
  stats.n = model.n();
  stats.k = model.k();
  stats.sigma_j2.assign(static_cast<std::size_t>(model.k()), 0.0);
  for (Index j = 0; j < model.k(); ++j) {
    double sum = 0.0;
    for (Index l = 0; l < model.d(); ++l) {
      const double v = model.variance(j, l);
      sum += v;
      stats.sigma_max2 = std::max(stats.sigma_max2, v);
    }
    stats.sigma_j2[static_cast<std::size_t>(j)] = sum / static_cast<double>(model.d());
  }
  stats.center_separations = Matrix::Zero(model.k(), model.k());
  for (Index a = 0; a < model.k(); ++a)
    for (Index b = a + 1; b < model.k(); ++b) {
      const double sep = (model.centers.col(a) - model.centers.col(b)).norm();
      stats.center_separations(a, b) = stats.center_separations(b, a) = sep;
    }
  // A = C Z with Z the k x n membership indicator, Z Z^T = diag(n_j): A and C diag(sqrt(n_j))
  // share their nonzero singular values.
  Matrix weighted = model.centers;
  for (Index j = 0; j < model.k(); ++j)
    weighted.col(j) *= std::sqrt(static_cast<double>(model.sizes[static_cast<std::size_t>(j)]));
  Eigen::JacobiSVD<Matrix> svd(weighted);
  stats.mean_singular_values = Vector::Zero(model.k());
  const Vector& sv = svd.singularValues();
  stats.mean_singular_values.head(sv.size()) = sv;
  stats.s_k = stats.mean_singular_values[model.k() - 1];
  return stats;
}

struct RegimeReport {
  std::optional<double> separation_ratio;  // min ||c_j - c_j'|| / sqrt(k); absent for k = 1
  double spectral_ratio = 0.0;             // s_k / sqrt(d + n)
  double threshold = 5.0;
  std::optional<bool> separation_ok;
  bool spectral_ok = false;
};

inline RegimeReport regime_check(const ModelStats& stats, Index d, Index n, Index k, double threshold = 5.0) {
  RegimeReport r;
  r.threshold = threshold;
  if (auto sep = stats.min_separation()) {
    r.separation_ratio = *sep / std::sqrt(static_cast<double>(k));
    r.separation_ok = *r.separation_ratio >= threshold;
  }
  r.spectral_ratio = stats.s_k / std::sqrt(static_cast<double>(d + n));
  r.spectral_ok = r.spectral_ratio >= threshold;
  return r;
}

// ---------------------------------------------------------------------------
// JSON model documents
//
//   {
//     "sizes":   [n_1, ..., n_k],
//     "centers": [[c_1 ...d values], ..., [c_k]]      explicit centers, or
//     "sbm":     {"d": 400, "p": 0.7, "q": 0.3}        rectangular SBM shorthand
//     "noise":   {"family": "bernoulli-residual", "scale": 1.0}
//                or a list with one such object per cluster; "scale" may be a
//                number or a list of d numbers. Defaults to bernoulli-residual, 1.0.
//   }
// ---------------------------------------------------------------------------

inline nlohmann::json noise_to_json(const NoiseSpec& spec) {
  nlohmann::json j;
  j["family"] = to_string(spec.family);
  if (spec.scale.size() == 1)
    j["scale"] = spec.scale.front();
  else
    j["scale"] = spec.scale;
  return j;
}

inline NoiseSpec noise_from_json(const nlohmann::json& j) {
  NoiseSpec spec;
  detail::require(j.is_object(), "noise entry must be an object");
  spec.family = parse_noise_family(j.value("family", std::string("bernoulli-residual")));
  if (j.contains("scale")) {
    const auto& s = j.at("scale");
    if (s.is_number())
      spec.scale = {s.get<double>()};
    else
      spec.scale = s.get<std::vector<double>>();
  }
  detail::require(!spec.scale.empty(), "noise scale list must not be empty");
  return spec;
}

inline nlohmann::json model_to_json(const RandomVectorModel& model) {
  nlohmann::json j;
  j["sizes"] = model.sizes;
  if (model.sbm) {
    j["sbm"] = {{"d", model.d()}, {"p", model.sbm->p}, {"q", model.sbm->q}};
  } else {
    auto centers = nlohmann::json::array();
    for (Index c = 0; c < model.k(); ++c) {
      std::vector<double> col(model.centers.col(c).data(), model.centers.col(c).data() + model.d());
      centers.push_back(col);
    }
    j["centers"] = centers;
  }
  if (model.noise.size() == 1) {
    j["noise"] = noise_to_json(model.noise.front());
  } else {
    auto list = nlohmann::json::array();
    for (const auto& spec : model.noise) list.push_back(noise_to_json(spec));
    j["noise"] = list;
  }
  return j;
}

inline RandomVectorModel model_from_json(const nlohmann::json& j) {
  try {
    detail::require(j.is_object(), "model document must be a JSON object");
    const auto sizes = j.at("sizes").get<std::vector<Index>>();
    RandomVectorModel model;
    if (j.contains("sbm")) {
      const auto& s = j.at("sbm");
      model = sbm_rectangular(s.at("d").get<Index>(), sizes, s.at("p").get<double>(), s.at("q").get<double>());
    } else {
      const auto centers = j.at("centers").get<std::vector<std::vector<double>>>();
      detail::require(!centers.empty(), "model needs at least one center");
      const auto d = static_cast<Index>(centers.front().size());
      model.centers.resize(d, static_cast<Index>(centers.size()));
      for (std::size_t c = 0; c < centers.size(); ++c) {
        detail::require(static_cast<Index>(centers[c].size()) == d, "all centers must have the same length");
        for (Index l = 0; l < d; ++l) model.centers(l, static_cast<Index>(c)) = centers[c][static_cast<std::size_t>(l)];
      }
      model.sizes = sizes;
      model.noise = {NoiseSpec{}};
    }
    if (j.contains("noise")) {
      const auto& noise = j.at("noise");
      model.noise.clear();
      if (noise.is_array())
        for (const auto& entry : noise) model.noise.push_back(noise_from_json(entry));
      else
        model.noise.push_back(noise_from_json(noise));
    }
    model.validate();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed model document: ") + e.what());
  }
}

}  // namespace pcacomp

#endif
