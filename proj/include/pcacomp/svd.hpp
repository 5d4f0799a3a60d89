#ifndef PCACOMP_SVD_HPP
#define PCACOMP_SVD_HPP

#include "common.hpp"
#include "data_matrix.hpp"
#include "rng.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

namespace pcacomp {

struct SvdOptions {
  /// Extra sketch columns beyond the requested rank.
  Index oversampling = 10;
  /// Subspace (power) iterations of the randomized range finder.
  int power_iterations = 4;
  /// Inputs with min(d, n) at or below this use an exact dense SVD.
  Index exact_max_dim = 500;
  /// The exact path materializes a dense copy; above this many entries we sketch instead.
  Index exact_max_entries = Index{1} << 24;
  std::uint64_t seed = 0x5eedULL;
  /// Relative gap s_k' - s_{k'+1} <= gap_tolerance * s_1 sets the gap warning.
  double gap_tolerance = 1e-10;
};

/// Leading singular triplets of a (possibly implicitly centered) data matrix.
struct SingularTriplets {
  Matrix left;    // d x k'
  Vector values;  // k', non-increasing
  Matrix right;   // n x k'
  std::optional<double> next_value;  // s_{k'+1} when it exists
  bool gap_warning = false;
  bool exact = false;
};

/// Row-orthonormal k' x d projection onto the top left singular vectors.
class Projector {
 public:
  Projector(Matrix components, Vector singular_values, std::optional<Vector> mean = std::nullopt,
            bool gap_warning = false)
      : components_(std::move(components)),
        singular_values_(std::move(singular_values)),
        mean_(std::move(mean)),
        gap_warning_(gap_warning) {
    detail::require(singular_values_.size() == components_.rows(), "one singular value per component required");
    if (mean_) detail::require(mean_->size() == components_.cols(), "mean vector length must equal d");
  }

  Index dimension() const { return components_.cols(); }
  Index rank() const { return components_.rows(); }
  const Matrix& components() const { return components_; }
  const Vector& singular_values() const { return singular_values_; }
  bool centered() const { return mean_.has_value(); }
  const std::optional<Vector>& mean_vector() const { return mean_; }
  bool gap_warning() const { return gap_warning_; }

  Vector project(const Vector& u) const {
    detail::require(u.size() == dimension(), "vector length " + std::to_string(u.size()) +
                                                 " does not match projector dimension " +
                                                 std::to_string(dimension()));
    if (mean_) return components_ * (u - *mean_);
    return components_ * u;
  }

  /// Projects every column of A: the k' x n matrix of coordinates.
  Matrix project_columns(const DataMatrix& a) const {
    detail::require(a.rows() == dimension(), "data rows " + std::to_string(a.rows()) +
                                                 " do not match projector dimension " +
                                                 std::to_string(dimension()));
    Matrix coords = a.multiply_transpose(Matrix(components_.transpose())).transpose();
    if (mean_) coords.colwise() -= components_ * (*mean_);
    return coords;
  }

  /// The first k rows (top-k sub-projector of the same decomposition).
  Projector leading(Index k) const {
    detail::require(k >= 1 && k <= rank(), "leading rank out of range");
    return Projector(components_.topRows(k), singular_values_.head(k), mean_, false);
  }

  /// Rows [first, k'), i.e. components first+1 .. k' in one-based terms.
  Projector trailing(Index first) const {
    detail::require(first >= 0 && first < rank(), "trailing start out of range");
    return Projector(components_.bottomRows(rank() - first), singular_values_.tail(rank() - first), mean_, false);
  }

 private:
  Matrix components_;
  Vector singular_values_;
  std::optional<Vector> mean_;
  bool gap_warning_;
};

namespace detail {

/// A, or A - mean 1^T applied implicitly.
class DataOperator {
 public:
  DataOperator(const DataMatrix& a, std::optional<Vector> mean) : a_(a), mean_(std::move(mean)) {}

  Index rows() const { return a_.rows(); }
  Index cols() const { return a_.cols(); }

  Matrix apply(const Matrix& x) const {
    Matrix y = a_.multiply(x);
    if (mean_) y -= (*mean_) * x.colwise().sum();
    return y;
  }

  Matrix apply_transpose(const Matrix& y) const {
    Matrix x = a_.multiply_transpose(y);
    if (mean_) x.rowwise() -= mean_->transpose() * y;
    return x;
  }

  Matrix materialize() const {
    Matrix m = a_.to_dense();
    if (mean_) m.colwise() -= *mean_;
    return m;
  }

 private:
  const DataMatrix& a_;
  std::optional<Vector> mean_;
};

inline Matrix orthonormal_basis(const Matrix& y) {
  Eigen::HouseholderQR<Matrix> qr(y);
  return qr.householderQ() * Matrix::Identity(y.rows(), y.cols());
}

/// Largest-magnitude entry of each left vector made positive; ties go to the lowest index.
inline void canonicalize_signs(Matrix& left, Matrix& right) {
  for (Index t = 0; t < left.cols(); ++t) {
    Index best = 0;
    double best_abs = -1.0;
    for (Index r = 0; r < left.rows(); ++r) {
      const double v = std::abs(left(r, t));
      if (v > best_abs) {
        best_abs = v;
        best = r;
      }
    }
    if (left(best, t) < 0.0) {
      left.col(t) = -left.col(t);
      right.col(t) = -right.col(t);
    }
  }
}

inline SingularTriplets finish_triplets(Matrix u, Vector s, Matrix v, Index k, const SvdOptions& opts, bool exact) {
  SingularTriplets out;
  out.exact = exact;
  out.left = u.leftCols(k);
  out.right = v.leftCols(k);
  out.values = s.head(k).cwiseMax(0.0);
  if (s.size() > k) out.next_value = std::max(0.0, s[k]);
  canonicalize_signs(out.left, out.right);
  if (out.next_value) {
    const double gap = out.values[k - 1] - *out.next_value;
    out.gap_warning = gap <= opts.gap_tolerance * out.values[0];
  }
  return out;
}

inline SingularTriplets svd_of_operator(const DataOperator& op, Index k, const SvdOptions& opts) {
  const Index d = op.rows();
  const Index n = op.cols();
  const Index full = std::min(d, n);
  const Index wanted = std::min(k + 1, full);

  if (full <= opts.exact_max_dim && d * n <= opts.exact_max_entries) {
    Eigen::BDCSVD<Matrix> svd(op.materialize(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    return finish_triplets(svd.matrixU(), svd.singularValues(), svd.matrixV(), k, opts, true);
  }

  const Index sketch = std::min(wanted + opts.oversampling, full);
  Philox rng(opts.seed, 0);
  Matrix omega(n, sketch);
  for (Index c = 0; c < sketch; ++c)
    for (Index r = 0; r < n; ++r) omega(r, c) = rng.normal();

  Matrix q = orthonormal_basis(op.apply(omega));
  for (int it = 0; it < opts.power_iterations; ++it) {
    q = orthonormal_basis(op.apply_transpose(q));
    q = orthonormal_basis(op.apply(q));
  }
  // B = Q^T A is sketch x n; decompose its transpose to keep the tall side thin.
  const Matrix bt = op.apply_transpose(q);
  Eigen::BDCSVD<Matrix> small(bt, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Matrix u = q * small.matrixV();
  return finish_triplets(std::move(u), small.singularValues(), small.matrixU(), k, opts, false);
}

inline void check_svd_input(const DataMatrix& a, Index k) {
  const Index full = std::min(a.rows(), a.cols());
  require(k >= 1 && k <= full, "rank " + std::to_string(k) + " outside [1, " + std::to_string(full) + "]");
  if (!a.all_finite()) throw InputError("data matrix contains non-finite entries");
}

}  // namespace detail

/// Top-k' singular triplets of A.
inline SingularTriplets svd_triplets(const DataMatrix& a, Index k, const SvdOptions& opts = {}) {
  detail::check_svd_input(a, k);
  return detail::svd_of_operator(detail::DataOperator(a, std::nullopt), k, opts);
}

/// Top-k' singular triplets of A - c_m 1^T, centering applied implicitly.
inline SingularTriplets centered_svd_triplets(const DataMatrix& a, Index k, const SvdOptions& opts = {}) {
  detail::check_svd_input(a, k);
  return detail::svd_of_operator(detail::DataOperator(a, a.row_means()), k, opts);
}

inline Projector truncated_svd(const DataMatrix& a, Index k, const SvdOptions& opts = {}) {
  auto t = svd_triplets(a, k, opts);
  return Projector(t.left.transpose(), t.values, std::nullopt, t.gap_warning);
}

inline Projector fit_uncentered_pca(const DataMatrix& a, Index k, const SvdOptions& opts = {}) {
  return truncated_svd(a, k, opts);
}

inline Projector fit_centered_pca(const DataMatrix& a, Index k, const SvdOptions& opts = {}) {
  detail::check_svd_input(a, k);
  Vector mean = a.row_means();
  auto t = detail::svd_of_operator(detail::DataOperator(a, mean), k, opts);
  return Projector(t.left.transpose(), t.values, std::move(mean), t.gap_warning);
}

/// Sine of the largest principal angle between the row spaces of P and Q.
///
/// Evaluated as ||(I - Q^T Q) P^T||_2, which keeps full relative accuracy for
/// nearly aligned subspaces; it equals sqrt(1 - sigma_min(P Q^T)^2).
inline double principal_angle(const Projector& p, const Projector& q) {
  detail::require(p.dimension() == q.dimension(), "projectors live in different dimensions");
  detail::require(p.rank() == q.rank(), "projectors have different ranks");
  const Matrix& pc = p.components();
  const Matrix& qc = q.components();
  const Matrix residual = pc.transpose() - qc.transpose() * (qc * pc.transpose());
  Eigen::JacobiSVD<Matrix> svd(residual);
  return std::min(1.0, svd.singularValues()[0]);
}

}  // namespace pcacomp

#endif
