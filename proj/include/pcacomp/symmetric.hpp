#ifndef PCACOMP_SYMMETRIC_HPP
#define PCACOMP_SYMMETRIC_HPP

#include "common.hpp"
#include "data_matrix.hpp"
#include "rng.hpp"

#include <cmath>
#include <concepts>
#include <sstream>

namespace pcacomp {

/// The (d+n) x (d+n) operator B = [[0, A], [A^T, 0]] applied without forming B.
///
/// Its eigenpairs are (+-s_t, [l_t; +-r_t] / sqrt(2)) for the singular triplets
/// (s_t, l_t, r_t) of A, plus |d - n| zero eigenvalues.
class SymmetricEmbedding {
 public:
  explicit SymmetricEmbedding(const DataMatrix& a) : a_(&a) {}

  Index size() const { return a_->rows() + a_->cols(); }

  Vector apply(const Vector& x) const {
    detail::require(x.size() == size(), "embedding operand has the wrong length");
    const Index d = a_->rows();
    const Index n = a_->cols();
    Vector y(size());
    y.head(d) = a_->multiply(Vector(x.tail(n)));
    y.tail(n) = a_->multiply_transpose(Vector(x.head(d)));
    return y;
  }

  Matrix to_dense() const {
    const Index d = a_->rows();
    const Index n = a_->cols();
    Matrix b = Matrix::Zero(size(), size());
    const Matrix a = a_->to_dense();
    b.topRightCorner(d, n) = a;
    b.bottomLeftCorner(n, d) = a.transpose();
    return b;
  }

 private:
  const DataMatrix* a_;
};

inline SymmetricEmbedding build_symmetric_embedding(const DataMatrix& a) { return SymmetricEmbedding(a); }

/// Dense symmetric matrix viewed as an operator.
class DenseSymmetricOperator {
 public:
  explicit DenseSymmetricOperator(Matrix m) : m_(std::move(m)) {
    detail::require(m_.rows() == m_.cols(), "symmetric operator must be square");
  }
  Index size() const { return m_.rows(); }
  Vector apply(const Vector& x) const { return m_ * x; }

 private:
  Matrix m_;
};

template <typename Op>
concept SymmetricOperator = requires(const Op& op, const Vector& x) {
  { op.size() } -> std::convertible_to<Index>;
  { op.apply(x) } -> std::convertible_to<Vector>;
};

struct SpectralNormOptions {
  double tolerance = 1e-10;
  int max_iterations = 20000;
  std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
};

struct SpectralNormResult {
  double value = 0.0;
  int iterations = 0;
};

/// Largest |eigenvalue| of a symmetric operator by power iteration.
///
/// The estimate ||M x|| over unit x is non-decreasing along the iteration, so
/// a ± pair of equal magnitude does not stall it. Stops when successive
/// estimates agree to the relative tolerance.
template <SymmetricOperator Op>
SpectralNormResult spectral_norm(const Op& op, const SpectralNormOptions& opts = {}) {
  Philox rng(opts.seed, 0);
  Vector x(op.size());
  for (Index i = 0; i < x.size(); ++i) x[i] = rng.normal();
  x.normalize();

  double previous = 0.0;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    Vector y = op.apply(x);
    const double estimate = y.norm();
    if (estimate == 0.0) return {0.0, it};
    if (std::abs(estimate - previous) <= opts.tolerance * estimate) return {estimate, it};
    previous = estimate;
    x = y / estimate;
  }
  std::ostringstream msg;
  msg << "power iteration did not converge in " << opts.max_iterations << " iterations; last estimate "
      << previous;
  throw NumericalError(msg.str());
}

}  // namespace pcacomp

#endif
