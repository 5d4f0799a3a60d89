#ifndef PCACOMP_DATA_MATRIX_HPP
#define PCACOMP_DATA_MATRIX_HPP

#include "common.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace pcacomp {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

/// Per-column cluster assignment. Ids are dense in [0, k).
struct Labels {
  std::vector<int> ids;
  int k = 0;
  std::vector<std::string> names;  // optional; names[j] is the external label of cluster j

  Labels() = default;
  Labels(std::vector<int> ids_, int k_, std::vector<std::string> names_ = {})
      : ids(std::move(ids_)), k(k_), names(std::move(names_)) {}

  /// Builds labels from ids, taking k as max id + 1.
  static Labels from_ids(std::vector<int> ids) {
    int k = 0;
    for (int id : ids) k = std::max(k, id + 1);
    return Labels(std::move(ids), k);
  }

  std::size_t size() const { return ids.size(); }
  int operator[](std::size_t i) const { return ids[i]; }

  std::vector<std::size_t> cluster_sizes() const {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (int id : ids) ++sizes[static_cast<std::size_t>(id)];
    return sizes;
  }

  std::string name(int j) const {
    if (static_cast<std::size_t>(j) < names.size()) return names[static_cast<std::size_t>(j)];
    return "C" + std::to_string(j + 1);
  }

  void validate(std::size_t n) const {
    detail::require(ids.size() == n, "label count " + std::to_string(ids.size()) +
                                         " does not match sample count " + std::to_string(n));
    detail::require(k >= 1, "labels must name at least one cluster");
    std::vector<bool> seen(static_cast<std::size_t>(k), false);
    for (int id : ids) {
      detail::require(id >= 0 && id < k, "label id " + std::to_string(id) + " outside [0, k)");
      seen[static_cast<std::size_t>(id)] = true;
    }
    for (int j = 0; j < k; ++j)
      detail::require(seen[static_cast<std::size_t>(j)], "cluster " + std::to_string(j) + " has no members");
  }
};

/// A d x n feature-by-sample matrix: rows are features, columns are samples.
///
/// Storage is either dense column-major or CSC sparse; every downstream
/// computation accepts both. Immutable after construction.
class DataMatrix {
 public:
  DataMatrix(Matrix values, std::optional<Labels> labels = std::nullopt)
      : storage_(std::move(values)), labels_(std::move(labels)) {
    validate();
  }

  DataMatrix(SparseMatrix values, std::optional<Labels> labels = std::nullopt)
      : storage_(std::move(values)), labels_(std::move(labels)) {
    std::get<SparseMatrix>(storage_).makeCompressed();
    validate();
  }

  Index rows() const {
    return std::visit([](const auto& m) { return static_cast<Index>(m.rows()); }, storage_);
  }
  Index cols() const {
    return std::visit([](const auto& m) { return static_cast<Index>(m.cols()); }, storage_);
  }

  bool is_sparse() const { return std::holds_alternative<SparseMatrix>(storage_); }
  const Matrix& dense() const { return std::get<Matrix>(storage_); }
  const SparseMatrix& sparse() const { return std::get<SparseMatrix>(storage_); }

  const std::optional<Labels>& labels() const { return labels_; }
  bool has_labels() const { return labels_.has_value(); }
  const Labels& require_labels() const {
    detail::require(labels_.has_value(), "operation requires ground-truth labels");
    return *labels_;
  }

  /// True once log1p normalization has been applied; guards double application.
  bool log_normalized() const { return log_normalized_; }

  DataMatrix with_labels(std::optional<Labels> labels) const {
    DataMatrix copy = *this;
    copy.labels_ = std::move(labels);
    copy.validate();
    return copy;
  }

  DataMatrix marked_log_normalized() const {
    DataMatrix copy = *this;
    copy.log_normalized_ = true;
    return copy;
  }

  Matrix to_dense() const {
    if (!is_sparse()) return dense();
    return Matrix(sparse());
  }

  SparseMatrix to_sparse() const {
    if (is_sparse()) return sparse();
    return dense().sparseView(0.0, 0.0);
  }

  Vector column(Index i) const {
    if (!is_sparse()) return dense().col(i);
    return Vector(sparse().col(i));
  }

  /// A * x for x in R^n.
  Vector multiply(const Vector& x) const {
    return std::visit([&](const auto& m) -> Vector { return m * x; }, storage_);
  }

  /// A * X for an n x b block.
  Matrix multiply(const Matrix& x) const {
    return std::visit([&](const auto& m) -> Matrix { return m * x; }, storage_);
  }

  /// A^T * Y for a d x b block.
  Matrix multiply_transpose(const Matrix& y) const {
    return std::visit([&](const auto& m) -> Matrix { return m.transpose() * y; }, storage_);
  }

  Vector multiply_transpose(const Vector& y) const {
    return std::visit([&](const auto& m) -> Vector { return m.transpose() * y; }, storage_);
  }

  /// Row means: the d-vector whose entry l is the mean of row l.
  Vector row_means() const {
    Vector sums = Vector::Zero(rows());
    if (!is_sparse()) {
      sums = dense().rowwise().sum();
    } else {
      const auto& s = sparse();
      for (Index c = 0; c < s.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(s, c); it; ++it) sums[it.row()] += it.value();
    }
    return sums / static_cast<double>(cols());
  }

  Vector column_squared_norms() const {
    Vector out(cols());
    for (Index i = 0; i < cols(); ++i) {
      if (!is_sparse()) {
        out[i] = dense().col(i).squaredNorm();
      } else {
        double acc = 0.0;
        for (SparseMatrix::InnerIterator it(sparse(), i); it; ++it) acc += it.value() * it.value();
        out[i] = acc;
      }
    }
    return out;
  }

  /// Exact ||u_i - u_j||^2 by direct differencing (sorted-index merge when sparse).
  double squared_distance(Index i, Index j) const {
    if (!is_sparse()) return (dense().col(i) - dense().col(j)).squaredNorm();
    const auto& s = sparse();
    const auto* idx = s.innerIndexPtr();
    const auto* val = s.valuePtr();
    const auto* outer = s.outerIndexPtr();
    auto a = outer[i], a_end = outer[i + 1];
    auto b = outer[j], b_end = outer[j + 1];
    double acc = 0.0;
    while (a < a_end && b < b_end) {
      if (idx[a] == idx[b]) {
        const double diff = val[a++] - val[b++];
        acc += diff * diff;
      } else if (idx[a] < idx[b]) {
        acc += val[a] * val[a];
        ++a;
      } else {
        acc += val[b] * val[b];
        ++b;
      }
    }
    for (; a < a_end; ++a) acc += val[a] * val[a];
    for (; b < b_end; ++b) acc += val[b] * val[b];
    return acc;
  }

  bool all_finite() const {
    if (!is_sparse()) return dense().allFinite();
    const auto& s = sparse();
    return std::all_of(s.valuePtr(), s.valuePtr() + s.nonZeros(), [](double v) { return std::isfinite(v); });
  }

  /// Column block [first, first + count) as a dense d x count matrix.
  Matrix dense_columns(Index first, Index count) const {
    if (!is_sparse()) return dense().middleCols(first, count);
    return Matrix(sparse().middleCols(first, count));
  }

 private:
  void validate() const {
    detail::require(rows() >= 1, "data matrix needs at least one feature row");
    detail::require(cols() >= 2, "data matrix needs at least two sample columns");
    if (labels_) labels_->validate(static_cast<std::size_t>(cols()));
  }

  std::variant<Matrix, SparseMatrix> storage_;
  std::optional<Labels> labels_;
  bool log_normalized_ = false;
};

}  // namespace pcacomp

#endif
