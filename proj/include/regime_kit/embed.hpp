#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "regime_kit/error.hpp"

namespace regime_kit {

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using DenseRowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

template <typename Scalar>
struct StandardizedRows {
  DenseMatrix<Scalar> values;             // kept rows only, z-scored
  std::vector<std::size_t> kept_rows;     // indices into the input
  std::vector<std::size_t> dropped_flat;  // rows with zero variance
};

/// Z-scores every row with the population standard deviation (divide by n).
/// Rows whose spread is zero at working precision are dropped and recorded.
template <typename Derived>
StandardizedRows<typename Derived::Scalar> standardize_rows(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  StandardizedRows<Scalar> out;
  const auto n = x.rows();
  const auto p = x.cols();
  if (p < 2) throw InputError("standardize_rows needs at least two columns");
  std::vector<Eigen::Index> keep;
  DenseMatrix<Scalar> z(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar mean = x.row(i).mean();
    const auto centered = (x.row(i).array() - mean).eval();
    const Scalar sd = std::sqrt(centered.square().sum() / static_cast<Scalar>(p));
    const Scalar scale = std::max(std::abs(mean), x.row(i).cwiseAbs().maxCoeff());
    if (!(sd > Scalar(64) * std::numeric_limits<Scalar>::epsilon() * scale)) {
      out.dropped_flat.push_back(static_cast<std::size_t>(i));
      continue;
    }
    z.row(static_cast<Eigen::Index>(keep.size())) = centered / sd;
    keep.push_back(i);
    out.kept_rows.push_back(static_cast<std::size_t>(i));
  }
  out.values = z.topRows(static_cast<Eigen::Index>(keep.size()));
  return out;
}

/// Principal-component projection retaining a share of the total variance.
template <typename Scalar>
struct Embedding {
  DenseMatrix<Scalar> scores;                       // N x d
  DenseMatrix<Scalar> components;                   // d x p, orthonormal rows
  DenseVector<Scalar> explained_variance_ratio;     // d, non-increasing
  DenseVector<Scalar> spectrum_ratio;               // every component's ratio
  DenseRowVector<Scalar> column_means;              // p
  Scalar variance_threshold = Scalar(0.8);
  std::vector<std::size_t> dropped_flat;

  Eigen::Index dims() const { return components.rows(); }
  Scalar retained_ratio() const { return explained_variance_ratio.sum(); }
};

/// Column-centres `x`, takes its thin SVD and keeps the smallest number of
/// leading components whose cumulative variance ratio reaches `threshold`.
/// Each component is signed so its largest-magnitude loading is positive.
template <typename Derived>
Embedding<typename Derived::Scalar> fit_pca(const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar threshold) {
  using Scalar = typename Derived::Scalar;
  if (!(threshold > Scalar(0)) || threshold > Scalar(1)) throw InputError("PCA variance threshold must lie in (0, 1]");
  if (x.rows() < 2) throw InputError("PCA needs at least two rows");
  if (!x.allFinite()) throw InputError("PCA input contains non-finite values");

  Embedding<Scalar> e;
  e.variance_threshold = threshold;
  e.column_means = x.colwise().mean();
  const DenseMatrix<Scalar> centered = x.rowwise() - e.column_means;
  Eigen::BDCSVD<DenseMatrix<Scalar>> svd(centered, Eigen::ComputeThinV);
  const DenseVector<Scalar> power = svd.singularValues().array().square();
  const Scalar total = power.sum();
  if (!(total > Scalar(0))) throw NumericalError("PCA input has zero total variance");
  e.spectrum_ratio = power / total;

  // Slack absorbs rounding in the running sum when the threshold is exactly reachable.
  const Scalar slack = Scalar(16) * std::numeric_limits<Scalar>::epsilon() * static_cast<Scalar>(power.size());
  Eigen::Index d = 0;
  Scalar cumulative = 0;
  while (d < e.spectrum_ratio.size()) {
    cumulative += e.spectrum_ratio(d++);
    if (cumulative >= threshold - slack) break;
  }
  e.explained_variance_ratio = e.spectrum_ratio.head(d);

  DenseMatrix<Scalar> loadings = svd.matrixV().leftCols(d);
  for (Eigen::Index c = 0; c < d; ++c) {
    Eigen::Index arg = 0;
    loadings.col(c).cwiseAbs().maxCoeff(&arg);
    if (loadings(arg, c) < Scalar(0)) loadings.col(c) *= Scalar(-1);
  }
  e.components = loadings.transpose();
  e.scores = centered * loadings;
  return e;
}

/// Scores of new standardized rows in an existing embedding.
template <typename Scalar, typename Derived>
DenseMatrix<Scalar> project(const Embedding<Scalar>& e, const Eigen::MatrixBase<Derived>& x) {
  if (x.cols() != e.components.cols()) {
    throw InputError("projection input has " + std::to_string(x.cols()) + " columns, embedding expects " +
                     std::to_string(e.components.cols()));
  }
  return (x.template cast<Scalar>().rowwise() - e.column_means) * e.components.transpose();
}

}  // namespace regime_kit
