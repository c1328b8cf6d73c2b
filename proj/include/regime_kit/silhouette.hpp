#pragma once

#include <algorithm>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "regime_kit/embed.hpp"
#include "regime_kit/error.hpp"

namespace regime_kit {

template <typename Scalar>
struct SilhouetteResult {
  DenseVector<Scalar> per_point;
  Scalar mean = 0;
};

/// Silhouette widths with Euclidean distances. Members of singleton clusters
/// score 0. Labels need not be contiguous but must be non-negative, and at
/// least two clusters must be occupied.
template <typename Derived>
SilhouetteResult<typename Derived::Scalar> silhouette_score(const Eigen::MatrixBase<Derived>& points,
                                                            std::span<const int> labels) {
  using Scalar = typename Derived::Scalar;
  const auto n = points.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n) throw InputError("labels and points differ in length");
  if (n == 0) throw InputError("silhouette of an empty point set");
  const int max_label = *std::max_element(labels.begin(), labels.end());
  if (*std::min_element(labels.begin(), labels.end()) < 0) throw InputError("labels must be non-negative");
  const auto k = static_cast<Eigen::Index>(max_label) + 1;
  std::vector<Eigen::Index> sizes(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
  if (std::count_if(sizes.begin(), sizes.end(), [](auto s) { return s > 0; }) < 2) {
    throw InputError("silhouette needs at least two occupied clusters");
  }

  // sums(i, c): total distance from point i to the members of cluster c.
  DenseMatrix<Scalar> sums = DenseMatrix<Scalar>::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Scalar d = (points.row(i) - points.row(j)).norm();
      sums(i, labels[static_cast<std::size_t>(j)]) += d;
      sums(j, labels[static_cast<std::size_t>(i)]) += d;
    }
  }

  SilhouetteResult<Scalar> out;
  out.per_point.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto own = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
    if (sizes[own] < 2) {
      out.per_point(i) = 0;
      continue;
    }
    const Scalar a = sums(i, static_cast<Eigen::Index>(own)) / static_cast<Scalar>(sizes[own] - 1);
    Scalar b = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index c = 0; c < k; ++c) {
      if (static_cast<std::size_t>(c) == own || sizes[static_cast<std::size_t>(c)] == 0) continue;
      b = std::min(b, sums(i, c) / static_cast<Scalar>(sizes[static_cast<std::size_t>(c)]));
    }
    const Scalar denom = std::max(a, b);
    out.per_point(i) = denom > Scalar(0) ? (b - a) / denom : Scalar(0);
  }
  out.mean = out.per_point.mean();
  return out;
}

}  // namespace regime_kit
