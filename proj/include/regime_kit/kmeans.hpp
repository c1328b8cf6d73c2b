#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "regime_kit/embed.hpp"
#include "regime_kit/error.hpp"
#include "regime_kit/rng.hpp"

namespace regime_kit {

template <typename Scalar>
struct SeedPoints {
  std::vector<Eigen::Index> indices;  // rows of the input picked as centres
  DenseMatrix<Scalar> centers;        // k x d
};

/// k-means++ seeding: the first centre is uniform over the points, each next
/// one is drawn with probability proportional to the squared distance to the
/// nearest centre already chosen. When every remaining distance is zero
/// (duplicate points) the draw is uniform over the points not yet chosen.
template <typename Derived>
SeedPoints<typename Derived::Scalar> kmeans_pp_init(const Eigen::MatrixBase<Derived>& points, Eigen::Index k,
                                                    Engine& rng) {
  using Scalar = typename Derived::Scalar;
  const auto n = points.rows();
  if (k < 1) throw InputError("k must be at least 1");
  if (k > n) throw InputError("k = " + std::to_string(k) + " exceeds the number of points " + std::to_string(n));

  SeedPoints<Scalar> out;
  out.centers.resize(k, points.cols());
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  DenseVector<Scalar> d2(n);

  auto take = [&](Eigen::Index idx) {
    chosen[static_cast<std::size_t>(idx)] = true;
    out.indices.push_back(idx);
    out.centers.row(static_cast<Eigen::Index>(out.indices.size()) - 1) = points.row(idx);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar dist = (points.row(i) - points.row(idx)).squaredNorm();
      d2(i) = out.indices.size() == 1 ? dist : std::min(d2(i), dist);
    }
  };

  take(std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng));
  while (static_cast<Eigen::Index>(out.indices.size()) < k) {
    Scalar total = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!chosen[static_cast<std::size_t>(i)]) total += d2(i);
    }
    Eigen::Index pick = -1;
    if (total > Scalar(0)) {
      const double u = std::uniform_real_distribution<double>(0.0, static_cast<double>(total))(rng);
      double running = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (chosen[static_cast<std::size_t>(i)] || !(d2(i) > Scalar(0))) continue;
        pick = i;
        running += static_cast<double>(d2(i));
        if (running > u) break;
      }
    } else {
      std::vector<Eigen::Index> remaining;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!chosen[static_cast<std::size_t>(i)]) remaining.push_back(i);
      }
      pick = remaining[std::uniform_int_distribution<std::size_t>(0, remaining.size() - 1)(rng)];
    }
    take(pick);
  }
  return out;
}

template <typename Scalar>
struct LloydRun {
  std::vector<int> labels;
  DenseMatrix<Scalar> centroids;
  Scalar distortion = 0;
  int iterations = 0;
  bool converged = false;
  std::vector<Scalar> distortion_trace;  // after every centroid update
};

/// Sum of squared distances of each point to the centroid of its label.
template <typename DerivedP, typename DerivedC>
typename DerivedP::Scalar distortion(const Eigen::MatrixBase<DerivedP>& points, const std::vector<int>& labels,
                                     const Eigen::MatrixBase<DerivedC>& centroids) {
  typename DerivedP::Scalar total = 0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    total += (points.row(i) - centroids.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
  }
  return total;
}

/// Lloyd iterations from the given centres. Assignment ties go to the lowest
/// centroid index. An emptied cluster takes over the point farthest from its
/// own centroid. Stops once no centroid moves by `tol` or more.
template <typename Derived, typename DerivedC>
LloydRun<typename Derived::Scalar> lloyd(const Eigen::MatrixBase<Derived>& points,
                                         const Eigen::MatrixBase<DerivedC>& initial, int max_iter, double tol) {
  using Scalar = typename Derived::Scalar;
  const auto n = points.rows();
  const auto k = initial.rows();
  LloydRun<Scalar> run;
  run.centroids = initial;
  run.labels.assign(static_cast<std::size_t>(n), 0);
  DenseVector<Scalar> nearest(n);
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(k));

  for (int iter = 0; iter < max_iter; ++iter) {
    std::fill(counts.begin(), counts.end(), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      Scalar best_d = (points.row(i) - run.centroids.row(0)).squaredNorm();
      for (Eigen::Index c = 1; c < k; ++c) {
        const Scalar d = (points.row(i) - run.centroids.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      run.labels[static_cast<std::size_t>(i)] = best;
      nearest(i) = best_d;
      ++counts[static_cast<std::size_t>(best)];
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (counts[static_cast<std::size_t>(run.labels[static_cast<std::size_t>(i)])] < 2) continue;
        if (far < 0 || nearest(i) > nearest(far)) far = i;
      }
      if (far < 0) throw NumericalError("cannot repair empty cluster: too few points");
      --counts[static_cast<std::size_t>(run.labels[static_cast<std::size_t>(far)])];
      run.labels[static_cast<std::size_t>(far)] = static_cast<int>(c);
      counts[static_cast<std::size_t>(c)] = 1;
      nearest(far) = 0;
    }

    DenseMatrix<Scalar> updated = DenseMatrix<Scalar>::Zero(k, points.cols());
    for (Eigen::Index i = 0; i < n; ++i) updated.row(run.labels[static_cast<std::size_t>(i)]) += points.row(i);
    for (Eigen::Index c = 0; c < k; ++c) updated.row(c) /= static_cast<Scalar>(counts[static_cast<std::size_t>(c)]);
    const Scalar shift = (updated - run.centroids).rowwise().norm().maxCoeff();
    run.centroids = std::move(updated);
    run.distortion = distortion(points, run.labels, run.centroids);
    run.distortion_trace.push_back(run.distortion);
    run.iterations = iter + 1;
    if (shift < static_cast<Scalar>(tol)) {
      run.converged = true;
      break;
    }
  }
  return run;
}

template <typename Scalar>
struct Clustering {
  std::vector<int> labels;         // in [0, k)
  DenseMatrix<Scalar> centroids;   // k x d
  Scalar distortion = 0;
  int k = 0;
  std::uint64_t seed = 0;
  int n_init = 1;
  Scalar silhouette = std::numeric_limits<Scalar>::quiet_NaN();
  std::vector<Scalar> run_distortions;  // one per initialisation
};

struct KMeansOptions {
  int n_init = 10;
  int max_iter = 300;
  double tol = 1e-6;
};

/// Best (lowest-distortion, earliest on ties) of `n_init` seeded Lloyd runs.
/// Draws all initialisations sequentially from `rng`.
template <typename Derived>
Clustering<typename Derived::Scalar> kmeans_fit(const Eigen::MatrixBase<Derived>& points, Eigen::Index k, Engine& rng,
                                                const KMeansOptions& opt = {}) {
  using Scalar = typename Derived::Scalar;
  if (opt.n_init < 1) throw InputError("n_init must be at least 1");
  if (opt.max_iter < 1) throw InputError("max_iter must be at least 1");
  if (!points.allFinite()) throw InputError("k-means input contains non-finite values");
  Clustering<Scalar> best;
  best.k = static_cast<int>(k);
  best.n_init = opt.n_init;
  for (int r = 0; r < opt.n_init; ++r) {
    const auto init = kmeans_pp_init(points, k, rng);
    auto run = lloyd(points, init.centers, opt.max_iter, opt.tol);
    best.run_distortions.push_back(run.distortion);
    if (r == 0 || run.distortion < best.distortion) {
      best.labels = std::move(run.labels);
      best.centroids = std::move(run.centroids);
      best.distortion = run.distortion;
    }
  }
  return best;
}

}  // namespace regime_kit
