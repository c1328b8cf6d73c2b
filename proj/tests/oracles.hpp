#pragma once
// Brute-force reference implementations. Each one is written from the
// definition without sharing code with the library.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline double euclid(const Eigen::MatrixXd& x, Eigen::Index i, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < x.cols(); ++c) s += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
  return std::sqrt(s);
}

/// Mean silhouette with a(i) and b(i) recomputed per point by direct loops.
inline std::vector<double> silhouette(const Eigen::MatrixXd& x, const std::vector<int>& labels) {
  const auto n = x.rows();
  std::set<int> clusters(labels.begin(), labels.end());
  std::vector<double> s(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int own = labels[static_cast<std::size_t>(i)];
    double a_sum = 0.0;
    int a_count = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i && labels[static_cast<std::size_t>(j)] == own) {
        a_sum += euclid(x, i, j);
        ++a_count;
      }
    }
    if (a_count == 0) continue;  // singleton
    const double a = a_sum / a_count;
    double b = std::numeric_limits<double>::infinity();
    for (int c : clusters) {
      if (c == own) continue;
      double sum = 0.0;
      int count = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (labels[static_cast<std::size_t>(j)] == c) {
          sum += euclid(x, i, j);
          ++count;
        }
      }
      b = std::min(b, sum / count);
    }
    const double m = std::max(a, b);
    s[static_cast<std::size_t>(i)] = m > 0.0 ? (b - a) / m : 0.0;
  }
  return s;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Hubert-Arabie ARI written in pair-count form.
inline double ari(const std::vector<int>& a, const std::vector<int>& b) {
  double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const bool sa = a[i] == a[j];
      const bool sb = b[i] == b[j];
      if (sa && sb) ++n11;
      else if (sa) ++n10;
      else if (sb) ++n01;
      else ++n00;
    }
  }
  const double den = (n00 + n01) * (n01 + n11) + (n00 + n10) * (n10 + n11);
  if (den == 0.0) return 1.0;
  return 2.0 * (n00 * n11 - n01 * n10) / den;
}

/// Rank of x[i] = (#smaller) + (#equal + 1) / 2.
inline std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (double v : x) {
      if (v < x[i]) ++less;
      if (v == x[i]) ++equal;
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

/// Pearson correlation of x[t] with y[t+lag] over the overlap, centred on
/// full-series means or on window means.
inline double lagged_pearson(const std::vector<double>& x, const std::vector<double>& y, int lag, bool full_means) {
  const std::size_t n = x.size() - static_cast<std::size_t>(lag);
  double mx = 0, my = 0;
  if (full_means) {
    for (double v : x) mx += v;
    for (double v : y) my += v;
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(y.size());
  } else {
    for (std::size_t t = 0; t < n; ++t) {
      mx += x[t];
      my += y[t + static_cast<std::size_t>(lag)];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double dx = x[t] - mx;
    const double dy = y[t + static_cast<std::size_t>(lag)] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return sxy / std::sqrt(sxx * syy);
}

/// Percentile straight from the sorted order statistics.
inline double percentile_linear(std::vector<double> v, double pct) {
  std::sort(v.begin(), v.end());
  const double pos = (static_cast<double>(v.size()) - 1.0) * pct / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double percentile_nearest_rank(std::vector<double> v, double pct) {
  std::sort(v.begin(), v.end());
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(v.size())));
  rank = std::clamp<std::size_t>(rank, 1, v.size());
  return v[rank - 1];
}

/// Closed half-plane test against every edge of a convex ring (either
/// orientation). Boundary points count as inside. Integer inputs make it exact.
inline bool in_convex(const Eigen::Vector2d& p, const std::vector<Eigen::Vector2d>& ring) {
  int sign = 0;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    const auto& a = ring[i];
    const auto& b = ring[i + 1];
    const double cross = (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
    if (cross == 0.0) continue;
    const int s = cross > 0 ? 1 : -1;
    if (sign == 0) sign = s;
    else if (s != sign) return false;
  }
  return true;
}

inline bool strictly_in_convex(const Eigen::Vector2d& p, const std::vector<Eigen::Vector2d>& ring) {
  int sign = 0;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    const auto& a = ring[i];
    const auto& b = ring[i + 1];
    const double cross = (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
    if (cross == 0.0) return false;
    const int s = cross > 0 ? 1 : -1;
    if (sign == 0) sign = s;
    else if (s != sign) return false;
  }
  return true;
}

/// Convex hull (monotone chain) of integer points, closed, counter-clockwise.
inline std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return {};
  auto cross = [](const auto& o, const auto& a, const auto& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Eigen::Vector2d> h(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0) --k;
    h[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k);  // last point repeats the first
  if (h.size() < 4) return {};
  return h;
}

/// Every assignment of n points to k non-empty labelled groups, canonical
/// form only (first appearance order), keeping the minimum distortion.
inline double min_distortion_exhaustive(const Eigen::MatrixXd& x, int k) {
  const auto n = static_cast<int>(x.rows());
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  double best = std::numeric_limits<double>::infinity();
  auto evaluate = [&] {
    double total = 0.0;
    for (int c = 0; c < k; ++c) {
      Eigen::RowVectorXd centre = Eigen::RowVectorXd::Zero(x.cols());
      int count = 0;
      for (int i = 0; i < n; ++i) {
        if (labels[static_cast<std::size_t>(i)] == c) {
          centre += x.row(i);
          ++count;
        }
      }
      if (count == 0) return;
      centre /= count;
      for (int i = 0; i < n; ++i) {
        if (labels[static_cast<std::size_t>(i)] == c) total += (x.row(i) - centre).squaredNorm();
      }
    }
    best = std::min(best, total);
  };
  auto rec = [&](auto&& self, int i, int used) -> void {
    if (i == n) {
      if (used == k) evaluate();
      return;
    }
    for (int c = 0; c < std::min(used + 1, k); ++c) {
      labels[static_cast<std::size_t>(i)] = c;
      self(self, i + 1, std::max(used, c + 1));
    }
  };
  rec(rec, 0, 0);
  return best;
}

/// Binomial quantile band [lo, hi] with P(X < lo) <= tail and P(X > hi) <= tail.
inline std::pair<int, int> binomial_band(int n, double p, double tail) {
  std::vector<double> pmf(static_cast<std::size_t>(n) + 1);
  for (int x = 0; x <= n; ++x) {
    pmf[static_cast<std::size_t>(x)] =
        std::exp(std::lgamma(n + 1.0) - std::lgamma(x + 1.0) - std::lgamma(n - x + 1.0) + x * std::log(p) +
                 (n - x) * std::log1p(-p));
  }
  int lo = 0;
  double cdf = 0.0;
  while (lo <= n && cdf + pmf[static_cast<std::size_t>(lo)] <= tail) cdf += pmf[static_cast<std::size_t>(lo++)];
  int hi = n;
  double upper = 0.0;
  while (hi >= 0 && upper + pmf[static_cast<std::size_t>(hi)] <= tail) upper += pmf[static_cast<std::size_t>(hi--)];
  return {lo, hi};
}

}  // namespace oracle
