#include "regime_kit/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "regime_kit/parallel.hpp"
#include "regime_kit/rng.hpp"

namespace regime_kit {

namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double choose2(double n) { return n * (n - 1.0) / 2.0; }

// Dense ids for arbitrary integer labels, in order of first appearance.
std::vector<int> compact(std::span<const int> labels, int& count) {
  std::map<int, int> ids;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) out.push_back(ids.try_emplace(l, static_cast<int>(ids.size())).first->second);
  count = static_cast<int>(ids.size());
  return out;
}

Eigen::MatrixXd contingency(std::span<const int> a, std::span<const int> b, int& ka, int& kb) {
  if (a.size() != b.size()) throw InputError("partitions differ in length");
  const auto ca = compact(a, ka);
  const auto cb = compact(b, kb);
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(ka, kb);
  for (std::size_t i = 0; i < ca.size(); ++i) table(ca[i], cb[i]) += 1.0;
  return table;
}

// Minimum-cost perfect assignment on a square matrix (Hungarian method with potentials).
std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<bool> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n);
  for (int j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace

std::vector<std::uint64_t> selection_seeds(std::uint64_t master_seed, int count) {
  std::vector<std::uint64_t> seeds;
  for (int j = 0; j < count; ++j) {
    seeds.push_back(derive_seed(master_seed, {stream::kSelectionSeeds, static_cast<std::uint64_t>(j)}));
  }
  return seeds;
}

Engine fit_engine(std::uint64_t seed, int k) {
  return make_engine(derive_seed(seed, {stream::kSelection, static_cast<std::uint64_t>(k)}));
}

KSelectionReport select_k(const Eigen::MatrixXd& points, const KSelectionOptions& opt) {
  const auto n = static_cast<int>(points.rows());
  if (opt.seeds.empty()) throw InputError("select_k needs at least one seed");
  if (opt.k_min < 2 || opt.k_max < opt.k_min || opt.k_max > n - 1) {
    throw InputError("k range [" + std::to_string(opt.k_min) + ", " + std::to_string(opt.k_max) +
                     "] must lie within [2, N-1] with N = " + std::to_string(n));
  }
  const auto n_k = static_cast<std::size_t>(opt.k_max - opt.k_min + 1);
  const auto n_s = opt.seeds.size();
  std::vector<double> grid(n_k * n_s);
  parallel_for(grid.size(), opt.threads, [&](std::size_t cell) {
    const int k = opt.k_min + static_cast<int>(cell / n_s);
    auto rng = fit_engine(opt.seeds[cell % n_s], k);
    const auto fit = kmeans_fit(points, k, rng, opt.kmeans);
    grid[cell] = silhouette_score(points, std::span<const int>(fit.labels)).mean;
  });

  KSelectionReport report;
  report.seeds = opt.seeds;
  report.kmeans = opt.kmeans;
  double best_mean = -std::numeric_limits<double>::infinity();
  for (std::size_t ki = 0; ki < n_k; ++ki) {
    KScore s;
    s.k = opt.k_min + static_cast<int>(ki);
    s.silhouettes.assign(grid.begin() + static_cast<std::ptrdiff_t>(ki * n_s),
                         grid.begin() + static_cast<std::ptrdiff_t>((ki + 1) * n_s));
    s.mean = mean_of(s.silhouettes);
    s.sd = sample_sd(s.silhouettes);
    if (s.mean > best_mean) {
      best_mean = s.mean;
      report.k_star = s.k;
      const auto best = std::max_element(s.silhouettes.begin(), s.silhouettes.end());
      report.best_seed = opt.seeds[static_cast<std::size_t>(best - s.silhouettes.begin())];
    }
    report.scores.push_back(std::move(s));
  }
  return report;
}

void relabel_by_size(ClusteringD& clustering) {
  const int k = clustering.k;
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (int l : clustering.labels) ++sizes[static_cast<std::size_t>(l)];
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return sizes[a] > sizes[b]; });
  std::vector<int> new_label(static_cast<std::size_t>(k));
  Eigen::MatrixXd centroids(clustering.centroids.rows(), clustering.centroids.cols());
  for (int rank = 0; rank < k; ++rank) {
    new_label[static_cast<std::size_t>(order[rank])] = rank;
    centroids.row(rank) = clustering.centroids.row(order[rank]);
  }
  for (int& l : clustering.labels) l = new_label[static_cast<std::size_t>(l)];
  clustering.centroids = std::move(centroids);
}

ClusteringD final_fit(const Eigen::MatrixXd& points, int k_star, std::uint64_t best_seed, KMeansOptions opt) {
  auto rng = fit_engine(best_seed, k_star);
  auto fit = kmeans_fit(points, k_star, rng, opt);
  fit.seed = best_seed;
  relabel_by_size(fit);
  fit.silhouette = silhouette_score(points, std::span<const int>(fit.labels)).mean;
  return fit;
}

NullSilhouetteReport null_silhouette(const Eigen::MatrixXd& trajectories, int k, double observed,
                                     const NullSilhouetteOptions& opt) {
  if (opt.n_permutations < 1) throw InputError("null_silhouette needs at least one permutation");
  NullSilhouetteReport report;
  report.k = k;
  report.n_permutations = opt.n_permutations;
  report.master_seed = opt.master_seed;
  report.variance_threshold = opt.variance_threshold;
  report.selection_seeds = std::max(1, opt.selection_seeds);
  report.observed = observed;
  report.null_silhouettes.assign(static_cast<std::size_t>(opt.n_permutations), 0.0);

  parallel_for(report.null_silhouettes.size(), opt.threads, [&](std::size_t p) {
    auto rng = make_engine(derive_seed(opt.master_seed, {stream::kSilhouetteNull, p}));
    Eigen::MatrixXd shuffled = trajectories;
    for (Eigen::Index i = 0; i < shuffled.rows(); ++i) {
      auto row = shuffled.row(i);
      std::shuffle(row.begin(), row.end(), rng);
    }
    const auto z = standardize_rows(shuffled);
    const auto emb = fit_pca(z.values, opt.variance_threshold);
    if (opt.selection_seeds <= 1) {
      const auto fit = kmeans_fit(emb.scores, k, rng, opt.kmeans);
      report.null_silhouettes[p] = silhouette_score(emb.scores, std::span<const int>(fit.labels)).mean;
      return;
    }
    const auto seeds = selection_seeds(rng(), opt.selection_seeds);
    double best = -std::numeric_limits<double>::infinity();
    std::uint64_t best_seed = seeds.front();
    for (auto seed : seeds) {
      auto fit_rng = fit_engine(seed, k);
      const auto fit = kmeans_fit(emb.scores, k, fit_rng, opt.selection_kmeans);
      const double s = silhouette_score(emb.scores, std::span<const int>(fit.labels)).mean;
      if (s > best) {
        best = s;
        best_seed = seed;
      }
    }
    report.null_silhouettes[p] = final_fit(emb.scores, k, best_seed, opt.kmeans).silhouette;
  });

  report.null_mean = mean_of(report.null_silhouettes);
  report.null_sd = sample_sd(report.null_silhouettes);
  report.z_score = (observed - report.null_mean) / report.null_sd;
  report.ratio = observed / report.null_mean;
  return report;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  int ka = 0;
  int kb = 0;
  const auto table = contingency(a, b, ka, kb);
  const double n = static_cast<double>(a.size());
  double index = 0.0;
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    for (Eigen::Index j = 0; j < table.cols(); ++j) index += choose2(table(i, j));
  }
  double sum_a = 0.0;
  for (Eigen::Index i = 0; i < table.rows(); ++i) sum_a += choose2(table.row(i).sum());
  double sum_b = 0.0;
  for (Eigen::Index j = 0; j < table.cols(); ++j) sum_b += choose2(table.col(j).sum());
  const double pairs = choose2(n);
  const double expected = pairs > 0.0 ? sum_a * sum_b / pairs : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

double label_agreement(std::span<const int> a, std::span<const int> b) {
  int ka = 0;
  int kb = 0;
  const auto table = contingency(a, b, ka, kb);
  if (a.empty()) return 1.0;
  const int size = std::max(ka, kb);
  Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(size, size);
  cost.topLeftCorner(ka, kb) = -table;
  const auto match = min_cost_assignment(cost);
  double agree = 0.0;
  for (int i = 0; i < ka; ++i) {
    if (match[static_cast<std::size_t>(i)] < kb) agree += table(i, match[static_cast<std::size_t>(i)]);
  }
  return agree / static_cast<double>(a.size());
}

nlohmann::json to_json(const KSelectionReport& report) {
  nlohmann::json j;
  j["k_star"] = report.k_star;
  j["best_seed"] = report.best_seed;
  j["seeds"] = report.seeds;
  j["n_init"] = report.kmeans.n_init;
  j["max_iter"] = report.kmeans.max_iter;
  j["tol"] = report.kmeans.tol;
  j["rng"] = std::string(kRngName);
  auto& rows = j["scores"] = nlohmann::json::array();
  for (const auto& s : report.scores) {
    rows.push_back({{"k", s.k}, {"mean", s.mean}, {"sd", s.sd}, {"silhouettes", s.silhouettes}});
  }
  return j;
}

nlohmann::json to_json(const NullSilhouetteReport& report) {
  return {{"k", report.k},
          {"n_permutations", report.n_permutations},
          {"null_silhouettes", report.null_silhouettes},
          {"null_mean", report.null_mean},
          {"null_sd", report.null_sd},
          {"observed", report.observed},
          {"z_score", report.z_score},
          {"observed_over_null_mean", report.ratio},
          {"master_seed", report.master_seed},
          {"variance_threshold", report.variance_threshold},
          {"selection_seeds", report.selection_seeds},
          {"rng", std::string(kRngName)}};
}

}  // namespace regime_kit
