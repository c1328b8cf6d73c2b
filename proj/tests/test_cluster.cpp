#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "regime_kit/cluster.hpp"
#include "regime_kit/error.hpp"

using namespace regime_kit;

namespace {

Eigen::MatrixXd blobs(int k, int per, double spread, std::uint64_t seed, std::vector<int>* truth = nullptr) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(k * per, 3);
  for (int c = 0; c < k; ++c) {
    const Eigen::RowVector3d centre(10.0 * c, 5.0 * (c % 2), -4.0 * (c % 3));
    for (int i = 0; i < per; ++i) {
      x.row(c * per + i) = centre + spread * Eigen::RowVector3d(normal(rng), normal(rng), normal(rng));
      if (truth) truth->push_back(c);
    }
  }
  return x;
}

Eigen::MatrixXd random_points(Eigen::Index n, Eigen::Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(n, d);
  for (auto& v : x.reshaped()) v = normal(rng);
  return x;
}

}  // namespace

TEST_SUITE("cluster") {
  TEST_CASE("k-means++ picks the second centre with D^2 probability") {
    Eigen::MatrixXd x(5, 1);
    x << 0.0, 1.0, 3.0, 7.0, 8.0;
    const int n = 5;
    std::vector<double> expected(n, 0.0);
    for (int i = 0; i < n; ++i) {
      double total = 0.0;
      for (int j = 0; j < n; ++j) total += std::pow(x(i) - x(j), 2);
      for (int j = 0; j < n; ++j) expected[static_cast<std::size_t>(j)] += std::pow(x(i) - x(j), 2) / total / n;
    }
    auto rng = make_engine(99);
    const int trials = 20000;
    std::vector<int> first(n, 0), second(n, 0);
    for (int t = 0; t < trials; ++t) {
      const auto s = kmeans_pp_init(x, 2, rng);
      ++first[static_cast<std::size_t>(s.indices[0])];
      ++second[static_cast<std::size_t>(s.indices[1])];
    }
    for (int j = 0; j < n; ++j) {
      const double p1 = 1.0 / n;
      CHECK(std::abs(first[static_cast<std::size_t>(j)] - trials * p1) <= 3.0 * std::sqrt(trials * p1 * (1 - p1)));
      const double p2 = expected[static_cast<std::size_t>(j)];
      CHECK(std::abs(second[static_cast<std::size_t>(j)] - trials * p2) <= 3.0 * std::sqrt(trials * p2 * (1 - p2)));
    }
  }

  TEST_CASE("duplicate points fall back to uniform seeding") {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 2);
    auto rng = make_engine(1);
    const auto s = kmeans_pp_init(x, 3, rng);
    std::set<Eigen::Index> distinct(s.indices.begin(), s.indices.end());
    CHECK(distinct.size() == 3);
    CHECK_THROWS_AS(kmeans_pp_init(x, 5, rng), InputError);
  }

  TEST_CASE("Lloyd distortion never increases") {
    const auto x = blobs(4, 30, 2.0, 2);
    auto rng = make_engine(5);
    const auto init = kmeans_pp_init(x, 4, rng);
    const auto run = lloyd(x, init.centers, 300, 1e-9);
    CHECK(run.converged);
    for (std::size_t i = 1; i < run.distortion_trace.size(); ++i) {
      CHECK(run.distortion_trace[i] <= run.distortion_trace[i - 1] + 1e-9);
    }
    CHECK(run.distortion == doctest::Approx(distortion(x, run.labels, run.centroids)));
  }

  TEST_CASE("an empty cluster is repaired") {
    Eigen::MatrixXd x(6, 1);
    x << 0, 0.1, 0.2, 5, 5.1, 5.2;
    Eigen::MatrixXd init(3, 1);
    init << 0, 5, 100;
    const auto run = lloyd(x, init, 100, 1e-9);
    std::set<int> used(run.labels.begin(), run.labels.end());
    CHECK(used.size() == 3);
  }

  TEST_CASE("best of several inits reaches the exhaustive optimum") {
    std::mt19937_64 gen(8);
    int hits = 0;
    const int instances = 30;
    for (int t = 0; t < instances; ++t) {
      const auto x = random_points(8, 2, gen);
      const double best = oracle::min_distortion_exhaustive(x, 3);
      auto rng = make_engine(static_cast<std::uint64_t>(t));
      const auto fit = kmeans_fit(x, 3, rng, {20, 300, 1e-10});
      CHECK(fit.distortion >= best - 1e-9);
      if (fit.distortion <= best + 1e-9) ++hits;
    }
    CHECK(hits >= instances - 1);
  }

  TEST_CASE("silhouette matches the brute-force oracle") {
    std::mt19937_64 gen(11);
    for (int t = 0; t < 20; ++t) {
      const auto n = std::uniform_int_distribution<Eigen::Index>(4, 60)(gen);
      const int k = std::uniform_int_distribution<int>(2, 5)(gen);
      const auto x = random_points(n, 3, gen);
      std::vector<int> labels(static_cast<std::size_t>(n));
      for (auto& l : labels) l = std::uniform_int_distribution<int>(0, k - 1)(gen);
      labels[0] = 0;
      labels[1] = 1;
      const auto s = silhouette_score(x, labels);
      const auto o = oracle::silhouette(x, labels);
      for (Eigen::Index i = 0; i < n; ++i) CHECK(std::abs(s.per_point(i) - o[static_cast<std::size_t>(i)]) < 1e-9);
      CHECK(std::abs(s.mean - oracle::mean(o)) < 1e-9);
    }
  }

  TEST_CASE("silhouette edge cases") {
    Eigen::MatrixXd x(3, 1);
    x << 0, 1, 10;
    const auto s = silhouette_score(x, std::vector<int>{0, 0, 1});
    CHECK(s.per_point(2) == 0.0);  // singleton
    CHECK_THROWS_AS(silhouette_score(x, std::vector<int>{0, 0, 0}), InputError);
    CHECK_THROWS_AS(silhouette_score(x, std::vector<int>{0, 1}), InputError);
  }

  TEST_CASE("ARI matches pair counting and is label-invariant") {
    std::mt19937_64 gen(4);
    for (int t = 0; t < 50; ++t) {
      const int n = std::uniform_int_distribution<int>(2, 40)(gen);
      std::vector<int> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
      for (auto& v : a) v = std::uniform_int_distribution<int>(0, 3)(gen);
      for (auto& v : b) v = std::uniform_int_distribution<int>(0, 4)(gen);
      CHECK(adjusted_rand_index(a, b) == doctest::Approx(oracle::ari(a, b)).epsilon(1e-12));
      std::vector<int> renamed = a;
      for (auto& v : renamed) v = 7 - v;
      CHECK(adjusted_rand_index(a, renamed) == doctest::Approx(1.0));
      CHECK(label_agreement(a, renamed) == doctest::Approx(1.0));
    }
    const std::vector<int> a{0, 0, 1, 1}, b{0, 1, 0, 1};
    CHECK(label_agreement(a, b) == doctest::Approx(0.5));
  }

  TEST_CASE("k selection finds separated blobs and ignores the thread count") {
    std::vector<int> truth;
    const auto x = blobs(4, 40, 0.8, 7, &truth);
    KSelectionOptions opt;
    opt.k_min = 3;
    opt.k_max = 7;
    opt.seeds = selection_seeds(42, 6);
    opt.kmeans.n_init = 4;
    const auto one = select_k(x, opt);
    opt.threads = 4;
    const auto four = select_k(x, opt);
    CHECK(one.k_star == 4);
    CHECK(to_json(one) == to_json(four));
    const auto fit = final_fit(x, one.k_star, one.best_seed, {10, 300, 1e-6});
    CHECK(adjusted_rand_index(truth, fit.labels) == doctest::Approx(1.0));
    CHECK(fit.silhouette > 0.5);
    std::vector<std::size_t> sizes(4, 0);
    for (int l : fit.labels) ++sizes[static_cast<std::size_t>(l)];
    CHECK(std::is_sorted(sizes.rbegin(), sizes.rend()));
  }

  TEST_CASE("relabelling orders clusters by size") {
    ClusteringD c;
    c.k = 3;
    c.labels = {2, 0, 2, 1, 2, 1};
    c.centroids = Eigen::MatrixXd(3, 1);
    c.centroids << 0, 1, 2;
    relabel_by_size(c);
    CHECK(c.labels == std::vector<int>{0, 2, 0, 1, 0, 1});
    CHECK(c.centroids(0, 0) == 2.0);
    CHECK(c.centroids(2, 0) == 0.0);
  }

  TEST_CASE("silhouette null is reproducible across thread counts") {
    std::mt19937_64 gen(5);
    const auto x = random_points(40, 12, gen);
    NullSilhouetteOptions opt;
    opt.n_permutations = 6;
    opt.kmeans.n_init = 3;
    opt.master_seed = 9;
    opt.selection_seeds = 3;
    opt.selection_kmeans.n_init = 2;
    const auto a = null_silhouette(x, 3, 0.5, opt);
    opt.threads = 3;
    const auto b = null_silhouette(x, 3, 0.5, opt);
    CHECK(a.null_silhouettes == b.null_silhouettes);
    CHECK(a.null_silhouettes.size() == 6);
    CHECK(a.z_score == doctest::Approx((0.5 - a.null_mean) / a.null_sd));
  }
}
