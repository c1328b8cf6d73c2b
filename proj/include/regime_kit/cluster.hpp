#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "regime_kit/kmeans.hpp"
#include "regime_kit/silhouette.hpp"

namespace regime_kit {

using ClusteringD = Clustering<double>;

struct KScore {
  int k = 0;
  std::vector<double> silhouettes;  // one per selection seed
  double mean = 0.0;
  double sd = 0.0;                  // sample sd across seeds
};

struct KSelectionReport {
  std::vector<KScore> scores;
  std::vector<std::uint64_t> seeds;
  int k_star = 0;
  std::uint64_t best_seed = 0;
  KMeansOptions kmeans;
};

struct KSelectionOptions {
  int k_min = 3;
  int k_max = 20;
  std::vector<std::uint64_t> seeds;
  KMeansOptions kmeans{};
  unsigned threads = 1;
};

/// The `count` selection seeds derived from a master seed.
std::vector<std::uint64_t> selection_seeds(std::uint64_t master_seed, int count);

/// Engine used for a (seed, k) fit, shared by selection and the final refit.
Engine fit_engine(std::uint64_t seed, int k);

/// Fits every (k, seed) cell, averages silhouettes per k and picks the k with
/// the highest mean (smaller k on ties); best_seed maximises the silhouette at k_star.
KSelectionReport select_k(const Eigen::MatrixXd& points, const KSelectionOptions& opt);

/// Reorders labels by descending cluster size (equal sizes keep their
/// original order); centroids are permuted to match.
void relabel_by_size(ClusteringD& clustering);

/// Refit at k_star from best_seed with `n_init` initialisations, relabelled by size,
/// with its silhouette filled in.
ClusteringD final_fit(const Eigen::MatrixXd& points, int k_star, std::uint64_t best_seed, KMeansOptions opt);

struct NullSilhouetteReport {
  int k = 0;
  int n_permutations = 0;
  std::vector<double> null_silhouettes;
  double null_mean = 0.0;
  double null_sd = 0.0;
  double observed = 0.0;
  double z_score = 0.0;
  double ratio = 0.0;  // observed / null_mean
  std::uint64_t master_seed = 0;
  double variance_threshold = 0.8;
  int selection_seeds = 1;
};

struct NullSilhouetteOptions {
  int n_permutations = 50;
  double variance_threshold = 0.8;
  KMeansOptions kmeans{};  // final fit
  // With more than one seed each permutation repeats the observed procedure:
  // fit at k from every selection seed, keep the best-silhouette seed, refit.
  int selection_seeds = 1;
  KMeansOptions selection_kmeans{};
  std::uint64_t master_seed = 0;
  unsigned threads = 1;
};

/// Shuffles the year order of every trajectory independently, then
/// standardises, projects, clusters at k and scores, once per permutation.
/// The clustering step mirrors select_k + final_fit when selection_seeds > 1.
/// `trajectories` holds raw growth rows (not standardised).
NullSilhouetteReport null_silhouette(const Eigen::MatrixXd& trajectories, int k, double observed,
                                     const NullSilhouetteOptions& opt);

/// Adjusted Rand index from the pair-counting contingency table. Returns 1
/// when both partitions are trivial in the same way (no pairs to disagree on).
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

/// Fraction of items whose labels agree under the best one-to-one matching of
/// cluster labels.
double label_agreement(std::span<const int> a, std::span<const int> b);

nlohmann::json to_json(const KSelectionReport& report);
nlohmann::json to_json(const NullSilhouetteReport& report);

}  // namespace regime_kit
