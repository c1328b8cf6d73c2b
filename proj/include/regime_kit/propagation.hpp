#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "regime_kit/error.hpp"
#include "regime_kit/panel.hpp"
#include "regime_kit/regimes.hpp"

namespace regime_kit {

/// FullSeries centres both windows on the whole-series means; Overlap centres
/// each window on its own mean (textbook Pearson).
enum class MeanMode { FullSeries, Overlap };

struct LaggedCorrelation {
  double rho = 0.0;
  int n = 0;             // overlap length, len - lag
  bool defined = false;  // false when either window has zero spread
};

/// Correlation of x[t] with y[t + lag] over the overlapping window.
template <typename DerivedX, typename DerivedY>
LaggedCorrelation lagged_correlation(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y,
                                     int lag, MeanMode mode = MeanMode::FullSeries) {
  const auto len = x.size();
  if (y.size() != len) throw InputError("lagged correlation needs equal-length series");
  if (lag < 0 || len < lag + 3) throw InputError("series too short for lag " + std::to_string(lag));
  const auto n = len - lag;
  const Eigen::VectorXd xv = x.reshaped().template cast<double>();
  const Eigen::VectorXd yv = y.reshaped().template cast<double>();
  const auto xs = xv.head(n).array();
  const auto ys = yv.segment(lag, n).array();
  const double mx = mode == MeanMode::FullSeries ? xv.mean() : xs.mean();
  const double my = mode == MeanMode::FullSeries ? yv.mean() : ys.mean();
  const auto dx = (xs - mx).eval();
  const auto dy = (ys - my).eval();
  const double sxx = dx.square().sum();
  const double syy = dy.square().sum();
  LaggedCorrelation out;
  out.n = static_cast<int>(n);
  if (!(sxx > 0.0) || !(syy > 0.0)) return out;
  out.rho = (dx * dy).sum() / (std::sqrt(sxx) * std::sqrt(syy));
  out.defined = true;
  return out;
}

/// Two-sided normal critical value for `alpha` (1.95996... at 0.05).
double normal_critical_value(double alpha);

/// |rho| must exceed this for an n-sample correlation to be retained.
inline double correlation_threshold(int n, double alpha) { return normal_critical_value(alpha) / std::sqrt(n); }

enum class Role { Exporter, Absorber, Amplifier, Buffer };
std::string to_string(Role role);

struct CorrelationTest {
  int source = 0;  // cluster ids
  int target = 0;
  int lag = 0;
  LaggedCorrelation corr;
  bool significant = false;
};

struct PropagationNetwork {
  std::vector<int> nodes;                   // cluster ids
  std::vector<std::size_t> node_members;
  std::vector<int> excluded;                // clusters below min_members
  std::vector<CorrelationTest> tests;       // every ordered pair and lag
  std::vector<CorrelationTest> edges;       // significant subset; lag 0 is undirected
  Eigen::VectorXd out_strength;
  Eigen::VectorXd in_strength;
  Eigen::VectorXd net_export;
  std::vector<Role> roles;
  int tau_max = 3;
  double alpha = 0.05;
  std::size_t min_members = 0;
  MeanMode mean_mode = MeanMode::FullSeries;
  std::vector<std::string> warnings;
};

struct NetworkOptions {
  int tau_max = 3;
  double alpha = 0.05;
  std::size_t min_members = 0;
  MeanMode mean_mode = MeanMode::FullSeries;
};

/// Tests every ordered pair of distinct nodes at lags 0..tau_max and keeps
/// correlations beyond the per-lag threshold. Out/In are signed sums of the
/// kept correlations; lag-0 correlations count in both directions.
PropagationNetwork build_network(const RegimeTrajectories& rt, const NetworkOptions& opt);

/// Same, on explicit series (one row per node).
PropagationNetwork build_network(const Eigen::MatrixXd& series, std::vector<int> node_ids,
                                 std::vector<std::size_t> node_members, const NetworkOptions& opt);

/// Median split of Out and In strengths. "High" means strictly above the
/// median; values equal to the median count as low.
std::vector<Role> classify_roles(const Eigen::VectorXd& out_strength, const Eigen::VectorXd& in_strength);

enum class EdgeCountMode { Ordered, UnorderedMax };
EdgeCountMode parse_edge_count_mode(const std::string& name);
std::string to_string(EdgeCountMode mode);

/// Ordered counts each significant (source, target, lag). UnorderedMax counts
/// node pairs with at least one significant test in either direction.
std::size_t count_edges(const PropagationNetwork& net, EdgeCountMode mode);

struct NetworkNullReport {
  int n_permutations = 0;
  std::vector<std::size_t> null_counts;
  double null_mean = 0.0;
  double null_sd = 0.0;
  std::size_t observed = 0;
  double p_value = 1.0;  // (1 + #{null >= observed}) / (1 + n_permutations)
  EdgeCountMode mode = EdgeCountMode::Ordered;
  std::uint64_t master_seed = 0;
};

/// Shuffles each node series independently, rebuilds the network and counts
/// significant edges, once per permutation.
NetworkNullReport network_null(const PropagationNetwork& observed, const RegimeTrajectories& rt, int n_permutations,
                               std::uint64_t master_seed, EdgeCountMode mode = EdgeCountMode::Ordered,
                               unsigned threads = 1);

/// Same, on explicit node series.
NetworkNullReport network_null(const Eigen::MatrixXd& series, const NetworkOptions& opt, int n_permutations,
                               std::uint64_t master_seed, EdgeCountMode mode = EdgeCountMode::Ordered,
                               unsigned threads = 1);

inline constexpr double kEarthRadiusKm = 6371.0088;

double haversine_km(const GeoPoint& a, const GeoPoint& b);

struct SpatialDecayRow {
  int cluster_a = 0;
  int cluster_b = 0;
  double distance_km = 0.0;
  double max_abs_rho = 0.0;  // over both directions and every tested lag
};

struct SpatialDecayTable {
  std::vector<SpatialDecayRow> rows;  // one per unordered node pair with centroids
  std::vector<std::string> warnings;
};

/// Cluster centroids are arithmetic means of member longitude/latitude.
SpatialDecayTable spatial_decay(const PropagationNetwork& net, const std::vector<EntityMeta>& entities,
                                std::span<const int> labels);

nlohmann::json to_json(const PropagationNetwork& net);
nlohmann::json to_json(const NetworkNullReport& report);
std::string spatial_decay_csv(const SpatialDecayTable& table);

}  // namespace regime_kit
