#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "regime_kit/panel.hpp"

namespace regime_kit {

/// Per-regime mean growth paths and summary moments.
struct RegimeTrajectories {
  std::vector<int> cluster_ids;        // ascending
  std::vector<int> growth_years;
  Eigen::MatrixXd mean_growth;         // clusters x (T-1), unweighted member average
  std::vector<std::size_t> member_counts;
  Eigen::VectorXd mu;                  // time mean of mean_growth
  Eigen::VectorXd sigma;               // sample sd (n-1) around mu
  std::vector<std::map<std::string, std::size_t>> country_counts;

  std::size_t size() const { return cluster_ids.size(); }
};

/// `gm` must be complete; labels[i] is the regime of row i.
RegimeTrajectories regime_trajectories(const GrowthMatrix& gm, std::span<const int> labels);

/// Same computation from a bare label/series pair (no country metadata).
RegimeTrajectories regime_trajectories(const Eigen::MatrixXd& growth, std::span<const int> labels,
                                       std::vector<int> growth_years);

enum class PercentileMethod { Linear, NearestRank };

PercentileMethod parse_percentile_method(const std::string& name);
std::string to_string(PercentileMethod method);

/// Percentile of `values` (0 < pct < 100). Linear interpolates between order
/// statistics at position (n-1)*pct/100; NearestRank takes the ceil(pct/100*n)-th
/// smallest value.
double percentile(std::span<const double> values, double pct, PercentileMethod method);

enum class ShockSign { Negative, Positive };

struct Shock {
  int cluster = 0;
  int year = 0;
  double deviation = 0.0;
  ShockSign sign = ShockSign::Negative;
};

struct ShockBounds {
  int cluster = 0;
  double lower = 0.0;
  double upper = 0.0;
  bool degenerate = false;  // lower == upper: every deviation identical, nothing flagged
};

struct ShockTable {
  std::vector<Shock> shocks;  // cluster order, then year order
  std::vector<ShockBounds> bounds;
  double lower_pct = 2.0;
  double upper_pct = 98.0;
  PercentileMethod method = PercentileMethod::Linear;
};

/// Flags years whose deviation from the regime's long-run mean lies at or
/// beyond the lower/upper percentile of that regime's deviations.
ShockTable detect_shocks(const RegimeTrajectories& rt, double lower_pct = 2.0, double upper_pct = 98.0,
                         PercentileMethod method = PercentileMethod::Linear);

std::string trajectories_csv(const RegimeTrajectories& rt);
std::string regime_stats_csv(const RegimeTrajectories& rt);
std::string shocks_csv(const ShockTable& table);

}  // namespace regime_kit
