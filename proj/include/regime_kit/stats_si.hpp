#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "regime_kit/panel.hpp"

namespace regime_kit {

struct DispersionRecord {
  std::string country_code;
  std::size_t n_fuas = 0;
  double mean_dispersion = 0.0;  // time mean of the cross-sectional sample sd
};

/// Countries with at least two complete rows, sorted by country code.
std::vector<DispersionRecord> within_country_dispersion(const GrowthMatrix& gm);

/// Average ranks (1-based); ties share the mean of their positions.
Eigen::VectorXd average_ranks(std::span<const double> x);

struct SpearmanResult {
  double rho = 0.0;
  double p_value = 1.0;  // two-sided, Student t with n-2 df
  std::size_t n = 0;
};

SpearmanResult spearman(std::span<const double> x, std::span<const double> y);

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
};

/// Ordinary least squares of y on x.
LinearFit ols_line(std::span<const double> x, std::span<const double> y);

struct VarianceDecomposition {
  double rss_restricted = 0.0;
  double rss_full = 0.0;
  double f_statistic = 0.0;
  int df_numerator = 0;
  int df_denominator = 0;
  double p_value = 1.0;
  double partial_eta_squared = 0.0;
  std::size_t n_observations = 0;
  std::size_t n_countries = 0;
  std::size_t n_regimes = 0;
  std::vector<std::string> warnings;
};

/// Nested least-squares comparison: outcome on country indicators versus
/// country + regime indicators, over countries whose rows span at least two
/// regimes. Rank is found by column-pivoting QR, so collinear indicators are
/// dropped and the numerator df shrinks accordingly.
VarianceDecomposition variance_decomposition(std::span<const double> outcome, std::span<const std::string> countries,
                                             std::span<const int> regimes);

/// Entity x year variant: g[i][t] on country + year indicators, versus
/// country + year + regime indicators.
VarianceDecomposition variance_decomposition_panel(const GrowthMatrix& gm, std::span<const int> regimes);

/// Residual sum of squares of y regressed on X (with rank from pivoted QR).
struct LeastSquaresFit {
  double rss = 0.0;
  Eigen::Index rank = 0;
};
LeastSquaresFit least_squares_rss(const Eigen::MatrixXd& design, const Eigen::VectorXd& y);

/// country_code -> years since industrialization, from `country_code,years_since_industrialization`.
std::map<std::string, double> load_industrialization_csv(const std::string& path);

std::string dispersion_csv(const std::vector<DispersionRecord>& records);
nlohmann::json to_json(const VarianceDecomposition& d);

}  // namespace regime_kit
