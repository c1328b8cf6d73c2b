#include "regime_kit/regimes.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "regime_kit/error.hpp"
#include "regime_kit/io.hpp"

namespace regime_kit {

RegimeTrajectories regime_trajectories(const Eigen::MatrixXd& growth, std::span<const int> labels,
                                       std::vector<int> growth_years) {
  if (static_cast<Eigen::Index>(labels.size()) != growth.rows()) throw InputError("labels must cover every row");
  if (static_cast<Eigen::Index>(growth_years.size()) != growth.cols()) throw InputError("growth years mismatch");
  if (!growth.allFinite()) throw InputError("regime trajectories need complete growth rows");
  if (growth.cols() < 2) throw InputError("regime trajectories need at least two growth years");

  const std::set<int> ids(labels.begin(), labels.end());
  RegimeTrajectories rt;
  rt.cluster_ids.assign(ids.begin(), ids.end());
  rt.growth_years = std::move(growth_years);
  const auto k = static_cast<Eigen::Index>(rt.cluster_ids.size());
  rt.mean_growth = Eigen::MatrixXd::Zero(k, growth.cols());
  rt.member_counts.assign(static_cast<std::size_t>(k), 0);
  rt.country_counts.resize(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < growth.rows(); ++i) {
    const auto c = std::lower_bound(rt.cluster_ids.begin(), rt.cluster_ids.end(), labels[static_cast<std::size_t>(i)]) -
                   rt.cluster_ids.begin();
    rt.mean_growth.row(c) += growth.row(i);
    ++rt.member_counts[static_cast<std::size_t>(c)];
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    if (rt.member_counts[static_cast<std::size_t>(c)] == 0) throw InputError("empty cluster");
    rt.mean_growth.row(c) /= static_cast<double>(rt.member_counts[static_cast<std::size_t>(c)]);
  }
  const auto t = static_cast<double>(growth.cols());
  rt.mu = rt.mean_growth.rowwise().mean();
  rt.sigma = ((rt.mean_growth.colwise() - rt.mu).array().square().rowwise().sum() / (t - 1.0)).sqrt();
  return rt;
}

RegimeTrajectories regime_trajectories(const GrowthMatrix& gm, std::span<const int> labels) {
  auto rt = regime_trajectories(gm.g, labels, gm.growth_years);
  for (std::size_t i = 0; i < gm.rows(); ++i) {
    const auto c = std::lower_bound(rt.cluster_ids.begin(), rt.cluster_ids.end(), labels[i]) - rt.cluster_ids.begin();
    ++rt.country_counts[static_cast<std::size_t>(c)][gm.entities[i].country_code];
  }
  return rt;
}

PercentileMethod parse_percentile_method(const std::string& name) {
  if (name == "linear") return PercentileMethod::Linear;
  if (name == "nearest-rank") return PercentileMethod::NearestRank;
  throw InputError("unknown percentile method '" + name + "' (expected linear or nearest-rank)");
}

std::string to_string(PercentileMethod method) {
  return method == PercentileMethod::Linear ? "linear" : "nearest-rank";
}

double percentile(std::span<const double> values, double pct, PercentileMethod method) {
  if (values.empty()) throw InputError("percentile of an empty sample");
  if (!(pct > 0.0 && pct < 100.0)) throw InputError("percentile must lie in (0, 100)");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = sorted.size();
  if (method == PercentileMethod::NearestRank) {
    const auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(n)));
    return sorted[std::clamp<std::size_t>(rank, 1, n) - 1];
  }
  const double pos = (static_cast<double>(n) - 1.0) * pct / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, n - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

ShockTable detect_shocks(const RegimeTrajectories& rt, double lower_pct, double upper_pct, PercentileMethod method) {
  if (!(lower_pct > 0.0 && lower_pct < upper_pct && upper_pct < 100.0)) {
    throw InputError("shock percentiles must satisfy 0 < lower < upper < 100");
  }
  ShockTable table;
  table.lower_pct = lower_pct;
  table.upper_pct = upper_pct;
  table.method = method;
  for (std::size_t c = 0; c < rt.size(); ++c) {
    const auto row = static_cast<Eigen::Index>(c);
    const Eigen::VectorXd dev = (rt.mean_growth.row(row).array() - rt.mu(row)).transpose();
    const std::span<const double> d(dev.data(), static_cast<std::size_t>(dev.size()));
    ShockBounds b;
    b.cluster = rt.cluster_ids[c];
    b.lower = percentile(d, lower_pct, method);
    b.upper = percentile(d, upper_pct, method);
    b.degenerate = !(b.lower < b.upper);
    table.bounds.push_back(b);
    if (b.degenerate) continue;
    for (Eigen::Index t = 0; t < dev.size(); ++t) {
      const int year = rt.growth_years[static_cast<std::size_t>(t)];
      if (dev(t) <= b.lower) table.shocks.push_back({b.cluster, year, dev(t), ShockSign::Negative});
      if (dev(t) >= b.upper) table.shocks.push_back({b.cluster, year, dev(t), ShockSign::Positive});
    }
  }
  return table;
}

std::string trajectories_csv(const RegimeTrajectories& rt) {
  std::string out = "cluster,year,mean_growth\n";
  for (std::size_t c = 0; c < rt.size(); ++c) {
    for (std::size_t t = 0; t < rt.growth_years.size(); ++t) {
      out += std::to_string(rt.cluster_ids[c]) + "," + std::to_string(rt.growth_years[t]) + "," +
             format_double(rt.mean_growth(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t))) + "\n";
    }
  }
  return out;
}

std::string regime_stats_csv(const RegimeTrajectories& rt) {
  std::string out = "cluster,n_fuas,n_countries,mu,sigma\n";
  for (std::size_t c = 0; c < rt.size(); ++c) {
    const auto r = static_cast<Eigen::Index>(c);
    out += std::to_string(rt.cluster_ids[c]) + "," + std::to_string(rt.member_counts[c]) + "," +
           std::to_string(rt.country_counts.empty() ? 0 : rt.country_counts[c].size()) + "," + format_double(rt.mu(r)) +
           "," + format_double(rt.sigma(r)) + "\n";
  }
  return out;
}

std::string shocks_csv(const ShockTable& table) {
  std::string out = "cluster,year,deviation,sign\n";
  for (const auto& s : table.shocks) {
    out += std::to_string(s.cluster) + "," + std::to_string(s.year) + "," + format_double(s.deviation) + "," +
           (s.sign == ShockSign::Negative ? "negative" : "positive") + "\n";
  }
  return out;
}

}  // namespace regime_kit
