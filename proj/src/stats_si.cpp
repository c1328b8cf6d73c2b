#include "regime_kit/stats_si.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "regime_kit/error.hpp"
#include "regime_kit/io.hpp"

namespace regime_kit {

std::vector<DispersionRecord> within_country_dispersion(const GrowthMatrix& gm) {
  std::map<std::string, std::vector<Eigen::Index>> members;
  for (std::size_t i = 0; i < gm.rows(); ++i) {
    if (gm.complete[i]) members[gm.entities[i].country_code].push_back(static_cast<Eigen::Index>(i));
  }
  std::vector<DispersionRecord> out;
  for (const auto& [country, rows] : members) {
    if (rows.size() < 2) continue;
    double total = 0.0;
    for (Eigen::Index t = 0; t < gm.g.cols(); ++t) {
      double mean = 0.0;
      for (auto r : rows) mean += gm.g(r, t);
      mean /= static_cast<double>(rows.size());
      double ss = 0.0;
      for (auto r : rows) ss += (gm.g(r, t) - mean) * (gm.g(r, t) - mean);
      total += std::sqrt(ss / static_cast<double>(rows.size() - 1));
    }
    out.push_back({country, rows.size(), total / static_cast<double>(gm.g.cols())});
  }
  return out;
}

Eigen::VectorXd average_ranks(std::span<const double> x) {
  const auto n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  Eigen::VectorXd ranks(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t m = i; m <= j; ++m) ranks(static_cast<Eigen::Index>(order[m])) = rank;
    i = j + 1;
  }
  return ranks;
}

SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("spearman inputs differ in length");
  if (x.size() < 3) throw InputError("spearman needs at least three observations");
  const Eigen::VectorXd rx = average_ranks(x);
  const Eigen::VectorXd ry = average_ranks(y);
  const Eigen::VectorXd dx = rx.array() - rx.mean();
  const Eigen::VectorXd dy = ry.array() - ry.mean();
  const double sxx = dx.squaredNorm();
  const double syy = dy.squaredNorm();
  if (!(sxx > 0.0) || !(syy > 0.0)) throw NumericalError("spearman is undefined for constant input");
  SpearmanResult r;
  r.n = x.size();
  r.rho = std::clamp(dx.dot(dy) / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(r.n) - 2.0;
  if (std::abs(r.rho) >= 1.0) {
    r.p_value = 0.0;
  } else {
    const double t = r.rho * std::sqrt(df / (1.0 - r.rho * r.rho));
    r.p_value = 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t(df), std::abs(t)));
  }
  return r;
}

LinearFit ols_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("ols_line needs two equal-length samples");
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
  const Eigen::VectorXd dx = xv.array() - xv.mean();
  const double sxx = dx.squaredNorm();
  if (!(sxx > 0.0)) throw NumericalError("ols_line is undefined for constant x");
  LinearFit fit;
  fit.slope = dx.dot(yv) / sxx;
  fit.intercept = yv.mean() - fit.slope * xv.mean();
  return fit;
}

LeastSquaresFit least_squares_rss(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  LeastSquaresFit fit;
  fit.rank = qr.rank();
  const Eigen::VectorXd beta = qr.solve(y);
  fit.rss = (y - design * beta).squaredNorm();
  return fit;
}

namespace {

// Intercept plus one indicator per level except the first (in sorted order).
template <typename Key>
void add_indicators(Eigen::MatrixXd& x, Eigen::Index& col, const std::vector<Key>& levels_of_row) {
  const std::set<Key> levels(levels_of_row.begin(), levels_of_row.end());
  std::map<Key, Eigen::Index> column;
  for (auto it = std::next(levels.begin()); it != levels.end(); ++it) column[*it] = col++;
  for (std::size_t r = 0; r < levels_of_row.size(); ++r) {
    const auto found = column.find(levels_of_row[r]);
    if (found != column.end()) x(static_cast<Eigen::Index>(r), found->second) = 1.0;
  }
}

template <typename Key>
std::size_t count_levels(const std::vector<Key>& v) {
  return std::set<Key>(v.begin(), v.end()).size();
}

VarianceDecomposition nested_f_test(const Eigen::VectorXd& y, const std::vector<std::vector<int>>& restricted_factors,
                                    const std::vector<int>& regime) {
  const auto n = y.size();
  Eigen::Index restricted_cols = 1;
  for (const auto& f : restricted_factors) restricted_cols += static_cast<Eigen::Index>(count_levels(f)) - 1;
  const Eigen::Index full_cols = restricted_cols + static_cast<Eigen::Index>(count_levels(regime)) - 1;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, full_cols);
  x.col(0).setOnes();
  Eigen::Index col = 1;
  for (const auto& f : restricted_factors) add_indicators(x, col, f);
  add_indicators(x, col, regime);

  const auto restricted = least_squares_rss(x.leftCols(restricted_cols), y);
  const auto full = least_squares_rss(x, y);

  VarianceDecomposition d;
  d.n_observations = static_cast<std::size_t>(n);
  d.rss_restricted = restricted.rss;
  d.rss_full = std::min(full.rss, restricted.rss);
  d.df_numerator = static_cast<int>(full.rank - restricted.rank);
  d.df_denominator = static_cast<int>(n - full.rank);
  if (full.rank < full_cols) {
    d.warnings.push_back(std::to_string(full_cols - full.rank) +
                         " collinear indicator column(s) dropped; numerator df reduced accordingly");
  }
  if (d.df_numerator <= 0) throw NumericalError("regime indicators add no rank beyond country effects");
  if (d.df_denominator <= 0) throw NumericalError("no residual degrees of freedom in the full model");
  if (!(d.rss_restricted > 0.0)) throw NumericalError("restricted model fits exactly; decomposition undefined");
  const double gain = d.rss_restricted - d.rss_full;
  d.partial_eta_squared = gain / d.rss_restricted;
  if (d.rss_full > 0.0) {
    d.f_statistic = (gain / d.df_numerator) / (d.rss_full / d.df_denominator);
    d.p_value = boost::math::cdf(boost::math::complement(
        boost::math::fisher_f(d.df_numerator, d.df_denominator), d.f_statistic));
  } else {
    d.f_statistic = std::numeric_limits<double>::infinity();
    d.p_value = 0.0;
  }
  return d;
}

// Keeps rows of countries whose rows span at least two regimes.
std::vector<std::size_t> multi_regime_rows(std::span<const std::string> countries, std::span<const int> regimes) {
  std::map<std::string, std::set<int>> spans;
  for (std::size_t i = 0; i < countries.size(); ++i) spans[countries[i]].insert(regimes[i]);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < countries.size(); ++i) {
    if (spans[countries[i]].size() >= 2) rows.push_back(i);
  }
  return rows;
}

std::vector<int> code_strings(const std::vector<std::string>& s) {
  std::map<std::string, int> ids;
  for (const auto& v : s) ids.try_emplace(v, 0);
  int next = 0;
  for (auto& [k, v] : ids) v = next++;
  std::vector<int> out;
  for (const auto& v : s) out.push_back(ids[v]);
  return out;
}

}  // namespace

VarianceDecomposition variance_decomposition(std::span<const double> outcome, std::span<const std::string> countries,
                                             std::span<const int> regimes) {
  if (outcome.size() != countries.size() || outcome.size() != regimes.size()) {
    throw InputError("variance decomposition inputs differ in length");
  }
  const auto rows = multi_regime_rows(countries, regimes);
  if (rows.empty()) throw NumericalError("no country spans two or more regimes");
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  std::vector<std::string> country;
  std::vector<int> regime;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    y(static_cast<Eigen::Index>(r)) = outcome[rows[r]];
    country.push_back(countries[rows[r]]);
    regime.push_back(regimes[rows[r]]);
  }
  auto d = nested_f_test(y, {code_strings(country)}, regime);
  d.n_countries = count_levels(country);
  d.n_regimes = count_levels(regime);
  return d;
}

VarianceDecomposition variance_decomposition_panel(const GrowthMatrix& gm, std::span<const int> regimes) {
  if (regimes.size() != gm.rows()) throw InputError("labels must cover every row");
  std::vector<std::string> countries;
  for (const auto& e : gm.entities) countries.push_back(e.country_code);
  const auto rows = multi_regime_rows(countries, regimes);
  if (rows.empty()) throw NumericalError("no country spans two or more regimes");
  const auto t = gm.g.cols();
  const auto n = static_cast<Eigen::Index>(rows.size()) * t;
  Eigen::VectorXd y(n);
  std::vector<std::string> country;
  std::vector<int> year;
  std::vector<int> regime;
  Eigen::Index obs = 0;
  for (auto r : rows) {
    for (Eigen::Index c = 0; c < t; ++c) {
      y(obs++) = gm.g(static_cast<Eigen::Index>(r), c);
      country.push_back(countries[r]);
      year.push_back(gm.growth_years[static_cast<std::size_t>(c)]);
      regime.push_back(regimes[r]);
    }
  }
  if (!y.allFinite()) throw InputError("panel decomposition needs complete growth rows");
  auto d = nested_f_test(y, {code_strings(country), year}, regime);
  d.n_countries = count_levels(country);
  d.n_regimes = count_levels(regime);
  return d;
}

std::map<std::string, double> load_industrialization_csv(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line)) throw InputError("'" + path + "' is empty");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "country_code" || header[1] != "years_since_industrialization") {
    throw InputError("'" + path + "' must start with header country_code,years_since_industrialization");
  }
  std::map<std::string, double> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    const auto v = f.size() >= 2 ? parse_double(f[1]) : std::nullopt;
    if (!v) throw InputError("'" + path + "' line " + std::to_string(line_no) + ": malformed record");
    if (!out.emplace(f[0], *v).second) throw InputError("'" + path + "': duplicate country " + f[0]);
  }
  return out;
}

std::string dispersion_csv(const std::vector<DispersionRecord>& records) {
  std::string out = "country_code,n_fuas,mean_dispersion\n";
  for (const auto& r : records) {
    out += r.country_code + "," + std::to_string(r.n_fuas) + "," + format_double(r.mean_dispersion) + "\n";
  }
  return out;
}

nlohmann::json to_json(const VarianceDecomposition& d) {
  return {{"rss_restricted", d.rss_restricted},
          {"rss_full", d.rss_full},
          {"f_statistic", d.f_statistic},
          {"df_numerator", d.df_numerator},
          {"df_denominator", d.df_denominator},
          {"p_value", d.p_value},
          {"partial_eta_squared", d.partial_eta_squared},
          {"n_observations", d.n_observations},
          {"n_countries", d.n_countries},
          {"n_regimes", d.n_regimes},
          {"warnings", d.warnings}};
}

}  // namespace regime_kit
