#include <doctest.h>

#include <fstream>
#include <random>

#include <boost/math/distributions/fisher_f.hpp>

#include "oracles.hpp"
#include "regime_kit/error.hpp"
#include "regime_kit/stats_si.hpp"

using namespace regime_kit;

namespace {

/// RSS of y on the full set of indicator columns, solved by complete
/// orthogonal decomposition (rank-deficient designs welcome).
double rss_with_indicators(const Eigen::VectorXd& y, const std::vector<std::vector<int>>& factors) {
  std::vector<Eigen::VectorXd> cols{Eigen::VectorXd::Ones(y.size())};
  for (const auto& f : factors) {
    const int levels = *std::max_element(f.begin(), f.end()) + 1;
    for (int l = 0; l < levels; ++l) {
      Eigen::VectorXd c(y.size());
      for (Eigen::Index i = 0; i < y.size(); ++i) c(i) = f[static_cast<std::size_t>(i)] == l ? 1.0 : 0.0;
      cols.push_back(c);
    }
  }
  Eigen::MatrixXd x(y.size(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) x.col(static_cast<Eigen::Index>(c)) = cols[c];
  const Eigen::VectorXd beta = x.completeOrthogonalDecomposition().solve(y);
  return (y - x * beta).squaredNorm();
}

}  // namespace

TEST_SUITE("stats_si") {
  TEST_CASE("average ranks match the counting oracle") {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 200; ++t) {
      std::vector<double> x(static_cast<std::size_t>(std::uniform_int_distribution<int>(1, 30)(rng)));
      for (auto& v : x) v = std::uniform_int_distribution<int>(0, 5)(rng);
      const auto r = average_ranks(x);
      const auto o = oracle::average_ranks(x);
      for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(r(static_cast<Eigen::Index>(i)) - o[i]) < 1e-12);
    }
  }

  TEST_CASE("Spearman on monotone data and its t-based p-value") {
    const std::vector<double> x{1, 2, 3, 4, 5, 6};
    const std::vector<double> y{1, 4, 9, 16, 25, 36};
    CHECK(spearman(x, y).rho == 1.0);
    CHECK(spearman(x, y).p_value == 0.0);
    const std::vector<double> rev{6, 5, 4, 3, 2, 1};
    CHECK(spearman(x, rev).rho == -1.0);
    const std::vector<double> z{2, 1, 4, 3, 6, 5};
    const auto s = spearman(x, z);
    const double rho = 1.0 - 6.0 * 6.0 / (6.0 * 35.0);
    CHECK(s.rho == doctest::Approx(rho));
    CHECK(s.n == 6);
    CHECK(s.p_value > 0.0);
    CHECK(s.p_value < 1.0);
    CHECK_THROWS_AS(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2}), InputError);
  }

  TEST_CASE("OLS line and pivoted least squares") {
    const std::vector<double> x{0, 1, 2, 3};
    const std::vector<double> y{1, 3, 5, 7};
    const auto fit = ols_line(x, y);
    CHECK(fit.intercept == doctest::Approx(1.0));
    CHECK(fit.slope == doctest::Approx(2.0));
    Eigen::MatrixXd d(4, 3);
    d << 1, 0, 1, 1, 1, 2, 1, 2, 3, 1, 3, 4;  // third column = first + second
    const Eigen::Vector4d target(1, 3, 5, 8);
    const auto ls = least_squares_rss(d, target);
    CHECK(ls.rank == 2);
    const Eigen::VectorXd beta = d.completeOrthogonalDecomposition().solve(target);
    CHECK(ls.rss == doctest::Approx((target - d * beta).squaredNorm()));
  }

  TEST_CASE("variance decomposition matches an indicator-regression oracle") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> normal;
    const int n = 120;
    std::vector<double> y(n);
    std::vector<std::string> countries(n);
    std::vector<int> regimes(n), country_idx(n);
    for (int i = 0; i < n; ++i) {
      country_idx[static_cast<std::size_t>(i)] = i % 6;
      countries[static_cast<std::size_t>(i)] = "C" + std::to_string(i % 6);
      regimes[static_cast<std::size_t>(i)] = (i / 6) % 4;
      y[static_cast<std::size_t>(i)] = 0.3 * (i % 6) + 0.5 * regimes[static_cast<std::size_t>(i)] + normal(rng);
    }
    const auto d = variance_decomposition(y, countries, regimes);
    const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    const double rss_r = rss_with_indicators(yv, {country_idx});
    const double rss_f = rss_with_indicators(yv, {country_idx, regimes});
    CHECK(d.rss_restricted == doctest::Approx(rss_r));
    CHECK(d.rss_full == doctest::Approx(rss_f));
    CHECK(d.df_numerator == 3);
    CHECK(d.df_denominator == n - 1 - 5 - 3);
    CHECK(d.partial_eta_squared == doctest::Approx((rss_r - rss_f) / rss_r));
    const double f = ((rss_r - rss_f) / 3) / (rss_f / (n - 9));
    CHECK(d.f_statistic == doctest::Approx(f));
    CHECK(d.p_value == doctest::Approx(boost::math::cdf(boost::math::complement(boost::math::fisher_f(3, n - 9), f))));
  }

  TEST_CASE("countries confined to one regime are left out") {
    const std::vector<double> y{1, 2, 3, 4, 5, 6, 7};
    const std::vector<std::string> c{"A", "A", "A", "A", "B", "B", "B"};
    const std::vector<int> r{0, 1, 0, 1, 2, 2, 2};
    const auto d = variance_decomposition(y, c, r);
    CHECK(d.n_observations == 4);
    CHECK(d.n_countries == 1);
    CHECK_THROWS_AS(variance_decomposition(y, c, std::vector<int>(7, 0)), NumericalError);
  }

  TEST_CASE("within-country dispersion averages the yearly sample sd") {
    GrowthMatrix gm;
    gm.entities = {{"a", "X", {}}, {"b", "X", {}}, {"c", "X", {}}, {"d", "Y", {}}};
    gm.growth_years = {2001, 2002};
    gm.g.resize(4, 2);
    gm.g << 1, 0, 2, 0, 3, 6, 9, 9;
    gm.valid = BoolMatrix::Constant(4, 2, true);
    gm.complete.assign(4, true);
    const auto d = within_country_dispersion(gm);
    REQUIRE(d.size() == 1);
    CHECK(d[0].country_code == "X");
    CHECK(d[0].n_fuas == 3);
    CHECK(d[0].mean_dispersion == doctest::Approx((1.0 + std::sqrt(12.0)) / 2.0));
  }

  TEST_CASE("industrialization table parsing") {
    const auto path = std::filesystem::temp_directory_path() / "rk_ind_test.csv";
    {
      std::ofstream(path) << "country_code,years_since_industrialization\nX,120\nY,40\n";
    }
    const auto m = load_industrialization_csv(path.string());
    CHECK(m.at("X") == 120.0);
    {
      std::ofstream(path) << "country,years\nX,1\n";
    }
    CHECK_THROWS_AS(load_industrialization_csv(path.string()), InputError);
    std::filesystem::remove(path);
  }
}
