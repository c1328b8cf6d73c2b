#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "regime_kit/error.hpp"
#include "regime_kit/propagation.hpp"
#include "regime_kit/regimes.hpp"

using namespace regime_kit;

namespace {

std::vector<double> row(const Eigen::MatrixXd& m, Eigen::Index r) { return {m.row(r).begin(), m.row(r).end()}; }

Eigen::MatrixXd noise(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(rows, cols);
  for (auto& v : x.reshaped()) v = normal(rng);
  return x;
}

}  // namespace

TEST_SUITE("propagation") {
  TEST_CASE("lagged correlation matches the Pearson oracle") {
    const auto x = noise(2, 26, 1);
    for (int lag = 0; lag <= 5; ++lag) {
      const auto full = lagged_correlation(x.row(0), x.row(1), lag, MeanMode::FullSeries);
      const auto overlap = lagged_correlation(x.row(0), x.row(1), lag, MeanMode::Overlap);
      CHECK(full.n == 26 - lag);
      CHECK(full.rho == doctest::Approx(oracle::lagged_pearson(row(x, 0), row(x, 1), lag, true)).epsilon(1e-12));
      CHECK(overlap.rho == doctest::Approx(oracle::lagged_pearson(row(x, 0), row(x, 1), lag, false)).epsilon(1e-12));
    }
  }

  TEST_CASE("degenerate and short inputs") {
    const Eigen::VectorXd flat = Eigen::VectorXd::Constant(10, 2.0);
    const Eigen::VectorXd ramp = Eigen::VectorXd::LinSpaced(10, 0, 9);
    CHECK_FALSE(lagged_correlation(flat, ramp, 1).defined);
    CHECK_THROWS_AS(lagged_correlation(ramp, ramp, 8), InputError);
    CHECK_THROWS_AS(lagged_correlation(ramp, Eigen::VectorXd::Zero(9), 0), InputError);
    CHECK(lagged_correlation(ramp, ramp, 0).rho == doctest::Approx(1.0));
  }

  TEST_CASE("significance threshold constant") {
    CHECK(normal_critical_value(0.05) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(std::round(correlation_threshold(23, 0.05) * 1e4) / 1e4 == 0.4087);
  }

  TEST_CASE("median role split") {
    Eigen::VectorXd out(4), in(4);
    out << 3, 0, 1, 2;
    in << 0, 3, 2, 1;
    const auto roles = classify_roles(out, in);
    CHECK(roles[0] == Role::Exporter);
    CHECK(roles[1] == Role::Absorber);
    CHECK(roles[2] == Role::Absorber);
    CHECK(roles[3] == Role::Exporter);
    Eigen::VectorXd both(3);
    both << 5, 0, 0;
    const auto r2 = classify_roles(both, both);
    CHECK(r2[0] == Role::Amplifier);
    CHECK(r2[1] == Role::Buffer);
  }

  TEST_CASE("a planted lag-2 dependence becomes an edge and strengths add up") {
    auto x = noise(3, 26, 3);
    for (Eigen::Index t = 2; t < 26; ++t) x(1, t) = 0.9 * x(0, t - 2) + 0.1 * x(1, t);
    const auto net = build_network(x, {0, 1, 2}, {10, 10, 10}, {});
    CHECK(net.tests.size() == 3 * 2 * 4);
    const auto it = std::find_if(net.edges.begin(), net.edges.end(),
                                 [](const auto& e) { return e.source == 0 && e.target == 1 && e.lag == 2; });
    CHECK(it != net.edges.end());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(3), in = Eigen::VectorXd::Zero(3);
    for (const auto& t : net.tests) {
      const double limit = correlation_threshold(t.corr.n, 0.05);
      CHECK(t.significant == (t.corr.defined && std::abs(t.corr.rho) > limit));
      if (!t.significant) continue;
      out(t.source) += t.corr.rho;
      in(t.target) += t.corr.rho;
    }
    CHECK((out - net.out_strength).norm() < 1e-12);
    CHECK((in - net.in_strength).norm() < 1e-12);
    CHECK((net.net_export - (out - in)).norm() < 1e-12);
  }

  TEST_CASE("small regimes are excluded") {
    const auto x = noise(3, 20, 4);
    NetworkOptions opt;
    opt.min_members = 5;
    std::vector<int> labels;
    Eigen::MatrixXd members(22, 20);
    for (int i = 0; i < 22; ++i) {
      const int c = i < 10 ? 0 : (i < 12 ? 1 : 2);
      labels.push_back(c);
      members.row(i) = x.row(c);
    }
    const auto rt = regime_trajectories(members, labels, std::vector<int>(20, 0));
    const auto net = build_network(rt, opt);
    CHECK(net.nodes == std::vector<int>{0, 2});
    CHECK(net.excluded == std::vector<int>{1});
  }

  TEST_CASE("edge counting modes") {
    PropagationNetwork net;
    net.edges = {{0, 1, 1, {}, true}, {0, 1, 2, {}, true}, {1, 0, 3, {}, true}, {2, 0, 0, {}, true}};
    CHECK(count_edges(net, EdgeCountMode::Ordered) == 4);
    CHECK(count_edges(net, EdgeCountMode::UnorderedMax) == 2);
    CHECK_THROWS_AS(parse_edge_count_mode("all"), InputError);
  }

  TEST_CASE("network null is reproducible and its p-value follows the count rule") {
    const auto x = noise(5, 26, 6);
    const auto a = network_null(x, {}, 200, 77);
    const auto b = network_null(x, {}, 200, 77, EdgeCountMode::Ordered, 4);
    CHECK(a.null_counts == b.null_counts);
    const auto at_least = std::count_if(a.null_counts.begin(), a.null_counts.end(),
                                        [&](auto c) { return c >= a.observed; });
    CHECK(a.p_value == doctest::Approx((1.0 + at_least) / 201.0));
  }

  TEST_CASE("haversine distances") {
    CHECK(haversine_km({0, 0}, {180, 0}) == doctest::Approx(kEarthRadiusKm * M_PI));
    CHECK(haversine_km({0, 0}, {180, 0}) == doctest::Approx(20015.1).epsilon(1e-5));
    CHECK(haversine_km({10, 50}, {10, 50}) == 0.0);
    CHECK(haversine_km({0, 90}, {0, -90}) == doctest::Approx(kEarthRadiusKm * M_PI));
    CHECK(haversine_km({-73.9, 40.7}, {2.35, 48.85}) == doctest::Approx(haversine_km({2.35, 48.85}, {-73.9, 40.7})));
  }

  TEST_CASE("spatial decay uses member centroids") {
    const auto x = noise(2, 20, 8);
    const auto net = build_network(x, {0, 1}, {2, 1}, {});
    std::vector<EntityMeta> entities{{"a", "X", GeoPoint{0, 0}}, {"b", "X", GeoPoint{2, 0}}, {"c", "X", GeoPoint{1, 10}}};
    const auto table = spatial_decay(net, entities, std::vector<int>{0, 0, 1});
    REQUIRE(table.rows.size() == 1);
    CHECK(table.rows[0].distance_km == doctest::Approx(haversine_km({1, 0}, {1, 10})));
    double best = 0.0;
    for (const auto& t : net.tests) best = std::max(best, std::abs(t.corr.rho));
    CHECK(table.rows[0].max_abs_rho == doctest::Approx(best));
  }
}
