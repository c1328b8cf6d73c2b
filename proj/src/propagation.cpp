#include "regime_kit/propagation.hpp"

#include <algorithm>
#include <map>
#include <numbers>
#include <numeric>
#include <set>

#include <boost/math/distributions/normal.hpp>

#include "regime_kit/io.hpp"
#include "regime_kit/parallel.hpp"
#include "regime_kit/rng.hpp"

namespace regime_kit {

namespace {

double median(Eigen::VectorXd v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v(n / 2) : 0.5 * (v(n / 2 - 1) + v(n / 2));
}

std::string to_string(MeanMode mode) { return mode == MeanMode::FullSeries ? "full-series" : "overlap"; }

}  // namespace

double normal_critical_value(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  return boost::math::quantile(boost::math::complement(boost::math::normal(), alpha / 2.0));
}

std::string to_string(Role role) {
  switch (role) {
    case Role::Exporter: return "Exporter";
    case Role::Absorber: return "Absorber";
    case Role::Amplifier: return "Amplifier";
    case Role::Buffer: return "Buffer";
  }
  return "?";
}

std::vector<Role> classify_roles(const Eigen::VectorXd& out_strength, const Eigen::VectorXd& in_strength) {
  if (out_strength.size() != in_strength.size()) throw InputError("Out and In strengths differ in length");
  if (out_strength.size() < 2) throw InputError("role classification needs at least two nodes");
  const double out_median = median(out_strength);
  const double in_median = median(in_strength);
  std::vector<Role> roles;
  for (Eigen::Index c = 0; c < out_strength.size(); ++c) {
    const bool high_out = out_strength(c) > out_median;
    const bool high_in = in_strength(c) > in_median;
    roles.push_back(high_out ? (high_in ? Role::Amplifier : Role::Exporter)
                             : (high_in ? Role::Absorber : Role::Buffer));
  }
  return roles;
}

PropagationNetwork build_network(const Eigen::MatrixXd& series, std::vector<int> node_ids,
                                 std::vector<std::size_t> node_members, const NetworkOptions& opt) {
  if (opt.tau_max < 0) throw InputError("tau_max must be non-negative");
  if (series.rows() < 2) throw InputError("the propagation network needs at least two regimes");
  if (static_cast<Eigen::Index>(node_ids.size()) != series.rows()) throw InputError("node ids mismatch");
  if (series.cols() < opt.tau_max + 3) throw InputError("series too short for tau_max");
  const double z = normal_critical_value(opt.alpha);

  PropagationNetwork net;
  net.nodes = std::move(node_ids);
  net.node_members = std::move(node_members);
  net.tau_max = opt.tau_max;
  net.alpha = opt.alpha;
  net.min_members = opt.min_members;
  net.mean_mode = opt.mean_mode;
  const auto k = series.rows();
  net.out_strength = Eigen::VectorXd::Zero(k);
  net.in_strength = Eigen::VectorXd::Zero(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) {
      if (a == b) continue;
      for (int lag = 0; lag <= opt.tau_max; ++lag) {
        CorrelationTest test;
        test.source = net.nodes[static_cast<std::size_t>(a)];
        test.target = net.nodes[static_cast<std::size_t>(b)];
        test.lag = lag;
        test.corr = lagged_correlation(series.row(a), series.row(b), lag, opt.mean_mode);
        if (!test.corr.defined) {
          net.warnings.push_back("correlation " + std::to_string(test.source) + "->" + std::to_string(test.target) +
                                 " at lag " + std::to_string(lag) + " undefined (zero variance); skipped");
        } else {
          test.significant = std::abs(test.corr.rho) > z / std::sqrt(static_cast<double>(test.corr.n));
        }
        if (test.significant) {
          net.out_strength(a) += test.corr.rho;
          net.in_strength(b) += test.corr.rho;
          net.edges.push_back(test);
        }
        net.tests.push_back(test);
      }
    }
  }
  net.net_export = net.out_strength - net.in_strength;
  net.roles = classify_roles(net.out_strength, net.in_strength);
  return net;
}

PropagationNetwork build_network(const RegimeTrajectories& rt, const NetworkOptions& opt) {
  std::vector<Eigen::Index> keep;
  std::vector<int> excluded;
  for (std::size_t c = 0; c < rt.size(); ++c) {
    (rt.member_counts[c] >= opt.min_members ? keep.push_back(static_cast<Eigen::Index>(c))
                                            : excluded.push_back(rt.cluster_ids[c]));
  }
  if (keep.size() < 2) throw InputError("fewer than two regimes meet min_members");
  Eigen::MatrixXd series(static_cast<Eigen::Index>(keep.size()), rt.mean_growth.cols());
  std::vector<int> ids;
  std::vector<std::size_t> members;
  for (std::size_t r = 0; r < keep.size(); ++r) {
    series.row(static_cast<Eigen::Index>(r)) = rt.mean_growth.row(keep[r]);
    ids.push_back(rt.cluster_ids[static_cast<std::size_t>(keep[r])]);
    members.push_back(rt.member_counts[static_cast<std::size_t>(keep[r])]);
  }
  auto net = build_network(series, std::move(ids), std::move(members), opt);
  net.excluded = std::move(excluded);
  return net;
}

EdgeCountMode parse_edge_count_mode(const std::string& name) {
  if (name == "ordered") return EdgeCountMode::Ordered;
  if (name == "unordered-max") return EdgeCountMode::UnorderedMax;
  throw InputError("unknown edge count mode '" + name + "' (expected ordered or unordered-max)");
}

std::string to_string(EdgeCountMode mode) { return mode == EdgeCountMode::Ordered ? "ordered" : "unordered-max"; }

std::size_t count_edges(const PropagationNetwork& net, EdgeCountMode mode) {
  if (mode == EdgeCountMode::Ordered) return net.edges.size();
  std::set<std::pair<int, int>> pairs;
  for (const auto& e : net.edges) pairs.emplace(std::min(e.source, e.target), std::max(e.source, e.target));
  return pairs.size();
}

NetworkNullReport network_null(const Eigen::MatrixXd& series, const NetworkOptions& opt, int n_permutations,
                               std::uint64_t master_seed, EdgeCountMode mode, unsigned threads) {
  if (n_permutations < 1) throw InputError("network_null needs at least one permutation");
  std::vector<int> ids(static_cast<std::size_t>(series.rows()));
  std::iota(ids.begin(), ids.end(), 0);
  const std::vector<std::size_t> members(ids.size(), 0);
  const auto observed = build_network(series, ids, members, opt);

  NetworkNullReport report;
  report.n_permutations = n_permutations;
  report.mode = mode;
  report.master_seed = master_seed;
  report.observed = count_edges(observed, mode);
  report.null_counts.assign(static_cast<std::size_t>(n_permutations), 0);
  parallel_for(report.null_counts.size(), threads, [&](std::size_t p) {
    auto rng = make_engine(derive_seed(master_seed, {stream::kNetworkNull, p}));
    Eigen::MatrixXd shuffled = series;
    for (Eigen::Index r = 0; r < shuffled.rows(); ++r) {
      auto row = shuffled.row(r);
      std::shuffle(row.begin(), row.end(), rng);
    }
    report.null_counts[p] = count_edges(build_network(shuffled, ids, members, opt), mode);
  });

  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t at_least = 0;
  for (auto c : report.null_counts) {
    sum += static_cast<double>(c);
    if (c >= report.observed) ++at_least;
  }
  report.null_mean = sum / n_permutations;
  for (auto c : report.null_counts) sum_sq += (static_cast<double>(c) - report.null_mean) * (static_cast<double>(c) - report.null_mean);
  report.null_sd = n_permutations > 1 ? std::sqrt(sum_sq / (n_permutations - 1)) : 0.0;
  report.p_value = (1.0 + static_cast<double>(at_least)) / (1.0 + n_permutations);
  return report;
}

NetworkNullReport network_null(const PropagationNetwork& observed, const RegimeTrajectories& rt, int n_permutations,
                               std::uint64_t master_seed, EdgeCountMode mode, unsigned threads) {
  Eigen::MatrixXd series(static_cast<Eigen::Index>(observed.nodes.size()), rt.mean_growth.cols());
  for (std::size_t r = 0; r < observed.nodes.size(); ++r) {
    const auto it = std::find(rt.cluster_ids.begin(), rt.cluster_ids.end(), observed.nodes[r]);
    if (it == rt.cluster_ids.end()) throw InputError("network node missing from regime trajectories");
    series.row(static_cast<Eigen::Index>(r)) = rt.mean_growth.row(it - rt.cluster_ids.begin());
  }
  const NetworkOptions opt{observed.tau_max, observed.alpha, observed.min_members, observed.mean_mode};
  return network_null(series, opt, n_permutations, master_seed, mode, threads);
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  constexpr double rad = std::numbers::pi / 180.0;
  const double dlat = (b.latitude - a.latitude) * rad;
  const double dlon = (b.longitude - a.longitude) * rad;
  const double h = std::pow(std::sin(dlat / 2.0), 2) +
                   std::cos(a.latitude * rad) * std::cos(b.latitude * rad) * std::pow(std::sin(dlon / 2.0), 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

SpatialDecayTable spatial_decay(const PropagationNetwork& net, const std::vector<EntityMeta>& entities,
                                std::span<const int> labels) {
  if (entities.size() != labels.size()) throw InputError("labels must cover every entity");
  std::map<int, std::pair<GeoPoint, std::size_t>> sums;
  for (std::size_t i = 0; i < entities.size(); ++i) {
    if (!entities[i].location) continue;
    auto& [acc, count] = sums[labels[i]];
    acc.longitude += entities[i].location->longitude;
    acc.latitude += entities[i].location->latitude;
    ++count;
  }
  SpatialDecayTable table;
  std::vector<std::pair<int, GeoPoint>> centroids;
  for (int node : net.nodes) {
    const auto it = sums.find(node);
    if (it == sums.end()) {
      table.warnings.push_back("cluster " + std::to_string(node) + " has no coordinates; excluded from spatial decay");
      continue;
    }
    const auto n = static_cast<double>(it->second.second);
    centroids.emplace_back(node, GeoPoint{it->second.first.longitude / n, it->second.first.latitude / n});
  }
  std::map<std::pair<int, int>, double> max_rho;
  for (const auto& t : net.tests) {
    if (!t.corr.defined) continue;
    auto& m = max_rho.try_emplace({std::min(t.source, t.target), std::max(t.source, t.target)}, 0.0).first->second;
    m = std::max(m, std::abs(t.corr.rho));
  }
  for (std::size_t a = 0; a < centroids.size(); ++a) {
    for (std::size_t b = a + 1; b < centroids.size(); ++b) {
      SpatialDecayRow row;
      row.cluster_a = centroids[a].first;
      row.cluster_b = centroids[b].first;
      row.distance_km = haversine_km(centroids[a].second, centroids[b].second);
      const auto it = max_rho.find({std::min(row.cluster_a, row.cluster_b), std::max(row.cluster_a, row.cluster_b)});
      row.max_abs_rho = it == max_rho.end() ? std::nan("") : it->second;
      table.rows.push_back(row);
    }
  }
  return table;
}

nlohmann::json to_json(const PropagationNetwork& net) {
  nlohmann::json j;
  j["tau_max"] = net.tau_max;
  j["alpha"] = net.alpha;
  j["critical_value"] = normal_critical_value(net.alpha);
  j["mean_mode"] = to_string(net.mean_mode);
  j["min_members"] = net.min_members;
  j["excluded_clusters"] = net.excluded;
  j["warnings"] = net.warnings;
  auto& thresholds = j["thresholds"] = nlohmann::json::array();
  const int len = net.tests.empty() ? 0 : net.tests.front().corr.n;
  for (int lag = 0; lag <= net.tau_max && len > 0; ++lag) {
    thresholds.push_back({{"lag", lag}, {"n", len - lag}, {"threshold", correlation_threshold(len - lag, net.alpha)}});
  }
  auto& nodes = j["nodes"] = nlohmann::json::array();
  for (std::size_t c = 0; c < net.nodes.size(); ++c) {
    const auto r = static_cast<Eigen::Index>(c);
    nodes.push_back({{"cluster", net.nodes[c]},
                     {"members", net.node_members[c]},
                     {"out", net.out_strength(r)},
                     {"in", net.in_strength(r)},
                     {"net_export", net.net_export(r)},
                     {"role", to_string(net.roles[c])}});
  }
  auto& edges = j["edges"] = nlohmann::json::array();
  for (const auto& e : net.edges) {
    edges.push_back({{"source", e.source},
                     {"target", e.target},
                     {"lag", e.lag},
                     {"rho", e.corr.rho},
                     {"n", e.corr.n},
                     {"undirected", e.lag == 0}});
  }
  j["edge_count_ordered"] = count_edges(net, EdgeCountMode::Ordered);
  j["edge_count_unordered_max"] = count_edges(net, EdgeCountMode::UnorderedMax);
  return j;
}

nlohmann::json to_json(const NetworkNullReport& report) {
  std::map<std::size_t, std::size_t> histogram;
  for (auto c : report.null_counts) ++histogram[c];
  auto hist = nlohmann::json::array();
  for (const auto& [count, freq] : histogram) hist.push_back({{"edges", count}, {"frequency", freq}});
  return {{"n_permutations", report.n_permutations},
          {"null_counts", report.null_counts},
          {"histogram", hist},
          {"null_mean", report.null_mean},
          {"null_sd", report.null_sd},
          {"observed", report.observed},
          {"p_value", report.p_value},
          {"edge_count_mode", to_string(report.mode)},
          {"master_seed", report.master_seed},
          {"rng", std::string(kRngName)}};
}

std::string spatial_decay_csv(const SpatialDecayTable& table) {
  std::string out = "cluster_a,cluster_b,distance_km,max_abs_rho\n";
  for (const auto& r : table.rows) {
    out += std::to_string(r.cluster_a) + "," + std::to_string(r.cluster_b) + "," + format_double(r.distance_km) + "," +
           format_double(r.max_abs_rho) + "\n";
  }
  return out;
}

}  // namespace regime_kit
