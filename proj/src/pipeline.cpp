#include "regime_kit/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "regime_kit/error.hpp"
#include "regime_kit/io.hpp"
#include "regime_kit/rng.hpp"
#include "regime_kit/stats_si.hpp"
#include "regime_kit/zonal.hpp"

namespace regime_kit {

namespace {

std::string resolve(const std::string& p, const std::filesystem::path& base) {
  if (p.empty() || base.empty() || std::filesystem::path(p).is_absolute()) return p;
  return (base / p).lexically_normal().string();
}

std::string mean_mode_name(MeanMode m) { return m == MeanMode::FullSeries ? "full-series" : "overlap"; }

MeanMode parse_mean_mode(const std::string& s) {
  if (s == "full-series") return MeanMode::FullSeries;
  if (s == "overlap") return MeanMode::Overlap;
  throw InputError("unknown mean_mode '" + s + "' (expected full-series or overlap)");
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  try {
    RunConfig c;
    c.panel_path = resolve(doc.value("panel", c.panel_path), base_dir);
    c.raster_path = resolve(doc.value("raster", c.raster_path), base_dir);
    c.zones_path = resolve(doc.value("zones", c.zones_path), base_dir);
    c.industrialization_path = resolve(doc.value("industrialization", c.industrialization_path), base_dir);
    c.pca_threshold = doc.value("pca_threshold", c.pca_threshold);
    c.k_min = doc.value("k_min", c.k_min);
    c.k_max = doc.value("k_max", c.k_max);
    c.seeds = doc.value("seeds", c.seeds);
    c.n_init = doc.value("n_init", c.n_init);
    c.final_n_init = doc.value("final_n_init", c.final_n_init);
    c.max_iter = doc.value("max_iter", c.max_iter);
    c.tol = doc.value("tol", c.tol);
    c.shock_lower_pct = doc.value("shock_lower_pct", c.shock_lower_pct);
    c.shock_upper_pct = doc.value("shock_upper_pct", c.shock_upper_pct);
    c.percentile_method = parse_percentile_method(doc.value("percentile_method", to_string(c.percentile_method)));
    c.tau_max = doc.value("tau_max", c.tau_max);
    c.alpha = doc.value("alpha", c.alpha);
    c.min_members = doc.value("min_members", c.min_members);
    c.mean_mode = parse_mean_mode(doc.value("mean_mode", mean_mode_name(c.mean_mode)));
    c.edge_count_mode = parse_edge_count_mode(doc.value("edge_count_mode", to_string(c.edge_count_mode)));
    c.silhouette_null_perms = doc.value("silhouette_null_perms", c.silhouette_null_perms);
    c.network_null_perms = doc.value("network_null_perms", c.network_null_perms);
    c.master_seed = doc.value("master_seed", c.master_seed);
    c.panel_decomposition = doc.value("panel_decomposition", c.panel_decomposition);
    c.threshold_sweep = doc.value("threshold_sweep", c.threshold_sweep);
    c.income_subsample = doc.value("income_subsample", c.income_subsample);
    c.output_dir = resolve(doc.value("output_dir", c.output_dir), base_dir);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed run config: ") + e.what());
  }
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j{{"panel", c.panel_path},
                   {"raster", c.raster_path},
                   {"zones", c.zones_path},
                   {"industrialization", c.industrialization_path},
                   {"pca_threshold", c.pca_threshold},
                   {"k_min", c.k_min},
                   {"k_max", c.k_max},
                   {"seeds", c.seeds},
                   {"n_init", c.n_init},
                   {"final_n_init", c.final_n_init},
                   {"max_iter", c.max_iter},
                   {"tol", c.tol},
                   {"shock_lower_pct", c.shock_lower_pct},
                   {"shock_upper_pct", c.shock_upper_pct},
                   {"percentile_method", to_string(c.percentile_method)},
                   {"tau_max", c.tau_max},
                   {"alpha", c.alpha},
                   {"min_members", c.min_members},
                   {"mean_mode", mean_mode_name(c.mean_mode)},
                   {"edge_count_mode", to_string(c.edge_count_mode)},
                   {"silhouette_null_perms", c.silhouette_null_perms},
                   {"network_null_perms", c.network_null_perms},
                   {"master_seed", c.master_seed},
                   {"panel_decomposition", c.panel_decomposition},
                   {"threshold_sweep", c.threshold_sweep},
                   {"income_subsample", c.income_subsample},
                   {"output_dir", c.output_dir}};
  j["_comment"] = {
      {"pca_threshold", "minimum cumulative explained-variance share of the retained principal components (0.80)"},
      {"k_min", "smallest cluster count searched (3)"},
      {"k_max", "largest cluster count searched (20)"},
      {"seeds", "independent k-means seeds evaluated per k during selection (20)"},
      {"n_init", "k-means++ initialisations per fit during the k search (10)"},
      {"final_n_init", "initialisations for the refit at the selected k (20)"},
      {"max_iter", "Lloyd iteration cap (300)"},
      {"tol", "convergence bound on the largest centroid displacement (1e-6)"},
      {"shock_lower_pct", "percentile at or below which a regime deviation is a negative shock (2)"},
      {"shock_upper_pct", "percentile at or above which a regime deviation is a positive shock (98)"},
      {"percentile_method", "linear interpolation between order statistics, or nearest-rank"},
      {"tau_max", "largest lag in years for the lead-lag correlations (3)"},
      {"alpha", "two-sided significance level; |rho| must exceed z(1-alpha/2)/sqrt(n) (0.05)"},
      {"min_members", "regimes with fewer members are left out of the network (0; 50 for the network null check)"},
      {"mean_mode", "full-series: centre lagged windows on whole-series means; overlap: on window means"},
      {"edge_count_mode", "ordered (source, target, lag) triples or unordered node pairs"},
      {"silhouette_null_perms", "year-order permutations for the silhouette null (50)"},
      {"network_null_perms", "time-order permutations for the network null (10000)"},
      {"master_seed", "root of every derived random stream"},
      {"panel_decomposition", "also run the entity x year decomposition with year effects"},
      {"threshold_sweep", "alternative PCA thresholds re-clustered for the robustness report"},
      {"income_subsample", "re-cluster the half of entities with the highest initial level"}};
  return j;
}

unsigned resolve_threads(std::optional<unsigned> flag) {
  if (flag) return std::max(1u, *flag);
  if (const char* env = std::getenv("REGIME_KIT_THREADS")) {
    const auto v = parse_double(env);
    if (v && *v >= 1.0) return static_cast<unsigned>(*v);
  }
  return 1;
}

PreparedTrajectories prepare_trajectories(Panel panel) {
  PreparedTrajectories prep;
  prep.growth = compute_growth(panel);
  prep.panel = std::move(panel);
  const auto complete = filter_complete(prep.growth);
  prep.incomplete = complete.dropped_rows;
  const auto z = standardize_rows(complete.growth.g);
  for (auto r : z.kept_rows) prep.rows.push_back(complete.kept_rows[r]);
  for (auto r : z.dropped_flat) prep.flat.push_back(complete.kept_rows[r]);
  if (prep.rows.size() < 3) throw InputError("fewer than three clusterable trajectories");
  prep.clustered = select_rows(prep.growth, prep.rows);
  prep.standardized = z.values;
  return prep;
}

Panel load_run_panel(const RunConfig& cfg, std::vector<std::string>& warnings) {
  if (!cfg.panel_path.empty()) return load_panel_file(cfg.panel_path);
  if (cfg.raster_path.empty() || cfg.zones_path.empty()) {
    throw InputError("configure either a panel or both a raster and zones");
  }
  const auto raster = load_raster(cfg.raster_path);
  const auto zones = load_zones(cfg.zones_path);
  const auto zonal = aggregate_zones(raster, zones);
  warnings.insert(warnings.end(), zonal.warnings.begin(), zonal.warnings.end());
  std::istringstream in(zonal_panel_csv(zonal, zones));
  return load_panel(in);
}

ClusterStage cluster_stage(const Eigen::MatrixXd& standardized, double threshold, const RunConfig& cfg,
                           std::vector<std::string>& warnings) {
  ClusterStage s;
  s.embedding = fit_pca(standardized, threshold);
  KSelectionOptions opt;
  opt.k_min = cfg.k_min;
  opt.k_max = cfg.k_max;
  const int n = static_cast<int>(standardized.rows());
  if (opt.k_max > n - 1) {
    warnings.push_back("k_max lowered from " + std::to_string(opt.k_max) + " to N-1 = " + std::to_string(n - 1));
    opt.k_max = n - 1;
  }
  opt.seeds = selection_seeds(cfg.master_seed, cfg.seeds);
  opt.kmeans = {cfg.n_init, cfg.max_iter, cfg.tol};
  opt.threads = cfg.threads;
  s.selection = select_k(s.embedding.scores, opt);
  s.clustering = final_fit(s.embedding.scores, s.selection.k_star, s.selection.best_seed,
                           {cfg.final_n_init, cfg.max_iter, cfg.tol});
  return s;
}

std::string labels_csv(const std::vector<EntityMeta>& entities, const std::vector<int>& labels) {
  std::string out = "entity_id,cluster\n";
  for (std::size_t i = 0; i < entities.size(); ++i) out += entities[i].entity_id + "," + std::to_string(labels[i]) + "\n";
  return out;
}

std::map<std::string, int> load_labels_csv(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"entity_id", "cluster"}) {
    throw InputError("'" + path + "' must start with header entity_id,cluster");
  }
  std::map<std::string, int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    const auto v = f.size() == 2 ? parse_double(f[1]) : std::nullopt;
    if (!v || *v < 0 || *v != std::floor(*v)) {
      throw InputError("'" + path + "' line " + std::to_string(line_no) + ": malformed label");
    }
    if (!labels.emplace(f[0], static_cast<int>(*v)).second) throw InputError("duplicate label for '" + f[0] + "'");
  }
  return labels;
}

LabelledRows attach_labels(const PreparedTrajectories& prep, const std::map<std::string, int>& labels) {
  std::vector<std::size_t> rows;
  LabelledRows out;
  std::size_t matched = 0;
  for (std::size_t i = 0; i < prep.clustered.rows(); ++i) {
    const auto it = labels.find(prep.clustered.entities[i].entity_id);
    if (it == labels.end()) continue;
    rows.push_back(i);
    out.labels.push_back(it->second);
    ++matched;
  }
  if (matched != labels.size()) {
    throw InputError(std::to_string(labels.size() - matched) + " labelled entities are missing or not clusterable");
  }
  out.growth = select_rows(prep.clustered, rows);
  return out;
}

nlohmann::json to_json(const Embedding<double>& e, const std::vector<EntityMeta>& dropped_flat) {
  nlohmann::json j;
  j["dims"] = e.dims();
  j["variance_threshold"] = e.variance_threshold;
  j["explained_variance_ratio"] = std::vector<double>(e.explained_variance_ratio.begin(), e.explained_variance_ratio.end());
  j["spectrum_ratio"] = std::vector<double>(e.spectrum_ratio.begin(), e.spectrum_ratio.end());
  j["column_means"] = std::vector<double>(e.column_means.begin(), e.column_means.end());
  auto& comps = j["components"] = nlohmann::json::array();
  for (Eigen::Index r = 0; r < e.components.rows(); ++r) {
    comps.push_back(std::vector<double>(e.components.row(r).begin(), e.components.row(r).end()));
  }
  auto& flat = j["dropped_flat"] = nlohmann::json::array();
  for (const auto& m : dropped_flat) flat.push_back(m.entity_id);
  return j;
}

nlohmann::json clustering_json(const ClusteringD& c) {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(c.k), 0);
  for (int l : c.labels) ++sizes[static_cast<std::size_t>(l)];
  auto centroids = nlohmann::json::array();
  for (Eigen::Index r = 0; r < c.centroids.rows(); ++r) {
    centroids.push_back(std::vector<double>(c.centroids.row(r).begin(), c.centroids.row(r).end()));
  }
  return {{"k", c.k},         {"seed", c.seed},           {"n_init", c.n_init},
          {"sizes", sizes},   {"distortion", c.distortion}, {"silhouette", c.silhouette},
          {"centroids", centroids}, {"rng", std::string(kRngName)}};
}

OutputSet::OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

void OutputSet::write(const std::string& name, const std::string& content) {
  write_text_file(dir_ / name, content);
  digests_[name] = sha256_hex(content);
}

void OutputSet::write_json(const std::string& name, const nlohmann::json& content) { write(name, dump_json(content)); }

namespace {

std::vector<std::size_t> top_half_by_initial_level(const PreparedTrajectories& prep) {
  std::vector<std::size_t> order(prep.rows.size());
  std::iota(order.begin(), order.end(), 0);
  auto level = [&](std::size_t j) { return prep.panel.values(static_cast<Eigen::Index>(prep.rows[j]), 0); };
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return level(a) > level(b); });
  order.resize(order.size() / 2);
  std::sort(order.begin(), order.end());
  return order;
}

nlohmann::json robustness_report(const PreparedTrajectories& prep, const ClusterStage& base, const RunConfig& cfg,
                                 std::vector<std::string>& warnings) {
  nlohmann::json j;
  if (!cfg.threshold_sweep.empty()) {
    std::vector<std::vector<int>> partitions{base.clustering.labels};
    std::vector<double> thresholds{cfg.pca_threshold};
    auto& runs = j["threshold_sweep"]["runs"] = nlohmann::json::array();
    for (double t : cfg.threshold_sweep) {
      const auto s = cluster_stage(prep.standardized, t, cfg, warnings);
      runs.push_back({{"threshold", t},
                      {"dims", s.embedding.dims()},
                      {"k_star", s.selection.k_star},
                      {"silhouette", s.clustering.silhouette},
                      {"ari_vs_baseline", adjusted_rand_index(base.clustering.labels, s.clustering.labels)}});
      partitions.push_back(s.clustering.labels);
      thresholds.push_back(t);
    }
    auto& pairs = j["threshold_sweep"]["pairwise_ari"] = nlohmann::json::array();
    for (std::size_t a = 1; a < partitions.size(); ++a) {
      for (std::size_t b = a + 1; b < partitions.size(); ++b) {
        pairs.push_back({{"threshold_a", thresholds[a]},
                         {"threshold_b", thresholds[b]},
                         {"ari", adjusted_rand_index(partitions[a], partitions[b])}});
      }
    }
    j["threshold_sweep"]["baseline_threshold"] = cfg.pca_threshold;
  }
  if (cfg.income_subsample) {
    const auto subset = top_half_by_initial_level(prep);
    Eigen::MatrixXd z(static_cast<Eigen::Index>(subset.size()), prep.standardized.cols());
    std::vector<int> baseline;
    for (std::size_t r = 0; r < subset.size(); ++r) {
      z.row(static_cast<Eigen::Index>(r)) = prep.standardized.row(static_cast<Eigen::Index>(subset[r]));
      baseline.push_back(base.clustering.labels[subset[r]]);
    }
    const auto s = cluster_stage(z, cfg.pca_threshold, cfg, warnings);
    j["income_subsample"] = {{"n_entities", subset.size()},
                             {"k_star", s.selection.k_star},
                             {"ari_vs_baseline", adjusted_rand_index(baseline, s.clustering.labels)},
                             {"label_agreement", label_agreement(baseline, s.clustering.labels)}};
  }
  return j;
}

}  // namespace

nlohmann::json run_pipeline(const RunConfig& cfg) {
  using clock = std::chrono::steady_clock;
  OutputSet out(cfg.output_dir);
  nlohmann::json manifest{{"tool", "regime-kit"},
                          {"version", std::string(kVersion)},
                          {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                                "." + std::to_string(EIGEN_MINOR_VERSION)},
                          {"rng", std::string(kRngName)},
                          {"master_seed", cfg.master_seed},
                          {"threads", cfg.threads},
                          {"stages", nlohmann::json::array()}};
  std::vector<std::string> warnings;
  write_text_file(std::filesystem::path(cfg.output_dir) / "config_echo.json", dump_json(to_json(cfg)));

  auto finish = [&](const std::string& status) {
    manifest["status"] = status;
    manifest["warnings"] = warnings;
    manifest["outputs"] = out.digests();
    write_text_file(std::filesystem::path(cfg.output_dir) / "manifest.json", dump_json(manifest));
  };
  auto stage = [&](const std::string& name, auto&& body) {
    const auto start = clock::now();
    try {
      body();
    } catch (const std::exception& e) {
      manifest["failed_stage"] = name;
      manifest["error"] = e.what();
      finish("failed");
      if (dynamic_cast<const NumericalError*>(&e)) throw NumericalError("stage '" + name + "': " + e.what());
      throw InputError("stage '" + name + "': " + e.what());
    }
    manifest["stages"].push_back(
        {{"name", name}, {"seconds", std::chrono::duration<double>(clock::now() - start).count()}});
  };

  Panel panel;
  PreparedTrajectories prep;
  ClusterStage clusters;
  RegimeTrajectories rt;
  PropagationNetwork net;

  stage("ingest", [&] {
    panel = load_run_panel(cfg, warnings);
    if (!cfg.raster_path.empty() && cfg.panel_path.empty()) out.write("zonal_panel.csv", panel_csv(panel));
  });
  stage("growth", [&] { prep = prepare_trajectories(std::move(panel)); });
  stage("filter", [&] {
    std::string report = "entity_id,reason\n";
    for (auto r : prep.incomplete) report += prep.growth.entities[r].entity_id + ",incomplete\n";
    for (auto r : prep.flat) report += prep.growth.entities[r].entity_id + ",flat\n";
    out.write("exclusions.csv", report);
  });
  stage("embed", [&] {
    std::vector<EntityMeta> flat;
    for (auto r : prep.flat) flat.push_back(prep.growth.entities[r]);
    clusters.embedding = fit_pca(prep.standardized, cfg.pca_threshold);
    out.write_json("embedding.json", to_json(clusters.embedding, flat));
  });
  stage("select_k", [&] {
    clusters = cluster_stage(prep.standardized, cfg.pca_threshold, cfg, warnings);
    out.write_json("k_selection.json", to_json(clusters.selection));
  });
  stage("final_fit", [&] {
    out.write("labels.csv", labels_csv(prep.clustered.entities, clusters.clustering.labels));
    out.write_json("clustering.json", clustering_json(clusters.clustering));
  });
  stage("regimes", [&] {
    rt = regime_trajectories(prep.clustered, clusters.clustering.labels);
    out.write("trajectories.csv", trajectories_csv(rt));
    out.write("regime_stats.csv", regime_stats_csv(rt));
  });
  stage("shocks", [&] {
    out.write("shocks.csv", shocks_csv(detect_shocks(rt, cfg.shock_lower_pct, cfg.shock_upper_pct, cfg.percentile_method)));
  });
  stage("network", [&] {
    net = build_network(rt, {cfg.tau_max, cfg.alpha, cfg.min_members, cfg.mean_mode});
    out.write_json("network.json", to_json(net));
    const auto decay = spatial_decay(net, prep.clustered.entities, clusters.clustering.labels);
    warnings.insert(warnings.end(), decay.warnings.begin(), decay.warnings.end());
    out.write("spatial_decay.csv", spatial_decay_csv(decay));
  });
  stage("nulls", [&] {
    NullSilhouetteOptions sil;
    sil.n_permutations = cfg.silhouette_null_perms;
    sil.variance_threshold = cfg.pca_threshold;
    sil.kmeans = {cfg.final_n_init, cfg.max_iter, cfg.tol};
    sil.selection_seeds = cfg.seeds;
    sil.selection_kmeans = {cfg.n_init, cfg.max_iter, cfg.tol};
    sil.master_seed = derive_seed(cfg.master_seed, {stream::kSilhouetteNull});
    sil.threads = cfg.threads;
    out.write_json("null_silhouette.json", to_json(null_silhouette(prep.clustered.g, clusters.clustering.k,
                                                                   clusters.clustering.silhouette, sil)));
    out.write_json("network_null.json",
                   to_json(network_null(net, rt, cfg.network_null_perms, derive_seed(cfg.master_seed, {stream::kNetworkNull}),
                                        cfg.edge_count_mode, cfg.threads)));
  });
  stage("si", [&] {
    const auto complete = filter_complete(prep.growth).growth;
    const auto dispersion = within_country_dispersion(complete);
    out.write("dispersion.csv", dispersion_csv(dispersion));
    if (!cfg.industrialization_path.empty()) {
      const auto timing = load_industrialization_csv(cfg.industrialization_path);
      std::vector<double> x, y;
      auto countries = nlohmann::json::array();
      for (const auto& d : dispersion) {
        const auto it = timing.find(d.country_code);
        if (it == timing.end()) continue;
        x.push_back(it->second);
        y.push_back(d.mean_dispersion);
        countries.push_back(d.country_code);
      }
      nlohmann::json sj{{"countries", countries}};
      if (x.size() >= 3) {
        const auto s = spearman(x, y);
        sj["rho"] = s.rho;
        sj["p_value"] = s.p_value;
        sj["n"] = s.n;
        std::vector<double> lx, ly;
        for (std::size_t i = 0; i < x.size(); ++i) {
          if (x[i] > 0.0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(y[i]);
          }
        }
        if (lx.size() >= 2) {
          const auto fit = ols_line(lx, ly);
          sj["log_linear_fit"] = {{"intercept", fit.intercept}, {"slope", fit.slope}};
        }
      } else {
        sj["skipped"] = "fewer than three countries with both dispersion and industrialization timing";
        warnings.push_back(sj["skipped"].get<std::string>());
      }
      out.write_json("spearman.json", sj);
    }
    nlohmann::json vj;
    std::vector<double> mean_growth;
    std::vector<std::string> country;
    for (std::size_t i = 0; i < prep.clustered.rows(); ++i) {
      mean_growth.push_back(prep.clustered.g.row(static_cast<Eigen::Index>(i)).mean());
      country.push_back(prep.clustered.entities[i].country_code);
    }
    try {
      vj["entity_mean"] = to_json(variance_decomposition(mean_growth, country, clusters.clustering.labels));
    } catch (const NumericalError& e) {
      vj["entity_mean"] = {{"skipped", e.what()}};
      warnings.push_back(std::string("variance decomposition skipped: ") + e.what());
    }
    if (cfg.panel_decomposition) {
      try {
        vj["entity_year_panel"] = to_json(variance_decomposition_panel(prep.clustered, clusters.clustering.labels));
      } catch (const NumericalError& e) {
        vj["entity_year_panel"] = {{"skipped", e.what()}};
      }
    }
    out.write_json("variance_decomposition.json", vj);
  });
  if (!cfg.threshold_sweep.empty() || cfg.income_subsample) {
    stage("robustness", [&] { out.write_json("robustness.json", robustness_report(prep, clusters, cfg, warnings)); });
  }

  manifest["summary"] = {{"n_entities", prep.growth.rows()},
                         {"n_clustered", prep.clustered.rows()},
                         {"n_incomplete", prep.incomplete.size()},
                         {"n_flat", prep.flat.size()},
                         {"pca_dims", clusters.embedding.dims()},
                         {"k_star", clusters.selection.k_star},
                         {"best_seed", clusters.selection.best_seed},
                         {"silhouette", clusters.clustering.silhouette},
                         {"network_edges", net.edges.size()}};
  finish("ok");
  return manifest;
}

}  // namespace regime_kit
