// regime-kit command line: one subcommand per pipeline stage plus `run`.
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "regime_kit/error.hpp"
#include "regime_kit/io.hpp"
#include "regime_kit/pipeline.hpp"
#include "regime_kit/rng.hpp"
#include "regime_kit/stats_si.hpp"
#include "regime_kit/synth.hpp"
#include "regime_kit/zonal.hpp"

namespace fs = std::filesystem;
using namespace regime_kit;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

std::string growth_csv(const GrowthMatrix& gm) {
  std::string out = "entity_id,country_code";
  for (int y : gm.growth_years) out += "," + std::to_string(y);
  out += "\n";
  for (std::size_t i = 0; i < gm.rows(); ++i) {
    out += gm.entities[i].entity_id + "," + gm.entities[i].country_code;
    for (std::size_t t = 0; t < gm.cols(); ++t) {
      out += "," + format_double(gm.g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)));
    }
    out += "\n";
  }
  return out;
}

struct Common {
  std::string panel;
  std::string out = "regime-kit-out";
  std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, Common& c, bool needs_panel = true) {
  auto* opt = cmd->add_option("--panel", c.panel, "Entity-year panel (CSV or JSON)");
  if (needs_panel) opt->required();
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--threads", c.threads, "Worker threads (fallback: REGIME_KIT_THREADS)");
}

void print_digests(const OutputSet& out) {
  for (const auto& [name, digest] : out.digests()) std::cout << digest << "  " << (out.dir() / name).string() << "\n";
}

std::vector<std::string> flush_warnings(std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  return std::exchange(warnings, {});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Growth-regime detection and propagation analysis for entity-year panels"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  RunConfig cfg;
  std::vector<std::string> warnings;

  // ingest
  Common ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Validate a panel and write growth trajectories");
  add_common(ingest_cmd, ingest);

  // zonal
  std::string raster_path, zones_path, zonal_out = "zonal_panel.csv";
  auto* zonal_cmd = app.add_subcommand("zonal", "Aggregate a gridded raster over zone polygons");
  zonal_cmd->add_option("--raster", raster_path, "Raster JSON")->required();
  zonal_cmd->add_option("--zones", zones_path, "Zones JSON")->required();
  zonal_cmd->add_option("--out", zonal_out, "Panel CSV to write");

  // embed
  Common embed;
  auto* embed_cmd = app.add_subcommand("embed", "Standardise trajectories and fit the PCA embedding");
  add_common(embed_cmd, embed);
  embed_cmd->add_option("--threshold", cfg.pca_threshold, "Cumulative explained-variance threshold");

  // cluster
  Common cluster;
  auto* cluster_cmd = app.add_subcommand("cluster", "Select k, refit and run the silhouette null");
  add_common(cluster_cmd, cluster);
  cluster_cmd->add_option("--threshold", cfg.pca_threshold, "PCA threshold");
  cluster_cmd->add_option("--threshold-sweep", cfg.threshold_sweep, "Extra PCA thresholds for robustness");
  cluster_cmd->add_option("--k-min", cfg.k_min);
  cluster_cmd->add_option("--k-max", cfg.k_max);
  cluster_cmd->add_option("--seeds", cfg.seeds, "Selection seeds per k");
  cluster_cmd->add_option("--n-init", cfg.n_init);
  cluster_cmd->add_option("--final-n-init", cfg.final_n_init);
  cluster_cmd->add_option("--null-perms", cfg.silhouette_null_perms, "Silhouette null permutations");
  cluster_cmd->add_option("--master-seed", cfg.master_seed);

  // regimes
  Common regimes;
  std::string labels_path;
  std::string percentile_method = "linear";
  auto* regimes_cmd = app.add_subcommand("regimes", "Regime trajectories, volatility and shock years");
  add_common(regimes_cmd, regimes);
  regimes_cmd->add_option("--labels", labels_path, "entity_id,cluster CSV")->required();
  regimes_cmd->add_option("--shock-lower", cfg.shock_lower_pct);
  regimes_cmd->add_option("--shock-upper", cfg.shock_upper_pct);
  regimes_cmd->add_option("--percentile-method", percentile_method, "linear or nearest-rank");

  // network
  Common network;
  std::string network_labels;
  std::string edge_mode = "ordered";
  bool overlap_means = false;
  auto* network_cmd = app.add_subcommand("network", "Lead-lag propagation network and its permutation null");
  add_common(network_cmd, network);
  network_cmd->add_option("--labels", network_labels, "entity_id,cluster CSV")->required();
  network_cmd->add_option("--tau-max", cfg.tau_max);
  network_cmd->add_option("--alpha", cfg.alpha);
  network_cmd->add_option("--min-members", cfg.min_members);
  network_cmd->add_option("--null-perms", cfg.network_null_perms);
  network_cmd->add_option("--edge-count-mode", edge_mode, "ordered or unordered-max");
  network_cmd->add_flag("--overlap-means", overlap_means, "Centre lagged windows on window means");
  network_cmd->add_option("--master-seed", cfg.master_seed);

  // si
  Common si;
  std::string si_labels, industrialization;
  bool panel_mode = false;
  auto* si_cmd = app.add_subcommand("si", "Within-country dispersion, Spearman test, variance decomposition");
  add_common(si_cmd, si);
  si_cmd->add_option("--labels", si_labels, "entity_id,cluster CSV (enables the variance decomposition)");
  si_cmd->add_option("--industrialization", industrialization, "country_code,years_since_industrialization CSV");
  si_cmd->add_flag("--panel-decomposition", panel_mode, "Also fit the entity x year decomposition");

  // synth
  std::string synth_config, synth_out = "synth_panel.csv", synth_truth;
  std::optional<std::uint64_t> synth_seed;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a planted-regime panel");
  synth_cmd->add_option("--config", synth_config, "Synth JSON config")->required();
  synth_cmd->add_option("--out", synth_out, "Panel CSV to write");
  synth_cmd->add_option("--truth", synth_truth, "Planted-truth JSON to write");
  synth_cmd->add_option("--seed", synth_seed, "Override the config seed");

  // run
  std::string run_config;
  Common run;
  std::optional<std::uint64_t> run_seed;
  std::optional<int> run_null_perms;
  auto* run_cmd = app.add_subcommand("run", "Full pipeline from a JSON config");
  run_cmd->add_option("--config", run_config, "Run config JSON")->required();
  run_cmd->add_option("--out", run.out, "Override output directory");
  run_cmd->add_option("--threads", run.threads, "Worker threads (fallback: REGIME_KIT_THREADS)");
  run_cmd->add_option("--master-seed", run_seed, "Override master seed");
  run_cmd->add_option("--network-null-perms", run_null_perms, "Override network null permutations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*ingest_cmd) {
      cfg.panel_path = ingest.panel;
      auto prep = prepare_trajectories(load_panel_file(ingest.panel));
      OutputSet out(ingest.out);
      out.write("growth.csv", growth_csv(prep.growth));
      std::string report = "entity_id,reason\n";
      for (auto r : prep.incomplete) report += prep.growth.entities[r].entity_id + ",incomplete\n";
      for (auto r : prep.flat) report += prep.growth.entities[r].entity_id + ",flat\n";
      out.write("exclusions.csv", report);
      std::cerr << prep.growth.rows() << " entities, " << prep.clustered.rows() << " clusterable, "
                << prep.incomplete.size() << " incomplete, " << prep.flat.size() << " flat\n";
      print_digests(out);
    } else if (*zonal_cmd) {
      const auto zones = load_zones(zones_path);
      const auto zp = aggregate_zones(load_raster(raster_path), zones);
      for (const auto& w : zp.warnings) std::cerr << "warning: " << w << "\n";
      write_text_file(zonal_out, zonal_panel_csv(zp, zones));
    } else if (*embed_cmd) {
      const auto prep = prepare_trajectories(load_panel_file(embed.panel));
      const auto e = fit_pca(prep.standardized, cfg.pca_threshold);
      std::vector<EntityMeta> flat;
      for (auto r : prep.flat) flat.push_back(prep.growth.entities[r]);
      OutputSet out(embed.out);
      out.write_json("embedding.json", to_json(e, flat));
      std::string scores = "entity_id";
      for (int c = 0; c < e.dims(); ++c) scores += ",pc" + std::to_string(c + 1);
      scores += "\n";
      for (Eigen::Index i = 0; i < e.scores.rows(); ++i) {
        scores += prep.clustered.entities[static_cast<std::size_t>(i)].entity_id;
        for (Eigen::Index c = 0; c < e.scores.cols(); ++c) scores += "," + format_double(e.scores(i, c));
        scores += "\n";
      }
      out.write("scores.csv", scores);
      print_digests(out);
    } else if (*cluster_cmd) {
      cfg.threads = resolve_threads(cluster.threads);
      const auto prep = prepare_trajectories(load_panel_file(cluster.panel));
      const auto stage = cluster_stage(prep.standardized, cfg.pca_threshold, cfg, warnings);
      OutputSet out(cluster.out);
      out.write_json("k_selection.json", to_json(stage.selection));
      out.write_json("clustering.json", clustering_json(stage.clustering));
      out.write("labels.csv", labels_csv(prep.clustered.entities, stage.clustering.labels));
      if (cfg.silhouette_null_perms > 0) {
        NullSilhouetteOptions sil;
        sil.n_permutations = cfg.silhouette_null_perms;
        sil.variance_threshold = cfg.pca_threshold;
        sil.kmeans = {cfg.final_n_init, cfg.max_iter, cfg.tol};
    sil.selection_seeds = cfg.seeds;
    sil.selection_kmeans = {cfg.n_init, cfg.max_iter, cfg.tol};
        sil.master_seed = derive_seed(cfg.master_seed, {stream::kSilhouetteNull});
        sil.threads = cfg.threads;
        out.write_json("null_silhouette.json", to_json(null_silhouette(prep.clustered.g, stage.clustering.k,
                                                                       stage.clustering.silhouette, sil)));
      }
      std::cerr << "k* = " << stage.selection.k_star << ", silhouette " << stage.clustering.silhouette << "\n";
      print_digests(out);
    } else if (*regimes_cmd) {
      const auto prep = prepare_trajectories(load_panel_file(regimes.panel));
      const auto lr = attach_labels(prep, load_labels_csv(labels_path));
      const auto rt = regime_trajectories(lr.growth, lr.labels);
      OutputSet out(regimes.out);
      out.write("trajectories.csv", trajectories_csv(rt));
      out.write("regime_stats.csv", regime_stats_csv(rt));
      out.write("shocks.csv", shocks_csv(detect_shocks(rt, cfg.shock_lower_pct, cfg.shock_upper_pct,
                                                       parse_percentile_method(percentile_method))));
      print_digests(out);
    } else if (*network_cmd) {
      cfg.threads = resolve_threads(network.threads);
      const auto prep = prepare_trajectories(load_panel_file(network.panel));
      const auto lr = attach_labels(prep, load_labels_csv(network_labels));
      const auto rt = regime_trajectories(lr.growth, lr.labels);
      const auto net = build_network(
          rt, {cfg.tau_max, cfg.alpha, cfg.min_members, overlap_means ? MeanMode::Overlap : MeanMode::FullSeries});
      OutputSet out(network.out);
      out.write_json("network.json", to_json(net));
      const auto decay = spatial_decay(net, lr.growth.entities, lr.labels);
      warnings.insert(warnings.end(), decay.warnings.begin(), decay.warnings.end());
      out.write("spatial_decay.csv", spatial_decay_csv(decay));
      if (cfg.network_null_perms > 0) {
        out.write_json("network_null.json",
                       to_json(network_null(net, rt, cfg.network_null_perms,
                                            derive_seed(cfg.master_seed, {stream::kNetworkNull}),
                                            parse_edge_count_mode(edge_mode), cfg.threads)));
      }
      std::cerr << net.edges.size() << " significant edges\n";
      print_digests(out);
    } else if (*si_cmd) {
      const auto prep = prepare_trajectories(load_panel_file(si.panel));
      OutputSet out(si.out);
      const auto complete = filter_complete(prep.growth).growth;
      const auto dispersion = within_country_dispersion(complete);
      out.write("dispersion.csv", dispersion_csv(dispersion));
      if (!industrialization.empty()) {
        const auto timing = load_industrialization_csv(industrialization);
        std::vector<double> x, y;
        for (const auto& d : dispersion) {
          if (const auto it = timing.find(d.country_code); it != timing.end()) {
            x.push_back(it->second);
            y.push_back(d.mean_dispersion);
          }
        }
        const auto s = spearman(x, y);
        out.write_json("spearman.json", {{"rho", s.rho}, {"p_value", s.p_value}, {"n", s.n}});
      }
      if (!si_labels.empty()) {
        const auto lr = attach_labels(prep, load_labels_csv(si_labels));
        std::vector<double> mean_growth;
        std::vector<std::string> country;
        for (std::size_t i = 0; i < lr.growth.rows(); ++i) {
          mean_growth.push_back(lr.growth.g.row(static_cast<Eigen::Index>(i)).mean());
          country.push_back(lr.growth.entities[i].country_code);
        }
        nlohmann::json vj{{"entity_mean", to_json(variance_decomposition(mean_growth, country, lr.labels))}};
        if (panel_mode) vj["entity_year_panel"] = to_json(variance_decomposition_panel(lr.growth, lr.labels));
        out.write_json("variance_decomposition.json", vj);
      }
      print_digests(out);
    } else if (*synth_cmd) {
      auto sc = synth_config_from_json(read_json_file(synth_config));
      if (synth_seed) sc.seed = *synth_seed;
      const auto result = generate(sc);
      write_text_file(synth_out, panel_csv(result.panel));
      if (!synth_truth.empty()) write_text_file(synth_truth, dump_json(to_json(result.truth, result.panel)));
    } else if (*run_cmd) {
      const fs::path config_path(run_config);
      cfg = run_config_from_json(read_json_file(config_path), config_path.parent_path());
      if (run_cmd->count("--out") > 0) cfg.output_dir = run.out;
      if (run_seed) cfg.master_seed = *run_seed;
      if (run_null_perms) cfg.network_null_perms = *run_null_perms;
      cfg.threads = resolve_threads(run.threads);
      const auto manifest = run_pipeline(cfg);
      for (const auto& w : manifest["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
      std::cerr << "k* = " << manifest["summary"]["k_star"] << ", outputs in " << cfg.output_dir << "\n";
    }
    flush_warnings(warnings);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return 0;
}
