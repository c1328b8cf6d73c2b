#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "regime_kit/cluster.hpp"
#include "regime_kit/embed.hpp"
#include "regime_kit/panel.hpp"
#include "regime_kit/propagation.hpp"
#include "regime_kit/regimes.hpp"

namespace regime_kit {

inline constexpr std::string_view kVersion = "0.1.0";

struct RunConfig {
  // Inputs: a panel, or a raster plus zones aggregated into one.
  std::string panel_path;
  std::string raster_path;
  std::string zones_path;
  std::string industrialization_path;

  double pca_threshold = 0.80;
  int k_min = 3;
  int k_max = 20;
  int seeds = 20;
  int n_init = 10;
  int final_n_init = 20;
  int max_iter = 300;
  double tol = 1e-6;

  double shock_lower_pct = 2.0;
  double shock_upper_pct = 98.0;
  PercentileMethod percentile_method = PercentileMethod::Linear;

  int tau_max = 3;
  double alpha = 0.05;
  std::size_t min_members = 0;
  MeanMode mean_mode = MeanMode::FullSeries;
  EdgeCountMode edge_count_mode = EdgeCountMode::Ordered;

  int silhouette_null_perms = 50;
  int network_null_perms = 10000;
  std::uint64_t master_seed = 0;

  bool panel_decomposition = false;
  std::vector<double> threshold_sweep;
  bool income_subsample = false;

  std::string output_dir = "regime-kit-out";
  unsigned threads = 1;  // not part of the echo: results do not depend on it
};

/// Reads a config document; relative paths resolve against `base_dir`.
RunConfig run_config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

/// Every setting plus a "_comment" object describing each one.
nlohmann::json to_json(const RunConfig& cfg);

/// Thread count from --threads, else REGIME_KIT_THREADS, else 1.
unsigned resolve_threads(std::optional<unsigned> flag);

/// Complete, non-flat trajectories ready for clustering.
struct PreparedTrajectories {
  Panel panel;
  GrowthMatrix growth;                      // every entity
  std::vector<std::size_t> incomplete;      // panel rows dropped for missing/invalid growth
  std::vector<std::size_t> flat;            // panel rows dropped for zero variance
  std::vector<std::size_t> rows;            // panel rows that are clustered
  GrowthMatrix clustered;                   // growth rows for `rows`
  Eigen::MatrixXd standardized;             // z-scored `clustered.g`
};

PreparedTrajectories prepare_trajectories(Panel panel);

Panel load_run_panel(const RunConfig& cfg, std::vector<std::string>& warnings);

struct ClusterStage {
  Embedding<double> embedding;
  KSelectionReport selection;
  ClusteringD clustering;
};

ClusterStage cluster_stage(const Eigen::MatrixXd& standardized, double threshold, const RunConfig& cfg,
                           std::vector<std::string>& warnings);

std::string labels_csv(const std::vector<EntityMeta>& entities, const std::vector<int>& labels);

/// entity_id -> cluster from `entity_id,cluster` CSV.
std::map<std::string, int> load_labels_csv(const std::string& path);

/// Rows of `prep.clustered` with labels, in clustered order. Every labelled
/// entity must be clusterable.
struct LabelledRows {
  GrowthMatrix growth;
  std::vector<int> labels;
};
LabelledRows attach_labels(const PreparedTrajectories& prep, const std::map<std::string, int>& labels);

nlohmann::json to_json(const Embedding<double>& e, const std::vector<EntityMeta>& dropped_flat);
nlohmann::json clustering_json(const ClusteringD& c);

/// Records written files and their digests.
class OutputSet {
public:
  explicit OutputSet(std::filesystem::path dir);
  void write(const std::string& name, const std::string& content);
  void write_json(const std::string& name, const nlohmann::json& content);
  const std::map<std::string, std::string>& digests() const { return digests_; }
  const std::filesystem::path& dir() const { return dir_; }

private:
  std::filesystem::path dir_;
  std::map<std::string, std::string> digests_;
};

/// Runs every stage in order and writes all reports plus manifest.json and
/// config_echo.json into cfg.output_dir. Returns the manifest. On failure the
/// manifest is written with the failing stage and the error is rethrown with
/// the stage name prefixed.
nlohmann::json run_pipeline(const RunConfig& cfg);

}  // namespace regime_kit
