#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "regime_kit/panel.hpp"

namespace regime_kit {

/// Lagged dependence of one regime's series on another's.
struct Coupling {
  int source = 0;
  int target = 0;
  int lag = 1;
  double coefficient = 0.0;
};

struct SynthRegime {
  std::size_t members = 0;
  /// Explicit mean growth path (length T-1). When empty, a path is drawn as
  /// base_mean + base_sd * N(0, 1) per year from the config seed.
  std::vector<double> base;
  double base_mean = 3.0;
  double base_sd = 0.0;
  double shock_sd = 0.0;  // regime-level noise, shared by all members
  double noise_sd = 0.0;  // idiosyncratic noise per entity and year
  std::string country_code;  // empty: "C<regime>", or round-robin when n_countries > 0
};

struct SynthConfig {
  int first_year = 1993;
  int n_years = 27;  // levels; growth series have n_years - 1 entries
  std::vector<SynthRegime> regimes;
  std::vector<Coupling> couplings;
  double initial_level = 100.0;
  double initial_level_log_sd = 0.0;  // per-entity log-normal spread of initial levels
  int n_countries = 0;  // > 0: entities without a regime country cycle through K00, K01, ...
  std::uint64_t seed = 0;
};

struct SynthTruth {
  std::vector<int> labels;           // per entity, in panel order
  Eigen::MatrixXd regime_series;     // regimes x (T-1)
  std::vector<Coupling> edges;
};

struct SynthResult {
  Panel panel;
  Eigen::MatrixXd growth;  // entities x (T-1), the exact generated rates
  SynthTruth truth;
};

void validate(const SynthConfig& cfg);

/// Regime series are generated in topological order of the coupling graph:
/// base + sum(coefficient * source[t - lag]) + shock noise. Entity growth is
/// its regime series plus idiosyncratic noise; levels compound from the
/// initial level. Identical configs give identical output.
SynthResult generate(const SynthConfig& cfg);

SynthConfig synth_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const SynthConfig& cfg);
nlohmann::json to_json(const SynthTruth& truth, const Panel& panel);

}  // namespace regime_kit
