#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "regime_kit/synth.hpp"

namespace fixture {

/// Root-mean-square distance between two base paths.
inline double rms_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) s += (a[t] - b[t]) * (a[t] - b[t]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

struct PlantedSpec {
  int regimes = 5;
  std::size_t members = 100;
  int n_years = 27;
  double noise_fraction = 0.3;  // idiosyncratic sd as a share of the closest base separation
  int n_countries = 10;
  double initial_level_log_sd = 0.5;
};

/// Distinct random base paths (mean 3, sd 3 per year) with entity noise set
/// to a fixed share of the smallest pairwise RMS separation.
inline regime_kit::SynthConfig planted_config(std::uint64_t seed, const PlantedSpec& spec = {}) {
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  std::normal_distribution<double> normal(3.0, 3.0);
  std::vector<std::vector<double>> bases(static_cast<std::size_t>(spec.regimes));
  for (auto& b : bases) {
    b.resize(static_cast<std::size_t>(spec.n_years - 1));
    for (auto& v : b) v = normal(rng);
  }
  double separation = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < bases.size(); ++a) {
    for (std::size_t b = a + 1; b < bases.size(); ++b) separation = std::min(separation, rms_distance(bases[a], bases[b]));
  }
  regime_kit::SynthConfig cfg;
  cfg.n_years = spec.n_years;
  cfg.seed = seed;
  cfg.n_countries = spec.n_countries;
  cfg.initial_level_log_sd = spec.initial_level_log_sd;
  for (auto& b : bases) {
    regime_kit::SynthRegime r;
    r.members = spec.members;
    r.base = b;
    r.noise_sd = spec.noise_fraction * separation;
    cfg.regimes.push_back(r);
  }
  return cfg;
}

/// Four regime series with A (row 0) driving B (row 1) at lag 2. Bases are
/// random so every regime has its own iid variation; B follows
/// 0.9 * A[t-2] + N(0, 0.1).
inline regime_kit::SynthConfig coupled_config(std::uint64_t seed, int n_years = 27) {
  regime_kit::SynthConfig cfg;
  cfg.n_years = n_years;
  cfg.seed = seed;
  for (int r = 0; r < 4; ++r) {
    regime_kit::SynthRegime reg;
    reg.members = 1;
    reg.base_mean = 3.0;
    reg.base_sd = r == 1 ? 0.0 : 1.0;
    reg.shock_sd = r == 1 ? 0.1 : 0.0;
    cfg.regimes.push_back(reg);
  }
  cfg.couplings.push_back({0, 1, 2, 0.9});
  return cfg;
}

}  // namespace fixture
