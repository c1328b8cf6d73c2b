#include "regime_kit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "regime_kit/error.hpp"
#include "regime_kit/io.hpp"
#include "regime_kit/rng.hpp"

namespace regime_kit {

namespace {

// Regime order in which every lag-0 source precedes its targets.
std::vector<int> lag0_order(const SynthConfig& cfg) {
  const int k = static_cast<int>(cfg.regimes.size());
  std::vector<int> indegree(static_cast<std::size_t>(k), 0);
  for (const auto& c : cfg.couplings) {
    if (c.lag == 0) ++indegree[static_cast<std::size_t>(c.target)];
  }
  std::vector<int> order;
  std::vector<bool> done(static_cast<std::size_t>(k), false);
  while (static_cast<int>(order.size()) < k) {
    int next = -1;
    for (int r = 0; r < k && next < 0; ++r) {
      if (!done[static_cast<std::size_t>(r)] && indegree[static_cast<std::size_t>(r)] == 0) next = r;
    }
    if (next < 0) throw InputError("lag-0 couplings form a cycle");
    done[static_cast<std::size_t>(next)] = true;
    order.push_back(next);
    for (const auto& c : cfg.couplings) {
      if (c.lag == 0 && c.source == next) --indegree[static_cast<std::size_t>(c.target)];
    }
  }
  return order;
}

std::string entity_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "e%05zu", index);
  return buf;
}

std::string country_name(Eigen::Index index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "K%02ld", static_cast<long>(index));
  return buf;
}

}  // namespace

void validate(const SynthConfig& cfg) {
  if (cfg.n_years < 3) throw InputError("synthetic panels need at least 3 years");
  if (cfg.regimes.empty()) throw InputError("synthetic config has no regimes");
  const auto t1 = static_cast<std::size_t>(cfg.n_years - 1);
  for (const auto& r : cfg.regimes) {
    if (r.members == 0) throw InputError("every regime needs at least one member");
    if (!r.base.empty() && r.base.size() != t1) throw InputError("explicit base paths must have n_years - 1 entries");
    if (r.base_sd < 0.0 || r.shock_sd < 0.0 || r.noise_sd < 0.0) throw InputError("noise sd must be non-negative");
  }
  const int k = static_cast<int>(cfg.regimes.size());
  for (const auto& c : cfg.couplings) {
    if (c.source < 0 || c.source >= k || c.target < 0 || c.target >= k || c.source == c.target) {
      throw InputError("coupling refers to an unknown regime or to itself");
    }
    if (c.lag < 0 || c.lag >= cfg.n_years - 1) throw InputError("coupling lag out of range");
    if (!std::isfinite(c.coefficient)) throw InputError("coupling coefficient must be finite");
  }
  if (cfg.n_countries < 0) throw InputError("n_countries must be non-negative");
  if (!(cfg.initial_level > 0.0) || cfg.initial_level_log_sd < 0.0) throw InputError("invalid initial level settings");
  lag0_order(cfg);
}

SynthResult generate(const SynthConfig& cfg) {
  validate(cfg);
  auto rng = make_engine(derive_seed(cfg.seed, {stream::kSynth}));
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto k = static_cast<Eigen::Index>(cfg.regimes.size());
  const Eigen::Index len = cfg.n_years - 1;
  int burn = 0;
  for (const auto& c : cfg.couplings) burn = std::max(burn, c.lag);
  const Eigen::Index total = len + burn;

  Eigen::MatrixXd base(k, total);
  for (Eigen::Index r = 0; r < k; ++r) {
    const auto& spec = cfg.regimes[static_cast<std::size_t>(r)];
    for (Eigen::Index t = 0; t < total; ++t) {
      const double drawn = spec.base_mean + spec.base_sd * normal(rng);
      base(r, t) = (t >= burn && !spec.base.empty()) ? spec.base[static_cast<std::size_t>(t - burn)] : drawn;
    }
  }
  const auto order = lag0_order(cfg);
  Eigen::MatrixXd series(k, total);
  for (Eigen::Index t = 0; t < total; ++t) {
    for (int r : order) {
      const auto& spec = cfg.regimes[static_cast<std::size_t>(r)];
      double v = base(r, t) + spec.shock_sd * normal(rng);
      for (const auto& c : cfg.couplings) {
        if (c.target == r && t - c.lag >= 0) v += c.coefficient * series(c.source, t - c.lag);
      }
      series(r, t) = v;
    }
  }

  SynthResult out;
  out.truth.regime_series = series.rightCols(len);
  out.truth.edges = cfg.couplings;
  std::size_t n = 0;
  for (const auto& r : cfg.regimes) n += r.members;
  out.growth.resize(static_cast<Eigen::Index>(n), len);
  Panel& panel = out.panel;
  for (int y = 0; y < cfg.n_years; ++y) panel.years.push_back(cfg.first_year + y);
  panel.values.resize(static_cast<Eigen::Index>(n), cfg.n_years);
  panel.present = BoolMatrix::Constant(static_cast<Eigen::Index>(n), cfg.n_years, true);

  std::uniform_real_distribution<double> lon(-170.0, 170.0);
  std::uniform_real_distribution<double> lat(-60.0, 60.0);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  Eigen::Index row = 0;
  for (Eigen::Index r = 0; r < k; ++r) {
    const auto& spec = cfg.regimes[static_cast<std::size_t>(r)];
    const GeoPoint centre{lon(rng), lat(rng)};
    for (std::size_t m = 0; m < spec.members; ++m, ++row) {
      Eigen::VectorXd g(len);
      for (Eigen::Index t = 0; t < len; ++t) g(t) = out.truth.regime_series(r, t) + spec.noise_sd * normal(rng);
      if ((g.array() <= -100.0).any()) throw NumericalError("generated growth at or below -100%; reduce the noise");
      out.growth.row(row) = g.transpose();
      const double start = cfg.initial_level * std::exp(cfg.initial_level_log_sd * normal(rng));
      panel.values.row(row) = levels_from_growth(start, g).transpose();
      const GeoPoint where{centre.longitude + jitter(rng), centre.latitude + jitter(rng)};
      std::string country = spec.country_code;
      if (country.empty()) country = cfg.n_countries > 0 ? country_name(row % cfg.n_countries) : "C" + std::to_string(r);
      panel.entities.push_back({entity_name(static_cast<std::size_t>(row)), std::move(country), where});
      out.truth.labels.push_back(static_cast<int>(r));
    }
  }
  return out;
}

SynthConfig synth_config_from_json(const nlohmann::json& doc) {
  try {
    SynthConfig cfg;
    cfg.first_year = doc.value("first_year", cfg.first_year);
    cfg.n_years = doc.value("n_years", cfg.n_years);
    cfg.initial_level = doc.value("initial_level", cfg.initial_level);
    cfg.initial_level_log_sd = doc.value("initial_level_log_sd", cfg.initial_level_log_sd);
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.n_countries = doc.value("n_countries", cfg.n_countries);
    for (const auto& r : doc.at("regimes")) {
      SynthRegime reg;
      reg.members = r.at("members").get<std::size_t>();
      reg.base = r.value("base", std::vector<double>{});
      reg.base_mean = r.value("base_mean", reg.base_mean);
      reg.base_sd = r.value("base_sd", reg.base_sd);
      reg.shock_sd = r.value("shock_sd", reg.shock_sd);
      reg.noise_sd = r.value("noise_sd", reg.noise_sd);
      reg.country_code = r.value("country_code", std::string{});
      cfg.regimes.push_back(std::move(reg));
    }
    if (doc.contains("couplings")) {
      for (const auto& c : doc["couplings"]) {
        cfg.couplings.push_back(
            {c.at("source").get<int>(), c.at("target").get<int>(), c.at("lag").get<int>(), c.at("coefficient").get<double>()});
      }
    }
    validate(cfg);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed synth config: ") + e.what());
  }
}

nlohmann::json to_json(const SynthConfig& cfg) {
  nlohmann::json j;
  j["first_year"] = cfg.first_year;
  j["n_years"] = cfg.n_years;
  j["initial_level"] = cfg.initial_level;
  j["initial_level_log_sd"] = cfg.initial_level_log_sd;
  j["seed"] = cfg.seed;
  j["n_countries"] = cfg.n_countries;
  auto& regimes = j["regimes"] = nlohmann::json::array();
  for (const auto& r : cfg.regimes) {
    nlohmann::json rj{{"members", r.members},   {"base_mean", r.base_mean}, {"base_sd", r.base_sd},
                      {"shock_sd", r.shock_sd}, {"noise_sd", r.noise_sd}};
    if (!r.base.empty()) rj["base"] = r.base;
    if (!r.country_code.empty()) rj["country_code"] = r.country_code;
    regimes.push_back(std::move(rj));
  }
  auto& couplings = j["couplings"] = nlohmann::json::array();
  for (const auto& c : cfg.couplings) {
    couplings.push_back({{"source", c.source}, {"target", c.target}, {"lag", c.lag}, {"coefficient", c.coefficient}});
  }
  return j;
}

nlohmann::json to_json(const SynthTruth& truth, const Panel& panel) {
  nlohmann::json j;
  auto& labels = j["labels"] = nlohmann::json::object();
  for (std::size_t i = 0; i < truth.labels.size(); ++i) labels[panel.entities[i].entity_id] = truth.labels[i];
  auto& series = j["regime_series"] = nlohmann::json::array();
  for (Eigen::Index r = 0; r < truth.regime_series.rows(); ++r) {
    series.push_back(std::vector<double>(truth.regime_series.row(r).begin(), truth.regime_series.row(r).end()));
  }
  auto& edges = j["edges"] = nlohmann::json::array();
  for (const auto& c : truth.edges) {
    edges.push_back({{"source", c.source}, {"target", c.target}, {"lag", c.lag}, {"coefficient", c.coefficient}});
  }
  return j;
}

}  // namespace regime_kit
