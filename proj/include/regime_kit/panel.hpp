#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace regime_kit {

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct GeoPoint {
  double longitude = 0.0;
  double latitude = 0.0;
  bool operator==(const GeoPoint&) const = default;
};

struct EntityMeta {
  std::string entity_id;
  std::string country_code;
  std::optional<GeoPoint> location;
  bool operator==(const EntityMeta&) const = default;
};

/// Entity x year levels over a dense, consecutive year axis.
struct Panel {
  std::vector<EntityMeta> entities;
  std::vector<int> years;
  Eigen::MatrixXd values;  // N x T; unspecified where !present
  BoolMatrix present;      // N x T

  std::size_t n_entities() const { return entities.size(); }
  std::size_t n_years() const { return years.size(); }
};

/// Percentage growth trajectories; row i matches row i of the source panel.
struct GrowthMatrix {
  std::vector<EntityMeta> entities;
  std::vector<int> growth_years;  // labels the later year of each pair
  Eigen::MatrixXd g;              // N x (T-1); NaN where invalid
  BoolMatrix valid;               // N x (T-1)
  std::vector<bool> complete;     // per row: every entry valid

  std::size_t rows() const { return entities.size(); }
  std::size_t cols() const { return growth_years.size(); }
};

struct CompleteFilterResult {
  GrowthMatrix growth;                    // complete rows only, original order
  std::vector<std::size_t> kept_rows;     // indices into the input
  std::vector<std::size_t> dropped_rows;  // indices into the input
};

/// Checks the panel invariants; throws InputError on violation.
void validate(const Panel& panel);

/// Parses `entity_id,country_code,year,value[,lon,lat]` CSV. Empty or "NA"
/// values mark the cell missing. Rows for the same entity must agree on
/// country and coordinates.
Panel load_panel(std::istream& in);
Panel load_panel_csv(const std::string& path);

GrowthMatrix compute_growth(const Panel& panel);

/// Keeps rows whose whole trajectory is valid. Throws InputError if none remain.
CompleteFilterResult filter_complete(const GrowthMatrix& gm);

/// Sub-matrix of the given rows, in the given order.
GrowthMatrix select_rows(const GrowthMatrix& gm, std::span<const std::size_t> rows);

/// `entity_id,country_code,year,value[,lon,lat]` CSV; coordinates are written
/// when every entity has them. Missing cells are written as NA.
std::string panel_csv(const Panel& panel);

nlohmann::json to_json(const Panel& panel);
Panel panel_from_json(const nlohmann::json& doc);

/// Reads a panel from `.json` (as written by to_json) or CSV.
Panel load_panel_file(const std::string& path);

/// Levels implied by an initial level and a percentage growth path.
Eigen::VectorXd levels_from_growth(double initial_level, const Eigen::Ref<const Eigen::VectorXd>& growth);

}  // namespace regime_kit
