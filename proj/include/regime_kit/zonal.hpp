#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace regime_kit {

using Point2 = Eigen::Vector2d;
using Ring = std::vector<Point2>;

struct RasterBand {
  int year = 0;
  Eigen::MatrixXd values;  // n_rows x n_cols, row 0 at the top
};

/// North-up grid in planar (equal-area) map units.
struct GridRaster {
  double origin_x = 0.0;  // upper-left corner
  double origin_y = 0.0;
  double cell_size = 1.0;
  Eigen::Index n_rows = 0;
  Eigen::Index n_cols = 0;
  double nodata = -9999.0;  // NaN cells are always treated as nodata too
  std::vector<RasterBand> bands;
};

struct ZonePolygon {
  std::string zone_id;
  Ring exterior;            // closed: front() == back()
  std::vector<Ring> holes;  // closed
  std::string country_code;
};

struct ZonalPanel {
  std::vector<std::string> zone_ids;
  std::vector<int> years;
  Eigen::MatrixXd sums;                  // zones x years
  std::vector<std::size_t> member_cells;  // cell centres inside each zone
  std::vector<std::string> warnings;
  std::size_t overlapping_cells = 0;  // centres claimed by more than one zone
};

void validate(const GridRaster& raster);

/// Throws InputError if a ring is too short, not closed, or self-intersecting.
void validate(const ZonePolygon& polygon);

Point2 cell_center(const GridRaster& raster, Eigen::Index row, Eigen::Index col);

/// Even-odd ray casting against the exterior ring, toggled by each hole that
/// contains the point. Points on any ring edge or vertex count as inside.
bool point_in_polygon(const Point2& p, const ZonePolygon& polygon);

/// Sum of non-nodata cells whose centre is inside each zone, per band.
/// A centre inside several zones contributes to each of them.
ZonalPanel aggregate_zones(const GridRaster& raster, const std::vector<ZonePolygon>& zones);

/// Reads a raster document. Bands carry either inline "values" (array of rows)
/// or a "csv" path resolved relative to the document.
GridRaster load_raster(const std::filesystem::path& path);
GridRaster raster_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

std::vector<ZonePolygon> load_zones(const std::filesystem::path& path);
std::vector<ZonePolygon> zones_from_json(const nlohmann::json& doc);

/// `entity_id,country_code,year,value` rows, ready for load_panel.
std::string zonal_panel_csv(const ZonalPanel& panel, const std::vector<ZonePolygon>& zones);

}  // namespace regime_kit
