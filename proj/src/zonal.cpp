#include "regime_kit/zonal.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "regime_kit/error.hpp"
#include "regime_kit/io.hpp"

namespace regime_kit {

namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

bool within_box(const Point2& p, const Point2& a, const Point2& b) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) && std::min(a.y(), b.y()) <= p.y() &&
         p.y() <= std::max(a.y(), b.y());
}

bool on_segment(const Point2& p, const Point2& a, const Point2& b) {
  return cross(a, b, p) == 0.0 && within_box(p, a, b);
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

bool segments_intersect(const Point2& p1, const Point2& p2, const Point2& q1, const Point2& q2) {
  const int d1 = sign(cross(q1, q2, p1));
  const int d2 = sign(cross(q1, q2, p2));
  const int d3 = sign(cross(p1, p2, q1));
  const int d4 = sign(cross(p1, p2, q2));
  if (d1 * d2 < 0 && d3 * d4 < 0) return true;
  return (d1 == 0 && within_box(p1, q1, q2)) || (d2 == 0 && within_box(p2, q1, q2)) ||
         (d3 == 0 && within_box(q1, p1, p2)) || (d4 == 0 && within_box(q2, p1, p2));
}

bool on_ring(const Point2& p, const Ring& ring) {
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    if (on_segment(p, ring[i], ring[i + 1])) return true;
  }
  return false;
}

// Even-odd crossing parity of a ray towards +x. Assumes p is not on the ring.
bool ring_parity(const Point2& p, const Ring& ring) {
  bool inside = false;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    const Point2& a = ring[i];
    const Point2& b = ring[i + 1];
    if ((a.y() > p.y()) == (b.y() > p.y())) continue;
    const double side = cross(a, b, p);
    if ((b.y() > a.y()) ? side > 0.0 : side < 0.0) inside = !inside;
  }
  return inside;
}

void validate_ring(const Ring& ring, const std::string& what) {
  if (ring.size() < 4) throw InputError(what + " needs at least 4 vertices (closed)");
  if (ring.front() != ring.back()) throw InputError(what + " is not closed");
  for (const auto& v : ring) {
    if (!v.allFinite()) throw InputError(what + " has a non-finite vertex");
  }
  const std::size_t edges = ring.size() - 1;
  for (std::size_t i = 0; i < edges; ++i) {
    for (std::size_t j = i + 1; j < edges; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == edges - 1);
      if (adjacent) {
        // Adjacent edges share one vertex; they may not run back along each other.
        const Point2& shared = j == i + 1 ? ring[j] : ring[i];
        const Point2& u = j == i + 1 ? ring[i] : ring[i + 1];
        const Point2& w = j == i + 1 ? ring[j + 1] : ring[j];
        if (cross(shared, u, w) == 0.0 && (u - shared).dot(w - shared) > 0.0) {
          throw InputError(what + " folds back on itself at vertex " + std::to_string(j == i + 1 ? j : i));
        }
        continue;
      }
      if (segments_intersect(ring[i], ring[i + 1], ring[j], ring[j + 1])) {
        throw InputError(what + " is self-intersecting (edges " + std::to_string(i) + " and " + std::to_string(j) +
                         ")");
      }
    }
  }
}

bool is_nodata(double v, double nodata) { return std::isnan(v) || v == nodata; }

}  // namespace

void validate(const GridRaster& raster) {
  if (!(raster.cell_size > 0.0) || !std::isfinite(raster.cell_size)) throw InputError("cell_size must be positive");
  if (raster.n_rows <= 0 || raster.n_cols <= 0) throw InputError("raster dimensions must be positive");
  for (const auto& band : raster.bands) {
    if (band.values.rows() != raster.n_rows || band.values.cols() != raster.n_cols) {
      throw InputError("band " + std::to_string(band.year) + " does not match raster dimensions");
    }
  }
}

void validate(const ZonePolygon& polygon) {
  validate_ring(polygon.exterior, "zone '" + polygon.zone_id + "' exterior");
  for (std::size_t h = 0; h < polygon.holes.size(); ++h) {
    validate_ring(polygon.holes[h], "zone '" + polygon.zone_id + "' hole " + std::to_string(h));
  }
}

Point2 cell_center(const GridRaster& raster, Eigen::Index row, Eigen::Index col) {
  if (row < 0 || row >= raster.n_rows || col < 0 || col >= raster.n_cols) {
    throw InputError("cell (" + std::to_string(row) + ", " + std::to_string(col) + ") outside raster");
  }
  return {raster.origin_x + (static_cast<double>(col) + 0.5) * raster.cell_size,
          raster.origin_y - (static_cast<double>(row) + 0.5) * raster.cell_size};
}

bool point_in_polygon(const Point2& p, const ZonePolygon& polygon) {
  if (on_ring(p, polygon.exterior)) return true;
  if (!ring_parity(p, polygon.exterior)) return false;
  bool inside = true;
  for (const auto& hole : polygon.holes) {
    if (on_ring(p, hole)) return true;
    if (ring_parity(p, hole)) inside = !inside;
  }
  return inside;
}

ZonalPanel aggregate_zones(const GridRaster& raster, const std::vector<ZonePolygon>& zones) {
  validate(raster);
  if (zones.empty()) throw InputError("at least one zone is required");
  if (raster.bands.empty()) throw InputError("raster has no bands");
  for (const auto& z : zones) validate(z);

  ZonalPanel out;
  const auto n_zones = static_cast<Eigen::Index>(zones.size());
  const auto n_bands = static_cast<Eigen::Index>(raster.bands.size());
  for (const auto& b : raster.bands) out.years.push_back(b.year);
  out.sums = Eigen::MatrixXd::Zero(n_zones, n_bands);
  out.member_cells.assign(zones.size(), 0);
  std::vector<std::uint16_t> coverage(static_cast<std::size_t>(raster.n_rows * raster.n_cols), 0);

  const double cs = raster.cell_size;
  for (Eigen::Index z = 0; z < n_zones; ++z) {
    const auto& zone = zones[static_cast<std::size_t>(z)];
    out.zone_ids.push_back(zone.zone_id);
    Point2 lo = zone.exterior.front();
    Point2 hi = lo;
    for (const auto& v : zone.exterior) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    // Candidate index window, padded by one cell; containment decides.
    const auto clamp_row = [&](double r) { return std::clamp<Eigen::Index>(static_cast<Eigen::Index>(r), 0, raster.n_rows - 1); };
    const auto clamp_col = [&](double c) { return std::clamp<Eigen::Index>(static_cast<Eigen::Index>(c), 0, raster.n_cols - 1); };
    const auto c0 = clamp_col(std::floor((lo.x() - raster.origin_x) / cs - 0.5) - 1);
    const auto c1 = clamp_col(std::ceil((hi.x() - raster.origin_x) / cs - 0.5) + 1);
    const auto r0 = clamp_row(std::floor((raster.origin_y - hi.y()) / cs - 0.5) - 1);
    const auto r1 = clamp_row(std::ceil((raster.origin_y - lo.y()) / cs - 0.5) + 1);
    for (Eigen::Index r = r0; r <= r1; ++r) {
      for (Eigen::Index c = c0; c <= c1; ++c) {
        const Point2 p = cell_center(raster, r, c);
        if ((p.array() < lo.array()).any() || (p.array() > hi.array()).any()) continue;
        if (!point_in_polygon(p, zone)) continue;
        ++out.member_cells[static_cast<std::size_t>(z)];
        auto& cov = coverage[static_cast<std::size_t>(r * raster.n_cols + c)];
        if (cov == 1) ++out.overlapping_cells;
        ++cov;
        for (Eigen::Index b = 0; b < n_bands; ++b) {
          const double v = raster.bands[static_cast<std::size_t>(b)].values(r, c);
          if (!is_nodata(v, raster.nodata)) out.sums(z, b) += v;
        }
      }
    }
    if (out.member_cells[static_cast<std::size_t>(z)] == 0) {
      out.warnings.push_back("zone '" + zone.zone_id + "' contains no cell centres (zero coverage)");
    }
  }
  if (out.overlapping_cells > 0) {
    out.warnings.push_back(std::to_string(out.overlapping_cells) + " cell centres fall inside more than one zone");
  }
  return out;
}

namespace {

Eigen::MatrixXd matrix_from_rows(const nlohmann::json& rows, const std::string& what) {
  if (!rows.is_array() || rows.empty()) throw InputError(what + " must be a non-empty array of rows");
  const auto n_rows = static_cast<Eigen::Index>(rows.size());
  const auto n_cols = static_cast<Eigen::Index>(rows[0].size());
  Eigen::MatrixXd m(n_rows, n_cols);
  for (Eigen::Index r = 0; r < n_rows; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n_cols) throw InputError(what + " is ragged");
    for (Eigen::Index c = 0; c < n_cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      m(r, c) = v.is_null() ? std::nan("") : v.get<double>();
    }
  }
  return m;
}

Eigen::MatrixXd matrix_from_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<double> row;
    for (const auto& f : split_csv_line(line)) {
      const auto v = parse_double(f);
      if (!v && f != "nan" && f != "NA") throw InputError("'" + path.string() + "': '" + f + "' is not numeric");
      row.push_back(v.value_or(std::nan("")));
    }
    if (!rows.empty() && row.size() != rows.front().size()) throw InputError("'" + path.string() + "' is ragged");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError("'" + path.string() + "' is empty");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

Ring ring_from_json(const nlohmann::json& pts) {
  Ring ring;
  for (const auto& p : pts) {
    if (!p.is_array() || p.size() != 2) throw InputError("polygon vertices must be [x, y] pairs");
    ring.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return ring;
}

}  // namespace

GridRaster raster_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  try {
    GridRaster r;
    r.origin_x = doc.at("origin_x").get<double>();
    r.origin_y = doc.at("origin_y").get<double>();
    r.cell_size = doc.at("cell_size").get<double>();
    r.n_rows = doc.at("n_rows").get<Eigen::Index>();
    r.n_cols = doc.at("n_cols").get<Eigen::Index>();
    if (doc.contains("nodata") && !doc["nodata"].is_null()) r.nodata = doc["nodata"].get<double>();
    for (const auto& b : doc.at("bands")) {
      RasterBand band;
      band.year = b.at("year").get<int>();
      if (b.contains("values")) {
        band.values = matrix_from_rows(b["values"], "band " + std::to_string(band.year));
      } else {
        band.values = matrix_from_csv(base_dir / b.at("csv").get<std::string>());
      }
      r.bands.push_back(std::move(band));
    }
    validate(r);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed raster document: ") + e.what());
  }
}

GridRaster load_raster(const std::filesystem::path& path) {
  return raster_from_json(read_json_file(path), path.parent_path());
}

std::vector<ZonePolygon> zones_from_json(const nlohmann::json& doc) {
  try {
    std::vector<ZonePolygon> zones;
    for (const auto& z : doc.at("zones")) {
      ZonePolygon poly;
      const auto& id = z.at("id");
      poly.zone_id = id.is_string() ? id.get<std::string>() : id.dump();
      poly.exterior = ring_from_json(z.at("exterior"));
      if (z.contains("holes")) {
        for (const auto& h : z["holes"]) poly.holes.push_back(ring_from_json(h));
      }
      poly.country_code = z.value("country_code", std::string{});
      validate(poly);
      zones.push_back(std::move(poly));
    }
    return zones;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed zones document: ") + e.what());
  }
}

std::vector<ZonePolygon> load_zones(const std::filesystem::path& path) { return zones_from_json(read_json_file(path)); }

std::string zonal_panel_csv(const ZonalPanel& panel, const std::vector<ZonePolygon>& zones) {
  std::string out = "entity_id,country_code,year,value\n";
  for (std::size_t z = 0; z < panel.zone_ids.size(); ++z) {
    for (std::size_t t = 0; t < panel.years.size(); ++t) {
      out += panel.zone_ids[z] + "," + zones[z].country_code + "," + std::to_string(panel.years[t]) + "," +
             format_double(panel.sums(static_cast<Eigen::Index>(z), static_cast<Eigen::Index>(t))) + "\n";
    }
  }
  return out;
}

}  // namespace regime_kit
