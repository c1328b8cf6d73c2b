#include "regime_kit/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "regime_kit/error.hpp"
#include "regime_kit/io.hpp"

namespace regime_kit {

namespace {

struct RawRow {
  std::size_t line = 0;
  std::string entity;
  std::string country;
  int year = 0;
  std::optional<double> value;
  std::optional<GeoPoint> location;
};

std::string where(std::size_t line) { return "line " + std::to_string(line); }

int parse_year(std::string_view field, std::size_t line) {
  int year = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, year);
  if (ec != std::errc{} || ptr != end) {
    throw InputError(where(line) + ": year '" + std::string(field) + "' is not an integer");
  }
  return year;
}

double parse_real(std::string_view field, std::size_t line, const char* what) {
  const auto parsed = parse_double(field);
  if (!parsed) {
    throw InputError(where(line) + ": " + what + " '" + std::string(field) + "' is not numeric");
  }
  return *parsed;
}

}  // namespace

void validate(const Panel& panel) {
  const auto n = panel.entities.size();
  const auto t = panel.years.size();
  if (n < 1) throw InputError("panel has no entities");
  if (t < 2) throw InputError("panel needs at least two years");
  if (static_cast<std::size_t>(panel.values.rows()) != n ||
      static_cast<std::size_t>(panel.values.cols()) != t ||
      panel.present.rows() != panel.values.rows() || panel.present.cols() != panel.values.cols()) {
    throw InputError("panel matrix dimensions do not match entities x years");
  }
  for (std::size_t k = 0; k + 1 < t; ++k) {
    if (panel.years[k + 1] != panel.years[k] + 1) throw InputError("panel years are not consecutive");
  }
  std::unordered_set<std::string> ids;
  for (const auto& e : panel.entities) {
    if (!ids.insert(e.entity_id).second) throw InputError("duplicate entity_id '" + e.entity_id + "'");
    if (e.location && (std::abs(e.location->longitude) > 180.0 || std::abs(e.location->latitude) > 90.0)) {
      throw InputError("entity '" + e.entity_id + "' has coordinates out of range");
    }
  }
  for (Eigen::Index i = 0; i < panel.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < panel.values.cols(); ++j) {
      if (!panel.present(i, j)) continue;
      const double v = panel.values(i, j);
      if (!std::isfinite(v) || v < 0.0) {
        throw InputError("entity '" + panel.entities[i].entity_id + "' has invalid level in " +
                         std::to_string(panel.years[j]));
      }
    }
  }
}

Panel load_panel(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw InputError("panel CSV is empty");
  ++line_no;
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < header.size(); ++c) col[header[c]] = c;
  for (const char* required : {"entity_id", "country_code", "year", "value"}) {
    if (!col.contains(required)) throw InputError(std::string("panel CSV missing column '") + required + "'");
  }
  if (col.contains("lon") != col.contains("lat")) throw InputError("panel CSV must have both lon and lat, or neither");
  const bool has_coords = col.contains("lon");

  std::vector<RawRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw InputError(where(line_no) + ": expected " + std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    RawRow r;
    r.line = line_no;
    r.entity = fields[col["entity_id"]];
    r.country = fields[col["country_code"]];
    if (r.entity.empty()) throw InputError(where(line_no) + ": empty entity_id");
    r.year = parse_year(fields[col["year"]], line_no);
    const auto& value = fields[col["value"]];
    if (!value.empty() && value != "NA") {
      const double v = parse_real(value, line_no, "value");
      if (!std::isfinite(v) || v < 0.0) {
        throw InputError(where(line_no) + ": value must be finite and non-negative");
      }
      r.value = v;
    }
    if (has_coords) {
      const auto& lon = fields[col["lon"]];
      const auto& lat = fields[col["lat"]];
      if (lon.empty() != lat.empty()) throw InputError(where(line_no) + ": lon and lat must both be present or absent");
      if (!lon.empty()) r.location = GeoPoint{parse_real(lon, line_no, "lon"), parse_real(lat, line_no, "lat")};
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw InputError("panel CSV has no data rows");

  Panel panel;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::size_t> first_line;
  int min_year = std::numeric_limits<int>::max();
  int max_year = std::numeric_limits<int>::min();
  for (const auto& r : rows) {
    auto [it, inserted] = index.try_emplace(r.entity, panel.entities.size());
    if (inserted) {
      panel.entities.push_back({r.entity, r.country, r.location});
      first_line.push_back(r.line);
    } else {
      const auto& meta = panel.entities[it->second];
      if (meta.country_code != r.country) {
        throw InputError(where(r.line) + ": entity '" + r.entity + "' has inconsistent country_code (first seen on " +
                         where(first_line[it->second]) + ")");
      }
      if (meta.location != r.location) {
        throw InputError(where(r.line) + ": entity '" + r.entity + "' has inconsistent coordinates (first seen on " +
                         where(first_line[it->second]) + ")");
      }
    }
    min_year = std::min(min_year, r.year);
    max_year = std::max(max_year, r.year);
  }

  const auto n = static_cast<Eigen::Index>(panel.entities.size());
  const auto t = static_cast<Eigen::Index>(max_year - min_year + 1);
  for (int y = min_year; y <= max_year; ++y) panel.years.push_back(y);
  panel.values = Eigen::MatrixXd::Zero(n, t);
  panel.present = BoolMatrix::Constant(n, t, false);
  Eigen::MatrixX<std::size_t> seen = Eigen::MatrixX<std::size_t>::Zero(n, t);
  for (const auto& r : rows) {
    const auto i = static_cast<Eigen::Index>(index[r.entity]);
    const auto j = static_cast<Eigen::Index>(r.year - min_year);
    if (seen(i, j) != 0) {
      throw InputError("duplicate (entity, year) = (" + r.entity + ", " + std::to_string(r.year) + ") on lines " +
                       std::to_string(seen(i, j)) + " and " + std::to_string(r.line));
    }
    seen(i, j) = r.line;
    if (r.value) {
      panel.values(i, j) = *r.value;
      panel.present(i, j) = true;
    }
  }
  validate(panel);
  return panel;
}

Panel load_panel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open panel file '" + path + "'");
  return load_panel(in);
}

GrowthMatrix compute_growth(const Panel& panel) {
  validate(panel);
  const auto n = panel.values.rows();
  const auto t = panel.values.cols();
  GrowthMatrix gm;
  gm.entities = panel.entities;
  gm.growth_years.assign(panel.years.begin() + 1, panel.years.end());
  gm.g = Eigen::MatrixXd::Constant(n, t - 1, std::numeric_limits<double>::quiet_NaN());
  gm.valid = BoolMatrix::Constant(n, t - 1, false);
  gm.complete.assign(static_cast<std::size_t>(n), true);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k + 1 < t; ++k) {
      const double prev = panel.values(i, k);
      const double next = panel.values(i, k + 1);
      if (panel.present(i, k) && panel.present(i, k + 1) && prev > 0.0) {
        gm.g(i, k) = (next - prev) / prev * 100.0;
        gm.valid(i, k) = std::isfinite(gm.g(i, k));
      }
      if (!gm.valid(i, k)) gm.complete[static_cast<std::size_t>(i)] = false;
    }
  }
  return gm;
}

GrowthMatrix select_rows(const GrowthMatrix& gm, std::span<const std::size_t> rows) {
  GrowthMatrix out;
  out.growth_years = gm.growth_years;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.g.resize(m, gm.g.cols());
  out.valid.resize(m, gm.valid.cols());
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto src = rows[static_cast<std::size_t>(r)];
    if (src >= gm.rows()) throw InputError("row index out of range");
    out.entities.push_back(gm.entities[src]);
    out.g.row(r) = gm.g.row(static_cast<Eigen::Index>(src));
    out.valid.row(r) = gm.valid.row(static_cast<Eigen::Index>(src));
    out.complete.push_back(gm.complete[src]);
  }
  return out;
}

CompleteFilterResult filter_complete(const GrowthMatrix& gm) {
  CompleteFilterResult result;
  for (std::size_t i = 0; i < gm.rows(); ++i) {
    (gm.complete[i] ? result.kept_rows : result.dropped_rows).push_back(i);
  }
  if (result.kept_rows.empty()) throw InputError("no entity has a complete growth trajectory");
  result.growth = select_rows(gm, result.kept_rows);
  return result;
}

Eigen::VectorXd levels_from_growth(double initial_level, const Eigen::Ref<const Eigen::VectorXd>& growth) {
  Eigen::VectorXd levels(growth.size() + 1);
  levels(0) = initial_level;
  for (Eigen::Index k = 0; k < growth.size(); ++k) levels(k + 1) = levels(k) * (1.0 + growth(k) / 100.0);
  return levels;
}

std::string panel_csv(const Panel& panel) {
  bool coords = std::all_of(panel.entities.begin(), panel.entities.end(), [](const auto& e) { return e.location.has_value(); });
  std::string out = coords ? "entity_id,country_code,year,value,lon,lat\n" : "entity_id,country_code,year,value\n";
  for (std::size_t i = 0; i < panel.entities.size(); ++i) {
    const auto& e = panel.entities[i];
    for (std::size_t t = 0; t < panel.years.size(); ++t) {
      const auto r = static_cast<Eigen::Index>(i);
      const auto c = static_cast<Eigen::Index>(t);
      out += e.entity_id + "," + e.country_code + "," + std::to_string(panel.years[t]) + "," +
             (panel.present(r, c) ? format_double(panel.values(r, c)) : std::string("NA"));
      if (coords) out += "," + format_double(e.location->longitude) + "," + format_double(e.location->latitude);
      out += "\n";
    }
  }
  return out;
}

nlohmann::json to_json(const Panel& panel) {
  nlohmann::json j;
  j["years"] = panel.years;
  auto& entities = j["entities"] = nlohmann::json::array();
  for (std::size_t i = 0; i < panel.entities.size(); ++i) {
    const auto& e = panel.entities[i];
    nlohmann::json ej{{"entity_id", e.entity_id}, {"country_code", e.country_code}};
    if (e.location) {
      ej["lon"] = e.location->longitude;
      ej["lat"] = e.location->latitude;
    }
    auto& values = ej["values"] = nlohmann::json::array();
    for (Eigen::Index t = 0; t < panel.values.cols(); ++t) {
      const auto r = static_cast<Eigen::Index>(i);
      values.push_back(panel.present(r, t) ? nlohmann::json(panel.values(r, t)) : nlohmann::json(nullptr));
    }
    entities.push_back(std::move(ej));
  }
  return j;
}

Panel panel_from_json(const nlohmann::json& doc) {
  try {
    Panel panel;
    panel.years = doc.at("years").get<std::vector<int>>();
    const auto& entities = doc.at("entities");
    const auto n = static_cast<Eigen::Index>(entities.size());
    const auto t = static_cast<Eigen::Index>(panel.years.size());
    panel.values = Eigen::MatrixXd::Zero(n, t);
    panel.present = BoolMatrix::Constant(n, t, false);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& ej = entities[static_cast<std::size_t>(i)];
      EntityMeta meta{ej.at("entity_id").get<std::string>(), ej.at("country_code").get<std::string>(), std::nullopt};
      if (ej.contains("lon") != ej.contains("lat")) throw InputError("entity coordinates must come in pairs");
      if (ej.contains("lon")) meta.location = GeoPoint{ej["lon"].get<double>(), ej["lat"].get<double>()};
      const auto& values = ej.at("values");
      if (static_cast<Eigen::Index>(values.size()) != t) throw InputError("entity value count differs from years");
      for (Eigen::Index k = 0; k < t; ++k) {
        const auto& v = values[static_cast<std::size_t>(k)];
        if (v.is_null()) continue;
        panel.values(i, k) = v.get<double>();
        panel.present(i, k) = true;
      }
      panel.entities.push_back(std::move(meta));
    }
    validate(panel);
    return panel;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed panel document: ") + e.what());
  }
}

Panel load_panel_file(const std::string& path) {
  if (path.size() >= 5 && path.ends_with(".json")) return panel_from_json(read_json_file(path));
  return load_panel_csv(path);
}

}  // namespace regime_kit
