#include "telemovr/io.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "telemovr/errors.hpp"

namespace telemovr::io {
namespace {

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) {
    const auto b = cur.find_first_not_of(" \t\r");
    const auto e = cur.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cur.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& s, const fs::path& file, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError(file.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  }
}

long to_long(const std::string& s, const fs::path& file, std::size_t line) {
  const double v = to_double(s, file, line);
  if (v != std::floor(v) || std::abs(v) > 9e15)
    throw IoError(file.string() + ":" + std::to_string(line) + ": not an integer: '" + s + "'");
  return static_cast<long>(v);
}

// Reads a CSV with a required header; returns data rows as string fields.
std::vector<std::vector<std::string>> read_csv(const fs::path& path, const std::vector<std::string>& header) {
  const std::string text = read_text(path);
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  bool seen_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto fields = split(line);
    if (!seen_header) {
      if (fields != header) {
        std::string want;
        for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
        throw IoError(path.string() + ": expected header '" + want + "'");
      }
      seen_header = true;
      continue;
    }
    if (fields.size() != header.size())
      throw IoError(path.string() + ": row has " + std::to_string(fields.size()) + " fields, expected " +
                    std::to_string(header.size()));
    rows.push_back(std::move(fields));
  }
  if (!seen_header) throw IoError(path.string() + ": missing header");
  return rows;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path q(p);
  return q.is_absolute() ? q : base / q;
}

template <class T>
T get(const Json& j, const char* key) {
  if (!j.contains(key)) throw IoError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw IoError(std::string("field '") + key + "': " + e.what());
  }
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw IoError(std::string("field '") + key + "': " + e.what());
  }
}

void reject_unknown_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view what) {
  if (!j.is_object()) throw IoError(std::string(what) + ": expected a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw IoError(std::string(what) + ": unknown field '" + key + "'");
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw IoError(path.string() + ": invalid JSON: " + e.what());
  }
}

void write_json(const fs::path& path, const Json& doc) { write_text(path, doc.dump(2) + "\n"); }

std::vector<bool> read_mask_csv(const fs::path& path, int n_rows, int n_cols) {
  const std::string text = read_text(path);
  std::istringstream in(text);
  std::string line;
  std::vector<bool> mask;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = split(line);
    if (static_cast<int>(fields.size()) != n_cols)
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(n_cols) + " values");
    for (const auto& f : fields) {
      if (f != "0" && f != "1") throw IoError(path.string() + ":" + std::to_string(lineno) + ": mask values must be 0/1");
      mask.push_back(f == "1");
    }
  }
  if (static_cast<long>(mask.size()) != static_cast<long>(n_rows) * n_cols)
    throw IoError(path.string() + ": expected " + std::to_string(n_rows) + " mask lines");
  return mask;
}

void write_mask_csv(const fs::path& path, const GridSpec& spec) {
  std::string out;
  for (int r = 0; r < spec.n_rows; ++r) {
    for (int c = 0; c < spec.n_cols; ++c) {
      const bool v = spec.valid_mask.empty() || spec.valid_mask[static_cast<std::size_t>(r) * spec.n_cols + c];
      out += (c ? "," : "");
      out += v ? "1" : "0";
    }
    out += "\n";
  }
  write_text(path, out);
}

GridSpec grid_spec_from_json(const Json& j, const fs::path& base_dir) {
  GridSpec s;
  const auto origin = get<std::vector<double>>(j, "origin");
  if (origin.size() != 2) throw IoError("grid: origin must be [x, y]");
  s.origin = {origin[0], origin[1]};
  s.cell_size = get<double>(j, "cell_size");
  s.n_rows = get<int>(j, "n_rows");
  s.n_cols = get<int>(j, "n_cols");
  s.move_radius = get<double>(j, "move_radius");
  if (j.contains("mask") && !j.at("mask").is_null()) {
    if (s.n_rows <= 0 || s.n_cols <= 0) throw IoError("grid: n_rows and n_cols must be positive");
    s.valid_mask = read_mask_csv(resolve(base_dir, get<std::string>(j, "mask")), s.n_rows, s.n_cols);
  }
  return s;
}

Json grid_spec_to_json(const GridSpec& spec, const std::optional<std::string>& mask_file) {
  Json j = {{"origin", {spec.origin.x, spec.origin.y}},
            {"cell_size", spec.cell_size},
            {"n_rows", spec.n_rows},
            {"n_cols", spec.n_cols},
            {"move_radius", spec.move_radius}};
  if (mask_file) j["mask"] = *mask_file;
  return j;
}

GridSpec load_grid_spec(const fs::path& path) { return grid_spec_from_json(read_json(path), path.parent_path()); }

std::vector<Tower> towers_from_json(const Json& j) {
  if (!j.is_array()) throw IoError("towers: expected a JSON array");
  std::vector<Tower> out;
  for (const auto& t : j) out.push_back({get<int>(t, "id"), {get<double>(t, "x"), get<double>(t, "y")}});
  for (std::size_t a = 0; a < out.size(); ++a)
    for (std::size_t b = a + 1; b < out.size(); ++b)
      if (out[a].id == out[b].id) throw IoError("towers: duplicate id " + std::to_string(out[a].id));
  return out;
}

Json towers_to_json(std::span<const Tower> towers) {
  Json j = Json::array();
  for (const auto& t : towers) j.push_back({{"id", t.id}, {"x", t.position.x}, {"y", t.position.y}});
  return j;
}

std::vector<Tower> load_towers(const fs::path& path) { return towers_from_json(read_json(path)); }

ZoneMap zone_map_from_json(const Json& j) {
  const int zones = get_or<int>(j, "zones", 1);
  const long period = get_or<long>(j, "period", 0);
  std::vector<ZoneMap::Interval> intervals;
  if (j.contains("assignment") && j.at("assignment").is_array()) {
    for (const auto& iv : j.at("assignment")) {
      if (!iv.is_array() || iv.size() != 3) throw IoError("zone map: intervals are [t_start, t_end, zone]");
      intervals.push_back({iv[0].get<long>(), iv[1].get<long>(), iv[2].get<int>()});
    }
  } else if (j.contains("assignment") && j.at("assignment") != "all") {
    throw IoError("zone map: assignment must be \"all\" or a list of intervals");
  }
  return ZoneMap(zones, std::move(intervals), period);
}

Json zone_map_to_json(const ZoneMap& zones) {
  Json j = {{"zones", zones.num_zones()}};
  if (zones.intervals().empty()) {
    j["assignment"] = "all";
  } else {
    Json a = Json::array();
    for (const auto& iv : zones.intervals()) a.push_back({iv.t_start, iv.t_end, iv.zone});
    j["assignment"] = a;
  }
  if (zones.period() > 0) j["period"] = zones.period();
  return j;
}

std::shared_ptr<const FeatureSet> feature_set_from_json(const Json& doc, const fs::path& base_dir,
                                                        std::shared_ptr<const Grid> grid) {
  const Json& list = doc.is_object() ? doc.at("features") : doc;
  if (!list.is_array()) throw IoError("features: expected a JSON array");
  const GridSpec& gs = grid->spec();
  std::vector<FeatureDef> defs;
  for (const auto& f : list) {
    FeatureDef d;
    d.name = get<std::string>(f, "name");
    try {
      d.kind = feature_kind_from_string(get<std::string>(f, "kind"));
    } catch (const DomainError& e) {
      throw IoError(e.what());
    }
    d.normalize = get_or<bool>(f, "normalize", false);
    switch (d.kind) {
      case FeatureKind::distance_gaussian:
        break;
      case FeatureKind::raster_delta: {
        const fs::path p = resolve(base_dir, get<std::string>(f, "payload"));
        const std::string text = read_text(p);
        std::istringstream in(text);
        std::string line;
        std::vector<double> raster;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
          ++lineno;
          if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
          const auto fields = split(line);
          if (static_cast<int>(fields.size()) != gs.n_cols)
            throw IoError(p.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(gs.n_cols) + " values");
          for (const auto& s : fields) raster.push_back(to_double(s, p, lineno));
        }
        if (static_cast<long>(raster.size()) != static_cast<long>(gs.n_rows) * gs.n_cols)
          throw IoError(p.string() + ": expected " + std::to_string(gs.n_rows) + " raster lines");
        d.raster.resize(grid->num_cells());
        for (std::size_t c = 0; c < grid->num_cells(); ++c) {
          const auto id = static_cast<CellId>(c);
          d.raster[c] = raster[static_cast<std::size_t>(grid->row(id)) * gs.n_cols + grid->col(id)];
        }
        break;
      }
      case FeatureKind::nearest_distance:
        for (const auto& pt : f.at("payload")) {
          if (!pt.is_array() || pt.size() != 2) throw IoError("feature '" + d.name + "': points are [x, y]");
          d.points.push_back({pt[0].get<double>(), pt[1].get<double>()});
        }
        break;
      case FeatureKind::tabulated: {
        const fs::path p = resolve(base_dir, get<std::string>(f, "payload"));
        const auto rows = read_csv(p, {"from", "to", "value"});
        d.table.assign(grid->num_pairs(), std::numeric_limits<double>::quiet_NaN());
        std::size_t lineno = 1;
        for (const auto& r : rows) {
          ++lineno;
          const long from = to_long(r[0], p, lineno);
          const long to = to_long(r[1], p, lineno);
          if (from < 0 || static_cast<std::size_t>(from) >= grid->num_cells() || to < 0 ||
              static_cast<std::size_t>(to) >= grid->num_cells())
            throw IoError(p.string() + ":" + std::to_string(lineno) + ": cell id out of range");
          const int j = grid->neighbor_index(static_cast<CellId>(from), static_cast<CellId>(to));
          if (j < 0) throw IoError(p.string() + ":" + std::to_string(lineno) + ": pair outside the neighborhood");
          d.table[grid->pair_offset(static_cast<CellId>(from)) + static_cast<std::size_t>(j)] = to_double(r[2], p, lineno);
        }
        for (double v : d.table)
          if (std::isnan(v)) throw IoError(p.string() + ": table does not cover every neighborhood pair");
        break;
      }
    }
    defs.push_back(std::move(d));
  }
  ZoneMap zones;
  if (doc.is_object() && doc.contains("zones")) zones = zone_map_from_json(doc.at("zones"));
  return std::make_shared<const FeatureSet>(std::move(grid), std::move(defs), std::move(zones));
}

std::shared_ptr<const FeatureSet> load_feature_set(const fs::path& path, std::shared_ptr<const Grid> grid) {
  return feature_set_from_json(read_json(path), path.parent_path(), std::move(grid));
}

void write_tabulated_features(const fs::path& dir, const FeatureSet& features) {
  const Grid& grid = features.grid();
  Json list = Json::array();
  for (std::size_t k = 0; k < features.size(); ++k) {
    const FeatureDef& d = features.def(k);
    Json entry = {{"name", d.name}, {"kind", to_string(d.kind)}, {"normalize", d.normalize}};
    if (d.kind == FeatureKind::tabulated) {
      const std::string file = d.name + ".csv";
      std::string out = "from,to,value\n";
      for (std::size_t c = 0; c < grid.num_cells(); ++c) {
        const auto from = static_cast<CellId>(c);
        const auto nb = grid.neighborhood(from);
        const std::size_t base = grid.pair_offset(from);
        for (std::size_t j = 0; j < nb.size(); ++j)
          out += std::to_string(from) + "," + std::to_string(nb[j]) + "," + format_double(d.table[base + j]) + "\n";
      }
      write_text(dir / file, out);
      entry["payload"] = file;
    } else if (d.kind == FeatureKind::nearest_distance) {
      Json pts = Json::array();
      for (const auto& p : d.points) pts.push_back({p.x, p.y});
      entry["payload"] = pts;
    } else if (d.kind == FeatureKind::raster_delta) {
      const GridSpec& gs = grid.spec();
      std::vector<double> raster(static_cast<std::size_t>(gs.n_rows) * gs.n_cols, 0.0);
      for (std::size_t c = 0; c < grid.num_cells(); ++c) {
        const auto id = static_cast<CellId>(c);
        raster[static_cast<std::size_t>(grid.row(id)) * gs.n_cols + grid.col(id)] = d.raster[c];
      }
      std::string out;
      for (int r = 0; r < gs.n_rows; ++r) {
        for (int c = 0; c < gs.n_cols; ++c)
          out += (c ? "," : "") + format_double(raster[static_cast<std::size_t>(r) * gs.n_cols + c]);
        out += "\n";
      }
      const std::string file = d.name + "_raster.csv";
      write_text(dir / file, out);
      entry["payload"] = file;
    }
    list.push_back(entry);
  }
  write_json(dir / "features.json", {{"features", list}, {"zones", zone_map_to_json(features.zones())}});
}

ModelParams params_from_json(const Json& j) {
  ModelParams p;
  const auto lambda = get<std::vector<std::vector<double>>>(j, "lambda");
  if (lambda.empty() || lambda.front().empty()) throw IoError("params: lambda must be a non-empty matrix");
  p.num_zones = static_cast<int>(lambda.size());
  p.num_features = static_cast<int>(lambda.front().size());
  for (const auto& row : lambda) {
    if (row.size() != lambda.front().size()) throw IoError("params: ragged lambda matrix");
    p.lambda.insert(p.lambda.end(), row.begin(), row.end());
  }
  p.mu = get<std::vector<double>>(j, "mu");
  p.kappa = get<std::vector<double>>(j, "kappa");
  p.validate();
  for (double& m : p.mu) m = wrap_angle(m);
  return p;
}

Json params_to_json(const ModelParams& p) {
  Json lambda = Json::array();
  for (int z = 0; z < p.num_zones; ++z) {
    const auto w = p.weights(z);
    lambda.push_back(std::vector<double>(w.begin(), w.end()));
  }
  return {{"lambda", lambda}, {"mu", p.mu}, {"kappa", p.kappa}};
}

ModelParams load_params(const fs::path& path) {
  try {
    return params_from_json(read_json(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

BearingSeries read_bearings_csv(const fs::path& path, std::span<const Tower> towers, std::optional<int> num_steps) {
  const auto rows = read_csv(path, {"t", "tower", "bearing_rad"});
  std::map<int, int> index;
  for (std::size_t n = 0; n < towers.size(); ++n) index[towers[n].id] = static_cast<int>(n);
  long max_t = -1;
  struct Entry { long t; int n; double y; };
  std::vector<Entry> entries;
  std::size_t lineno = 1;
  for (const auto& r : rows) {
    ++lineno;
    const long t = to_long(r[0], path, lineno);
    const long id = to_long(r[1], path, lineno);
    const double y = to_double(r[2], path, lineno);
    if (t < 0) throw IoError(path.string() + ":" + std::to_string(lineno) + ": negative time step");
    const auto it = index.find(static_cast<int>(id));
    if (it == index.end()) throw IoError(path.string() + ":" + std::to_string(lineno) + ": unknown tower id " + std::to_string(id));
    if (!(y >= -kPi && y < kPi))
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": bearing outside [-pi, pi)");
    entries.push_back({t, it->second, y});
    max_t = std::max(max_t, t);
  }
  const long steps = num_steps ? *num_steps : max_t + 1;
  if (steps < 1) throw IoError(path.string() + ": no observations");
  if (max_t >= steps) throw IoError(path.string() + ": time step beyond T");
  BearingSeries obs(static_cast<int>(steps), static_cast<int>(towers.size()));
  for (const auto& e : entries) obs.set(static_cast<int>(e.t), e.n, e.y);
  return obs;
}

void write_bearings_csv(const fs::path& path, const BearingSeries& obs, std::span<const Tower> towers) {
  std::string out = "t,tower,bearing_rad\n";
  for (int t = 0; t < obs.num_steps(); ++t)
    for (int n = 0; n < obs.num_towers(); ++n)
      if (obs.present(t, n))
        out += std::to_string(t) + "," + std::to_string(towers[static_cast<std::size_t>(n)].id) + "," +
               format_double(obs.at(t, n)) + "\n";
  write_text(path, out);
}

std::vector<CellId> read_path_csv(const fs::path& path, const Grid& grid) {
  const auto rows = read_csv(path, {"t", "cell", "center_x", "center_y"});
  std::vector<CellId> cells;
  std::size_t lineno = 1;
  for (const auto& r : rows) {
    ++lineno;
    if (to_long(r[0], path, lineno) != static_cast<long>(cells.size()))
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": rows must be consecutive from t = 0");
    const long c = to_long(r[1], path, lineno);
    if (c < 0 || static_cast<std::size_t>(c) >= grid.num_cells())
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": invalid cell");
    cells.push_back(static_cast<CellId>(c));
  }
  return cells;
}

void write_path_csv(const fs::path& path, std::span<const CellId> cells, const Grid& grid) {
  std::string out = "t,cell,center_x,center_y\n";
  for (std::size_t t = 0; t < cells.size(); ++t) {
    const Point p = grid.center(cells[t]);
    out += std::to_string(t) + "," + std::to_string(cells[t]) + "," + format_double(p.x) + "," + format_double(p.y) + "\n";
  }
  write_text(path, out);
}

void write_marginals_csv(const fs::path& path, const PosteriorTables& post) {
  std::string out = "t,cell,log_gamma\n";
  for (int t = 0; t < post.num_steps; ++t) {
    const auto g = post.log_marginals(t);
    for (std::size_t c = 0; c < g.size(); ++c)
      out += std::to_string(t) + "," + std::to_string(c) + "," + format_double(g[c]) + "\n";
  }
  write_text(path, out);
}

std::vector<GpsFix> read_gps_csv(const fs::path& path) {
  const auto rows = read_csv(path, {"t", "x", "y"});
  std::vector<GpsFix> out;
  std::size_t lineno = 1;
  for (const auto& r : rows) {
    ++lineno;
    out.push_back({to_long(r[0], path, lineno), {to_double(r[1], path, lineno), to_double(r[2], path, lineno)}});
  }
  return out;
}

FitConfig fit_config_from_json(const Json& j, const ModelParams& default_init, const fs::path& base_dir) {
  reject_unknown_keys(j, {"algo", "max_time", "max_iters", "num_burn", "seed", "trace_every", "wolfe_c1", "wolfe_c2",
                          "kappa_cap", "init_params", "kappa0", "direction"},
                      "fit config");
  FitConfig cfg;
  try {
    cfg.algo = algorithm_from_string(get_or<std::string>(j, "algo", "sg"));
    cfg.direction = sg_direction_from_string(get_or<std::string>(j, "direction", to_string(cfg.direction)));
  } catch (const DomainError& e) {
    throw IoError(e.what());
  }
  cfg.max_time = get_or<double>(j, "max_time", std::numeric_limits<double>::infinity());
  if (j.contains("max_iters") && !j.at("max_iters").is_null()) cfg.max_iters = get<long>(j, "max_iters");
  cfg.num_burn = get_or<long>(j, "num_burn", cfg.num_burn);
  cfg.seed = get_or<std::uint64_t>(j, "seed", 0);
  cfg.trace_every = get_or<int>(j, "trace_every", 1);
  cfg.wolfe_c1 = get_or<double>(j, "wolfe_c1", cfg.wolfe_c1);
  cfg.wolfe_c2 = get_or<double>(j, "wolfe_c2", cfg.wolfe_c2);
  cfg.kappa_cap = get_or<double>(j, "kappa_cap", cfg.kappa_cap);
  cfg.init_params = default_init;
  if (j.contains("init_params") && !j.at("init_params").is_null()) {
    const Json& ip = j.at("init_params");
    cfg.init_params = ip.is_string() ? load_params(resolve(base_dir, ip.get<std::string>())) : params_from_json(ip);
  }
  if (j.contains("kappa0")) std::fill(cfg.init_params.kappa.begin(), cfg.init_params.kappa.end(), get<double>(j, "kappa0"));
  return cfg;
}

Json fit_config_to_json(const FitConfig& cfg) {
  Json j = {{"algo", to_string(cfg.algo)},
            {"num_burn", cfg.num_burn},
            {"seed", cfg.seed},
            {"trace_every", cfg.trace_every},
            {"wolfe_c1", cfg.wolfe_c1},
            {"wolfe_c2", cfg.wolfe_c2},
            {"kappa_cap", cfg.kappa_cap},
            {"direction", to_string(cfg.direction)},
            {"init_params", params_to_json(cfg.init_params)}};
  j["max_time"] = cfg.time_bounded() ? Json(cfg.max_time) : Json(nullptr);
  j["max_iters"] = cfg.max_iters ? Json(*cfg.max_iters) : Json(nullptr);
  return j;
}

std::string trace_csv(const FitTrace& trace, bool include_timing) {
  std::string out = "iter,elapsed_s,objective,step_len,grad_norm\n";
  for (const auto& r : trace.records)
    out += std::to_string(r.iter) + "," + (include_timing ? format_double(r.elapsed_s) : std::string("0")) + "," +
           format_double(r.objective) + "," + format_double(r.step_len) + "," + format_double(r.grad_norm) + "\n";
  return out;
}

SynthSpec synth_spec_from_json(const Json& j, const fs::path& base_dir) {
  reject_unknown_keys(j, {"preset", "seed", "grid", "towers", "K", "T", "weight_range", "feature_range", "true_mu",
                          "true_kappa", "dropout", "out"},
                      "synth spec");
  const std::string preset = get_or<std::string>(j, "preset", "");
  const auto seed = get_or<std::uint64_t>(j, "seed", 0);
  SynthSpec s;
  if (preset == "desk") {
    s = SynthSpec::desk_scale(seed);
  } else if (preset == "full") {
    s = SynthSpec::full_scale(seed);
  } else if (!preset.empty()) {
    throw IoError("synth spec: unknown preset '" + preset + "'");
  }
  s.seed = seed;
  if (j.contains("grid")) s.grid = grid_spec_from_json(j.at("grid"), base_dir);
  if (j.contains("towers")) {
    const Json& t = j.at("towers");
    s.towers = t.is_string() ? load_towers(resolve(base_dir, t.get<std::string>())) : towers_from_json(t);
  }
  s.num_features = get_or<int>(j, "K", s.num_features);
  s.num_steps = get_or<int>(j, "T", s.num_steps);
  if (j.contains("weight_range")) {
    const auto r = get<std::vector<double>>(j, "weight_range");
    if (r.size() != 2) throw IoError("synth spec: weight_range is [lo, hi]");
    s.weight_range = {r[0], r[1]};
  }
  if (j.contains("feature_range")) {
    const auto r = get<std::vector<double>>(j, "feature_range");
    if (r.size() != 2) throw IoError("synth spec: feature_range is [lo, hi]");
    s.feature_range = {r[0], r[1]};
  }
  const std::size_t n = s.towers.size();
  if (j.contains("true_mu")) {
    s.true_mu = j.at("true_mu").is_number() ? std::vector<double>(n, j.at("true_mu").get<double>())
                                            : get<std::vector<double>>(j, "true_mu");
  } else if (s.true_mu.size() != n) {
    s.true_mu.assign(n, 0.0);
  }
  if (j.contains("true_kappa")) {
    s.true_kappa = j.at("true_kappa").is_number() ? std::vector<double>(n, j.at("true_kappa").get<double>())
                                                  : get<std::vector<double>>(j, "true_kappa");
  } else if (s.true_kappa.size() != n) {
    s.true_kappa.assign(n, 15.0);
  }
  s.dropout = get_or<double>(j, "dropout", 0.0);
  return s;
}

Json synth_spec_to_json(const SynthSpec& s) {
  return {{"grid", grid_spec_to_json(s.grid)},
          {"towers", towers_to_json(s.towers)},
          {"K", s.num_features},
          {"T", s.num_steps},
          {"weight_range", {s.weight_range.lo, s.weight_range.hi}},
          {"feature_range", {s.feature_range.lo, s.feature_range.hi}},
          {"true_mu", s.true_mu},
          {"true_kappa", s.true_kappa},
          {"dropout", s.dropout},
          {"seed", s.seed}};
}

Json eval_report_to_json(const EvalReport& r) {
  Json j = {{"label", r.label}, {"mean_location_error", r.mean_location_error}, {"observed_loglik", r.observed_loglik}};
  j["weight_l2_distance"] = r.weight_l2_distance ? Json(*r.weight_l2_distance) : Json(nullptr);
  if (!r.per_seed.empty()) {
    Json list = Json::array();
    for (const auto& s : r.per_seed) list.push_back(eval_report_to_json(s));
    j["per_seed"] = list;
  }
  return j;
}

std::string eval_report_csv(std::span<const EvalReport> rows) {
  std::string out = "label,mean_location_error,weight_l2_distance,observed_loglik\n";
  for (const auto& r : rows)
    out += r.label + "," + format_double(r.mean_location_error) + "," +
           (r.weight_l2_distance ? format_double(*r.weight_l2_distance) : std::string()) + "," +
           format_double(r.observed_loglik) + "\n";
  return out;
}

void write_scenario(const fs::path& dir, const Scenario& sc) {
  std::error_code ec;
  fs::create_directories(dir / "features", ec);
  if (ec) throw IoError("cannot create '" + (dir / "features").string() + "': " + ec.message());
  const GridSpec& gs = sc.grid->spec();
  const bool full = std::all_of(gs.valid_mask.begin(), gs.valid_mask.end(), [](bool b) { return b; });
  if (full) {
    write_json(dir / "grid.json", grid_spec_to_json(gs));
  } else {
    write_mask_csv(dir / "features" / "mask.csv", gs);
    write_json(dir / "grid.json", grid_spec_to_json(gs, std::string("features/mask.csv")));
  }
  write_json(dir / "towers.json", towers_to_json(sc.model->towers()));
  write_tabulated_features(dir / "features", sc.model->features());
  write_json(dir / "true_params.json", params_to_json(sc.truth));
  write_path_csv(dir / "true_path.csv", sc.path, *sc.grid);
  write_bearings_csv(dir / "bearings.csv", sc.bearings, sc.model->towers());
}

ScenarioFiles load_scenario(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("scenario directory '" + dir.string() + "' does not exist");
  ScenarioFiles sc;
  sc.grid = std::make_shared<const Grid>(load_grid_spec(dir / "grid.json"));
  const auto towers = load_towers(dir / "towers.json");
  auto features = load_feature_set(dir / "features" / "features.json", sc.grid);
  sc.model = std::make_shared<const Model>(features, towers);
  std::optional<int> steps;
  if (fs::exists(dir / "true_path.csv")) {
    sc.true_path = read_path_csv(dir / "true_path.csv", *sc.grid);
    steps = static_cast<int>(sc.true_path->size());
  }
  sc.bearings = read_bearings_csv(dir / "bearings.csv", towers, steps);
  if (fs::exists(dir / "true_params.json")) sc.truth = load_params(dir / "true_params.json");
  if (fs::exists(dir / "gps.csv")) sc.gps = read_gps_csv(dir / "gps.csv");
  return sc;
}

}  // namespace telemovr::io
