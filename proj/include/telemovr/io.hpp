#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "telemovr/estimation.hpp"
#include "telemovr/evalmetrics.hpp"
#include "telemovr/features.hpp"
#include "telemovr/grid.hpp"
#include "telemovr/model.hpp"
#include "telemovr/synth.hpp"

#include "json.hpp"

namespace telemovr::io {

namespace fs = std::filesystem;
using Json = nlohmann::json;

// All readers throw IoError for unreadable or malformed input and
// DomainError for well-formed input that violates a model invariant.
Json read_json(const fs::path& path);
void write_json(const fs::path& path, const Json& doc);
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);
std::string format_double(double v);

// Grid: { origin: [x, y], cell_size, n_rows, n_cols, move_radius, mask?: csv }.
// Relative mask paths resolve against base_dir.
GridSpec grid_spec_from_json(const Json& j, const fs::path& base_dir);
Json grid_spec_to_json(const GridSpec& spec, const std::optional<std::string>& mask_file = {});
GridSpec load_grid_spec(const fs::path& path);
std::vector<bool> read_mask_csv(const fs::path& path, int n_rows, int n_cols);
void write_mask_csv(const fs::path& path, const GridSpec& spec);

// Towers: [{ id, x, y }, ...]
std::vector<Tower> towers_from_json(const Json& j);
Json towers_to_json(std::span<const Tower> towers);
std::vector<Tower> load_towers(const fs::path& path);

// Zone map: { zones, assignment: "all" | [[t_start, t_end, zone], ...], period? }
ZoneMap zone_map_from_json(const Json& j);
Json zone_map_to_json(const ZoneMap& zones);

// Feature config: [{ name, kind, normalize, payload }] where payload is a
// raster CSV path (n_rows lines of n_cols values), a point list [[x, y], ...]
// or a table CSV path with header from,to,value. A document of the form
// { features: [...], zones: {...} } also carries the zone map.
std::shared_ptr<const FeatureSet> load_feature_set(const fs::path& path, std::shared_ptr<const Grid> grid);
std::shared_ptr<const FeatureSet> feature_set_from_json(const Json& j, const fs::path& base_dir,
                                                        std::shared_ptr<const Grid> grid);
// Writes features.json plus one table CSV per tabulated feature into dir.
void write_tabulated_features(const fs::path& dir, const FeatureSet& features);

// Params: { lambda: [[...] per zone], mu: [...], kappa: [...] }
ModelParams params_from_json(const Json& j);
Json params_to_json(const ModelParams& p);
ModelParams load_params(const fs::path& path);

// Bearings CSV: t,tower,bearing_rad. Absent rows are missing entries. T is
// the largest t + 1 unless num_steps is given.
BearingSeries read_bearings_csv(const fs::path& path, std::span<const Tower> towers,
                                std::optional<int> num_steps = {});
void write_bearings_csv(const fs::path& path, const BearingSeries& obs, std::span<const Tower> towers);

// Paths: t,cell,center_x,center_y
std::vector<CellId> read_path_csv(const fs::path& path, const Grid& grid);
void write_path_csv(const fs::path& path, std::span<const CellId> cells, const Grid& grid);
// Posterior marginals dump: t,cell,log_gamma
void write_marginals_csv(const fs::path& path, const PosteriorTables& post);

// Sparse GPS ground truth: t,x,y
struct GpsFix {
  long t = 0;
  Point p;
};
std::vector<GpsFix> read_gps_csv(const fs::path& path);

FitConfig fit_config_from_json(const Json& j, const ModelParams& default_init, const fs::path& base_dir);
Json fit_config_to_json(const FitConfig& cfg);

// Trace CSV: iter,elapsed_s,objective,step_len,grad_norm. elapsed_s is
// written only when include_timing is set; otherwise the column is 0 so
// iteration-bounded runs are reproducible byte for byte.
std::string trace_csv(const FitTrace& trace, bool include_timing);

SynthSpec synth_spec_from_json(const Json& j, const fs::path& base_dir);
Json synth_spec_to_json(const SynthSpec& spec);

Json eval_report_to_json(const EvalReport& r);
std::string eval_report_csv(std::span<const EvalReport> rows);

// Scenario directory: grid.json, towers.json, features/, true_params.json,
// true_path.csv, bearings.csv. The last three are optional when loading
// (real data); gps.csv is picked up when present.
struct ScenarioFiles {
  std::shared_ptr<const Grid> grid;
  std::shared_ptr<const Model> model;
  BearingSeries bearings;
  std::optional<ModelParams> truth;
  std::optional<std::vector<CellId>> true_path;
  std::vector<GpsFix> gps;
};
void write_scenario(const fs::path& dir, const Scenario& sc);
ScenarioFiles load_scenario(const fs::path& dir);

}  // namespace telemovr::io
