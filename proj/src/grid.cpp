#include "telemovr/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "telemovr/errors.hpp"

namespace telemovr {

double distance(Point a, Point b) { return std::hypot(b.x - a.x, b.y - a.y); }

double wrap_angle(double a) {
  if (!std::isfinite(a)) throw DomainError("wrap_angle: non-finite angle");
  if (a >= -kPi && a < kPi) return a;
  double r = std::fmod(a + kPi, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  r -= kPi;
  // fmod rounding can land exactly on +pi.
  if (r >= kPi) r -= kTwoPi;
  return r;
}

double bearing_to(Point tower, Point target) {
  const double dx = target.x - tower.x;
  const double dy = target.y - tower.y;
  if (dx == 0.0 && dy == 0.0) throw DomainError("bearing_to: target coincides with tower");
  return wrap_angle(std::atan2(dy, -dx));
}

double bearing_to(const Tower& tower, Point target) { return bearing_to(tower.position, target); }

Grid::Grid(GridSpec spec) : spec_(std::move(spec)) {
  if (spec_.n_rows <= 0 || spec_.n_cols <= 0) throw DomainError("grid: n_rows and n_cols must be positive");
  if (!(spec_.cell_size > 0.0) || !std::isfinite(spec_.cell_size))
    throw DomainError("grid: cell_size must be positive");
  if (!std::isfinite(spec_.origin.x) || !std::isfinite(spec_.origin.y))
    throw DomainError("grid: origin must be finite");
  if (!(spec_.move_radius >= spec_.cell_size) || !std::isfinite(spec_.move_radius))
    throw DomainError("grid: move_radius must be >= cell_size");
  const std::size_t raster = static_cast<std::size_t>(spec_.n_rows) * spec_.n_cols;
  if (spec_.valid_mask.empty()) spec_.valid_mask.assign(raster, true);
  if (spec_.valid_mask.size() != raster)
    throw DomainError("grid: mask has " + std::to_string(spec_.valid_mask.size()) + " entries, expected " +
                      std::to_string(raster));

  raster_to_cell_.assign(raster, -1);
  for (int r = 0; r < spec_.n_rows; ++r) {
    for (int c = 0; c < spec_.n_cols; ++c) {
      const std::size_t k = static_cast<std::size_t>(r) * spec_.n_cols + c;
      if (!spec_.valid_mask[k]) continue;
      raster_to_cell_[k] = static_cast<CellId>(centers_.size());
      centers_.push_back({spec_.origin.x + (c + 0.5) * spec_.cell_size,
                          spec_.origin.y + (r + 0.5) * spec_.cell_size});
      rows_.push_back(r);
      cols_.push_back(c);
    }
  }
  if (centers_.empty()) throw DomainError("grid: mask has no valid cells");

  // Lattice offsets inside the disc; compared in units of cells so that the
  // boundary test is exact for integer radius ratios.
  const double ratio = spec_.move_radius / spec_.cell_size;
  const int reach = static_cast<int>(std::floor(ratio));
  const double ratio_sq = ratio * ratio * (1.0 + 1e-12);
  std::vector<std::pair<int, int>> offsets;
  for (int di = -reach; di <= reach; ++di)
    for (int dj = -reach; dj <= reach; ++dj)
      if (static_cast<double>(di * di + dj * dj) <= ratio_sq) offsets.emplace_back(di, dj);
  // Row-major offset order yields ascending CellId since ids are row-major.
  std::sort(offsets.begin(), offsets.end());

  nbr_offsets_.reserve(centers_.size() + 1);
  nbr_offsets_.push_back(0);
  for (std::size_t i = 0; i < centers_.size(); ++i) {
    for (auto [di, dj] : offsets) {
      const CellId n = cell_at(rows_[i] + di, cols_[i] + dj);
      if (n >= 0) nbr_cells_.push_back(n);
    }
    nbr_offsets_.push_back(nbr_cells_.size());
    max_nbr_ = std::max(max_nbr_, nbr_offsets_[i + 1] - nbr_offsets_[i]);
  }
  reverse_pair_.resize(nbr_cells_.size());
  for (std::size_t i = 0; i < centers_.size(); ++i) {
    for (std::size_t p = nbr_offsets_[i]; p < nbr_offsets_[i + 1]; ++p) {
      const CellId to = nbr_cells_[p];
      reverse_pair_[p] = nbr_offsets_[to] + static_cast<std::size_t>(neighbor_index(to, static_cast<CellId>(i)));
    }
  }
}

std::size_t Grid::check(CellId c) const {
  if (c < 0 || static_cast<std::size_t>(c) >= centers_.size())
    throw DomainError("grid: invalid cell id " + std::to_string(c));
  return static_cast<std::size_t>(c);
}

Point Grid::center(CellId c) const { return centers_[check(c)]; }
int Grid::row(CellId c) const { return rows_[check(c)]; }
int Grid::col(CellId c) const { return cols_[check(c)]; }

CellId Grid::cell_at(int row, int col) const {
  if (row < 0 || col < 0 || row >= spec_.n_rows || col >= spec_.n_cols) return -1;
  return raster_to_cell_[static_cast<std::size_t>(row) * spec_.n_cols + col];
}

CellId Grid::locate(Point p) const {
  const double fc = std::floor((p.x - spec_.origin.x) / spec_.cell_size);
  const double fr = std::floor((p.y - spec_.origin.y) / spec_.cell_size);
  if (!std::isfinite(fc) || !std::isfinite(fr)) return -1;
  if (fr < 0 || fc < 0 || fr >= spec_.n_rows || fc >= spec_.n_cols) return -1;
  return cell_at(static_cast<int>(fr), static_cast<int>(fc));
}

std::span<const CellId> Grid::neighborhood(CellId c) const {
  const std::size_t i = check(c);
  return {nbr_cells_.data() + nbr_offsets_[i], nbr_offsets_[i + 1] - nbr_offsets_[i]};
}

int Grid::neighbor_index(CellId from, CellId to) const {
  auto nb = neighborhood(from);
  auto it = std::lower_bound(nb.begin(), nb.end(), to);
  if (it == nb.end() || *it != to) return -1;
  return static_cast<int>(it - nb.begin());
}

double Grid::diagonal() const {
  return std::hypot(spec_.n_cols * spec_.cell_size, spec_.n_rows * spec_.cell_size);
}

}  // namespace telemovr
