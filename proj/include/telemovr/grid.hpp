#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace telemovr {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double distance(Point a, Point b);

// Index of a valid cell, row-major over valid cells only.
using CellId = std::int32_t;

struct GridSpec {
  Point origin;
  double cell_size = 100.0;
  int n_rows = 1;
  int n_cols = 1;
  // Row-major, n_rows * n_cols entries. Empty means every cell is valid.
  std::vector<bool> valid_mask;
  double move_radius = 100.0;
};

struct Tower {
  int id = 0;
  Point position;
};

/// Wraps an angle into [-pi, pi). Throws DomainError for non-finite input.
double wrap_angle(double a);

/// True bearing from a tower toward a target: pi/2 is north and 0 is west,
/// i.e. wrap(atan2(dy, -dx)). Throws DomainError when target == tower.
double bearing_to(Point tower, Point target);
double bearing_to(const Tower& tower, Point target);

// The discretized state space. Construction validates the spec and
// precomputes every cell's movement neighborhood in CSR form.
class Grid {
 public:
  explicit Grid(GridSpec spec);

  const GridSpec& spec() const { return spec_; }
  std::size_t num_cells() const { return centers_.size(); }
  std::size_t num_pairs() const { return nbr_cells_.size(); }
  // Largest neighborhood size (R).
  std::size_t max_neighborhood() const { return max_nbr_; }

  Point center(CellId c) const;
  int row(CellId c) const;
  int col(CellId c) const;
  // Valid-cell id at (row, col), or -1 when the raster cell is masked out
  // or outside the grid.
  CellId cell_at(int row, int col) const;
  // Cell whose square contains p, or -1.
  CellId locate(Point p) const;

  // Valid cells within move_radius of c's center (c included), ascending.
  std::span<const CellId> neighborhood(CellId c) const;
  // Offset of c's neighborhood inside the flat pair arrays: the pair
  // (c, neighborhood(c)[j]) has pair index pair_offset(c) + j.
  std::size_t pair_offset(CellId c) const { return nbr_offsets_[check(c)]; }
  // Position of `to` inside neighborhood(from), or -1 when out of reach.
  int neighbor_index(CellId from, CellId to) const;
  bool is_neighbor(CellId from, CellId to) const { return neighbor_index(from, to) >= 0; }
  // Pair index of (to, from) given the pair index of (from, to).
  std::size_t reverse_pair(std::size_t pair_index) const { return reverse_pair_[pair_index]; }

  double diagonal() const;

 private:
  std::size_t check(CellId c) const;

  GridSpec spec_;
  std::vector<Point> centers_;
  std::vector<int> rows_, cols_;
  std::vector<CellId> raster_to_cell_;
  std::vector<std::size_t> nbr_offsets_;
  std::vector<CellId> nbr_cells_;
  std::vector<std::size_t> reverse_pair_;
  std::size_t max_nbr_ = 0;
};

}  // namespace telemovr
