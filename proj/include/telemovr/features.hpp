#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "telemovr/grid.hpp"

namespace telemovr {

enum class FeatureKind {
  distance_gaussian,  // -|c' - c|^2 / 2
  raster_delta,       // raster(c') - raster(c)
  nearest_distance,   // -(d(c') - d(c))^2 / 2, d = distance to the closest payload point
  tabulated,          // stored value per (cell, neighbor) pair
};

const char* to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& s);

struct FeatureDef {
  FeatureKind kind = FeatureKind::distance_gaussian;
  std::string name;
  bool normalize = false;
  // raster_delta: one value per valid cell.
  std::vector<double> raster;
  // nearest_distance: arbitrary planar points.
  std::vector<Point> points;
  // tabulated: one value per grid pair, in Grid pair order.
  std::vector<double> table;

  static FeatureDef distance(std::string name = "distance", bool normalize = false);
};

// Maps a time step (0-based) to the weight zone used for the transition
// leaving that step. Uncovered steps fall into zone 0.
class ZoneMap {
 public:
  struct Interval {
    long t_start = 0;  // inclusive
    long t_end = 0;    // inclusive
    int zone = 0;
  };

  ZoneMap() = default;
  // When period > 0, intervals are matched against t mod period.
  ZoneMap(int num_zones, std::vector<Interval> intervals, long period = 0);

  int num_zones() const { return num_zones_; }
  int zone(long t) const;
  const std::vector<Interval>& intervals() const { return intervals_; }
  long period() const { return period_; }

 private:
  int num_zones_ = 1;
  std::vector<Interval> intervals_;
  long period_ = 0;
};

// K pairwise features evaluated once for every in-neighborhood pair and
// stored pair-major: values()[pair * K + k]. Immutable after construction.
class FeatureSet {
 public:
  FeatureSet(std::shared_ptr<const Grid> grid, std::vector<FeatureDef> defs, ZoneMap zones = {});

  const Grid& grid() const { return *grid_; }
  const std::shared_ptr<const Grid>& grid_ptr() const { return grid_; }
  std::size_t size() const { return defs_.size(); }
  const FeatureDef& def(std::size_t k) const { return defs_.at(k); }
  const std::vector<FeatureDef>& defs() const { return defs_; }
  const ZoneMap& zones() const { return zones_; }
  int num_zones() const { return zones_.num_zones(); }

  double eval(std::size_t k, CellId from, CellId to) const;
  std::vector<double> feature_vector(CellId from, CellId to) const;
  // Features of the pair (from, neighborhood(from)[j]) for j in the row.
  std::span<const double> row(CellId from) const;
  std::span<const double> pair(std::size_t pair_index) const {
    return {values_.data() + pair_index * defs_.size(), defs_.size()};
  }

  // Divisor applied to raw values of feature k (1 when not normalized).
  double normalization_scale(std::size_t k) const { return scales_.at(k); }
  // Raw (pre-normalization) value.
  double raw(std::size_t k, CellId from, CellId to) const;

 private:
  double raw_pair(std::size_t k, CellId from, CellId to, std::size_t pair_index) const;
  std::size_t pair_index(CellId from, CellId to) const;

  std::shared_ptr<const Grid> grid_;
  std::vector<FeatureDef> defs_;
  ZoneMap zones_;
  std::vector<double> nearest_;  // per feature, per cell: distance to closest point (nearest_distance only)
  std::vector<double> scales_;
  std::vector<double> values_;
};

}  // namespace telemovr
