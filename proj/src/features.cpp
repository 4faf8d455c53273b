#include "telemovr/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "telemovr/errors.hpp"

namespace telemovr {

const char* to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::distance_gaussian: return "distance_gaussian";
    case FeatureKind::raster_delta: return "raster_delta";
    case FeatureKind::nearest_distance: return "nearest_distance";
    case FeatureKind::tabulated: return "tabulated";
  }
  return "?";
}

FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "distance_gaussian") return FeatureKind::distance_gaussian;
  if (s == "raster_delta") return FeatureKind::raster_delta;
  if (s == "nearest_distance") return FeatureKind::nearest_distance;
  if (s == "tabulated") return FeatureKind::tabulated;
  throw DomainError("unknown feature kind '" + s + "'");
}

FeatureDef FeatureDef::distance(std::string name, bool normalize) {
  FeatureDef d;
  d.kind = FeatureKind::distance_gaussian;
  d.name = std::move(name);
  d.normalize = normalize;
  return d;
}

ZoneMap::ZoneMap(int num_zones, std::vector<Interval> intervals, long period)
    : num_zones_(num_zones), intervals_(std::move(intervals)), period_(period) {
  if (num_zones_ < 1) throw DomainError("zone map: zones must be >= 1");
  if (period_ < 0) throw DomainError("zone map: period must be non-negative");
  for (const auto& iv : intervals_) {
    if (iv.zone < 0 || iv.zone >= num_zones_) throw DomainError("zone map: zone id out of range");
    if (iv.t_end < iv.t_start) throw DomainError("zone map: interval end precedes start");
  }
}

int ZoneMap::zone(long t) const {
  if (num_zones_ == 1) return 0;
  const long key = period_ > 0 ? ((t % period_) + period_) % period_ : t;
  for (const auto& iv : intervals_)
    if (key >= iv.t_start && key <= iv.t_end) return iv.zone;
  return 0;
}

FeatureSet::FeatureSet(std::shared_ptr<const Grid> grid, std::vector<FeatureDef> defs, ZoneMap zones)
    : grid_(std::move(grid)), defs_(std::move(defs)), zones_(std::move(zones)) {
  if (!grid_) throw DomainError("feature set: null grid");
  if (defs_.empty()) throw DomainError("feature set: at least one feature is required");
  const std::size_t q = grid_->num_cells();
  const std::size_t k_count = defs_.size();

  nearest_.assign(k_count * q, 0.0);
  for (std::size_t k = 0; k < k_count; ++k) {
    const FeatureDef& d = defs_[k];
    switch (d.kind) {
      case FeatureKind::raster_delta:
        if (d.raster.size() != q)
          throw DomainError("feature '" + d.name + "': raster must cover every valid cell");
        break;
      case FeatureKind::tabulated:
        if (d.table.size() != grid_->num_pairs())
          throw DomainError("feature '" + d.name + "': table must cover every neighborhood pair");
        break;
      case FeatureKind::nearest_distance:
        if (d.points.empty()) throw DomainError("feature '" + d.name + "': no payload points");
        for (std::size_t c = 0; c < q; ++c) {
          const Point p = grid_->center(static_cast<CellId>(c));
          double best = std::numeric_limits<double>::infinity();
          for (const Point& z : d.points) best = std::min(best, distance(p, z));
          nearest_[k * q + c] = best;
        }
        break;
      case FeatureKind::distance_gaussian:
        break;
    }
  }

  scales_.assign(k_count, 1.0);
  values_.resize(grid_->num_pairs() * k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    double max_abs = 0.0;
    for (std::size_t c = 0; c < q; ++c) {
      const auto from = static_cast<CellId>(c);
      const std::size_t base = grid_->pair_offset(from);
      const auto nb = grid_->neighborhood(from);
      for (std::size_t j = 0; j < nb.size(); ++j) {
        const double v = raw_pair(k, from, nb[j], base + j);
        if (!std::isfinite(v)) throw DomainError("feature '" + defs_[k].name + "': non-finite value");
        values_[(base + j) * k_count + k] = v;
        max_abs = std::max(max_abs, std::abs(v));
      }
    }
    if (defs_[k].normalize && max_abs > 0.0) scales_[k] = max_abs;
    if (scales_[k] != 1.0)
      for (std::size_t p = 0; p < grid_->num_pairs(); ++p) values_[p * k_count + k] /= scales_[k];
  }
}

double FeatureSet::raw_pair(std::size_t k, CellId from, CellId to, std::size_t pair_index) const {
  const FeatureDef& d = defs_[k];
  switch (d.kind) {
    case FeatureKind::distance_gaussian: {
      const double r = distance(grid_->center(from), grid_->center(to));
      return -0.5 * r * r;
    }
    case FeatureKind::raster_delta:
      return d.raster[static_cast<std::size_t>(to)] - d.raster[static_cast<std::size_t>(from)];
    case FeatureKind::nearest_distance: {
      const std::size_t q = grid_->num_cells();
      const double delta = nearest_[k * q + static_cast<std::size_t>(to)] - nearest_[k * q + static_cast<std::size_t>(from)];
      return -0.5 * delta * delta;
    }
    case FeatureKind::tabulated:
      return d.table[pair_index];
  }
  return 0.0;
}

std::size_t FeatureSet::pair_index(CellId from, CellId to) const {
  const int j = grid_->neighbor_index(from, to);
  if (j < 0) throw DomainError("feature: destination cell is outside the source neighborhood");
  return grid_->pair_offset(from) + static_cast<std::size_t>(j);
}

double FeatureSet::eval(std::size_t k, CellId from, CellId to) const {
  if (k >= defs_.size()) throw DomainError("feature: index out of range");
  return values_[pair_index(from, to) * defs_.size() + k];
}

double FeatureSet::raw(std::size_t k, CellId from, CellId to) const {
  if (k >= defs_.size()) throw DomainError("feature: index out of range");
  return raw_pair(k, from, to, pair_index(from, to));
}

std::vector<double> FeatureSet::feature_vector(CellId from, CellId to) const {
  auto p = pair(pair_index(from, to));
  return {p.begin(), p.end()};
}

std::span<const double> FeatureSet::row(CellId from) const {
  const std::size_t base = grid_->pair_offset(from);
  return {values_.data() + base * defs_.size(), grid_->neighborhood(from).size() * defs_.size()};
}

}  // namespace telemovr
