#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "telemovr/grid.hpp"

namespace telemovr {

struct EvalReport {
  std::string label;
  double mean_location_error = 0.0;          // meters
  std::optional<double> weight_l2_distance;  // when true weights are known
  double observed_loglik = 0.0;
  std::vector<EvalReport> per_seed;
};

/// Mean Euclidean distance between cell centers of the two paths.
double location_error(std::span<const CellId> estimate, std::span<const CellId> truth, const Grid& grid);

/// Euclidean norm of the difference of zone-concatenated weight vectors.
double weight_distance(std::span<const double> learned, std::span<const double> truth);

/// Arithmetic mean of every metric; the inputs become the per-seed list.
EvalReport aggregate(std::span<const EvalReport> reports, std::string label = {});

}  // namespace telemovr
