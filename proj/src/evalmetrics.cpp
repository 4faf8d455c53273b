#include "telemovr/evalmetrics.hpp"

#include <cmath>

#include "telemovr/errors.hpp"

namespace telemovr {

double location_error(std::span<const CellId> estimate, std::span<const CellId> truth, const Grid& grid) {
  if (estimate.size() != truth.size()) throw DomainError("location_error: path lengths differ");
  if (estimate.empty()) throw DomainError("location_error: empty paths");
  double sum = 0.0;
  for (std::size_t t = 0; t < estimate.size(); ++t) sum += distance(grid.center(estimate[t]), grid.center(truth[t]));
  return sum / static_cast<double>(estimate.size());
}

double weight_distance(std::span<const double> learned, std::span<const double> truth) {
  if (learned.size() != truth.size()) throw DomainError("weight_distance: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < learned.size(); ++i) s += (learned[i] - truth[i]) * (learned[i] - truth[i]);
  return std::sqrt(s);
}

EvalReport aggregate(std::span<const EvalReport> reports, std::string label) {
  if (reports.empty()) throw DomainError("aggregate: no reports");
  EvalReport out;
  out.label = std::move(label);
  bool all_weights = true;
  double weights = 0.0;
  for (const auto& r : reports) {
    out.mean_location_error += r.mean_location_error;
    out.observed_loglik += r.observed_loglik;
    if (r.weight_l2_distance)
      weights += *r.weight_l2_distance;
    else
      all_weights = false;
  }
  const double n = static_cast<double>(reports.size());
  out.mean_location_error /= n;
  out.observed_loglik /= n;
  if (all_weights) out.weight_l2_distance = weights / n;
  out.per_seed.assign(reports.begin(), reports.end());
  return out;
}

}  // namespace telemovr
