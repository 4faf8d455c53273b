#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "telemovr/features.hpp"
#include "telemovr/grid.hpp"

namespace telemovr {

// theta = (lambda, mu, kappa). lambda holds one weight vector per zone,
// stored zone-major (lambda[z * K + k]).
struct ModelParams {
  int num_zones = 1;
  int num_features = 0;
  std::vector<double> lambda;
  std::vector<double> mu;
  std::vector<double> kappa;

  static ModelParams zeros(int num_zones, int num_features, int num_towers, double kappa0 = 0.0);

  std::span<const double> weights(int zone) const {
    return {lambda.data() + static_cast<std::size_t>(zone) * num_features, static_cast<std::size_t>(num_features)};
  }
  std::span<double> weights(int zone) {
    return {lambda.data() + static_cast<std::size_t>(zone) * num_features, static_cast<std::size_t>(num_features)};
  }
  std::size_t num_towers() const { return mu.size(); }

  // Throws DomainError on shape mismatch, negative/non-finite kappa or
  // non-finite entries.
  void validate() const;
  bool operator==(const ModelParams&) const = default;
};

// T x N bearings; NaN marks a missing entry.
class BearingSeries {
 public:
  BearingSeries() = default;
  BearingSeries(int num_steps, int num_towers);

  int num_steps() const { return steps_; }
  int num_towers() const { return towers_; }
  bool present(int t, int n) const { return !std::isnan(at(t, n)); }
  double at(int t, int n) const { return values_[static_cast<std::size_t>(t) * towers_ + n]; }
  // Stores wrap_angle(bearing); NaN clears the entry.
  void set(int t, int n, double bearing);
  void clear(int t, int n) { values_[static_cast<std::size_t>(t) * towers_ + n] = std::numeric_limits<double>::quiet_NaN(); }
  std::span<const double> step(int t) const {
    return {values_.data() + static_cast<std::size_t>(t) * towers_, static_cast<std::size_t>(towers_)};
  }
  std::size_t count_present() const;

 private:
  int steps_ = 0;
  int towers_ = 0;
  std::vector<double> values_;
};

// Grid, features and towers of one tracking problem, with the tower-to-cell
// bearing table h(x, z_n) precomputed. Towers may not sit on a cell center.
class Model {
 public:
  Model(std::shared_ptr<const FeatureSet> features, std::vector<Tower> towers);

  const Grid& grid() const { return features_->grid(); }
  const FeatureSet& features() const { return *features_; }
  const std::shared_ptr<const FeatureSet>& features_ptr() const { return features_; }
  const std::vector<Tower>& towers() const { return towers_; }
  std::size_t num_cells() const { return grid().num_cells(); }
  std::size_t num_features() const { return features_->size(); }
  std::size_t num_towers() const { return towers_.size(); }
  int num_zones() const { return features_->num_zones(); }
  int zone(long t) const { return features_->zones().zone(t); }

  double true_bearing(CellId x, std::size_t tower) const { return bearing_[static_cast<std::size_t>(x) * towers_.size() + tower]; }

  // Throws DomainError naming the mismatched dimension.
  void check_params(const ModelParams& params) const;
  void check_observations(const BearingSeries& obs) const;
  void check_path(std::span<const CellId> path) const;

 private:
  std::shared_ptr<const FeatureSet> features_;
  std::vector<Tower> towers_;
  std::vector<double> bearing_;
};

/// Uniform start model: -log |Q|.
double start_logprob(const Grid& grid);

/// Scores s(x, x') = lambda^(zone) . f(x, x') over neighborhood(x), in
/// neighborhood order.
void transition_scores(const ModelParams& params, const Model& model, CellId x, int zone, std::span<double> out);

/// log p(x' | x) over neighborhood(x), normalized with log-sum-exp.
std::vector<double> transition_row(const ModelParams& params, const Model& model, CellId x, int zone);
void transition_row(const ModelParams& params, const Model& model, CellId x, int zone, std::span<double> out);

/// log p(y_t | x): sum over present bearings of the von Mises log-density.
double obs_logprob(const ModelParams& params, const Model& model, std::span<const double> y_t, CellId x);

/// T x Q table of obs_logprob, row-major by time step.
std::vector<double> observation_table(const ModelParams& params, const Model& model, const BearingSeries& obs);

// Log transition probabilities for every zone and pair, filled either all at
// once or lazily per source row (memoized). A lazy table is not safe for
// concurrent writers; give each chain its own.
class TransitionTable {
 public:
  TransitionTable(const Model& model, const ModelParams& params, bool eager = true);

  std::span<const double> row(int zone, CellId x) const;
  // log p(to | from), -inf when `to` is out of reach.
  double logprob(int zone, CellId from, CellId to) const;
  // log p for a pair index whose source cell is `from`.
  double pair_logprob(int zone, CellId from, std::size_t pair_index) const {
    if (!ready_[static_cast<std::size_t>(zone) * num_cells_ + static_cast<std::size_t>(from)]) fill(zone, from);
    return logp_[static_cast<std::size_t>(zone) * num_pairs_ + pair_index];
  }
  std::size_t rows_computed() const { return computed_; }

 private:
  void fill(int zone, CellId x) const;

  const Model* model_;
  ModelParams params_;
  std::size_t num_cells_ = 0;
  std::size_t num_pairs_ = 0;
  mutable std::vector<double> logp_;
  mutable std::vector<char> ready_;
  mutable std::size_t computed_ = 0;
};

/// log p(x, y; theta) for a path that respects neighborhoods.
double complete_loglik(const ModelParams& params, const Model& model, std::span<const CellId> path,
                       const BearingSeries& obs);
double complete_loglik(const ModelParams& params, const Model& model, std::span<const CellId> path,
                       const BearingSeries& obs, const TransitionTable& table);

// Same shape as ModelParams; lambda zone-major.
struct ParamGradient {
  std::vector<double> lambda;
  std::vector<double> mu;
  std::vector<double> kappa;

  double dot(const ParamGradient& other) const;
  double norm() const { return std::sqrt(dot(*this)); }
};

ParamGradient grad_complete_loglik(const ModelParams& params, const Model& model, std::span<const CellId> path,
                                   const BearingSeries& obs);
ParamGradient grad_complete_loglik(const ModelParams& params, const Model& model, std::span<const CellId> path,
                                   const BearingSeries& obs, const TransitionTable& table);

/// Diagonal of the Fisher information of the complete-data log-likelihood
/// for the given path: sum_t Var_p(f_k) for lambda, M_n kappa_n A(kappa_n)
/// for mu and M_n A'(kappa_n) for kappa (M_n = present bearings of tower n).
ParamGradient fisher_diagonal(const ModelParams& params, const Model& model, std::span<const CellId> path,
                              const BearingSeries& obs, const TransitionTable& table);

/// params + step * direction, without any projection.
ModelParams displaced(const ModelParams& params, const ParamGradient& direction, double step);

}  // namespace telemovr
