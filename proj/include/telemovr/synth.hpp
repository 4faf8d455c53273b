#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "telemovr/features.hpp"
#include "telemovr/grid.hpp"
#include "telemovr/model.hpp"
#include "telemovr/random.hpp"

namespace telemovr {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct SynthSpec {
  GridSpec grid;
  std::vector<Tower> towers;
  int num_features = 5;
  int num_steps = 1000;
  Interval weight_range{-10.0, 10.0};
  Interval feature_range{0.0, 1.0};
  std::vector<double> true_mu;     // one per tower
  std::vector<double> true_kappa;  // one per tower
  double dropout = 0.0;            // per-entry missingness probability
  std::uint64_t seed = 0;

  void validate() const;

  // 20 x 20 cells of 100 m, 500 m moves, K = 5, T = 200, four interior
  // towers, mu = 0, kappa = 15.
  static SynthSpec desk_scale(std::uint64_t seed);
  // 63 x 58 = 3654 cells of 100 m, K = 5, T = 1000, mu = 0, kappa = 15.
  static SynthSpec full_scale(std::uint64_t seed);
};

struct MovementModel {
  std::shared_ptr<const FeatureSet> features;
  std::vector<double> lambda;
};

struct Scenario {
  std::shared_ptr<const Grid> grid;
  std::shared_ptr<const Model> model;
  ModelParams truth;
  std::vector<CellId> path;
  BearingSeries bearings;
};

/// K tabulated features with i.i.d. uniform values per neighborhood pair,
/// and weights uniform in weight_range. Single zone.
MovementModel random_movement_model(const SynthSpec& spec, std::shared_ptr<const Grid> grid, Rng& rng);

/// x_1 uniform over Q, then inverse-CDF draws from the transition rows.
std::vector<CellId> sample_path(const Model& model, const ModelParams& params, int num_steps, Rng& rng);

/// von Mises(mu, kappa) by Best-Fisher rejection; kappa = 0 is uniform.
double sample_von_mises(double mu, double kappa, Rng& rng);

/// y = wrap(h(x_t, z_n) + mu_n + noise); each entry is dropped with
/// probability `dropout`.
BearingSeries sample_bearings(const Model& model, std::span<const CellId> path, std::span<const double> mu,
                              std::span<const double> kappa, Rng& rng, double dropout = 0.0);

/// Full synthetic protocol; a deterministic function of the spec and seed.
Scenario make_scenario(const SynthSpec& spec);

}  // namespace telemovr
