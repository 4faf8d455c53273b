#include "telemovr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "telemovr/errors.hpp"

namespace telemovr {

void SynthSpec::validate() const {
  if (num_features < 1) throw DomainError("synth: need at least one feature");
  if (num_steps < 1) throw DomainError("synth: need T >= 1");
  if (weight_range.hi < weight_range.lo || feature_range.hi < feature_range.lo)
    throw DomainError("synth: empty interval");
  if (true_mu.size() != towers.size() || true_kappa.size() != towers.size())
    throw DomainError("synth: true_mu/true_kappa must have one entry per tower");
  for (double k : true_kappa)
    if (!(k >= 0.0)) throw DomainError("synth: kappa must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw DomainError("synth: dropout must be in [0, 1)");
}

SynthSpec SynthSpec::desk_scale(std::uint64_t seed) {
  SynthSpec s;
  s.grid.origin = {0.0, 0.0};
  s.grid.cell_size = 100.0;
  s.grid.n_rows = 20;
  s.grid.n_cols = 20;
  s.grid.move_radius = 500.0;
  s.towers = {{0, {500.0, 500.0}}, {1, {1500.0, 500.0}}, {2, {500.0, 1500.0}}, {3, {1500.0, 1500.0}}};
  s.num_features = 5;
  s.num_steps = 200;
  s.true_mu.assign(s.towers.size(), 0.0);
  s.true_kappa.assign(s.towers.size(), 15.0);
  s.seed = seed;
  return s;
}

SynthSpec SynthSpec::full_scale(std::uint64_t seed) {
  SynthSpec s;
  s.grid.origin = {0.0, 0.0};
  s.grid.cell_size = 100.0;
  s.grid.n_rows = 58;
  s.grid.n_cols = 63;
  s.grid.move_radius = 500.0;
  s.towers = {{0, {1500.0, 1500.0}}, {1, {4800.0, 1200.0}}, {2, {3100.0, 4400.0}},
              {3, {1000.0, 4000.0}}, {4, {5500.0, 4100.0}}};
  s.num_features = 5;
  s.num_steps = 1000;
  s.true_mu.assign(s.towers.size(), 0.0);
  s.true_kappa.assign(s.towers.size(), 15.0);
  s.seed = seed;
  return s;
}

MovementModel random_movement_model(const SynthSpec& spec, std::shared_ptr<const Grid> grid, Rng& rng) {
  std::vector<FeatureDef> defs;
  for (int k = 0; k < spec.num_features; ++k) {
    FeatureDef d;
    d.kind = FeatureKind::tabulated;
    d.name = "random" + std::to_string(k);
    d.normalize = false;
    d.table.resize(grid->num_pairs());
    for (double& v : d.table) v = rng.uniform(spec.feature_range.lo, spec.feature_range.hi);
    defs.push_back(std::move(d));
  }
  MovementModel m;
  m.features = std::make_shared<const FeatureSet>(std::move(grid), std::move(defs));
  m.lambda.resize(static_cast<std::size_t>(spec.num_features));
  for (double& w : m.lambda) w = rng.uniform(spec.weight_range.lo, spec.weight_range.hi);
  return m;
}

std::vector<CellId> sample_path(const Model& model, const ModelParams& params, int num_steps, Rng& rng) {
  if (num_steps < 1) throw DomainError("sample_path: need T >= 1");
  model.check_params(params);
  const Grid& grid = model.grid();
  std::vector<CellId> path(static_cast<std::size_t>(num_steps));
  path[0] = static_cast<CellId>(rng.below(grid.num_cells()));
  std::vector<double> row(grid.max_neighborhood());
  for (int t = 1; t < num_steps; ++t) {
    const CellId from = path[static_cast<std::size_t>(t - 1)];
    const auto nb = grid.neighborhood(from);
    std::span<double> r(row.data(), nb.size());
    transition_row(params, model, from, model.zone(t - 1), r);
    const double u = rng.uniform();
    double acc = 0.0;
    CellId next = nb.back();
    for (std::size_t j = 0; j < nb.size(); ++j) {
      acc += std::exp(r[j]);
      if (u < acc) {
        next = nb[j];
        break;
      }
    }
    path[static_cast<std::size_t>(t)] = next;
  }
  return path;
}

double sample_von_mises(double mu, double kappa, Rng& rng) {
  if (!(kappa >= 0.0)) throw DomainError("sample_von_mises: kappa must be >= 0");
  if (kappa < 1e-12) return wrap_angle(rng.uniform(-kPi, kPi));
  const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
  const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
  const double r = (1.0 + rho * rho) / (2.0 * rho);
  double f;
  while (true) {
    const double u1 = rng.uniform();
    const double u2 = rng.uniform();
    const double z = std::cos(kPi * u1);
    f = (1.0 + r * z) / (r + z);
    const double c = kappa * (r - f);
    if (c * (2.0 - c) - u2 > 0.0) break;
    if (u2 > 0.0 && std::log(c / u2) + 1.0 - c >= 0.0) break;
  }
  const double u3 = rng.uniform();
  const double theta = std::acos(std::clamp(f, -1.0, 1.0));
  return wrap_angle(mu + (u3 < 0.5 ? -theta : theta));
}

BearingSeries sample_bearings(const Model& model, std::span<const CellId> path, std::span<const double> mu,
                              std::span<const double> kappa, Rng& rng, double dropout) {
  const std::size_t n_count = model.num_towers();
  if (mu.size() != n_count || kappa.size() != n_count) throw DomainError("sample_bearings: tower count mismatch");
  model.check_path(path);
  BearingSeries obs(static_cast<int>(path.size()), static_cast<int>(n_count));
  for (std::size_t t = 0; t < path.size(); ++t) {
    for (std::size_t n = 0; n < n_count; ++n) {
      const double y = sample_von_mises(model.true_bearing(path[t], n) + mu[n], kappa[n], rng);
      if (dropout > 0.0 && rng.uniform() < dropout) continue;
      obs.set(static_cast<int>(t), static_cast<int>(n), y);
    }
  }
  return obs;
}

Scenario make_scenario(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Scenario sc;
  sc.grid = std::make_shared<const Grid>(spec.grid);
  MovementModel mm = random_movement_model(spec, sc.grid, rng);
  sc.model = std::make_shared<const Model>(mm.features, spec.towers);
  sc.truth = ModelParams::zeros(1, spec.num_features, static_cast<int>(spec.towers.size()));
  sc.truth.lambda = mm.lambda;
  for (std::size_t n = 0; n < spec.towers.size(); ++n) {
    sc.truth.mu[n] = wrap_angle(spec.true_mu[n]);
    sc.truth.kappa[n] = spec.true_kappa[n];
  }
  sc.path = sample_path(*sc.model, sc.truth, spec.num_steps, rng);
  sc.bearings = sample_bearings(*sc.model, sc.path, sc.truth.mu, sc.truth.kappa, rng, spec.dropout);
  return sc;
}

}  // namespace telemovr
