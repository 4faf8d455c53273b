#include "telemovr/model.hpp"

#include <string>

#include "telemovr/bessel.hpp"
#include "telemovr/errors.hpp"
#include "telemovr/logspace.hpp"

namespace telemovr {

ModelParams ModelParams::zeros(int num_zones, int num_features, int num_towers, double kappa0) {
  ModelParams p;
  p.num_zones = num_zones;
  p.num_features = num_features;
  p.lambda.assign(static_cast<std::size_t>(num_zones) * num_features, 0.0);
  p.mu.assign(static_cast<std::size_t>(num_towers), 0.0);
  p.kappa.assign(static_cast<std::size_t>(num_towers), kappa0);
  return p;
}

void ModelParams::validate() const {
  if (num_zones < 1 || num_features < 1) throw DomainError("params: zones and features must be >= 1");
  if (lambda.size() != static_cast<std::size_t>(num_zones) * num_features)
    throw DomainError("params: lambda has " + std::to_string(lambda.size()) + " entries, expected zones*features = " +
                      std::to_string(num_zones * num_features));
  if (mu.size() != kappa.size()) throw DomainError("params: mu and kappa lengths differ");
  for (double v : lambda)
    if (!std::isfinite(v)) throw DomainError("params: non-finite lambda");
  for (double v : mu)
    if (!std::isfinite(v)) throw DomainError("params: non-finite mu");
  for (double v : kappa)
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("params: kappa must be finite and >= 0");
}

BearingSeries::BearingSeries(int num_steps, int num_towers) : steps_(num_steps), towers_(num_towers) {
  if (num_steps < 1 || num_towers < 0) throw DomainError("bearings: need T >= 1 and N >= 0");
  values_.assign(static_cast<std::size_t>(num_steps) * num_towers, std::numeric_limits<double>::quiet_NaN());
}

void BearingSeries::set(int t, int n, double bearing) {
  if (t < 0 || t >= steps_ || n < 0 || n >= towers_) throw DomainError("bearings: (t, tower) out of range");
  values_[static_cast<std::size_t>(t) * towers_ + n] = std::isnan(bearing) ? bearing : wrap_angle(bearing);
}

std::size_t BearingSeries::count_present() const {
  std::size_t n = 0;
  for (double v : values_) n += !std::isnan(v);
  return n;
}

Model::Model(std::shared_ptr<const FeatureSet> features, std::vector<Tower> towers)
    : features_(std::move(features)), towers_(std::move(towers)) {
  if (!features_) throw DomainError("model: null feature set");
  const Grid& g = features_->grid();
  bearing_.resize(g.num_cells() * towers_.size());
  for (std::size_t c = 0; c < g.num_cells(); ++c) {
    const Point p = g.center(static_cast<CellId>(c));
    for (std::size_t n = 0; n < towers_.size(); ++n) {
      if (!std::isfinite(towers_[n].position.x) || !std::isfinite(towers_[n].position.y))
        throw DomainError("model: tower " + std::to_string(towers_[n].id) + " has a non-finite position");
      if (p.x == towers_[n].position.x && p.y == towers_[n].position.y)
        throw DomainError("model: tower " + std::to_string(towers_[n].id) + " coincides with the center of cell " +
                          std::to_string(c));
      bearing_[c * towers_.size() + n] = bearing_to(towers_[n].position, p);
    }
  }
}

void Model::check_params(const ModelParams& params) const {
  params.validate();
  if (params.num_features != static_cast<int>(num_features()))
    throw DomainError("dimension mismatch: params have " + std::to_string(params.num_features) +
                      " features, model has " + std::to_string(num_features()));
  if (params.num_zones != num_zones())
    throw DomainError("dimension mismatch: params have " + std::to_string(params.num_zones) + " zones, model has " +
                      std::to_string(num_zones()));
  if (params.num_towers() != num_towers())
    throw DomainError("dimension mismatch: params have " + std::to_string(params.num_towers()) +
                      " towers, model has " + std::to_string(num_towers()));
}

void Model::check_observations(const BearingSeries& obs) const {
  if (obs.num_steps() < 1) throw DomainError("observations: need at least one time step");
  if (static_cast<std::size_t>(obs.num_towers()) != num_towers())
    throw DomainError("dimension mismatch: observations have " + std::to_string(obs.num_towers()) +
                      " towers, model has " + std::to_string(num_towers()));
}

void Model::check_path(std::span<const CellId> path) const {
  if (path.empty()) throw DomainError("path: empty");
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (path[t] < 0 || static_cast<std::size_t>(path[t]) >= num_cells())
      throw DomainError("path: invalid cell at step " + std::to_string(t));
    if (t > 0 && !grid().is_neighbor(path[t - 1], path[t]))
      throw DomainError("path: step " + std::to_string(t) + " leaves the movement neighborhood");
  }
}

double start_logprob(const Grid& grid) {
  if (grid.num_cells() == 0) throw DomainError("start_logprob: empty grid");
  return -std::log(static_cast<double>(grid.num_cells()));
}

void transition_scores(const ModelParams& params, const Model& model, CellId x, int zone, std::span<double> out) {
  const auto w = params.weights(zone);
  const auto f = model.features().row(x);
  const std::size_t k_count = w.size();
  for (std::size_t j = 0; j < out.size(); ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) s += w[k] * f[j * k_count + k];
    out[j] = s;
  }
}

void transition_row(const ModelParams& params, const Model& model, CellId x, int zone, std::span<double> out) {
  if (zone < 0 || zone >= params.num_zones) throw DomainError("transition_row: zone out of range");
  transition_scores(params, model, x, zone, out);
  const double lz = logsumexp(out);
  for (double& v : out) v -= lz;
}

std::vector<double> transition_row(const ModelParams& params, const Model& model, CellId x, int zone) {
  std::vector<double> out(model.grid().neighborhood(x).size());
  transition_row(params, model, x, zone, out);
  return out;
}

namespace {

std::vector<double> log_normalizers(const ModelParams& params) {
  std::vector<double> out(params.kappa.size());
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = std::log(kTwoPi) + log_bessel_i0(params.kappa[n]);
  return out;
}

double obs_logprob_with(const ModelParams& params, const Model& model, std::span<const double> y_t, CellId x,
                        std::span<const double> log_norm) {
  double s = 0.0;
  for (std::size_t n = 0; n < y_t.size(); ++n) {
    if (std::isnan(y_t[n])) continue;
    s += params.kappa[n] * std::cos(y_t[n] - model.true_bearing(x, n) - params.mu[n]) - log_norm[n];
  }
  return s;
}

}  // namespace

double obs_logprob(const ModelParams& params, const Model& model, std::span<const double> y_t, CellId x) {
  if (y_t.size() != model.num_towers() || params.kappa.size() != model.num_towers())
    throw DomainError("obs_logprob: tower count mismatch");
  model.grid().center(x);  // validates x
  return obs_logprob_with(params, model, y_t, x, log_normalizers(params));
}

std::vector<double> observation_table(const ModelParams& params, const Model& model, const BearingSeries& obs) {
  model.check_observations(obs);
  const auto log_norm = log_normalizers(params);
  const std::size_t q = model.num_cells();
  std::vector<double> out(static_cast<std::size_t>(obs.num_steps()) * q);
  for (int t = 0; t < obs.num_steps(); ++t) {
    const auto y = obs.step(t);
    for (std::size_t c = 0; c < q; ++c)
      out[static_cast<std::size_t>(t) * q + c] = obs_logprob_with(params, model, y, static_cast<CellId>(c), log_norm);
  }
  return out;
}

TransitionTable::TransitionTable(const Model& model, const ModelParams& params, bool eager)
    : model_(&model), params_(params) {
  model.check_params(params_);
  const std::size_t pairs = model.grid().num_pairs();
  num_cells_ = model.num_cells();
  num_pairs_ = pairs;
  logp_.assign(static_cast<std::size_t>(params_.num_zones) * pairs, 0.0);
  ready_.assign(static_cast<std::size_t>(params_.num_zones) * model.num_cells(), 0);
  if (eager)
    for (int z = 0; z < params_.num_zones; ++z)
      for (std::size_t c = 0; c < model.num_cells(); ++c) fill(z, static_cast<CellId>(c));
}

void TransitionTable::fill(int zone, CellId x) const {
  const Grid& g = model_->grid();
  const std::size_t size = g.neighborhood(x).size();
  double* dst = logp_.data() + static_cast<std::size_t>(zone) * g.num_pairs() + g.pair_offset(x);
  transition_row(params_, *model_, x, zone, std::span<double>(dst, size));
  ready_[static_cast<std::size_t>(zone) * model_->num_cells() + static_cast<std::size_t>(x)] = 1;
  ++computed_;
}

std::span<const double> TransitionTable::row(int zone, CellId x) const {
  const Grid& g = model_->grid();
  const std::size_t size = g.neighborhood(x).size();
  if (!ready_[static_cast<std::size_t>(zone) * model_->num_cells() + static_cast<std::size_t>(x)]) fill(zone, x);
  return {logp_.data() + static_cast<std::size_t>(zone) * g.num_pairs() + g.pair_offset(x), size};
}

double TransitionTable::logprob(int zone, CellId from, CellId to) const {
  const int j = model_->grid().neighbor_index(from, to);
  if (j < 0) return kNegInf;
  return row(zone, from)[static_cast<std::size_t>(j)];
}

double complete_loglik(const ModelParams& params, const Model& model, std::span<const CellId> path,
                       const BearingSeries& obs, const TransitionTable& table) {
  model.check_observations(obs);
  model.check_path(path);
  if (path.size() != static_cast<std::size_t>(obs.num_steps()))
    throw DomainError("complete_loglik: path length differs from observation length");
  const auto log_norm = log_normalizers(params);
  double ll = start_logprob(model.grid());
  for (std::size_t t = 0; t + 1 < path.size(); ++t)
    ll += table.logprob(model.zone(static_cast<long>(t)), path[t], path[t + 1]);
  for (std::size_t t = 0; t < path.size(); ++t)
    ll += obs_logprob_with(params, model, obs.step(static_cast<int>(t)), path[t], log_norm);
  return ll;
}

double complete_loglik(const ModelParams& params, const Model& model, std::span<const CellId> path,
                       const BearingSeries& obs) {
  return complete_loglik(params, model, path, obs, TransitionTable(model, params, /*eager=*/false));
}

double ParamGradient::dot(const ParamGradient& o) const {
  double s = 0.0;
  for (std::size_t i = 0; i < lambda.size(); ++i) s += lambda[i] * o.lambda[i];
  for (std::size_t i = 0; i < mu.size(); ++i) s += mu[i] * o.mu[i];
  for (std::size_t i = 0; i < kappa.size(); ++i) s += kappa[i] * o.kappa[i];
  return s;
}

ParamGradient grad_complete_loglik(const ModelParams& params, const Model& model, std::span<const CellId> path,
                                   const BearingSeries& obs, const TransitionTable& table) {
  model.check_observations(obs);
  model.check_path(path);
  if (path.size() != static_cast<std::size_t>(obs.num_steps()))
    throw DomainError("grad_complete_loglik: path length differs from observation length");
  const std::size_t k_count = model.num_features();
  const std::size_t n_count = model.num_towers();
  ParamGradient g;
  g.lambda.assign(params.lambda.size(), 0.0);
  g.mu.assign(n_count, 0.0);
  g.kappa.assign(n_count, 0.0);

  const FeatureSet& fs = model.features();
  for (std::size_t t = 0; t + 1 < path.size(); ++t) {
    const int z = model.zone(static_cast<long>(t));
    const CellId from = path[t];
    const auto logp = table.row(z, from);
    const auto f = fs.row(from);
    const int j_next = model.grid().neighbor_index(from, path[t + 1]);
    double* dz = g.lambda.data() + static_cast<std::size_t>(z) * k_count;
    for (std::size_t k = 0; k < k_count; ++k) dz[k] += f[static_cast<std::size_t>(j_next) * k_count + k];
    for (std::size_t j = 0; j < logp.size(); ++j) {
      const double p = std::exp(logp[j]);
      for (std::size_t k = 0; k < k_count; ++k) dz[k] -= p * f[j * k_count + k];
    }
  }

  for (std::size_t n = 0; n < n_count; ++n) {
    const double kappa = params.kappa[n];
    double sum_sin = 0.0, sum_cos = 0.0;
    std::size_t present = 0;
    for (std::size_t t = 0; t < path.size(); ++t) {
      const double y = obs.at(static_cast<int>(t), static_cast<int>(n));
      if (std::isnan(y)) continue;
      const double r = y - model.true_bearing(path[t], n) - params.mu[n];
      sum_sin += std::sin(r);
      sum_cos += std::cos(r);
      ++present;
    }
    g.mu[n] = kappa * sum_sin;
    g.kappa[n] = sum_cos - static_cast<double>(present) * bessel_ratio(kappa);
  }
  return g;
}

ParamGradient grad_complete_loglik(const ModelParams& params, const Model& model, std::span<const CellId> path,
                                   const BearingSeries& obs) {
  return grad_complete_loglik(params, model, path, obs, TransitionTable(model, params, /*eager=*/false));
}

ParamGradient fisher_diagonal(const ModelParams& params, const Model& model, std::span<const CellId> path,
                              const BearingSeries& obs, const TransitionTable& table) {
  model.check_observations(obs);
  model.check_path(path);
  const std::size_t k_count = model.num_features();
  const std::size_t n_count = model.num_towers();
  ParamGradient h;
  h.lambda.assign(params.lambda.size(), 0.0);
  h.mu.assign(n_count, 0.0);
  h.kappa.assign(n_count, 0.0);
  std::vector<double> mean(k_count), second(k_count);
  const FeatureSet& fs = model.features();
  for (std::size_t t = 0; t + 1 < path.size(); ++t) {
    const int z = model.zone(static_cast<long>(t));
    const auto logp = table.row(z, path[t]);
    const auto f = fs.row(path[t]);
    std::fill(mean.begin(), mean.end(), 0.0);
    std::fill(second.begin(), second.end(), 0.0);
    for (std::size_t j = 0; j < logp.size(); ++j) {
      const double p = std::exp(logp[j]);
      for (std::size_t k = 0; k < k_count; ++k) {
        const double v = f[j * k_count + k];
        mean[k] += p * v;
        second[k] += p * v * v;
      }
    }
    double* hz = h.lambda.data() + static_cast<std::size_t>(z) * k_count;
    for (std::size_t k = 0; k < k_count; ++k) hz[k] += std::max(0.0, second[k] - mean[k] * mean[k]);
  }
  for (std::size_t n = 0; n < n_count; ++n) {
    std::size_t present = 0;
    for (std::size_t t = 0; t < path.size(); ++t) present += obs.present(static_cast<int>(t), static_cast<int>(n));
    const double m = static_cast<double>(present);
    h.mu[n] = m * params.kappa[n] * bessel_ratio(params.kappa[n]);
    h.kappa[n] = m * bessel_ratio_derivative(params.kappa[n]);
  }
  return h;
}

ModelParams displaced(const ModelParams& params, const ParamGradient& d, double step) {
  ModelParams out = params;
  for (std::size_t i = 0; i < out.lambda.size(); ++i) out.lambda[i] += step * d.lambda[i];
  for (std::size_t i = 0; i < out.mu.size(); ++i) out.mu[i] += step * d.mu[i];
  for (std::size_t i = 0; i < out.kappa.size(); ++i) out.kappa[i] += step * d.kappa[i];
  return out;
}

}  // namespace telemovr
