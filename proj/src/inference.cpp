#include "telemovr/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "telemovr/bessel.hpp"
#include "telemovr/errors.hpp"
#include "telemovr/logspace.hpp"

namespace telemovr {

PosteriorTables forward_backward(const ModelParams& params, const Model& model, const BearingSeries& obs,
                                 const ForwardBackwardOptions& options) {
  model.check_params(params);
  model.check_observations(obs);
  const Grid& grid = model.grid();
  const int steps = obs.num_steps();
  const std::size_t q = grid.num_cells();
  const std::size_t pairs = grid.num_pairs();
  const TransitionTable table(model, params, /*eager=*/true);
  const std::vector<double> o = observation_table(params, model, obs);
  const double start = start_logprob(grid);

  // Flat view of all log transition probabilities, zone-major by pair index.
  auto logp = [&](int zone, CellId from, std::size_t pair) { return table.pair_logprob(zone, from, pair); };

  std::vector<double> alpha(static_cast<std::size_t>(steps) * q);
  std::vector<double> beta(static_cast<std::size_t>(steps) * q, 0.0);
  std::vector<double> buf(grid.max_neighborhood());

  for (std::size_t x = 0; x < q; ++x) alpha[x] = start + o[x];
  for (int t = 1; t < steps; ++t) {
    const int zone = model.zone(t - 1);
    const double* prev = alpha.data() + static_cast<std::size_t>(t - 1) * q;
    double* cur = alpha.data() + static_cast<std::size_t>(t) * q;
    for (std::size_t x = 0; x < q; ++x) {
      const auto to = static_cast<CellId>(x);
      const auto nb = grid.neighborhood(to);
      const std::size_t base = grid.pair_offset(to);
      for (std::size_t j = 0; j < nb.size(); ++j)
        buf[j] = prev[nb[j]] + logp(zone, nb[j], grid.reverse_pair(base + j));
      cur[x] = o[static_cast<std::size_t>(t) * q + x] + logsumexp(std::span<const double>(buf.data(), nb.size()));
    }
  }
  for (int t = steps - 2; t >= 0; --t) {
    const int zone = model.zone(t);
    const double* next = beta.data() + static_cast<std::size_t>(t + 1) * q;
    const double* o_next = o.data() + static_cast<std::size_t>(t + 1) * q;
    double* cur = beta.data() + static_cast<std::size_t>(t) * q;
    for (std::size_t x = 0; x < q; ++x) {
      const auto from = static_cast<CellId>(x);
      const auto nb = grid.neighborhood(from);
      const std::size_t base = grid.pair_offset(from);
      for (std::size_t j = 0; j < nb.size(); ++j) buf[j] = logp(zone, from, base + j) + o_next[nb[j]] + next[nb[j]];
      cur[x] = logsumexp(std::span<const double>(buf.data(), nb.size()));
    }
  }

  PosteriorTables post;
  post.num_steps = steps;
  post.num_cells = q;
  post.num_pairs = pairs;
  post.num_zones = model.num_zones();
  post.loglik = logsumexp(std::span<const double>(alpha.data() + static_cast<std::size_t>(steps - 1) * q, q));
  if (!std::isfinite(post.loglik)) throw DomainError("forward_backward: observed log-likelihood is not finite");

  post.gamma.resize(static_cast<std::size_t>(steps) * q);
  for (std::size_t i = 0; i < post.gamma.size(); ++i) post.gamma[i] = alpha[i] + beta[i] - post.loglik;

  if (options.store_pairwise) post.xi.assign(static_cast<std::size_t>(std::max(steps - 1, 0)) * pairs, kNegInf);
  if (options.accumulate_counts) post.expected_counts.assign(static_cast<std::size_t>(post.num_zones) * pairs, 0.0);
  if (options.store_pairwise || options.accumulate_counts) {
    for (int t = 0; t + 1 < steps; ++t) {
      const int zone = model.zone(t);
      const double* a = alpha.data() + static_cast<std::size_t>(t) * q;
      const double* b = beta.data() + static_cast<std::size_t>(t + 1) * q;
      const double* o_next = o.data() + static_cast<std::size_t>(t + 1) * q;
      double* counts = options.accumulate_counts ? post.expected_counts.data() + static_cast<std::size_t>(zone) * pairs : nullptr;
      double* xi = options.store_pairwise ? post.xi.data() + static_cast<std::size_t>(t) * pairs : nullptr;
      for (std::size_t x = 0; x < q; ++x) {
        const auto from = static_cast<CellId>(x);
        const auto nb = grid.neighborhood(from);
        const std::size_t base = grid.pair_offset(from);
        const double ax = a[x] - post.loglik;
        for (std::size_t j = 0; j < nb.size(); ++j) {
          const double v = ax + logp(zone, from, base + j) + o_next[nb[j]] + b[nb[j]];
          if (xi) xi[base + j] = v;
          if (counts) counts[base + j] += std::exp(v);
        }
      }
    }
  }
  return post;
}

std::vector<double> counts_from_pairwise(const PosteriorTables& post, const Model& model) {
  if (post.xi.empty() && post.num_steps > 1) throw DomainError("counts_from_pairwise: pairwise tables were not stored");
  std::vector<double> counts(static_cast<std::size_t>(post.num_zones) * post.num_pairs, 0.0);
  for (int t = 0; t + 1 < post.num_steps; ++t) {
    const auto xi = post.log_pairwise(t);
    double* dst = counts.data() + static_cast<std::size_t>(model.zone(t)) * post.num_pairs;
    for (std::size_t p = 0; p < post.num_pairs; ++p) dst[p] += std::exp(xi[p]);
  }
  return counts;
}

std::vector<CellId> viterbi(const ModelParams& params, const Model& model, const BearingSeries& obs) {
  model.check_params(params);
  model.check_observations(obs);
  const Grid& grid = model.grid();
  const int steps = obs.num_steps();
  const std::size_t q = grid.num_cells();
  const TransitionTable table(model, params, /*eager=*/true);
  const std::vector<double> o = observation_table(params, model, obs);

  std::vector<double> delta(q), next(q);
  std::vector<CellId> back(static_cast<std::size_t>(steps) * q, -1);
  const double start = start_logprob(grid);
  for (std::size_t x = 0; x < q; ++x) delta[x] = start + o[x];
  for (int t = 1; t < steps; ++t) {
    const int zone = model.zone(t - 1);
    for (std::size_t x = 0; x < q; ++x) {
      const auto to = static_cast<CellId>(x);
      const auto nb = grid.neighborhood(to);
      const std::size_t base = grid.pair_offset(to);
      double best = kNegInf;
      CellId arg = -1;
      // nb is ascending, so strict comparison keeps the smallest id on ties.
      for (std::size_t j = 0; j < nb.size(); ++j) {
        const double v = delta[nb[j]] + table.pair_logprob(zone, nb[j], grid.reverse_pair(base + j));
        if (v > best || arg < 0) {
          best = v;
          arg = nb[j];
        }
      }
      next[x] = best + o[static_cast<std::size_t>(t) * q + x];
      back[static_cast<std::size_t>(t) * q + x] = arg;
    }
    delta.swap(next);
  }
  std::vector<CellId> path(static_cast<std::size_t>(steps));
  CellId last = 0;
  for (std::size_t x = 1; x < q; ++x)
    if (delta[x] > delta[static_cast<std::size_t>(last)]) last = static_cast<CellId>(x);
  path.back() = last;
  for (int t = steps - 1; t > 0; --t)
    path[static_cast<std::size_t>(t - 1)] = back[static_cast<std::size_t>(t) * q + static_cast<std::size_t>(path[static_cast<std::size_t>(t)])];
  return path;
}

std::vector<CellId> marginal_mode_path(const PosteriorTables& post) {
  std::vector<CellId> path(static_cast<std::size_t>(post.num_steps));
  for (int t = 0; t < post.num_steps; ++t) {
    const auto g = post.log_marginals(t);
    path[static_cast<std::size_t>(t)] = static_cast<CellId>(std::max_element(g.begin(), g.end()) - g.begin());
  }
  return path;
}

std::size_t sample_log_categorical(std::span<const double> log_weights, Rng& rng) {
  if (log_weights.empty()) throw DomainError("sample_log_categorical: no candidates");
  double m = kNegInf;
  for (double v : log_weights) m = std::max(m, v);
  double total = 0.0;
  for (double v : log_weights) total += std::exp(v - m);
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    acc += std::exp(log_weights[i] - m);
    if (u < acc) return i;
  }
  // Rounding fallback: last candidate with non-zero weight.
  for (std::size_t i = log_weights.size(); i-- > 0;)
    if (log_weights[i] > kNegInf) return i;
  return log_weights.size() - 1;
}

GibbsSampler::GibbsSampler(const Model& model, const BearingSeries& obs, const ModelParams& params,
                           std::vector<CellId> init)
    : model_(&model), obs_(&obs), params_(params), table_(model, params, /*eager=*/false), path_(std::move(init)) {
  model.check_observations(obs);
  if (path_.size() != static_cast<std::size_t>(obs.num_steps()))
    throw DomainError("gibbs: initial path length differs from observation length");
  model.check_path(path_);
  set_params(params);
}

void GibbsSampler::set_params(const ModelParams& params) {
  model_->check_params(params);
  params_ = params;
  table_ = TransitionTable(*model_, params_, /*eager=*/false);
  log_norm_.resize(params_.kappa.size());
  for (std::size_t n = 0; n < log_norm_.size(); ++n) log_norm_[n] = std::log(kTwoPi) + log_bessel_i0(params_.kappa[n]);
}

double GibbsSampler::obs_term(int t, CellId c) const {
  const auto y = obs_->step(t);
  double s = 0.0;
  for (std::size_t n = 0; n < y.size(); ++n) {
    if (std::isnan(y[n])) continue;
    s += params_.kappa[n] * std::cos(y[n] - model_->true_bearing(c, n) - params_.mu[n]) - log_norm_[n];
  }
  return s;
}

void GibbsSampler::update_site(int t, Rng& rng) {
  const Grid& grid = model_->grid();
  const int steps = static_cast<int>(path_.size());
  cand_.clear();
  weight_.clear();
  if (steps == 1) {
    for (std::size_t c = 0; c < grid.num_cells(); ++c) {
      cand_.push_back(static_cast<CellId>(c));
      weight_.push_back(obs_term(t, static_cast<CellId>(c)));
    }
  } else if (t == 0) {
    // Candidates c with path[1] in N(c), i.e. c in N(path[1]).
    const CellId next = path_[1];
    const int zone = model_->zone(0);
    const auto nb = grid.neighborhood(next);
    const std::size_t base = grid.pair_offset(next);
    for (std::size_t j = 0; j < nb.size(); ++j) {
      cand_.push_back(nb[j]);
      weight_.push_back(table_.pair_logprob(zone, nb[j], grid.reverse_pair(base + j)) + obs_term(t, nb[j]));
    }
  } else if (t == steps - 1) {
    const CellId prev = path_[static_cast<std::size_t>(t - 1)];
    const int zone = model_->zone(t - 1);
    const auto row = table_.row(zone, prev);
    const auto nb = grid.neighborhood(prev);
    for (std::size_t j = 0; j < nb.size(); ++j) {
      cand_.push_back(nb[j]);
      weight_.push_back(row[j] + obs_term(t, nb[j]));
    }
  } else {
    const CellId prev = path_[static_cast<std::size_t>(t - 1)];
    const CellId next = path_[static_cast<std::size_t>(t + 1)];
    const int zone_in = model_->zone(t - 1);
    const int zone_out = model_->zone(t);
    const auto row = table_.row(zone_in, prev);
    const auto a = grid.neighborhood(prev);
    const auto b = grid.neighborhood(next);
    const std::size_t base_b = grid.pair_offset(next);
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
      if (a[i] < b[j]) {
        ++i;
      } else if (b[j] < a[i]) {
        ++j;
      } else {
        const CellId c = a[i];
        cand_.push_back(c);
        weight_.push_back(row[i] + table_.pair_logprob(zone_out, c, grid.reverse_pair(base_b + j)) + obs_term(t, c));
        ++i;
        ++j;
      }
    }
  }
  path_[static_cast<std::size_t>(t)] = cand_[sample_log_categorical(weight_, rng)];
}

void GibbsSampler::run(long num_updates, Rng& rng) {
  const auto steps = static_cast<std::uint64_t>(path_.size());
  for (long u = 0; u < num_updates; ++u) update_site(static_cast<int>(rng.below(steps)), rng);
}

std::vector<CellId> GibbsSampler::initial_path(const ModelParams& params, const Model& model, const BearingSeries& obs) {
  model.check_params(params);
  model.check_observations(obs);
  const Grid& grid = model.grid();
  const std::size_t q = grid.num_cells();
  std::vector<double> log_norm(params.kappa.size());
  for (std::size_t n = 0; n < log_norm.size(); ++n) log_norm[n] = std::log(kTwoPi) + log_bessel_i0(params.kappa[n]);

  std::vector<CellId> path(static_cast<std::size_t>(obs.num_steps()));
  for (int t = 0; t < obs.num_steps(); ++t) {
    const auto y = obs.step(t);
    double best = kNegInf;
    CellId arg = 0;
    for (std::size_t c = 0; c < q; ++c) {
      double s = 0.0;
      for (std::size_t n = 0; n < y.size(); ++n)
        if (!std::isnan(y[n]))
          s += params.kappa[n] * std::cos(y[n] - model.true_bearing(static_cast<CellId>(c), n) - params.mu[n]) - log_norm[n];
      if (s > best) {
        best = s;
        arg = static_cast<CellId>(c);
      }
    }
    if (t > 0) {
      const CellId prev = path[static_cast<std::size_t>(t - 1)];
      if (!grid.is_neighbor(prev, arg)) {
        const Point target = grid.center(arg);
        double best_d = std::numeric_limits<double>::infinity();
        CellId nearest = prev;
        for (CellId c : grid.neighborhood(prev)) {
          const double d = distance(grid.center(c), target);
          if (d < best_d) {
            best_d = d;
            nearest = c;
          }
        }
        arg = nearest;
      }
    }
    path[static_cast<std::size_t>(t)] = arg;
  }
  return path;
}

std::vector<CellId> gibbs_sample_path(const ModelParams& params, const Model& model, const BearingSeries& obs,
                                      long num_burn, Rng& rng) {
  if (num_burn < 0) throw DomainError("gibbs: num_burn must be non-negative");
  GibbsSampler sampler(model, obs, params, GibbsSampler::initial_path(params, model, obs));
  sampler.run(num_burn, rng);
  return sampler.path();
}

}  // namespace telemovr
