#include "telemovr/estimation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "telemovr/errors.hpp"
#include "telemovr/logspace.hpp"

namespace telemovr {

const char* to_string(Algorithm algo) { return algo == Algorithm::em ? "em" : "sg"; }

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "em") return Algorithm::em;
  if (s == "sg") return Algorithm::sg;
  throw DomainError("unknown algorithm '" + s + "' (expected em or sg)");
}

const char* to_string(SgDirection d) { return d == SgDirection::gradient ? "gradient" : "fisher_scaled"; }

SgDirection sg_direction_from_string(const std::string& s) {
  if (s == "gradient") return SgDirection::gradient;
  if (s == "fisher_scaled") return SgDirection::fisher_scaled;
  throw DomainError("unknown SG direction '" + s + "' (expected gradient or fisher_scaled)");
}

void FitConfig::validate() const {
  if (!time_bounded() && !max_iters) throw DomainError("fit config: max_time and max_iters cannot both be unbounded");
  if (!(max_time > 0.0)) throw DomainError("fit config: max_time must be positive");
  if (max_iters && *max_iters < 0) throw DomainError("fit config: max_iters must be non-negative");
  if (num_burn < 0) throw DomainError("fit config: num_burn must be non-negative");
  if (trace_every < 1) throw DomainError("fit config: trace_every must be >= 1");
  if (!(wolfe_c1 > 0.0 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0))
    throw DomainError("fit config: need 0 < c1 < c2 < 1");
  if (!(kappa_cap > 0.0)) throw DomainError("fit config: kappa_cap must be positive");
}

VonMisesEstimate vonmises_from_sums(double c, double s, double w, double prev_mu, double prev_kappa,
                                    double kappa_cap) {
  if (!(w > 0.0)) return {prev_mu, prev_kappa, false};
  const double resultant = std::hypot(c, s);
  const double rbar = std::min(1.0, resultant / w);
  if (rbar == 0.0) return {0.0, 0.0, true};
  return {wrap_angle(std::atan2(s, c)), inverse_bessel_ratio(rbar, kappa_cap), true};
}

VonMisesEstimate vonmises_mstep(std::span<const WeightedResidual> residuals, double prev_mu, double prev_kappa,
                                double kappa_cap) {
  double c = 0.0, s = 0.0, w = 0.0;
  for (const auto& r : residuals) {
    if (!(r.weight >= 0.0)) throw DomainError("vonmises_mstep: weights must be non-negative");
    c += r.weight * std::cos(r.residual);
    s += r.weight * std::sin(r.residual);
    w += r.weight;
  }
  return vonmises_from_sums(c, s, w, prev_mu, prev_kappa, kappa_cap);
}

ResultantSums posterior_resultants(const PosteriorTables& post, const Model& model, const BearingSeries& obs) {
  const std::size_t n_count = model.num_towers();
  const std::size_t q = model.num_cells();
  ResultantSums out{std::vector<double>(n_count, 0.0), std::vector<double>(n_count, 0.0),
                    std::vector<double>(n_count, 0.0)};
  std::vector<double> prob(q);
  for (int t = 0; t < obs.num_steps(); ++t) {
    const auto g = post.log_marginals(t);
    for (std::size_t x = 0; x < q; ++x) prob[x] = std::exp(g[x]);
    for (std::size_t n = 0; n < n_count; ++n) {
      const double y = obs.at(t, static_cast<int>(n));
      if (std::isnan(y)) continue;
      double c = 0.0, s = 0.0, w = 0.0;
      for (std::size_t x = 0; x < q; ++x) {
        if (prob[x] == 0.0) continue;
        const double r = y - model.true_bearing(static_cast<CellId>(x), n);
        c += prob[x] * std::cos(r);
        s += prob[x] * std::sin(r);
        w += prob[x];
      }
      out.c[n] += c;
      out.s[n] += s;
      out.w[n] += w;
    }
  }
  return out;
}

double expected_transition_loglik(std::span<const double> lambda, const Model& model, std::span<const double> counts,
                                  std::span<double> grad) {
  const Grid& grid = model.grid();
  const FeatureSet& fs = model.features();
  const std::size_t k_count = fs.size();
  const std::size_t pairs = grid.num_pairs();
  const int zones = model.num_zones();
  if (lambda.size() != static_cast<std::size_t>(zones) * k_count || counts.size() != static_cast<std::size_t>(zones) * pairs)
    throw DomainError("expected_transition_loglik: shape mismatch");
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);

  std::vector<double> score(grid.max_neighborhood());
  std::vector<double> ef(k_count);
  double value = 0.0;
  for (int z = 0; z < zones; ++z) {
    const double* w = lambda.data() + static_cast<std::size_t>(z) * k_count;
    const double* n_z = counts.data() + static_cast<std::size_t>(z) * pairs;
    for (std::size_t x = 0; x < grid.num_cells(); ++x) {
      const auto from = static_cast<CellId>(x);
      const std::size_t base = grid.pair_offset(from);
      const std::size_t size = grid.neighborhood(from).size();
      double total = 0.0;
      for (std::size_t j = 0; j < size; ++j) total += n_z[base + j];
      if (total == 0.0) continue;
      const auto f = fs.row(from);
      for (std::size_t j = 0; j < size; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < k_count; ++k) s += w[k] * f[j * k_count + k];
        score[j] = s;
      }
      const double lz = logsumexp(std::span<const double>(score.data(), size));
      for (std::size_t j = 0; j < size; ++j) value += n_z[base + j] * (score[j] - lz);
      if (grad.empty()) continue;
      std::fill(ef.begin(), ef.end(), 0.0);
      double* gz = grad.data() + static_cast<std::size_t>(z) * k_count;
      for (std::size_t j = 0; j < size; ++j) {
        const double p = std::exp(score[j] - lz);
        const double c = n_z[base + j];
        for (std::size_t k = 0; k < k_count; ++k) {
          ef[k] += p * f[j * k_count + k];
          gz[k] += c * f[j * k_count + k];
        }
      }
      for (std::size_t k = 0; k < k_count; ++k) gz[k] -= total * ef[k];
    }
  }
  return value;
}

LambdaFit lambda_mstep(std::span<const double> counts, const Model& model, std::span<const double> init,
                       const BfgsOptions& options) {
  const Objective neg = [&](std::span<const double> x, std::span<double> g) {
    const double v = expected_transition_loglik(x, model, counts, g);
    for (double& gi : g) gi = -gi;
    return -v;
  };
  BfgsResult r = minimize_bfgs(neg, std::vector<double>(init.begin(), init.end()), options);
  LambdaFit out;
  out.lambda = std::move(r.x);
  out.objective = -r.value;
  out.iterations = r.iterations;
  out.converged = r.converged;
  out.warning = r.line_search_failed;
  return out;
}

LambdaFit lambda_mstep(const PosteriorTables& post, const Model& model, std::span<const double> init,
                       const BfgsOptions& options) {
  if (!post.expected_counts.empty()) return lambda_mstep(post.expected_counts, model, init, options);
  const std::vector<double> counts = counts_from_pairwise(post, model);
  return lambda_mstep(counts, model, init, options);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool budget_left(const FitConfig& cfg, long iterations, Clock::time_point start) {
  if (cfg.max_iters && iterations >= *cfg.max_iters) return false;
  if (cfg.time_bounded() && seconds_since(start) >= cfg.max_time) return false;
  return true;
}

void project(ModelParams& p, double kappa_cap) {
  for (double& k : p.kappa) k = std::clamp(k, 0.0, kappa_cap);
  for (double& m : p.mu) m = wrap_angle(m);
}

}  // namespace

FitResult em_fit(const FitConfig& cfg, const Model& model, const BearingSeries& obs) {
  cfg.validate();
  model.check_params(cfg.init_params);
  model.check_observations(obs);
  const auto start = Clock::now();
  FitResult res;
  res.params = cfg.init_params;
  project(res.params, cfg.kappa_cap);

  ForwardBackwardOptions fb_opts;
  fb_opts.accumulate_counts = true;
  double prev_loglik = kNegInf;
  long iter = 0;
  while (true) {
    PosteriorTables post = forward_backward(res.params, model, obs, fb_opts);
    if (post.loglik < prev_loglik - cfg.monotonicity_tol)
      throw EstimationError("em: observed log-likelihood decreased from " + std::to_string(prev_loglik) + " to " +
                            std::to_string(post.loglik) + " at iteration " + std::to_string(iter));
    prev_loglik = post.loglik;
    const bool more = budget_left(cfg, iter, start);
    if (iter % cfg.trace_every == 0 || !more)
      res.trace.records.push_back({iter, seconds_since(start), post.loglik, 0.0, 0.0, res.params});
    if (!more) break;

    ModelParams next = res.params;
    const ResultantSums sums = posterior_resultants(post, model, obs);
    for (std::size_t n = 0; n < model.num_towers(); ++n) {
      const VonMisesEstimate est =
          vonmises_from_sums(sums.c[n], sums.s[n], sums.w[n], next.mu[n], next.kappa[n], cfg.kappa_cap);
      next.mu[n] = est.mu;
      next.kappa[n] = est.kappa;
    }
    const LambdaFit lf = lambda_mstep(post, model, res.params.lambda);
    next.lambda = lf.lambda;
    if (lf.warning) ++res.trace.bfgs_warnings;
    res.params = std::move(next);
    ++iter;
  }
  res.trace.iterations = iter;
  res.trace.elapsed_s = seconds_since(start);
  return res;
}

FitResult sg_fit(const FitConfig& cfg, const Model& model, const BearingSeries& obs) {
  cfg.validate();
  model.check_params(cfg.init_params);
  model.check_observations(obs);
  const auto start = Clock::now();
  FitResult res;
  res.params = cfg.init_params;
  project(res.params, cfg.kappa_cap);

  Rng rng(cfg.seed);
  GibbsSampler sampler(model, obs, res.params, GibbsSampler::initial_path(res.params, model, obs));
  res.trace.records.push_back(
      {0, seconds_since(start), complete_loglik(res.params, model, sampler.path(), obs, sampler.table()), 0.0, 0.0,
       res.params});

  LineSearchOptions ls;
  ls.c1 = cfg.wolfe_c1;
  ls.c2 = cfg.wolfe_c2;
  ls.max_steps = 30;

  long iter = 0;
  while (budget_left(cfg, iter, start)) {
    sampler.set_params(res.params);
    sampler.run(cfg.num_burn, rng);
    const std::vector<CellId>& path = sampler.path();
    const double l0 = complete_loglik(res.params, model, path, obs, sampler.table());
    const ParamGradient g = grad_complete_loglik(res.params, model, path, obs, sampler.table());
    const double gnorm = g.norm();

    ParamGradient dir = g;
    if (cfg.direction == SgDirection::fisher_scaled) {
      const ParamGradient h = fisher_diagonal(res.params, model, path, obs, sampler.table());
      auto scale = [](std::vector<double>& d, const std::vector<double>& info) {
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = info[i] > 1e-12 ? d[i] / info[i] : 0.0;
      };
      scale(dir.lambda, h.lambda);
      scale(dir.mu, h.mu);
      scale(dir.kappa, h.kappa);
    }
    const double slope = g.dot(dir);

    double step = 0.0;
    double objective = l0;
    // Gradients at rounding level are treated as stationary.
    if (slope > 0.0 && gnorm > 1e-12 * std::max(1.0, std::abs(l0))) {
      // Minimize -L along +dir.
      const LineFunction phi = [&](double a) -> std::pair<double, double> {
        ModelParams trial = displaced(res.params, dir, a);
        for (double k : trial.kappa)
          if (k < 0.0 || k > cfg.kappa_cap) return {std::numeric_limits<double>::infinity(), 0.0};
        const TransitionTable table(model, trial, /*eager=*/false);
        const double l = complete_loglik(trial, model, path, obs, table);
        const ParamGradient gt = grad_complete_loglik(trial, model, path, obs, table);
        return {-l, -gt.dot(dir)};
      };
      ls.initial_step = cfg.direction == SgDirection::fisher_scaled ? 1.0 : 1.0 / gnorm;
      const LineSearchResult lr = weak_wolfe_search(phi, -l0, -slope, ls);
      if (lr.ok) {
        step = lr.step;
        objective = -lr.value;
      } else {
        step = 1e-6 / (1.0 + dir.norm());
        ++res.trace.line_search_fallbacks;
      }
      res.params = displaced(res.params, dir, step);
      project(res.params, cfg.kappa_cap);
      if (!lr.ok) objective = complete_loglik(res.params, model, path, obs);
    }
    const double step_len = step * dir.norm();
    ++iter;
    if (iter % cfg.trace_every == 0 || !budget_left(cfg, iter, start))
      res.trace.records.push_back({iter, seconds_since(start), objective, step_len, gnorm, res.params});
  }
  if (res.trace.records.back().iter != iter)
    res.trace.records.push_back({iter, seconds_since(start), res.trace.records.back().objective, 0.0, 0.0, res.params});
  res.trace.iterations = iter;
  res.trace.elapsed_s = seconds_since(start);
  return res;
}

FitResult fit(const FitConfig& cfg, const Model& model, const BearingSeries& obs) {
  return cfg.algo == Algorithm::em ? em_fit(cfg, model, obs) : sg_fit(cfg, model, obs);
}

CostProbe iteration_cost_probe(Algorithm algo, const Model& model, const BearingSeries& obs, const ModelParams& init,
                               double budget_s, std::optional<long> max_iters, long num_burn, std::uint64_t seed) {
  FitConfig cfg;
  cfg.algo = algo;
  cfg.max_time = budget_s;
  cfg.max_iters = max_iters;
  cfg.num_burn = num_burn;
  cfg.init_params = init;
  cfg.seed = seed;
  cfg.trace_every = 1 << 30;
  const auto start = Clock::now();
  const FitResult r = fit(cfg, model, obs);
  return {r.trace.iterations, seconds_since(start)};
}

}  // namespace telemovr
