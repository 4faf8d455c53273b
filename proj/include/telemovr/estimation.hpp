#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "telemovr/bessel.hpp"
#include "telemovr/inference.hpp"
#include "telemovr/model.hpp"
#include "telemovr/optimize.hpp"

namespace telemovr {

enum class Algorithm { em, sg };

// Ascent direction for stochastic gradient: the raw gradient, or the
// gradient scaled by the inverse diagonal Fisher information of the sampled
// complete data.
enum class SgDirection { gradient, fisher_scaled };

const char* to_string(Algorithm algo);
Algorithm algorithm_from_string(const std::string& s);
const char* to_string(SgDirection d);
SgDirection sg_direction_from_string(const std::string& s);

struct FitConfig {
  Algorithm algo = Algorithm::sg;
  // Wall-clock budget in seconds; infinity means unbounded.
  double max_time = std::numeric_limits<double>::infinity();
  std::optional<long> max_iters;
  // Single-site Gibbs updates per SG iteration.
  long num_burn = 1000;
  SgDirection direction = SgDirection::fisher_scaled;
  ModelParams init_params;
  std::uint64_t seed = 0;
  int trace_every = 1;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  double kappa_cap = kKappaCap;
  // EM aborts when the observed log-likelihood drops by more than this.
  double monotonicity_tol = 1e-6;

  bool time_bounded() const { return max_time < std::numeric_limits<double>::infinity(); }
  // Throws DomainError when both limits are unbounded or values are invalid.
  void validate() const;
};

struct TraceRecord {
  long iter = 0;
  double elapsed_s = 0.0;
  double objective = 0.0;
  double step_len = 0.0;
  double grad_norm = 0.0;
  ModelParams params;
};

struct FitTrace {
  std::vector<TraceRecord> records;
  long iterations = 0;  // completed outer iterations
  double elapsed_s = 0.0;
  int line_search_fallbacks = 0;
  int bfgs_warnings = 0;
};

struct FitResult {
  ModelParams params;
  FitTrace trace;
};

struct WeightedResidual {
  double residual = 0.0;  // y - h(x, z), radians
  double weight = 0.0;    // posterior probability of x
};

struct VonMisesEstimate {
  double mu = 0.0;
  double kappa = 0.0;
  bool updated = false;  // false when the total weight was zero
};

/// Weighted von Mises MLE from the resultant sums C = sum w cos r,
/// S = sum w sin r and total weight W. W == 0 leaves (prev_mu, prev_kappa).
VonMisesEstimate vonmises_from_sums(double c, double s, double w, double prev_mu, double prev_kappa,
                                    double kappa_cap = kKappaCap);
VonMisesEstimate vonmises_mstep(std::span<const WeightedResidual> residuals, double prev_mu = 0.0,
                                double prev_kappa = 0.0, double kappa_cap = kKappaCap);

/// Resultant sums (C, S, W) per tower under the posterior marginals.
struct ResultantSums {
  std::vector<double> c, s, w;
};
ResultantSums posterior_resultants(const PosteriorTables& post, const Model& model, const BearingSeries& obs);

/// Expected transition log-likelihood sum_z sum_pairs counts * log p(x'|x; lambda^(z)),
/// with its gradient written into grad when non-empty.
double expected_transition_loglik(std::span<const double> lambda, const Model& model,
                                  std::span<const double> counts, std::span<double> grad = {});

struct LambdaFit {
  std::vector<double> lambda;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  bool warning = false;
};

/// Maximizes the expected transition log-likelihood with BFGS from init.
/// counts are per-zone expected transition counts (Z x pairs).
LambdaFit lambda_mstep(std::span<const double> counts, const Model& model, std::span<const double> init,
                       const BfgsOptions& options = {});
LambdaFit lambda_mstep(const PosteriorTables& post, const Model& model, std::span<const double> init,
                       const BfgsOptions& options = {});

FitResult em_fit(const FitConfig& cfg, const Model& model, const BearingSeries& obs);
FitResult sg_fit(const FitConfig& cfg, const Model& model, const BearingSeries& obs);
FitResult fit(const FitConfig& cfg, const Model& model, const BearingSeries& obs);

struct CostProbe {
  long iterations = 0;
  double seconds = 0.0;
  double seconds_per_iteration() const { return iterations > 0 ? seconds / static_cast<double>(iterations) : seconds; }
};

/// Runs the fitter for a wall-clock budget (and optional iteration cap) and
/// reports throughput.
CostProbe iteration_cost_probe(Algorithm algo, const Model& model, const BearingSeries& obs,
                               const ModelParams& init, double budget_s, std::optional<long> max_iters = {},
                               long num_burn = 1000, std::uint64_t seed = 0);

}  // namespace telemovr
