#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace telemovr {

struct LineSearchOptions {
  double c1 = 1e-4;  // sufficient decrease
  double c2 = 0.9;   // curvature
  int max_steps = 30;
  double initial_step = 1.0;
};

struct LineSearchResult {
  bool ok = false;
  double step = 0.0;
  double value = 0.0;
  double derivative = 0.0;
  int evaluations = 0;
};

// phi(step) -> (value, directional derivative). Non-finite values count as
// a failed sufficient-decrease test.
using LineFunction = std::function<std::pair<double, double>(double)>;

/// Bracketing search (doubling / bisection) for a step satisfying the weak
/// Wolfe conditions of a minimization problem:
///   phi(a) <= phi(0) + c1 a phi'(0)   and   phi'(a) >= c2 phi'(0).
/// Requires phi'(0) < 0.
LineSearchResult weak_wolfe_search(const LineFunction& phi, double phi0, double dphi0,
                                   const LineSearchOptions& options = {});

struct BfgsOptions {
  double grad_tol = 1e-6;  // infinity norm
  int max_iters = 200;
  LineSearchOptions line_search;
};

struct BfgsResult {
  std::vector<double> x;
  double value = 0.0;
  double grad_inf_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  // Set when the search stalled and the best iterate was returned.
  bool line_search_failed = false;
};

// f(x, grad) returns the objective and writes its gradient.
using Objective = std::function<double(std::span<const double>, std::span<double>)>;

/// Dense inverse-Hessian BFGS minimizer.
BfgsResult minimize_bfgs(const Objective& f, std::vector<double> x0, const BfgsOptions& options = {});

}  // namespace telemovr
