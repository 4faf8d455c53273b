#include "telemovr/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "telemovr/errors.hpp"

namespace telemovr {

LineSearchResult weak_wolfe_search(const LineFunction& phi, double phi0, double dphi0,
                                   const LineSearchOptions& opt) {
  LineSearchResult res;
  if (!(dphi0 < 0.0)) return res;
  // Bracket [lo, hi]: lo satisfies sufficient decrease but not curvature,
  // hi fails sufficient decrease. Trial steps come from safeguarded secant
  // (expansion) or quadratic (bracketing) interpolation.
  double lo = 0.0, f_lo = phi0, d_lo = dphi0;
  double hi = std::numeric_limits<double>::infinity(), f_hi = 0.0;
  double step = opt.initial_step;
  for (int i = 0; i < opt.max_steps; ++i) {
    const auto [value, slope] = phi(step);
    ++res.evaluations;
    if (!std::isfinite(value) || value > phi0 + opt.c1 * step * dphi0) {
      hi = step;
      f_hi = value;
    } else if (!std::isfinite(slope) || slope < opt.c2 * dphi0) {
      lo = step;
      f_lo = value;
      d_lo = slope;
    } else {
      res.ok = true;
      res.step = step;
      res.value = value;
      res.derivative = slope;
      return res;
    }
    if (std::isinf(hi)) {
      double next = 2.0 * lo;
      if (std::isfinite(d_lo) && d_lo > dphi0) {
        // Secant root of the derivative between 0 and lo.
        const double secant = lo * dphi0 / (dphi0 - d_lo);
        next = std::clamp(secant, 2.0 * lo, 20.0 * lo);
      }
      step = next;
    } else {
      const double width = hi - lo;
      double next = lo + 0.5 * width;
      if (std::isfinite(f_hi) && std::isfinite(d_lo)) {
        const double curv = f_hi - f_lo - d_lo * width;
        if (curv > 0.0) next = lo - d_lo * width * width / (2.0 * curv);
      }
      step = std::clamp(next, lo + 0.1 * width, hi - 0.1 * width);
    }
  }
  return res;
}

namespace {

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

BfgsResult minimize_bfgs(const Objective& f, std::vector<double> x0, const BfgsOptions& opt) {
  const std::size_t n = x0.size();
  BfgsResult res;
  res.x = std::move(x0);
  std::vector<double> g(n), g_new(n), x_new(n), dir(n), s(n), y(n), hy(n);
  res.value = f(res.x, g);
  if (!std::isfinite(res.value)) throw DomainError("bfgs: objective is not finite at the starting point");
  res.grad_inf_norm = inf_norm(g);

  // Inverse Hessian approximation, row-major.
  std::vector<double> h(n * n, 0.0);
  auto reset = [&](double scale) {
    std::fill(h.begin(), h.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) h[i * n + i] = scale;
  };
  reset(1.0);
  bool fresh = true;

  while (res.iterations < opt.max_iters) {
    if (res.grad_inf_norm < opt.grad_tol) {
      res.converged = true;
      return res;
    }
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc -= h[i * n + j] * g[j];
      dir[i] = acc;
    }
    double slope = dot(dir, g);
    if (!(slope < 0.0)) {
      reset(1.0);
      for (std::size_t i = 0; i < n; ++i) dir[i] = -g[i];
      slope = dot(dir, g);
      fresh = true;
    }

    LineSearchOptions ls = opt.line_search;
    if (fresh) ls.initial_step = std::min(1.0, 1.0 / std::max(1e-300, inf_norm(g)));
    const LineFunction phi = [&](double a) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = res.x[i] + a * dir[i];
      const double v = f(x_new, g_new);
      return std::make_pair(v, dot(g_new, dir));
    };
    LineSearchResult step = weak_wolfe_search(phi, res.value, slope, ls);
    if (!step.ok) {
      if (!fresh) {
        reset(1.0);
        fresh = true;
        continue;
      }
      res.line_search_failed = true;
      return res;
    }
    // The last evaluation was the accepted step, so x_new/g_new hold it.
    const double value = step.value;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - res.x[i];
      y[i] = g_new[i] - g[i];
    }
    res.x = x_new;
    g = g_new;
    res.value = value;
    res.grad_inf_norm = inf_norm(g);
    ++res.iterations;

    const double sy = dot(s, y);
    if (sy > 1e-300) {
      if (fresh) reset(sy / dot(y, y));
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += h[i * n + j] * y[j];
        hy[i] = acc;
      }
      const double yhy = dot(y, hy);
      const double rho = 1.0 / sy;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          h[i * n + j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
      fresh = false;
    }
  }
  res.converged = res.grad_inf_norm < opt.grad_tol;
  return res;
}

}  // namespace telemovr
