#include "telemovr/bessel.hpp"

#include <cmath>

#include "telemovr/errors.hpp"
#include "telemovr/grid.hpp"

namespace telemovr {
namespace {

constexpr double kAsymptoticFrom = 50.0;

void check_kappa(double kappa) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw DomainError("bessel: kappa must be finite and >= 0");
}

// Power series for I0 and I1 (unscaled); valid without overflow below ~700.
void series(double x, double& i0, double& i1) {
  const double q = 0.25 * x * x;
  double t0 = 1.0, t1 = 0.5 * x;
  i0 = t0;
  i1 = t1;
  for (int k = 1; k < 500; ++k) {
    t0 *= q / (static_cast<double>(k) * k);
    t1 *= q / (static_cast<double>(k) * (k + 1));
    i0 += t0;
    i1 += t1;
    if (t0 < 1e-17 * i0 && t1 < 1e-17 * i1) break;
  }
}

// Hankel expansion: I_nu(x) ~ e^x / sqrt(2 pi x) * sum_k (-1)^k a_k(nu) / x^k.
// Returns the bracketed sum; truncated at its smallest term.
double asymptotic_sum(int nu, double x) {
  const double mu = 4.0 * nu * nu;
  double term = 1.0, sum = 1.0, prev = 1.0;
  for (int k = 1; k < 400; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= -(mu - odd * odd) / (k * 8.0 * x);
    const double mag = std::abs(term);
    if (mag > prev) break;
    sum += term;
    if (mag < 1e-17 * std::abs(sum)) break;
    prev = mag;
  }
  return sum;
}

}  // namespace

double log_bessel_i0(double kappa) {
  check_kappa(kappa);
  if (kappa < kAsymptoticFrom) {
    double i0, i1;
    series(kappa, i0, i1);
    return std::log(i0);
  }
  return kappa - 0.5 * std::log(kTwoPi * kappa) + std::log(asymptotic_sum(0, kappa));
}

double bessel_ratio(double kappa) {
  check_kappa(kappa);
  if (kappa == 0.0) return 0.0;
  if (kappa < kAsymptoticFrom) {
    double i0, i1;
    series(kappa, i0, i1);
    return i1 / i0;
  }
  return asymptotic_sum(1, kappa) / asymptotic_sum(0, kappa);
}

double bessel_ratio_derivative(double kappa) {
  check_kappa(kappa);
  if (kappa == 0.0) return 0.5;
  const double a = bessel_ratio(kappa);
  return 1.0 - a / kappa - a * a;
}

double inverse_bessel_ratio(double rbar, double cap) {
  if (!std::isfinite(rbar)) throw DomainError("inverse_bessel_ratio: non-finite input");
  if (rbar <= 0.0) return 0.0;
  if (rbar >= 1.0 - 1e-12) return cap;
  double kappa = rbar * (2.0 - rbar * rbar) / (1.0 - rbar * rbar);
  for (int it = 0; it < 20; ++it) {
    const double f = bessel_ratio(kappa) - rbar;
    const double df = bessel_ratio_derivative(kappa);
    if (!(df > 0.0)) break;
    double next = kappa - f / df;
    if (next <= 0.0) next = 0.5 * kappa;
    const bool done = std::abs(next - kappa) <= 1e-14 * std::max(1.0, kappa);
    kappa = next;
    if (done || kappa >= cap) break;
  }
  return std::min(kappa, cap);
}

}  // namespace telemovr
