#pragma once

namespace telemovr {

// Largest concentration the fitters will produce.
inline constexpr double kKappaCap = 1e4;

/// log I0(kappa) for kappa >= 0; power series below 50, scaled asymptotic
/// expansion above, so it stays finite far past the double overflow of I0.
double log_bessel_i0(double kappa);

/// A(kappa) = I1(kappa) / I0(kappa), the mean resultant length of a von
/// Mises distribution. Monotone on [0, inf), A(0) = 0, A -> 1.
double bessel_ratio(double kappa);

/// dA/dkappa = 1 - A/kappa - A^2 (1/2 at kappa = 0).
double bessel_ratio_derivative(double kappa);

/// Solves A(kappa) = rbar. Starts from kappa0 = rbar (2 - rbar^2) / (1 - rbar^2)
/// and refines with up to 20 Newton steps. rbar >= 1 - 1e-12 returns cap;
/// rbar <= 0 returns 0.
double inverse_bessel_ratio(double rbar, double cap = kKappaCap);

}  // namespace telemovr
