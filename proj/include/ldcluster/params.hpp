#pragma once

#include "ldcluster/noise.hpp"

namespace ldcluster {

/// Closed-form constants attached to a memory exponent alpha in (1/2, 1).
struct DerivedConstants {
  double beta = 0.0;     ///< time scaling exponent (4-4a)/(3-2a)
  double hurst = 0.0;    ///< Hurst index 3/2 - a of the limiting fBM
  int kappa = 0;         ///< number of noise moments that must be Gaussian
  double C_alpha = 0.0;  ///< variance constant, sigma_n^2 ~ C sigma_Z^2 n^{3-2a}
  double K_1 = 0.0;      ///< (1-a)^{-2} (3-2a)^{-1}
};

/// Model inputs plus everything derived from them.
struct ModelConfig {
  double alpha = 0.75;
  double epsilon = 0.5;
  double sigma_Z2 = 1.0;
  NoiseSpec noise = NoiseSpec::gaussian(1.0);
  int n = 1000;
  DerivedConstants derived;
};

/// Validates alpha and sigma_Z2; throws ValidationError naming the
/// violated bound.
DerivedConstants derive_constants(double alpha, double sigma_Z2);

/// Validates every field (alpha in (1/2,1), epsilon > 0, sigma_Z2 > 0,
/// n >= 2, noise variance equal to sigma_Z2) and fills `derived`.
ModelConfig make_model_config(double alpha, double epsilon, const NoiseSpec& noise, int n);

/// Smallest integer strictly greater than (4a-1)/(2-2a), decided in exact
/// integer arithmetic on the binary expansion of alpha.
int kappa_for(double alpha);

/// B(a, b) = Gamma(a) Gamma(b) / Gamma(a + b) for a, b > 0.
double beta_function(double a, double b);

/// cos(pi H) Gamma(2-2H) Gamma(H+1/2)^2 / (pi H (1-2H)).
double pickard_closed_form(double H);

struct PickardCheck {
  double numeric = 0.0;
  double closed_form = 0.0;
  double tail = 0.0;              ///< analytic contribution beyond the cutoff
  double tail_remainder = 0.0;    ///< bound on the truncated tail series
  double quadrature_error = 0.0;  ///< summed error estimates of the finite pieces
};

/// Numerically evaluates int_0^inf [x^{H-1/2} - (x-1)_+^{H-1/2}]^2 dx:
/// double-exponential quadrature on [0,1] and [1,X], and an exact power
/// series for the tail beyond X. Throws ValidationError for H outside
/// (0,1) or H = 1/2, AccuracyError when the quadrature misses
/// `quadrature_tol` (relative).
PickardCheck pickard_integral_check(double H, double quadrature_tol = 1e-10);

}  // namespace ldcluster
