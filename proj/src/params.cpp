#include "ldcluster/params.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "ldcluster/errors.hpp"

namespace ldcluster {
namespace {

constexpr const char* kModule = "params";

void check_alpha(double alpha) {
  if (!std::isfinite(alpha) || !(alpha > 0.5)) {
    throw ValidationError(kModule, "alpha must satisfy alpha > 1/2 (alpha in (1/2, 1)), got " + std::to_string(alpha));
  }
  if (!(alpha < 1.0)) {
    throw ValidationError(kModule, "alpha must satisfy alpha < 1 (alpha in (1/2, 1)), got " + std::to_string(alpha));
  }
}

}  // namespace

__extension__ using i128 = __int128;

int kappa_for(double alpha) {
  check_alpha(alpha);
  // alpha = M / 2^53 exactly, since alpha lies in [1/2, 1).
  int exponent = 0;
  const double frac = std::frexp(alpha, &exponent);
  const auto M = static_cast<i128>(std::ldexp(frac, 53 + exponent));
  const i128 scale = static_cast<i128>(1) << 53;
  // k > (4a - 1)/(2 - 2a)  <=>  (2k + 1) 2^53 > (4 + 2k) M
  const auto exceeds = [&](i128 k) { return (2 * k + 1) * scale > (4 + 2 * k) * M; };
  const double approx = std::floor((4.0 * alpha - 1.0) / (2.0 - 2.0 * alpha));
  i128 k = std::max<i128>(0, static_cast<i128>(approx) - 2);
  while (!exceeds(k)) ++k;
  while (k > 0 && exceeds(k - 1)) --k;
  if (k > std::numeric_limits<int>::max()) throw ValidationError(kModule, "kappa overflows for alpha this close to 1");
  return static_cast<int>(k);
}

double beta_function(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw ValidationError(kModule, "Beta function needs positive arguments");
  return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

DerivedConstants derive_constants(double alpha, double sigma_Z2) {
  check_alpha(alpha);
  if (!(sigma_Z2 > 0.0) || !std::isfinite(sigma_Z2)) {
    throw ValidationError(kModule, "sigma_Z2 must be > 0, got " + std::to_string(sigma_Z2));
  }
  DerivedConstants d;
  d.beta = (4.0 - 4.0 * alpha) / (3.0 - 2.0 * alpha);
  d.hurst = 1.5 - alpha;
  d.kappa = kappa_for(alpha);
  d.C_alpha = beta_function(1.0 - alpha, 2.0 * alpha - 1.0) / ((1.0 - alpha) * (3.0 - 2.0 * alpha));
  d.K_1 = 1.0 / ((1.0 - alpha) * (1.0 - alpha) * (3.0 - 2.0 * alpha));
  return d;
}

ModelConfig make_model_config(double alpha, double epsilon, const NoiseSpec& noise, int n) {
  ModelConfig m;
  m.derived = derive_constants(alpha, noise.sigma_Z2());
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ValidationError(kModule, "epsilon must be > 0, got " + std::to_string(epsilon));
  }
  if (n < 2) throw ValidationError(kModule, "window length n must be >= 2, got " + std::to_string(n));
  m.alpha = alpha;
  m.epsilon = epsilon;
  m.sigma_Z2 = noise.sigma_Z2();
  m.noise = noise;
  m.n = n;
  return m;
}

double pickard_closed_form(double H) {
  if (!(H > 0.0 && H < 1.0)) throw ValidationError(kModule, "H must lie in (0, 1)");
  if (H == 0.5) throw ValidationError(kModule, "H = 1/2 is a singular parameter");
  const double g = std::tgamma(H + 0.5);
  return std::cos(std::numbers::pi * H) * std::tgamma(2.0 - 2.0 * H) * g * g /
         (std::numbers::pi * H * (1.0 - 2.0 * H));
}

PickardCheck pickard_integral_check(double H, double quadrature_tol) {
  PickardCheck out;
  out.closed_form = pickard_closed_form(H);
  const double h = H - 0.5;
  constexpr double cutoff = 32.0;

  boost::math::quadrature::tanh_sinh<double> integrator;
  double err_head = 0.0;
  double err_mid = 0.0;
  double l1 = 0.0;
  const double head = integrator.integrate([&](double x) { return std::pow(x, 2.0 * h); }, 0.0, 1.0, 1e-13,
                                           &err_head, &l1);
  // On [1, cutoff] substitute y = x - 1 so the singular end sits at 0.
  const double mid = integrator.integrate(
      [&](double y) {
        const double f = std::pow(1.0 + y, h) - std::pow(y, h);
        return f * f;
      },
      0.0, cutoff - 1.0, 1e-13, &err_mid, &l1);

  // Beyond the cutoff, x^h - (x-1)^h = sum_{k>=1} c_k x^{h-k}, c_k = -binom(h,k)(-1)^k.
  constexpr int terms = 40;
  std::vector<double> c(terms + 1, 0.0);
  double binom = 1.0;
  for (int k = 1; k <= terms; ++k) {
    binom *= (h - (k - 1)) / k;
    c[k] = -binom * ((k % 2 == 0) ? 1.0 : -1.0);
  }
  double tail = 0.0;
  for (int m = 2; m <= terms + 1; ++m) {
    double d = 0.0;
    for (int k = std::max(1, m - terms); k <= std::min(terms, m - 1); ++k) d += c[k] * c[m - k];
    tail += d * std::pow(cutoff, 2.0 * h - m + 1.0) / (m - 1.0 - 2.0 * h);
  }
  out.tail = tail;
  out.tail_remainder = 2.0 * std::pow(cutoff, 2.0 * h - terms - 1.0) / (1.0 - 1.0 / cutoff);
  out.numeric = head + mid + tail;
  out.quadrature_error = err_head + err_mid + out.tail_remainder;
  if (!std::isfinite(out.numeric) || out.quadrature_error > quadrature_tol * std::abs(out.numeric)) {
    throw AccuracyError(kModule,
                        "quadrature did not reach relative tolerance " + std::to_string(quadrature_tol) +
                            " (estimate " + std::to_string(out.numeric) + ")",
                        out.numeric);
  }
  return out;
}

}  // namespace ldcluster
