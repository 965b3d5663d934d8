#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ldcluster/random.hpp"

namespace ldcluster {

enum class NoiseFamily { gaussian, symmetric_gaussian_mixture };

std::string to_string(NoiseFamily family);
NoiseFamily noise_family_from_string(const std::string& name);

/// One symmetric pair of a Gaussian mixture: weight w split evenly between
/// N(+mu, s^2) and N(-mu, s^2). A pair with mu = 0 is a single centred
/// component.
struct MixtureComponent {
  double w = 1.0;
  double mu = 0.0;
  double s = 1.0;
};

/// A centred noise law with an entire moment generating function. Both
/// families are stored as lists of symmetric pairs; the Gaussian is the
/// single pair {1, 0, sigma}.
class NoiseSpec {
 public:
  static NoiseSpec gaussian(double sigma_Z2);
  /// Throws ValidationError on negative weights, weights not summing to
  /// one, non-positive scales or an empty list.
  static NoiseSpec mixture(std::vector<MixtureComponent> components);

  NoiseFamily family() const noexcept { return family_; }
  bool is_gaussian() const noexcept { return family_ == NoiseFamily::gaussian; }
  double sigma_Z2() const noexcept { return sigma_Z2_; }
  std::span<const MixtureComponent> components() const noexcept { return components_; }

 private:
  NoiseSpec(NoiseFamily family, std::vector<MixtureComponent> components);

  NoiseFamily family_;
  std::vector<MixtureComponent> components_;
  double sigma_Z2_;
};

/// Law of Z under the exponential tilt e^{theta z} / E e^{theta Z}.
struct TiltedNoise {
  NoiseSpec base;
  double theta = 0.0;
};

/// phi_Z(t) = log E e^{tZ}.
double log_mgf(const NoiseSpec& spec, double t);
double log_mgf_derivative(const NoiseSpec& spec, double t);
/// Variance of the tilted law, phi_Z''(t).
double log_mgf_second_derivative(const NoiseSpec& spec, double t);

std::vector<double> sample(const NoiseSpec& spec, RandomStream& rng, std::size_t count);
std::vector<double> sample_tilted(const TiltedNoise& tilted, RandomStream& rng, std::size_t count);

/// Exact raw moment E Z^k, k >= 1.
double moments(const NoiseSpec& spec, int k);

/// Raw moment E G^k of N(0, sigma2).
double gaussian_moment(double sigma2, int k);

/// Non-Gaussian symmetric mixture w N(0, s0^2) + (1-w)/2 N(+-mu, s^2) whose
/// moments of order 1..kappa agree with N(0, sigma_Z2). `knob` in (0, 1) is
/// the share of the side components' second moment carried by their
/// location +-mu rather than their scale. The fourth moment is matched by
/// bisection in w; throws InfeasibleError (with the achieved moments
/// 1..kappa) when kappa >= 6, since this family cannot match the sixth.
NoiseSpec build_matched_mixture(double sigma_Z2, int kappa, double knob = 0.9);

struct AssumptionReport {
  bool exponential_moments_finite = true;
  std::string exponential_moments_reason;
  int kappa = 2;
  std::vector<double> moment_residuals;  ///< [i-1] = E Z^i - E G^i
  std::vector<bool> moment_ok;
  bool moments_ok = true;
  double theta0 = 1.0;
  double chf_integral = 0.0;  ///< sup over |theta| <= theta0 of int t^2 |E e^{(it+theta)Z}| dt
  double chf_bound = 0.0;     ///< closed-form upper bound of the same quantity
  bool chf_ok = true;

  bool all_ok() const noexcept { return exponential_moments_finite && moments_ok && chf_ok; }
};

AssumptionReport check_assumptions(const NoiseSpec& spec, int kappa, double theta0 = 1.0);

/// Independent draws where coordinate i is tilted by thetas[i]. Tilted
/// component probabilities are tabulated once, so repeated sampling of the
/// same tilt vector costs one uniform and one normal per coordinate.
class CoordinateTiltSampler {
 public:
  CoordinateTiltSampler(const NoiseSpec& spec, std::span<const double> thetas);

  std::size_t size() const noexcept { return thetas_.size(); }
  void sample(RandomStream& rng, std::span<double> out) const;

 private:
  NoiseSpec spec_;
  std::vector<double> thetas_;
  std::size_t atoms_ = 0;               // 2 * number of pairs
  std::vector<double> cumulative_;      // atoms_ per coordinate
};

}  // namespace ldcluster
