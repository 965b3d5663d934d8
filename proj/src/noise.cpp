#include "ldcluster/noise.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ldcluster/errors.hpp"
#include "ldcluster/numeric.hpp"

namespace ldcluster {
namespace {

constexpr const char* kModule = "noise";

double log_cosh(double x) {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

// log of the (unnormalized) tilted weight of pair k: log w + s^2 t^2/2 + log cosh(mu t)
double pair_log_weight(const MixtureComponent& c, double t) {
  return std::log(c.w) + 0.5 * c.s * c.s * t * t + log_cosh(c.mu * t);
}

double double_factorial_odd(int m) {  // (m-1)!! for even m
  double r = 1.0;
  for (int j = m - 1; j > 1; j -= 2) r *= j;
  return r;
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

double component_moment(const MixtureComponent& c, int k) {
  if (k % 2 != 0) return 0.0;
  double m = 0.0;
  for (int j = 0; j <= k; j += 2) {
    m += binomial(k, j) * std::pow(c.mu, k - j) * std::pow(c.s, j) * double_factorial_odd(j);
  }
  return m;
}

}  // namespace

std::string to_string(NoiseFamily family) {
  return family == NoiseFamily::gaussian ? "gaussian" : "symmetric_gaussian_mixture";
}

NoiseFamily noise_family_from_string(const std::string& name) {
  if (name == "gaussian") return NoiseFamily::gaussian;
  if (name == "symmetric_gaussian_mixture" || name == "mixture") return NoiseFamily::symmetric_gaussian_mixture;
  throw ValidationError(kModule, "unknown noise family '" + name + "'");
}

NoiseSpec::NoiseSpec(NoiseFamily family, std::vector<MixtureComponent> components)
    : family_(family), components_(std::move(components)), sigma_Z2_(0.0) {
  CompensatedSum var;
  for (const auto& c : components_) var += c.w * (c.mu * c.mu + c.s * c.s);
  sigma_Z2_ = var.value();
}

NoiseSpec NoiseSpec::gaussian(double sigma_Z2) {
  if (!(sigma_Z2 > 0.0) || !std::isfinite(sigma_Z2)) {
    throw ValidationError(kModule, "sigma_Z2 must be positive and finite, got " + std::to_string(sigma_Z2));
  }
  NoiseSpec spec(NoiseFamily::gaussian, {{1.0, 0.0, std::sqrt(sigma_Z2)}});
  spec.sigma_Z2_ = sigma_Z2;
  return spec;
}

NoiseSpec NoiseSpec::mixture(std::vector<MixtureComponent> components) {
  if (components.empty()) throw ValidationError(kModule, "mixture needs at least one component");
  CompensatedSum total;
  for (const auto& c : components) {
    if (!(c.w >= 0.0) || !std::isfinite(c.w)) throw ValidationError(kModule, "mixture weights must be >= 0");
    if (!(c.s > 0.0) || !std::isfinite(c.s)) throw ValidationError(kModule, "mixture scales must be > 0");
    if (!std::isfinite(c.mu)) throw ValidationError(kModule, "mixture locations must be finite");
    total += c.w;
  }
  if (std::abs(total.value() - 1.0) > 1e-12) {
    throw ValidationError(kModule, "mixture weights sum to " + std::to_string(total.value()) + ", expected 1");
  }
  std::erase_if(components, [](const MixtureComponent& c) { return c.w == 0.0; });
  for (auto& c : components) c.mu = std::abs(c.mu);
  return NoiseSpec(NoiseFamily::symmetric_gaussian_mixture, std::move(components));
}

double log_mgf(const NoiseSpec& spec, double t) {
  if (spec.is_gaussian()) return 0.5 * spec.sigma_Z2() * t * t;
  LogSumExp acc;
  for (const auto& c : spec.components()) acc.add(pair_log_weight(c, t));
  return acc.value();
}

double log_mgf_derivative(const NoiseSpec& spec, double t) {
  if (spec.is_gaussian()) return spec.sigma_Z2() * t;
  const double phi = log_mgf(spec, t);
  CompensatedSum d;
  for (const auto& c : spec.components()) {
    const double p = std::exp(pair_log_weight(c, t) - phi);
    d += p * (c.s * c.s * t + c.mu * std::tanh(c.mu * t));
  }
  return d.value();
}

double log_mgf_second_derivative(const NoiseSpec& spec, double t) {
  if (spec.is_gaussian()) return spec.sigma_Z2();
  const double phi = log_mgf(spec, t);
  double mean = 0.0;
  double second = 0.0;
  for (const auto& c : spec.components()) {
    const double p = std::exp(pair_log_weight(c, t) - phi);
    const double s2 = c.s * c.s;
    const double th = std::tanh(c.mu * t);
    mean += p * (s2 * t + c.mu * th);
    second += p * (s2 + s2 * s2 * t * t + c.mu * c.mu + 2.0 * c.mu * s2 * t * th);
  }
  return std::max(0.0, second - mean * mean);
}

std::vector<double> sample(const NoiseSpec& spec, RandomStream& rng, std::size_t count) {
  return sample_tilted(TiltedNoise{spec, 0.0}, rng, count);
}

std::vector<double> sample_tilted(const TiltedNoise& tilted, RandomStream& rng, std::size_t count) {
  std::vector<double> out(count);
  if (count == 0) return out;
  if (tilted.base.is_gaussian()) {
    const double sd = std::sqrt(tilted.base.sigma_Z2());
    const double mean = tilted.theta * tilted.base.sigma_Z2();
    for (auto& x : out) x = rng.normal(mean, sd);
    return out;
  }
  const std::vector<double> thetas(count, tilted.theta);
  CoordinateTiltSampler sampler(tilted.base, thetas);
  sampler.sample(rng, out);
  return out;
}

double gaussian_moment(double sigma2, int k) {
  if (k < 0) throw ValidationError(kModule, "moment order must be >= 0");
  if (k % 2 != 0) return 0.0;
  return std::pow(sigma2, k / 2) * double_factorial_odd(k);
}

double moments(const NoiseSpec& spec, int k) {
  if (k < 1) throw ValidationError(kModule, "moment order must be >= 1, got " + std::to_string(k));
  if (k % 2 != 0) return 0.0;
  if (spec.is_gaussian()) return gaussian_moment(spec.sigma_Z2(), k);
  CompensatedSum m;
  for (const auto& c : spec.components()) m += c.w * component_moment(c, k);
  return m.value();
}

NoiseSpec build_matched_mixture(double sigma_Z2, int kappa, double knob) {
  if (!(sigma_Z2 > 0.0)) throw ValidationError(kModule, "sigma_Z2 must be positive");
  if (kappa < 2) throw ValidationError(kModule, "kappa must be >= 2, got " + std::to_string(kappa));
  if (!(knob > 0.0 && knob < 1.0)) throw ValidationError(kModule, "asymmetry knob must lie in (0, 1)");

  // Work in units of sigma_Z2. Side pair carries second moment u = mu^2 + s^2,
  // split as mu^2 = q u, s^2 = (1-q) u; its fourth moment is u^2 (3 - 2q^2).
  // x = 1 - w is the side weight and the centre variance c0 = (1 - x u)/(1 - x)
  // closes the variance constraint, so x must stay below 1/u.
  const double q = knob;
  const double lo = 3.0 / (3.0 - 2.0 * q * q);
  const double hi = 1.0 / (1.0 - std::sqrt(2.0 / 3.0) * q);
  const double u = std::sqrt(lo * hi);
  const auto excess_kurtosis = [&](double x) {
    const double c0 = (1.0 - x * u) / (1.0 - x);
    return 3.0 * (1.0 - x) * c0 * c0 + x * u * u * (3.0 - 2.0 * q * q) - 3.0;
  };

  double x = 0.5 / u;
  if (kappa >= 4) {
    double x_hi = (1.0 - 1e-9) / u;
    double x_lo = 0.5 * x_hi;
    int guard = 0;
    while (excess_kurtosis(x_lo) >= 0.0 && guard++ < 200) x_lo *= 0.5;
    if (excess_kurtosis(x_lo) >= 0.0 || excess_kurtosis(x_hi) <= 0.0) {
      throw InfeasibleError(kModule, "fourth moment cannot be bracketed for knob " + std::to_string(knob), {});
    }
    for (int it = 0; it < 200; ++it) {
      x = 0.5 * (x_lo + x_hi);
      const double g = excess_kurtosis(x);
      if (std::abs(g) <= 1e-12) break;
      (g < 0.0 ? x_lo : x_hi) = x;
    }
  }

  const double c0 = (1.0 - x * u) / (1.0 - x);
  std::vector<MixtureComponent> comps{
      {1.0 - x, 0.0, std::sqrt(c0 * sigma_Z2)},
      {x, std::sqrt(q * u * sigma_Z2), std::sqrt((1.0 - q) * u * sigma_Z2)},
  };
  NoiseSpec spec = NoiseSpec::mixture(std::move(comps));

  std::vector<double> achieved;
  for (int i = 1; i <= kappa; ++i) achieved.push_back(moments(spec, i));
  for (int i = 4; i <= kappa; i += 2) {
    const double target = gaussian_moment(sigma_Z2, i);
    if (std::abs(achieved[i - 1] - target) > 1e-10 * target) {
      throw InfeasibleError(kModule,
                            "moment " + std::to_string(i) + " cannot be matched: achieved " +
                                std::to_string(achieved[i - 1]) + ", Gaussian " + std::to_string(target),
                            achieved);
    }
  }
  return spec;
}

AssumptionReport check_assumptions(const NoiseSpec& spec, int kappa, double theta0) {
  AssumptionReport r;
  r.kappa = kappa;
  r.theta0 = theta0;
  r.exponential_moments_reason =
      spec.is_gaussian() ? "Gaussian law: E e^{t|Z|} finite for every t"
                         : "finite Gaussian mixture: moment generating function is entire";

  const double s2 = spec.sigma_Z2();
  for (int i = 1; i <= kappa; ++i) {
    const double target = gaussian_moment(s2, i);
    const double residual = moments(spec, i) - target;
    const bool ok = std::abs(residual) <= 1e-10 * std::max(1.0, std::abs(target));
    r.moment_residuals.push_back(residual);
    r.moment_ok.push_back(ok);
    r.moments_ok = r.moments_ok && ok;
  }

  // |E e^{(it+theta)Z}| for the mixture: each pair contributes
  // w cosh((it+theta) mu) exp(s^2 (it+theta)^2 / 2).
  const auto abs_chf = [&](double t, double theta) {
    std::complex<double> acc = 0.0;
    const std::complex<double> z(theta, t);
    for (const auto& c : spec.components()) {
      acc += c.w * std::cosh(z * c.mu) * std::exp(0.5 * c.s * c.s * z * z);
    }
    return std::abs(acc);
  };

  constexpr int grid = 21;
  double sup_integral = 0.0;
  double sup_bound = 0.0;
  for (int g = 0; g < grid; ++g) {
    const double theta = theta0 * (-1.0 + 2.0 * g / (grid - 1));
    const auto integrand = [&](double t) { return t * t * abs_chf(t, theta); };
    const double val = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        integrand, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-10);
    double bound = 0.0;
    for (const auto& c : spec.components()) {
      bound += c.w * std::cosh(theta * c.mu) * std::exp(0.5 * c.s * c.s * theta * theta) *
               std::sqrt(2.0 * std::numbers::pi) / (c.s * c.s * c.s);
    }
    // The integral over the whole line is twice the half-line value.
    sup_integral = std::max(sup_integral, 2.0 * val);
    sup_bound = std::max(sup_bound, bound);
  }
  r.chf_integral = sup_integral;
  r.chf_bound = sup_bound;
  r.chf_ok = std::isfinite(sup_integral) && sup_integral <= sup_bound * (1.0 + 1e-8);
  return r;
}

CoordinateTiltSampler::CoordinateTiltSampler(const NoiseSpec& spec, std::span<const double> thetas)
    : spec_(spec), thetas_(thetas.begin(), thetas.end()) {
  if (spec_.is_gaussian()) return;
  const auto comps = spec_.components();
  atoms_ = 2 * comps.size();
  cumulative_.resize(atoms_ * thetas_.size());
  std::vector<double> logw(comps.size());
  for (std::size_t i = 0; i < thetas_.size(); ++i) {
    const double t = thetas_[i];
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < comps.size(); ++k) {
      logw[k] = pair_log_weight(comps[k], t);
      mx = std::max(mx, logw[k]);
    }
    double total = 0.0;
    for (std::size_t k = 0; k < comps.size(); ++k) total += std::exp(logw[k] - mx);
    double run = 0.0;
    double* row = cumulative_.data() + i * atoms_;
    for (std::size_t k = 0; k < comps.size(); ++k) {
      const double p = std::exp(logw[k] - mx) / total;
      const double plus = 0.5 * (1.0 + std::tanh(comps[k].mu * t));
      run += p * plus;
      row[2 * k] = run;
      run += p * (1.0 - plus);
      row[2 * k + 1] = run;
    }
    row[atoms_ - 1] = 1.0;
  }
}

void CoordinateTiltSampler::sample(RandomStream& rng, std::span<double> out) const {
  if (out.size() != thetas_.size()) {
    throw ValidationError(kModule, "output length " + std::to_string(out.size()) + " does not match " +
                                       std::to_string(thetas_.size()) + " tilts");
  }
  if (spec_.is_gaussian()) {
    const double s2 = spec_.sigma_Z2();
    const double sd = std::sqrt(s2);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = thetas_[i] * s2 + sd * rng.normal();
    return;
  }
  const auto comps = spec_.components();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double* row = cumulative_.data() + i * atoms_;
    const double v = rng.uniform();
    std::size_t a = 0;
    while (a + 1 < atoms_ && v >= row[a]) ++a;
    const auto& c = comps[a / 2];
    const double loc = (a % 2 == 0 ? c.mu : -c.mu) + c.s * c.s * thetas_[i];
    out[i] = loc + c.s * rng.normal();
  }
}

}  // namespace ldcluster
