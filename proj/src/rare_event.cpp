#include "ldcluster/rare_event.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ldcluster/errors.hpp"
#include "ldcluster/numeric.hpp"
#include "ldcluster/parallel.hpp"

namespace ldcluster {
namespace {

constexpr const char* kModule = "rare_event";

std::vector<double> tilt_vector(const WindowWeights& w, double theta) {
  std::vector<double> t(w.W.size());
  for (std::size_t j = 0; j < t.size(); ++j) t[j] = theta * w.W[j];
  return t;
}

double log_mgf_sum(const WindowWeights& w, const NoiseSpec& noise, double theta) {
  CompensatedSum s;
  for (double x : w.W) s += log_mgf(noise, theta * x);
  return s.value();
}

}  // namespace

WindowWeights WindowWeights::make(const CoefficientTable& table, int n, const NoiseSpec& noise) {
  if (table.J_max < n) {
    throw ConfigurationError(kModule, "J_max = " + std::to_string(table.J_max) + " is below n = " + std::to_string(n));
  }
  WindowWeights w;
  w.n = n;
  w.W = window_weights(table, n);
  CompensatedSum s;
  for (double x : w.W) s += x * x;
  w.sigma_n2 = noise.sigma_Z2() * s.value();
  return w;
}

double psi_n(const WindowWeights& w, const NoiseSpec& noise, double s) {
  const double theta = w.n * s / w.sigma_n2;
  return w.sigma_n2 / (static_cast<double>(w.n) * w.n) * log_mgf_sum(w, noise, theta);
}

double psi_n_prime(const WindowWeights& w, const NoiseSpec& noise, double s) {
  const double theta = w.n * s / w.sigma_n2;
  CompensatedSum acc;
  for (double x : w.W) acc += x * log_mgf_derivative(noise, theta * x);
  return acc.value() / w.n;
}

double psi_n_second(const WindowWeights& w, const NoiseSpec& noise, double s) {
  const double theta = w.n * s / w.sigma_n2;
  CompensatedSum acc;
  for (double x : w.W) acc += x * x * log_mgf_second_derivative(noise, theta * x);
  return acc.value() / w.sigma_n2;
}

double psi_n(const CoefficientTable& table, int n, const NoiseSpec& noise, double s) {
  return psi_n(WindowWeights::make(table, n, noise), noise, s);
}

double psi_n_prime(const CoefficientTable& table, int n, const NoiseSpec& noise, double s) {
  return psi_n_prime(WindowWeights::make(table, n, noise), noise, s);
}

TiltSolution solve_tilt(const WindowWeights& w, double epsilon, const NoiseSpec& noise) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ValidationError(kModule, "epsilon must be > 0");
  const auto f = [&](double s) { return psi_n_prime(w, noise, s) - epsilon; };
  const double tol = 1e-12 * std::max(1.0, epsilon);

  double lo = 0.0;
  double hi = 10.0 * epsilon;
  double f_hi = f(hi);
  int expansions = 0;
  while (f_hi < 0.0) {
    if (++expansions > 60) {
      throw SolverError(kModule, "no bracket for psi_n'(s) = " + std::to_string(epsilon) + " on s in (0, " +
                                     std::to_string(hi) + "]");
    }
    lo = hi;
    hi *= 2.0;
    f_hi = f(hi);
  }

  double s = std::clamp(epsilon, lo, hi);
  double fs = f(s);
  int it = 0;
  for (; it < 200 && std::abs(fs) > tol; ++it) {
    if (fs < 0.0) {
      lo = s;
    } else {
      hi = s;
    }
    const double d = psi_n_second(w, noise, s);
    double next = d > 0.0 ? s - fs / d : std::numeric_limits<double>::quiet_NaN();
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == s || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
    s = next;
    fs = f(s);
  }
  if (std::abs(fs) > tol && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi) {
    throw SolverError(kModule, "Newton iteration did not converge; residual " + std::to_string(fs));
  }

  TiltSolution t;
  t.n = w.n;
  t.epsilon = epsilon;
  t.sigma_n2 = w.sigma_n2;
  t.tau_n = s;
  t.theta_n = w.n * s / w.sigma_n2;
  t.zeta_n = w.n * epsilon / w.sigma_n2;
  t.log_mgf_Sn = log_mgf_sum(w, noise, t.theta_n);
  t.residual = fs;
  t.iterations = it;
  return t;
}

TiltSolution solve_tilt(const CoefficientTable& table, int n, double epsilon, const NoiseSpec& noise) {
  return solve_tilt(WindowWeights::make(table, n, noise), epsilon, noise);
}

TiltSolution null_tilt(const WindowWeights& w, double epsilon) {
  TiltSolution t;
  t.n = w.n;
  t.epsilon = epsilon;
  t.sigma_n2 = w.sigma_n2;
  t.zeta_n = w.n * epsilon / w.sigma_n2;
  return t;
}

ConditionedSampler::ConditionedSampler(const CoefficientTable& table, const TiltSolution& tilt,
                                       const NoiseSpec& noise, int horizon, double beta, std::size_t fft_crossover)
    : tilt_(tilt),
      noise_(noise),
      sim_(table, tilt.n, horizon, fft_crossover),
      past_sampler_(noise, tilt_vector(WindowWeights{tilt.n, window_weights(table, tilt.n), 0.0}, tilt.theta_n)),
      unit_(static_cast<double>(ldcluster::time_unit(tilt.n, beta))),
      n_beta_(std::pow(static_cast<double>(tilt.n), beta)) {}

ConditionedSampler::Workspace::Workspace(const ConditionedSampler& s)
    : window(s.sim_), past(s.sim_.past_length()), future(static_cast<std::size_t>(s.sim_.horizon())) {}

ConditionedPathSample ConditionedSampler::sample(Workspace& ws, RandomStream& rng) const {
  past_sampler_.sample(rng, ws.past);
  if (noise_.is_gaussian()) {
    const double sd = std::sqrt(noise_.sigma_Z2());
    for (auto& z : ws.future) z = sd * rng.normal();
  } else {
    const auto draws = ldcluster::sample(noise_, rng, ws.future.size());
    std::copy(draws.begin(), draws.end(), ws.future.begin());
  }
  const WindowSummary w = sim_.run(ws.window, ws.past, ws.future, tilt_.epsilon);
  ConditionedPathSample out;
  out.S0 = w.S0;
  out.in_event = w.in_event;
  out.log_weight = tilt_.log_mgf_Sn - tilt_.theta_n * w.S0;
  out.overshoot_scaled = tilt_.zeta_n * w.overshoot;
  out.I_n = w.I_n;
  if (w.I_n) out.In_scaled = static_cast<double>(*w.I_n) / n_beta_;
  return out;
}

ConditionedPathSample sample_conditioned(const CoefficientTable& table, const TiltSolution& tilt,
                                         const NoiseSpec& noise, RandomStream& rng, int horizon, double beta) {
  ConditionedSampler sampler(table, tilt, noise, horizon, beta);
  ConditionedSampler::Workspace ws(sampler);
  return sampler.sample(ws, rng);
}

ProbabilityEstimate estimate_event_probability(std::span<const ConditionedPathSample> samples) {
  if (samples.size() < 100) {
    throw ValidationError(kModule, "at least 100 samples are needed, got " + std::to_string(samples.size()));
  }
  ProbabilityEstimate e;
  e.samples = samples.size();
  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    if (!s.in_event) continue;
    ++e.in_event;
    mx = std::max(mx, s.log_weight);
  }
  if (e.in_event == 0) {
    e.degenerate = true;
    e.log_p_hat = -std::numeric_limits<double>::infinity();
    return e;
  }
  CompensatedSum s1;
  CompensatedSum s2;
  for (const auto& s : samples) {
    if (!s.in_event) continue;
    const double u = std::exp(s.log_weight - mx);
    s1 += u;
    s2 += u * u;
  }
  const double N = static_cast<double>(samples.size());
  const double mean = s1.value() / N;
  const double var = std::max(0.0, (s2.value() - N * mean * mean) / (N - 1.0));
  e.log_p_hat = mx + std::log(mean);
  e.p_hat = std::exp(e.log_p_hat);
  e.std_err = std::exp(mx) * std::sqrt(var / N);
  return e;
}

EmpiricalLaw conditional_law(std::span<const ConditionedPathSample> samples, Statistic statistic,
                             double censor_point) {
  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    if (s.in_event) mx = std::max(mx, s.log_weight);
  }
  if (!std::isfinite(mx)) throw ValidationError(kModule, "no in-event samples to build a conditional law");
  std::vector<double> values;
  std::vector<double> weights;
  CompensatedSum censored;
  for (const auto& s : samples) {
    if (!s.in_event) continue;
    const double w = std::exp(s.log_weight - mx);
    if (statistic == Statistic::In_scaled) {
      if (!s.I_n) {
        censored += w;
        continue;
      }
      values.push_back(s.In_scaled);
    } else {
      values.push_back(s.overshoot_scaled);
    }
    weights.push_back(w);
  }
  EmpiricalLaw law = EmpiricalLaw::from_weighted(values, weights, censored.value(), censor_point);
  law.source = statistic == Statistic::In_scaled ? "In_scaled" : "overshoot_scaled";
  return law;
}

std::uint64_t level_seed(std::uint64_t master, int n) {
  return splitmix64(master ^ splitmix64(0x9e37ULL + static_cast<std::uint64_t>(n)));
}

std::vector<ConditionedPathSample> run_conditioned_fixed(const ConditionedSampler& sampler, std::uint64_t seed,
                                                         std::size_t replicas, int threads) {
  std::vector<ConditionedPathSample> out(replicas);
  std::vector<std::unique_ptr<ConditionedSampler::Workspace>> spaces(static_cast<std::size_t>(std::max(1, threads)));
  parallel_for(replicas, threads, [&](std::size_t i, int worker) {
    auto& ws = spaces[static_cast<std::size_t>(worker)];
    if (!ws) ws = std::make_unique<ConditionedSampler::Workspace>(sampler);
    RandomStream rng = RandomStream::derive(seed, StreamTag::tilted_replica, i);
    out[i] = sampler.sample(*ws, rng);
  });
  return out;
}

std::vector<ConditionedPathSample> run_conditioned(const ConditionedSampler& sampler, std::uint64_t seed,
                                                   const BatchOptions& options) {
  std::vector<ConditionedPathSample> all;
  std::size_t in_event = 0;
  const int threads = std::max(1, options.threads);
  std::vector<std::unique_ptr<ConditionedSampler::Workspace>> spaces(static_cast<std::size_t>(threads));
  while (all.size() < options.min_replicas || in_event < options.in_event_target) {
    if (all.size() >= options.max_replicas) {
      throw ExhaustionError(kModule, "reached " + std::to_string(all.size()) + " replicas with only " +
                                         std::to_string(in_event) + " in the event");
    }
    const std::size_t start = all.size();
    const std::size_t count = std::min(options.batch_size, options.max_replicas - start);
    all.resize(start + count);
    parallel_for(count, threads, [&](std::size_t k, int worker) {
      auto& ws = spaces[static_cast<std::size_t>(worker)];
      if (!ws) ws = std::make_unique<ConditionedSampler::Workspace>(sampler);
      RandomStream rng = RandomStream::derive(seed, StreamTag::tilted_replica, start + k);
      all[start + k] = sampler.sample(*ws, rng);
    });
    for (std::size_t k = start; k < all.size(); ++k) in_event += all[k].in_event ? 1 : 0;
  }
  return all;
}

RejectionResult rejection_sample(const CoefficientTable& table, int n, double epsilon, const NoiseSpec& noise,
                                 std::uint64_t seed, std::size_t budget, int horizon, double beta, int threads,
                                 std::size_t fft_crossover) {
  if (budget < 1) throw ValidationError(kModule, "rejection budget must be >= 1");
  const WindowWeights w = WindowWeights::make(table, n, noise);
  const ConditionedSampler sampler(table, null_tilt(w, epsilon), noise, horizon, beta, fft_crossover);
  std::vector<ConditionedPathSample> all(budget);
  std::vector<std::unique_ptr<ConditionedSampler::Workspace>> spaces(static_cast<std::size_t>(std::max(1, threads)));
  parallel_for(budget, threads, [&](std::size_t i, int worker) {
    auto& ws = spaces[static_cast<std::size_t>(worker)];
    if (!ws) ws = std::make_unique<ConditionedSampler::Workspace>(sampler);
    RandomStream rng = RandomStream::derive(seed, StreamTag::rejection_replica, i);
    all[i] = sampler.sample(*ws, rng);
  });
  RejectionResult r;
  r.attempts = budget;
  for (auto& s : all) {
    if (s.in_event) r.accepted.push_back(s);
  }
  if (r.accepted.empty()) {
    throw ExhaustionError(kModule, "no acceptance in " + std::to_string(budget) +
                                       " attempts; event probability is likely below " +
                                       std::to_string(3.0 / static_cast<double>(budget)));
  }
  const double p = static_cast<double>(r.accepted.size()) / static_cast<double>(budget);
  r.acceptance_rate = p;
  r.rate_std_err = std::sqrt(p * (1.0 - p) / static_cast<double>(budget));
  return r;
}

}  // namespace ldcluster
