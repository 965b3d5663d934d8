#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ldcluster/empirical_law.hpp"
#include "ldcluster/ma_engine.hpp"
#include "ldcluster/noise.hpp"
#include "ldcluster/random.hpp"

namespace ldcluster {

/// Window weights W_j = A_j - A_{j-n}, j < J_max+n, and the truncated
/// sigma_n^2 = sigma_Z^2 sum W_j^2 they define. Every tilt quantity uses
/// this one truncation.
struct WindowWeights {
  int n = 0;
  std::vector<double> W;
  double sigma_n2 = 0.0;

  static WindowWeights make(const CoefficientTable& table, int n, const NoiseSpec& noise);
};

/// psi_n(s) = (sigma_n^2/n^2) sum_j phi_Z(n W_j s / sigma_n^2).
double psi_n(const WindowWeights& w, const NoiseSpec& noise, double s);
double psi_n_prime(const WindowWeights& w, const NoiseSpec& noise, double s);
double psi_n_second(const WindowWeights& w, const NoiseSpec& noise, double s);

double psi_n(const CoefficientTable& table, int n, const NoiseSpec& noise, double s);
double psi_n_prime(const CoefficientTable& table, int n, const NoiseSpec& noise, double s);

struct TiltSolution {
  int n = 0;
  double epsilon = 0.0;
  double sigma_n2 = 0.0;
  double tau_n = 0.0;
  double theta_n = 0.0;     ///< n tau_n / sigma_n^2
  double zeta_n = 0.0;      ///< n epsilon / sigma_n^2
  double log_mgf_Sn = 0.0;  ///< sum_j phi_Z(theta_n W_j) = log E e^{theta_n S_n}
  double residual = 0.0;    ///< psi_n'(tau_n) - epsilon
  int iterations = 0;
};

/// Root of psi_n'(s) = epsilon by geometric bracketing from [0, 10 eps]
/// and safeguarded Newton; throws SolverError when no bracket is found.
TiltSolution solve_tilt(const WindowWeights& w, double epsilon, const NoiseSpec& noise);
TiltSolution solve_tilt(const CoefficientTable& table, int n, double epsilon, const NoiseSpec& noise);

/// A tilt of zero: the sampler then reduces to plain Monte Carlo.
TiltSolution null_tilt(const WindowWeights& w, double epsilon);

/// Summary of one importance-sampled window. The path itself is not kept.
struct ConditionedPathSample {
  double S0 = 0.0;
  bool in_event = false;
  double log_weight = 0.0;        ///< log dP/dQ = log_mgf_Sn - theta_n S_n(0)
  double overshoot_scaled = 0.0;  ///< zeta_n (S_n(0) - n eps)
  std::optional<long> I_n;        ///< empty when censored
  double In_scaled = 0.0;         ///< n^{-beta} I_n; meaningful only when I_n is set
};

/// Draws past noises from the per-coordinate tilted laws
/// G_{theta_n W_j} and future noises from F_Z, then runs the window.
class ConditionedSampler {
 public:
  ConditionedSampler(const CoefficientTable& table, const TiltSolution& tilt, const NoiseSpec& noise,
                     int horizon, double beta, std::size_t fft_crossover = 1024);

  struct Workspace {
    explicit Workspace(const ConditionedSampler& s);
    WindowSimulator::Workspace window;
    std::vector<double> past;
    std::vector<double> future;
  };

  ConditionedPathSample sample(Workspace& ws, RandomStream& rng) const;

  const TiltSolution& tilt() const noexcept { return tilt_; }
  const WindowSimulator& simulator() const noexcept { return sim_; }
  double time_unit() const noexcept { return unit_; }
  int horizon() const noexcept { return sim_.horizon(); }

 private:
  TiltSolution tilt_;
  NoiseSpec noise_;
  WindowSimulator sim_;
  CoordinateTiltSampler past_sampler_;
  double unit_;
  double n_beta_;
};

ConditionedPathSample sample_conditioned(const CoefficientTable& table, const TiltSolution& tilt,
                                         const NoiseSpec& noise, RandomStream& rng, int horizon, double beta);

struct ProbabilityEstimate {
  double p_hat = 0.0;
  double std_err = 0.0;
  double log_p_hat = 0.0;
  std::size_t samples = 0;
  std::size_t in_event = 0;
  bool degenerate = false;  ///< no sample in the event
};

/// Unnormalized importance-sampling estimate of P(E_0), evaluated in log
/// space. Needs at least 100 samples.
ProbabilityEstimate estimate_event_probability(std::span<const ConditionedPathSample> samples);

enum class Statistic { In_scaled, overshoot_scaled };

/// Self-normalized weighted law over in-event samples. Censored I_n values
/// become censored mass at `censor_point` (horizon in limiting-time units).
EmpiricalLaw conditional_law(std::span<const ConditionedPathSample> samples, Statistic statistic,
                             double censor_point = std::numeric_limits<double>::infinity());

struct RejectionResult {
  std::vector<ConditionedPathSample> accepted;
  std::size_t attempts = 0;
  double acceptance_rate = 0.0;
  double rate_std_err = 0.0;
};

/// Plain Monte Carlo: keeps unweighted windows with S_n(0) >= n eps.
/// Runs exactly `budget` windows, replica i on stream (seed,
/// rejection_replica, i). Throws ExhaustionError when none is accepted.
RejectionResult rejection_sample(const CoefficientTable& table, int n, double epsilon, const NoiseSpec& noise,
                                 std::uint64_t seed, std::size_t budget, int horizon, double beta, int threads = 1,
                                 std::size_t fft_crossover = 1024);

struct BatchOptions {
  std::size_t in_event_target = 5000;
  std::size_t batch_size = 1024;
  std::size_t max_replicas = 1u << 22;
  std::size_t min_replicas = 100;
  int threads = 1;
};

/// Importance-sampled replicas on streams (seed, tilted_replica, i) for
/// i = 0, 1, ...; whole batches run until `in_event_target` samples lie
/// in the event. Results depend only on the seed and options, never on
/// the thread count.
std::vector<ConditionedPathSample> run_conditioned(const ConditionedSampler& sampler, std::uint64_t seed,
                                                   const BatchOptions& options);

/// Same stream layout, fixed replica count.
std::vector<ConditionedPathSample> run_conditioned_fixed(const ConditionedSampler& sampler, std::uint64_t seed,
                                                         std::size_t replicas, int threads);

/// Seed used for level n of an n-ladder.
std::uint64_t level_seed(std::uint64_t master, int n);

}  // namespace ldcluster
