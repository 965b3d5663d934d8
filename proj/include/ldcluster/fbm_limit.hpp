#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "ldcluster/empirical_law.hpp"
#include "ldcluster/params.hpp"
#include "ldcluster/random.hpp"

namespace ldcluster {

struct FbmGrid {
  double H = 0.75;
  double dt = 0.0;
  std::size_t length = 0;   ///< number of grid steps
  std::vector<double> values;  ///< B_H(k dt), k = 0..length
};

/// Autocovariance of fractional Gaussian noise with step dt at lag k.
double fgn_autocovariance(double H, double dt, long k);

/// Exact sampler of fGn increments on a fixed grid. Uses circulant
/// embedding, which yields two independent paths per transform; falls back
/// to a Cholesky factor of the Toeplitz covariance when the embedding has
/// a materially negative eigenvalue.
class FbmGenerator {
 public:
  FbmGenerator(double H, double dt, std::size_t length);

  double hurst() const noexcept { return H_; }
  double dt() const noexcept { return dt_; }
  std::size_t length() const noexcept { return length_; }
  bool uses_embedding() const noexcept { return !sqrt_eigen_.empty(); }

  /// Two independent increment sequences of length() each.
  void increments_pair(RandomStream& rng, std::span<double> first, std::span<double> second) const;
  void increments(RandomStream& rng, std::span<double> out) const;

 private:
  double H_;
  double dt_;
  std::size_t length_;
  std::size_t embed_size_ = 0;
  std::vector<double> sqrt_eigen_;  // sqrt(lambda_k / M)
  std::vector<double> cholesky_;    // dense lower factor, fallback only
};

/// Cumulative sum of increments with B_H(0) = 0. Throws ResourceError when
/// neither construction is available for the requested length.
FbmGrid sample_fbm(double H, double dt, std::size_t length, RandomStream& rng);

/// Doubles `history` (fGn increments on step dt) by appending as many new
/// increments, drawn from their exact conditional law given the existing
/// ones: Gaussian kriging with a preconditioned conjugate-gradient Toeplitz
/// solve.
void extend_increments(double H, double dt, std::vector<double>& history, RandomStream& rng);

/// Polynomial barrier of the limiting first-passage problem:
/// sigma_Z B_H(t) <= drift * t^{2H} - offset * T0.
struct Barrier {
  double H = 0.75;
  double sigma_Z = 1.0;
  double drift = 0.0;   ///< (2 C_alpha)^{-1/2} eps
  double offset = 0.0;  ///< (C_alpha/2)^{1/2} sigma_Z^2 / eps

  static Barrier make(const DerivedConstants& c, double sigma_Z2, double epsilon);
  double level(double t, double T0) const;
};

struct HittingSample {
  double T0 = 0.0;
  double tau = 0.0;
  double grid_dt = 0.0;
  double horizon_used = 0.0;
  bool censored = false;  ///< no hit up to the horizon cap
  bool at_zero = false;   ///< T0 = 0, hit at t = 0
};

/// First grid index k (stepping by `stride` fine steps) where
/// sigma_Z B_H <= barrier, scanning path values from index `from`;
/// returns -1 when there is none.
long first_hit(std::span<const double> path, double fine_dt, std::size_t stride, const Barrier& barrier, double T0,
               std::size_t from = 0);

struct TauOptions {
  double initial_horizon = 64.0;  ///< limiting-time units generated up front
  double horizon_cap = 1024.0;    ///< hard cap; exceeding it censors the sample
  bool throw_on_cap = false;      ///< raise NonTerminationError instead of censoring
};

/// One query on a shared path: its own epsilon and grid stride (1 = the
/// fine grid, 2 = every other point, ...).
struct TauQuery {
  double epsilon = 0.5;
  std::size_t stride = 1;
};

/// Samples T0 ~ Exp(1) and one fBM path on the fine grid `dt`, then
/// answers every query on that coupled pair. The path is extended
/// exactly (by conditional sampling) in doublings until every query has
/// hit or the cap is reached.
std::vector<HittingSample> sample_tau_coupled(const DerivedConstants& c, double sigma_Z2, double dt,
                                              std::span<const TauQuery> queries, RandomStream& rng,
                                              const TauOptions& options = {},
                                              std::optional<double> forced_T0 = std::nullopt);

HittingSample sample_tau(const DerivedConstants& c, double sigma_Z2, double epsilon, double dt, RandomStream& rng,
                         const TauOptions& options = {}, std::optional<double> forced_T0 = std::nullopt);

struct TauLawResult {
  std::vector<EmpiricalLaw> laws;  ///< one per query
  std::vector<std::size_t> censored;
  std::vector<std::size_t> at_zero;
  std::size_t samples = 0;
  std::size_t extended = 0;  ///< samples whose path needed extension
};

/// N coupled samples on streams (seed, tau_sample, i).
TauLawResult tau_law_coupled(const DerivedConstants& c, double sigma_Z2, double dt, std::span<const TauQuery> queries,
                             std::size_t N, std::uint64_t seed, int threads, const TauOptions& options = {});

EmpiricalLaw tau_law(const DerivedConstants& c, double sigma_Z2, double epsilon, std::size_t N, double dt,
                     std::uint64_t seed, int threads = 1, const TauOptions& options = {});

}  // namespace ldcluster
