#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ldcluster/fft.hpp"

namespace ldcluster {

/// Concrete coefficient sequences with a_i ~ i^{-alpha}.
enum class CoefficientFamily {
  shifted,     ///< a_i = (i+1)^{-alpha}
  unit_start,  ///< a_0 = 1, a_i = i^{-alpha} for i >= 1
};

std::string to_string(CoefficientFamily family);
CoefficientFamily coefficient_family_from_string(const std::string& name);

struct CoefficientTable {
  double alpha = 0.75;
  CoefficientFamily family = CoefficientFamily::shifted;
  int J_max = 0;
  std::vector<double> a;  ///< a_0 .. a_{J_max + extent}
  std::vector<double> A;  ///< prefix sums A_j = a_0 + ... + a_j

  std::size_t size() const noexcept { return a.size(); }
  /// A_j with the convention A_j = 0 for j < 0.
  double prefix(long j) const { return j < 0 ? 0.0 : A[static_cast<std::size_t>(j)]; }
  /// Window weight W_j = A_j - A_{j-n}.
  double window_weight(long j, long n) const { return prefix(j) - prefix(j - n); }
};

/// Table with indices 0..J_max+extent. Prefix sums are compensated.
CoefficientTable build_coefficients(double alpha, int J_max, int extent,
                                    CoefficientFamily family = CoefficientFamily::shifted);

/// W_j = A_j - A_{j-n} for j = 0..J_max+n-1, the weights of the past noise
/// Z_{n-1-j} in S_n = X_0 + ... + X_{n-1}.
std::vector<double> window_weights(const CoefficientTable& table, int n);

struct VarianceResult {
  double value = 0.0;       ///< sigma_Z2 * sum_{j=0}^{J_max+n-1} W_j^2
  double tail_bound = 0.0;  ///< upper bound on the omitted terms j >= J_max+n
};

VarianceResult sigma_n2(const CoefficientTable& table, int n, double sigma_Z2);

struct DiagnosticsReport {
  int n = 0;
  double t = 0.0;
  long shift = 0;               ///< [n^beta t]
  double prefix_ratio = 0.0;    ///< A_n (1-a) n^{a-1}
  double variance_ratio = 0.0;  ///< sigma_n^2 / (C_alpha sigma_Z^2 n^{3-2a})
  double head_ratio = 0.0;      ///< sum_{i<=shift} W_i^2 / (K_1 t^{3-2a} n^{4-4a})
  double mid_left_ratio = 0.0;  ///< sum_{n-shift<i<=n} W_i^2 / ((1-a)^{-2} n^{2-2a+beta} t)
  double mid_right_ratio = 0.0; ///< sum_{n<i<=n+shift} W_i^2 / same
  double decorrelation_ratio = 0.0;  ///< (1 - normalized lag-shift inner product) / (n^{1-2a} t^{3-2a})
  double inner_product = 0.0;   ///< sum_i W_i W_{i+shift}
  double normalized_inner_product = 0.0;

  std::vector<double> ratios() const {
    return {prefix_ratio, variance_ratio, head_ratio, mid_left_ratio, mid_right_ratio, decorrelation_ratio};
  }
};

/// Finite-n versions of the asymptotic relations for A_j, sigma_n^2 and
/// the partial sums of W_j^2. At t = 0 the shift-dependent ratios are NaN
/// and the inner product equals sigma_n^2 / sigma_Z^2.
DiagnosticsReport asymptotic_diagnostics(const CoefficientTable& table, int n, double t);

struct WindowSummary {
  double S0 = 0.0;              ///< S_n(0) from the weighted sum
  std::optional<long> I_n;      ///< empty when censored
  double overshoot = 0.0;       ///< S_n(0) - n eps
  bool in_event = false;
};

struct WindowPath {
  int n = 0;
  int horizon = 0;
  double epsilon = 0.0;
  std::vector<double> X;  ///< X_0 .. X_{n+horizon-1}
  std::vector<double> S;  ///< S_n(0) .. S_n(horizon)
  double S0_from_X = 0.0; ///< compensated X_0 + ... + X_{n-1}, for cross-checking
  std::optional<long> I_n;
  double overshoot = 0.0;
  bool in_event = false;

  bool censored() const noexcept { return !I_n.has_value(); }
};

/// First j >= 1 with S[j] < threshold, or empty.
std::optional<long> first_non_occurrence(std::span<const double> S, double threshold);

/// Simulates windows of one (n, horizon) against a fixed coefficient
/// table. The coefficient spectrum is computed once; each worker owns a
/// Workspace with its transform buffers.
class WindowSimulator {
 public:
  class Workspace {
   public:
    explicit Workspace(const WindowSimulator& sim);

   private:
    friend class WindowSimulator;
    std::unique_ptr<fft::RealTransform> transform_;
    std::vector<double> z_;
    std::vector<double> X_;
  };

  WindowSimulator(const CoefficientTable& table, int n, int horizon, std::size_t fft_crossover = 1024);

  int n() const noexcept { return n_; }
  int horizon() const noexcept { return horizon_; }
  int J_max() const noexcept { return J_max_; }
  std::size_t past_length() const noexcept { return static_cast<std::size_t>(J_max_) + n_; }
  std::span<const double> weights() const noexcept { return weights_; }
  bool uses_fft() const noexcept { return fft_size_ > 0; }

  /// noise_past[j] = Z_{n-1-j} for j < J_max+n; noise_future[k] = Z_{n+k}.
  WindowSummary run(Workspace& ws, std::span<const double> noise_past, std::span<const double> noise_future,
                    double epsilon, WindowPath* path = nullptr) const;

 private:
  int n_;
  int horizon_;
  int J_max_;
  std::size_t length_;    // J_max + n + horizon
  std::size_t fft_size_;  // 0 for direct convolution
  std::vector<double> a_;
  std::vector<double> weights_;
  std::vector<std::complex<double>> a_spectrum_;
};

WindowPath simulate_window(const CoefficientTable& table, std::span<const double> noise_past,
                           std::span<const double> noise_future, int n, int horizon, double epsilon,
                           std::size_t fft_crossover = 1024);

/// ceil(n^beta), the number of shifts in one unit of limiting time.
long time_unit(int n, double beta);

}  // namespace ldcluster
