#pragma once

#include <cmath>
#include <limits>
#include <span>

namespace ldcluster {

/// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  CompensatedSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }

  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) noexcept {
  CompensatedSum acc;
  for (double x : xs) acc.add(x);
  return acc.value();
}

/// Streaming log-sum-exp. Empty accumulator reports -inf.
class LogSumExp {
 public:
  void add(double log_x) noexcept {
    if (log_x == -std::numeric_limits<double>::infinity()) return;
    if (log_x <= max_) {
      scaled_ += std::exp(log_x - max_);
    } else {
      scaled_ = scaled_ * std::exp(max_ - log_x) + 1.0;
      max_ = log_x;
    }
  }

  double value() const noexcept {
    if (scaled_ == 0.0) return -std::numeric_limits<double>::infinity();
    return max_ + std::log(scaled_);
  }

 private:
  double max_ = -std::numeric_limits<double>::infinity();
  double scaled_ = 0.0;
};

/// Upper tail of the standard normal, P(G > z).
inline double normal_upper_tail(double z) noexcept { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

inline double normal_density(double z) noexcept {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846);
}

}  // namespace ldcluster
