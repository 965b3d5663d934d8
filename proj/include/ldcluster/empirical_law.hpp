#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace ldcluster {

/// A weighted sample on the real line, possibly with mass censored beyond
/// a known point. Weights (including the censored mass) sum to one; the
/// CDF is exact for x <= censor_point and unknown beyond it.
class EmpiricalLaw {
 public:
  struct Point {
    double value;
    double weight;
  };

  EmpiricalLaw() = default;

  /// Normalizes weights together with `censored_weight`. Zero-weight points
  /// are dropped; negative or non-finite weights are a ValidationError.
  static EmpiricalLaw from_weighted(std::span<const double> values, std::span<const double> weights,
                                    double censored_weight = 0.0,
                                    double censor_point = std::numeric_limits<double>::infinity());
  static EmpiricalLaw from_samples(std::span<const double> values, std::size_t censored_count = 0,
                                   double censor_point = std::numeric_limits<double>::infinity());

  bool empty() const noexcept { return points_.empty() && censored_mass_ == 0.0; }
  std::size_t size() const noexcept { return points_.size(); }
  const std::vector<Point>& points() const noexcept { return points_; }
  double censored_mass() const noexcept { return censored_mass_; }
  double censor_point() const noexcept { return censor_point_; }
  /// Kish effective sample size of the uncensored points.
  double effective_size() const noexcept { return effective_size_; }

  /// P(X <= x), right-continuous.
  double cdf(double x) const;
  /// Smallest support value v with cdf(v) >= p; +inf when p falls in the
  /// censored mass.
  double quantile(double p) const;
  /// Mean of the uncensored part, normalized to that part.
  double conditional_mean() const;

  // Free-form provenance, echoed in reports.
  std::string source;
  double parameter = 0.0;  ///< n for window laws, dt for limit laws
  std::uint64_t seed = 0;

 private:
  std::vector<Point> points_;  // sorted, ties merged
  double censored_mass_ = 0.0;
  double censor_point_ = std::numeric_limits<double>::infinity();
  double effective_size_ = 0.0;
};

/// sup |F1 - F2| over x <= min(censor points), by merge-scan of the two
/// supports. Throws ValidationError on an empty law.
double ks_distance(const EmpiricalLaw& a, const EmpiricalLaw& b);

/// sup_x |F(x) - (1 - e^{-x})| over x <= censor point, checking left and
/// right limits at each support point and the limit at the censor point
/// (+inf when uncensored).
double ks_against_exponential(const EmpiricalLaw& law);

/// Integral of |F1 - F2| over the common uncensored range.
double wasserstein1(const EmpiricalLaw& a, const EmpiricalLaw& b);

/// CSV with header value,cdf,weight; censored mass becomes a final row
/// with value inf and cdf 1. Throws IoError when the file cannot be written.
void write_law_csv(const EmpiricalLaw& law, const std::string& path);
/// Inverse of write_law_csv. The censor point is not stored in the CSV;
/// pass it when known, otherwise the largest finite value is used.
EmpiricalLaw read_law_csv(const std::string& path,
                          double censor_point = std::numeric_limits<double>::quiet_NaN());

/// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

}  // namespace ldcluster
