#include "ldcluster/ma_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ldcluster/errors.hpp"
#include "ldcluster/numeric.hpp"
#include "ldcluster/params.hpp"

namespace ldcluster {
namespace {

constexpr const char* kModule = "ma_engine";

// floor/ceil of a power that may land a few ulps away from an integer.
double snap(double x) {
  const double r = std::round(x);
  return std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x)) ? r : x;
}

}  // namespace

std::string to_string(CoefficientFamily family) {
  return family == CoefficientFamily::shifted ? "shifted" : "unit_start";
}

CoefficientFamily coefficient_family_from_string(const std::string& name) {
  if (name == "shifted") return CoefficientFamily::shifted;
  if (name == "unit_start") return CoefficientFamily::unit_start;
  throw ValidationError(kModule, "unknown coefficient family '" + name + "' (expected shifted or unit_start)");
}

long time_unit(int n, double beta) { return static_cast<long>(std::ceil(snap(std::pow(n, beta)))); }

CoefficientTable build_coefficients(double alpha, int J_max, int extent, CoefficientFamily family) {
  if (!(alpha > 0.5 && alpha < 1.0)) throw ValidationError(kModule, "alpha must lie in (1/2, 1)");
  if (J_max < 1) throw ValidationError(kModule, "J_max must be >= 1");
  if (extent < 0) throw ValidationError(kModule, "extent must be >= 0");
  CoefficientTable t;
  t.alpha = alpha;
  t.family = family;
  t.J_max = J_max;
  const std::size_t len = static_cast<std::size_t>(J_max) + static_cast<std::size_t>(extent) + 1;
  t.a.resize(len);
  t.A.resize(len);
  CompensatedSum acc;
  for (std::size_t i = 0; i < len; ++i) {
    const double base = family == CoefficientFamily::shifted ? static_cast<double>(i + 1)
                                                              : (i == 0 ? 1.0 : static_cast<double>(i));
    t.a[i] = std::pow(base, -alpha);
    acc += t.a[i];
    t.A[i] = acc.value();
  }
  return t;
}

std::vector<double> window_weights(const CoefficientTable& table, int n) {
  if (n < 1) throw ValidationError(kModule, "n must be >= 1");
  const std::size_t count = static_cast<std::size_t>(table.J_max) + n;
  if (count > table.size()) {
    throw ConfigurationError(kModule, "coefficient table too short for n = " + std::to_string(n));
  }
  std::vector<double> w(count);
  for (std::size_t j = 0; j < count; ++j) w[j] = table.window_weight(static_cast<long>(j), n);
  return w;
}

VarianceResult sigma_n2(const CoefficientTable& table, int n, double sigma_Z2) {
  if (table.J_max < n) {
    throw ConfigurationError(kModule, "J_max = " + std::to_string(table.J_max) + " is below n = " + std::to_string(n));
  }
  const auto w = window_weights(table, n);
  CompensatedSum s;
  for (double x : w) s += x * x;
  VarianceResult r;
  r.value = sigma_Z2 * s.value();
  // W_j <= n a_{j-n+1} for j >= J_max+n, and sum_{i>=m} i^{-2a} <= (m-1/2)^{1-2a}/(2a-1).
  const double alpha = table.alpha;
  const double m = table.family == CoefficientFamily::shifted ? table.J_max + 1.5 : table.J_max + 0.5;
  r.tail_bound = sigma_Z2 * static_cast<double>(n) * n * std::pow(m, 1.0 - 2.0 * alpha) / (2.0 * alpha - 1.0);
  return r;
}

DiagnosticsReport asymptotic_diagnostics(const CoefficientTable& table, int n, double t) {
  if (t < 0.0) throw ValidationError(kModule, "t must be >= 0");
  const double alpha = table.alpha;
  const DerivedConstants c = derive_constants(alpha, 1.0);
  const auto w = window_weights(table, n);
  const long len = static_cast<long>(w.size());
  const long m = static_cast<long>(std::floor(snap(std::pow(n, c.beta) * t)));
  if (n + m >= len) throw ConfigurationError(kModule, "n^beta t exceeds the coefficient table");
  const double nan = std::numeric_limits<double>::quiet_NaN();

  DiagnosticsReport d;
  d.n = n;
  d.t = t;
  d.shift = m;
  d.prefix_ratio = table.prefix(n) * (1.0 - alpha) * std::pow(n, alpha - 1.0);

  CompensatedSum var;
  for (double x : w) var += x * x;
  const double s2 = var.value();
  d.variance_ratio = s2 / (c.C_alpha * std::pow(n, 3.0 - 2.0 * alpha));

  const auto sum_sq = [&](long lo, long hi) {
    CompensatedSum s;
    for (long i = std::max(0L, lo); i <= hi; ++i) s += w[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)];
    return s.value();
  };
  const double mid_scale = std::pow(1.0 - alpha, -2.0) * std::pow(n, 2.0 - 2.0 * alpha + c.beta) * t;
  if (t > 0.0) {
    d.head_ratio = sum_sq(0, m) / (c.K_1 * std::pow(t, 3.0 - 2.0 * alpha) * std::pow(n, 4.0 - 4.0 * alpha));
    d.mid_left_ratio = sum_sq(n - m + 1, n) / mid_scale;
    d.mid_right_ratio = sum_sq(n + 1, n + m) / mid_scale;
  } else {
    d.head_ratio = d.mid_left_ratio = d.mid_right_ratio = nan;
  }

  CompensatedSum inner;
  for (long i = 0; i + m < len; ++i) inner += w[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i + m)];
  d.inner_product = inner.value();
  d.normalized_inner_product = d.inner_product / s2;
  d.decorrelation_ratio = t > 0.0 ? (1.0 - d.normalized_inner_product) /
                                        (std::pow(n, 1.0 - 2.0 * alpha) * std::pow(t, 3.0 - 2.0 * alpha))
                                  : nan;
  return d;
}

std::optional<long> first_non_occurrence(std::span<const double> S, double threshold) {
  for (std::size_t j = 1; j < S.size(); ++j) {
    if (S[j] < threshold) return static_cast<long>(j);
  }
  return std::nullopt;
}

WindowSimulator::Workspace::Workspace(const WindowSimulator& sim) {
  if (sim.fft_size_ > 0) transform_ = std::make_unique<fft::RealTransform>(sim.fft_size_);
  z_.resize(sim.length_);
  X_.resize(static_cast<std::size_t>(sim.n_) + sim.horizon_);
}

WindowSimulator::WindowSimulator(const CoefficientTable& table, int n, int horizon, std::size_t fft_crossover)
    : n_(n), horizon_(horizon), J_max_(table.J_max) {
  if (n < 1) throw ValidationError(kModule, "n must be >= 1");
  if (horizon < 0) throw ValidationError(kModule, "horizon must be >= 0");
  length_ = static_cast<std::size_t>(J_max_) + n + horizon;
  if (table.size() < length_) {
    throw ConfigurationError(kModule, "coefficient table holds " + std::to_string(table.size()) +
                                          " terms, window needs " + std::to_string(length_));
  }
  a_.assign(table.a.begin(), table.a.begin() + static_cast<long>(length_));
  weights_ = window_weights(table, n);
  if (length_ >= fft_crossover) {
    // Outputs needed at positions >= J_max of the linear convolution of two
    // length-L sequences; wrap-around only touches positions below
    // 2L - 1 - N, so N >= J_max + 2(n + horizon) - 1 suffices.
    fft_size_ = fft::next_pow2(static_cast<std::size_t>(J_max_) + 2 * (static_cast<std::size_t>(n) + horizon));
    fft::RealTransform tr(fft_size_);
    auto r = tr.real();
    std::fill(r.begin(), r.end(), 0.0);
    std::copy(a_.begin(), a_.end(), r.begin());
    tr.forward();
    a_spectrum_.assign(tr.spectrum().begin(), tr.spectrum().end());
    const double inv = 1.0 / static_cast<double>(fft_size_);
    for (auto& c : a_spectrum_) c *= inv;
  } else {
    fft_size_ = 0;
  }
}

WindowSummary WindowSimulator::run(Workspace& ws, std::span<const double> noise_past,
                                   std::span<const double> noise_future, double epsilon, WindowPath* path) const {
  if (noise_past.size() != past_length()) {
    throw ValidationError(kModule, "noise_past has length " + std::to_string(noise_past.size()) + ", expected " +
                                       std::to_string(past_length()));
  }
  if (noise_future.size() != static_cast<std::size_t>(horizon_)) {
    throw ValidationError(kModule, "noise_future has length " + std::to_string(noise_future.size()) +
                                       ", expected " + std::to_string(horizon_));
  }
  WindowSummary out;
  const double threshold = n_ * epsilon;
  if (horizon_ == 0 && path == nullptr) {
    // S_n(0) alone needs no convolution.
    CompensatedSum s0;
    for (std::size_t j = 0; j < noise_past.size(); ++j) s0 += weights_[j] * noise_past[j];
    out.S0 = s0.value();
    out.overshoot = out.S0 - threshold;
    out.in_event = out.S0 >= threshold;
    return out;
  }

  // z[p] = Z_{p - J_max}
  auto& z = ws.z_;
  const std::size_t P = past_length();
  for (std::size_t j = 0; j < P; ++j) z[P - 1 - j] = noise_past[j];
  std::copy(noise_future.begin(), noise_future.end(), z.begin() + static_cast<long>(P));

  auto& X = ws.X_;
  const std::size_t nx = X.size();
  if (fft_size_ > 0) {
    auto& tr = *ws.transform_;
    auto r = tr.real();
    std::copy(z.begin(), z.end(), r.begin());
    std::fill(r.begin() + static_cast<long>(length_), r.end(), 0.0);
    tr.forward();
    auto spec = tr.spectrum();
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= a_spectrum_[k];
    tr.backward();
    for (std::size_t i = 0; i < nx; ++i) X[i] = r[i + J_max_];
  } else {
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t p = i + J_max_;
      double s = 0.0;
      for (std::size_t k = 0; k <= p; ++k) s += a_[k] * z[p - k];
      X[i] = s;
    }
  }

  CompensatedSum s0;
  for (std::size_t j = 0; j < P; ++j) s0 += weights_[j] * noise_past[j];
  out.S0 = s0.value();
  out.overshoot = out.S0 - threshold;
  out.in_event = out.S0 >= threshold;
#ifndef NDEBUG
  {
    CompensatedSum sx;
    for (int i = 0; i < n_; ++i) sx += X[static_cast<std::size_t>(i)];
    const double scale = std::max({1.0, std::abs(out.S0), std::sqrt(static_cast<double>(P))});
    if (std::abs(sx.value() - out.S0) > 1e-8 * scale) {
      throw AccuracyError(kModule, "window sum of X disagrees with the weighted noise sum", sx.value() - out.S0);
    }
  }
#endif

  double s = out.S0;
  for (int j = 0; j < horizon_; ++j) {
    s += X[static_cast<std::size_t>(n_ + j)] - X[static_cast<std::size_t>(j)];
    if (!out.I_n && s < threshold) {
      out.I_n = j + 1;
      if (path == nullptr) break;
    }
  }

  if (path != nullptr) {
    path->n = n_;
    path->horizon = horizon_;
    path->epsilon = epsilon;
    path->X.assign(X.begin(), X.end());
    path->S.resize(static_cast<std::size_t>(horizon_) + 1);
    path->S[0] = out.S0;
    for (int j = 0; j < horizon_; ++j) {
      path->S[static_cast<std::size_t>(j) + 1] =
          path->S[static_cast<std::size_t>(j)] + X[static_cast<std::size_t>(n_ + j)] - X[static_cast<std::size_t>(j)];
    }
    CompensatedSum sx;
    for (int i = 0; i < n_; ++i) sx += X[static_cast<std::size_t>(i)];
    path->S0_from_X = sx.value();
    path->I_n = out.I_n;
    path->overshoot = out.overshoot;
    path->in_event = out.in_event;
  }
  return out;
}

WindowPath simulate_window(const CoefficientTable& table, std::span<const double> noise_past,
                           std::span<const double> noise_future, int n, int horizon, double epsilon,
                           std::size_t fft_crossover) {
  WindowSimulator sim(table, n, horizon, fft_crossover);
  WindowSimulator::Workspace ws(sim);
  WindowPath path;
  sim.run(ws, noise_past, noise_future, epsilon, &path);
  return path;
}

}  // namespace ldcluster
