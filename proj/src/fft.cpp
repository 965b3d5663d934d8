#include "ldcluster/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>
#include <new>

#include "ldcluster/errors.hpp"

namespace ldcluster::fft {
namespace {

// The FFTW planner is not re-entrant; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

template <class T>
T* checked_alloc(std::size_t count) {
  void* p = fftw_malloc(sizeof(T) * std::max<std::size_t>(count, 1));
  if (p == nullptr) throw ResourceError("fft", "allocation of " + std::to_string(count) + " elements failed");
  return static_cast<T*>(p);
}

}  // namespace

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

RealTransform::RealTransform(std::size_t size) : size_(size) {
  if (size < 2) throw ValidationError("fft", "transform size must be at least 2");
  real_ = checked_alloc<double>(size_);
  spec_ = checked_alloc<std::complex<double>>(size_ / 2 + 1);
  std::lock_guard lock(planner_mutex());
  auto* spec = reinterpret_cast<fftw_complex*>(spec_);
  forward_plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(size_), real_, spec, FFTW_ESTIMATE);
  backward_plan_ = fftw_plan_dft_c2r_1d(static_cast<int>(size_), spec, real_, FFTW_ESTIMATE);
}

RealTransform::~RealTransform() {
  {
    std::lock_guard lock(planner_mutex());
    if (forward_plan_) fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
    if (backward_plan_) fftw_destroy_plan(static_cast<fftw_plan>(backward_plan_));
  }
  fftw_free(real_);
  fftw_free(spec_);
}

void RealTransform::forward() { fftw_execute(static_cast<fftw_plan>(forward_plan_)); }
void RealTransform::backward() { fftw_execute(static_cast<fftw_plan>(backward_plan_)); }

ComplexTransform::ComplexTransform(std::size_t size, int sign) : size_(size) {
  if (size < 1) throw ValidationError("fft", "transform size must be positive");
  data_ = checked_alloc<std::complex<double>>(size_);
  std::lock_guard lock(planner_mutex());
  auto* d = reinterpret_cast<fftw_complex*>(data_);
  plan_ = fftw_plan_dft_1d(static_cast<int>(size_), d, d, sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD,
                           FFTW_ESTIMATE);
}

ComplexTransform::~ComplexTransform() {
  {
    std::lock_guard lock(planner_mutex());
    if (plan_) fftw_destroy_plan(static_cast<fftw_plan>(plan_));
  }
  fftw_free(data_);
}

void ComplexTransform::execute() { fftw_execute(static_cast<fftw_plan>(plan_)); }

void direct_convolve(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  if (a.empty() || b.empty()) return;
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::size_t lo = k >= b.size() ? k - b.size() + 1 : 0;
    const std::size_t hi = std::min(k, a.size() - 1);
    double s = 0.0;
    for (std::size_t i = lo; i <= hi && i < a.size(); ++i) s += a[i] * b[k - i];
    out[k] = s;
  }
}

}  // namespace ldcluster::fft
