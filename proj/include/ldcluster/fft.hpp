#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace ldcluster::fft {

/// Smallest power of two >= n.
std::size_t next_pow2(std::size_t n);

/// Real-to-complex / complex-to-real transform pair of a fixed size with
/// its own buffers and plans. Not copyable; one instance per worker.
/// backward() is unnormalized (scales by size()).
class RealTransform {
 public:
  explicit RealTransform(std::size_t size);
  ~RealTransform();
  RealTransform(const RealTransform&) = delete;
  RealTransform& operator=(const RealTransform&) = delete;

  std::size_t size() const noexcept { return size_; }
  std::span<double> real() noexcept { return {real_, size_}; }
  std::span<std::complex<double>> spectrum() noexcept { return {spec_, size_ / 2 + 1}; }

  void forward();
  void backward();

 private:
  std::size_t size_;
  double* real_ = nullptr;
  std::complex<double>* spec_ = nullptr;
  void* forward_plan_ = nullptr;
  void* backward_plan_ = nullptr;
};

/// In-place complex transform of a fixed size. Sign -1 is the forward
/// direction; neither direction is normalized.
class ComplexTransform {
 public:
  ComplexTransform(std::size_t size, int sign);
  ~ComplexTransform();
  ComplexTransform(const ComplexTransform&) = delete;
  ComplexTransform& operator=(const ComplexTransform&) = delete;

  std::size_t size() const noexcept { return size_; }
  std::span<std::complex<double>> data() noexcept { return {data_, size_}; }
  void execute();

 private:
  std::size_t size_;
  std::complex<double>* data_ = nullptr;
  void* plan_ = nullptr;
};

/// Linear convolution by direct summation; out[k] = sum_i a[i] b[k-i].
void direct_convolve(std::span<const double> a, std::span<const double> b, std::span<double> out);

}  // namespace ldcluster::fft
