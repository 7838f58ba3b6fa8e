#pragma once

#include <cstddef>
#include <span>
#include <string>

// Data-parallel inner loops shared by the network engine, the detectors,
// the MMD selection caches and k-means. Scalar kernels are the reference
// semantics; SIMD variants (AVX2 on x86-64, NEON on aarch64) are selected
// at runtime and are equivalence-tested against the scalar path.
namespace vtlab::kern {

enum class Backend { scalar, avx2, neon };

const char* backend_name(Backend b);

// Backend chosen at startup from CPU features; VTLAB_KERNEL=scalar|avx2|neon
// overrides. force_backend throws if the request is not runnable on this CPU.
Backend active_backend();
void force_backend(Backend b);

// y[i] += a * x[i]
void axpy(double a, std::span<const double> x, std::span<double> y);

double dot(std::span<const double> a, std::span<const double> b);

// Squared Euclidean distance.
double sqdist(std::span<const double> a, std::span<const double> b);

namespace detail {

// Scalar reference kernels. Fixed left-to-right accumulation order; the
// SIMD variants use per-lane accumulators reduced in a fixed order, so both
// are deterministic for a given backend.
inline void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

inline double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

inline double sqdist_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

#if defined(__x86_64__) || defined(_M_X64)
#define VTLAB_HAVE_AVX2_KERNELS 1
void axpy_avx2(double a, const double* x, double* y, std::size_t n);
double dot_avx2(const double* a, const double* b, std::size_t n);
double sqdist_avx2(const double* a, const double* b, std::size_t n);
#endif

#if defined(__aarch64__)
#define VTLAB_HAVE_NEON_KERNELS 1
void axpy_neon(double a, const double* x, double* y, std::size_t n);
double dot_neon(const double* a, const double* b, std::size_t n);
double sqdist_neon(const double* a, const double* b, std::size_t n);
#endif

}  // namespace detail

}  // namespace vtlab::kern
