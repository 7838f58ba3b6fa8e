#include "vtlab/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

namespace vtlab::kern {

namespace {

using AxpyFn = void (*)(double, const double*, double*, std::size_t);
using DotFn = double (*)(const double*, const double*, std::size_t);
using SqdistFn = double (*)(const double*, const double*, std::size_t);

struct Dispatch {
  Backend backend = Backend::scalar;
  AxpyFn axpy = detail::axpy_scalar;
  DotFn dot = detail::dot_scalar;
  SqdistFn sqdist = detail::sqdist_scalar;
};

bool backend_runnable(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(VTLAB_HAVE_AVX2_KERNELS)
      return __builtin_cpu_supports("avx2") != 0;
#else
      return false;
#endif
    case Backend::neon:
#if defined(VTLAB_HAVE_NEON_KERNELS)
      return true;  // NEON is baseline on aarch64
#else
      return false;
#endif
  }
  return false;
}

Dispatch make_dispatch(Backend b) {
  Dispatch d;
  d.backend = b;
  switch (b) {
    case Backend::scalar:
      break;
#if defined(VTLAB_HAVE_AVX2_KERNELS)
    case Backend::avx2:
      d.axpy = detail::axpy_avx2;
      d.dot = detail::dot_avx2;
      d.sqdist = detail::sqdist_avx2;
      break;
#endif
#if defined(VTLAB_HAVE_NEON_KERNELS)
    case Backend::neon:
      d.axpy = detail::axpy_neon;
      d.dot = detail::dot_neon;
      d.sqdist = detail::sqdist_neon;
      break;
#endif
    default:
      throw std::invalid_argument("kern: backend not compiled in");
  }
  return d;
}

Backend pick_default() {
  if (const char* env = std::getenv("VTLAB_KERNEL")) {
    const std::string s(env);
    Backend want = Backend::scalar;
    if (s == "avx2")
      want = Backend::avx2;
    else if (s == "neon")
      want = Backend::neon;
    else if (s != "scalar")
      throw std::invalid_argument("VTLAB_KERNEL: unknown backend '" + s + "'");
    if (!backend_runnable(want))
      throw std::runtime_error("VTLAB_KERNEL: backend '" + s +
                               "' not runnable on this CPU");
    return want;
  }
  if (backend_runnable(Backend::avx2)) return Backend::avx2;
  if (backend_runnable(Backend::neon)) return Backend::neon;
  return Backend::scalar;
}

Dispatch& dispatch() {
  static Dispatch d = make_dispatch(pick_default());
  return d;
}

}  // namespace

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
    case Backend::neon:
      return "neon";
  }
  return "?";
}

Backend active_backend() { return dispatch().backend; }

void force_backend(Backend b) {
  if (!backend_runnable(b))
    throw std::runtime_error(std::string("kern: backend '") + backend_name(b) +
                             "' not runnable on this CPU");
  dispatch() = make_dispatch(b);
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size())
    throw std::invalid_argument("kern::axpy: size mismatch");
  dispatch().axpy(a, x.data(), y.data(), x.size());
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("kern::dot: size mismatch");
  return dispatch().dot(a.data(), b.data(), a.size());
}

double sqdist(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("kern::sqdist: size mismatch");
  return dispatch().sqdist(a.data(), b.data(), a.size());
}

}  // namespace vtlab::kern
