#include <atomic>

#include "pfair/error.hpp"
#include "pfair/kernels.hpp"

namespace pfair::kernels {

namespace {

constexpr KernelTable kScalar{&scalar::dot, &scalar::axpy, &scalar::gemv};
#ifdef PFAIR_HAVE_AVX2_KERNELS
constexpr KernelTable kAvx2{&avx2::dot, &avx2::axpy, &avx2::gemv};
#endif
#ifdef PFAIR_HAVE_NEON_KERNELS
constexpr KernelTable kNeon{&neon::dot, &neon::axpy, &neon::gemv};
#endif

Backend detect() {
#ifdef PFAIR_HAVE_AVX2_KERNELS
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Backend::avx2;
#endif
#ifdef PFAIR_HAVE_NEON_KERNELS
  return Backend::neon;
#endif
  return Backend::scalar;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> ptr{&table(best_available())};
  return ptr;
}

std::atomic<Backend>& current_backend() {
  static std::atomic<Backend> b{best_available()};
  return b;
}

}  // namespace

std::string_view to_string(Backend backend) {
  switch (backend) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
  }
  return "unknown";
}

bool available(Backend backend) {
  switch (backend) {
    case Backend::scalar: return true;
    case Backend::avx2:
#ifdef PFAIR_HAVE_AVX2_KERNELS
      return best_available() == Backend::avx2;
#else
      return false;
#endif
    case Backend::neon:
#ifdef PFAIR_HAVE_NEON_KERNELS
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend best_available() {
  static const Backend best = detect();
  return best;
}

const KernelTable& table(Backend backend) {
  switch (backend) {
#ifdef PFAIR_HAVE_AVX2_KERNELS
    case Backend::avx2: return kAvx2;
#endif
#ifdef PFAIR_HAVE_NEON_KERNELS
    case Backend::neon: return kNeon;
#endif
    default: return kScalar;
  }
}

Backend active() { return current_backend().load(std::memory_order_relaxed); }

void select(Backend backend) {
  if (!available(backend)) {
    throw Error(ErrorCode::invalid_argument,
                "kernel backend '" + std::string(to_string(backend)) + "' is not available");
  }
  current().store(&table(backend), std::memory_order_relaxed);
  current_backend().store(backend, std::memory_order_relaxed);
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::length_mismatch, "dot operands differ in length");
  return current().load(std::memory_order_relaxed)->dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::length_mismatch, "axpy operands differ in length");
  current().load(std::memory_order_relaxed)->axpy(alpha, x.data(), y.data(), x.size());
}

void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<const double> bias, std::span<double> y) {
  if (w.size() != rows * cols || x.size() != cols || y.size() != rows ||
      (!bias.empty() && bias.size() != rows)) {
    throw Error(ErrorCode::length_mismatch, "gemv operand shapes do not agree");
  }
  current().load(std::memory_order_relaxed)
      ->gemv(w.data(), rows, cols, x.data(), bias.empty() ? nullptr : bias.data(), y.data());
}

}  // namespace pfair::kernels
