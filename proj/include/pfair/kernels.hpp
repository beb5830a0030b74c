#pragma once

// Dense arithmetic kernels behind the MLP forward/backward passes and the
// normal-equation Gram accumulation. Each kernel has a portable scalar
// reference and, where the CPU supports it, a vectorized variant picked at
// startup. The variants agree with the reference up to summation order.

#include <cstddef>
#include <span>
#include <string_view>

namespace pfair::kernels {

enum class Backend { scalar, avx2, neon };

std::string_view to_string(Backend backend);

bool available(Backend backend);

// Backend chosen at startup: the widest one the running CPU supports.
Backend best_available();

Backend active();

// Switches the process-wide backend. Throws pfair::Error if unavailable.
void select(Backend backend);

double dot(std::span<const double> a, std::span<const double> b);

// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// y = W x + bias, W row-major with rows x cols. An empty bias means zero.
void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<const double> bias, std::span<double> y);

// Raw entry points per backend, used by the dispatcher and by the
// equivalence tests.
struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*gemv)(const double* w, std::size_t rows, std::size_t cols, const double* x,
               const double* bias, double* y);
};

const KernelTable& table(Backend backend);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x,
          const double* bias, double* y);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64) || defined(__i386__)
#define PFAIR_HAVE_AVX2_KERNELS 1
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x,
          const double* bias, double* y);
}  // namespace avx2
#endif

#if defined(__aarch64__)
#define PFAIR_HAVE_NEON_KERNELS 1
namespace neon {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemv(const double* w, std::size_t rows, std::size_t cols, const double* x,
          const double* bias, double* y);
}  // namespace neon
#endif

}  // namespace pfair::kernels
