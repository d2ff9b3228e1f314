#pragma once

// Inner-loop arithmetic used by the convolution, linear and DFT code.
//
// Every primitive has a scalar reference implementation and, where the
// target supports it, an AVX2+FMA or NEON variant. The variant is picked
// once at startup (DATK_KERNELS=scalar|avx2|neon|auto overrides) and can be
// switched with set_backend(); results of different backends agree to
// rounding but are not bit-identical, so a run must not switch mid-way.

#include <cstddef>
#include <string_view>

namespace datk::kernels {

enum class Backend { Scalar, Avx2, Neon };

std::string_view backend_name(Backend b);
bool backend_supported(Backend b);
Backend active_backend();
// Throws ConfigError when the backend is not available on this CPU.
void set_backend(Backend b);
Backend parse_backend(std::string_view name);

// sum_i a[i] * b[i]
double dot(const double* a, const double* b, std::size_t n);
// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);
// y[i] += a[i] * b[i]
void mul_acc(const double* a, const double* b, double* y, std::size_t n);

// C[M,N] += A[M,K] * B[K,N], row-major.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c);
// C[M,N] += A[M,K] * B[N,K]^T, row-major.
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c);
// C[M,N] += A[K,M]^T * B[K,N], row-major.
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void mul_acc(const double* a, const double* b, double* y, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define DATK_HAVE_AVX2_KERNELS 1
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void mul_acc(const double* a, const double* b, double* y, std::size_t n);
}  // namespace avx2
#endif

#if defined(__aarch64__) || defined(__ARM_NEON)
#define DATK_HAVE_NEON_KERNELS 1
namespace neon {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void mul_acc(const double* a, const double* b, double* y, std::size_t n);
}  // namespace neon
#endif

}  // namespace datk::kernels
