#include "datk/kernels.hpp"

#include <cstdlib>
#include <string>

#include "datk/error.hpp"

namespace datk::kernels {

namespace {

struct Table {
  Backend backend;
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*mul_acc)(const double*, const double*, double*, std::size_t);
};

Table table_for(Backend b) {
  switch (b) {
#if defined(DATK_HAVE_AVX2_KERNELS)
    case Backend::Avx2:
      return {b, &avx2::dot, &avx2::axpy, &avx2::mul_acc};
#endif
#if defined(DATK_HAVE_NEON_KERNELS)
    case Backend::Neon:
      return {b, &neon::dot, &neon::axpy, &neon::mul_acc};
#endif
    default:
      return {Backend::Scalar, &scalar::dot, &scalar::axpy, &scalar::mul_acc};
  }
}

Backend detect() {
  if (const char* env = std::getenv("DATK_KERNELS"); env && std::string(env) != "auto") {
    const Backend b = parse_backend(env);
    if (backend_supported(b)) return b;
  }
  if (backend_supported(Backend::Avx2)) return Backend::Avx2;
  if (backend_supported(Backend::Neon)) return Backend::Neon;
  return Backend::Scalar;
}

Table& active() {
  static Table t = table_for(detect());
  return t;
}

}  // namespace

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
    case Backend::Neon: return "neon";
  }
  return "unknown";
}

Backend parse_backend(std::string_view name) {
  if (name == "scalar") return Backend::Scalar;
  if (name == "avx2") return Backend::Avx2;
  if (name == "neon") return Backend::Neon;
  throw ConfigError("unknown kernel backend '" + std::string(name) + "'");
}

bool backend_supported(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
#if defined(DATK_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::Neon:
#if defined(DATK_HAVE_NEON_KERNELS)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend active_backend() { return active().backend; }

void set_backend(Backend b) {
  if (!backend_supported(b)) {
    throw ConfigError("kernel backend '" + std::string(backend_name(b)) +
                      "' is not supported on this CPU");
  }
  active() = table_for(b);
}

double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}

void mul_acc(const double* a, const double* b, double* y, std::size_t n) {
  active().mul_acc(a, b, y, n);
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  const Table& t = active();
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      if (arow[p] != 0.0) t.axpy(arow[p], b + p * n, crow, n);
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  const Table& t = active();
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += t.dot(arow, b + j * k, k);
  }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c) {
  const Table& t = active();
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      if (arow[i] != 0.0) t.axpy(arow[i], brow, c + i * n, n);
    }
  }
}

}  // namespace datk::kernels
