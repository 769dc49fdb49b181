#include "core/kernels.hpp"

#include <atomic>
#include <cmath>

namespace vitalattn::kernels {

namespace {

std::atomic<bool> g_parallel{true};

// Below this many multiply-adds the OpenMP fork/join overhead dominates.
constexpr int64_t kParallelThreshold = 16 * 1024;

inline bool go_parallel(int64_t work) { return g_parallel.load() && work >= kParallelThreshold; }

inline void matmul_row(const double* a, const double* b, double* c, int64_t i, int64_t k,
                       int64_t n) {
  double* crow = c + i * n;
  for (int64_t j = 0; j < n; ++j) crow[j] = 0.0;
  const double* arow = a + i * k;
  for (int64_t l = 0; l < k; ++l) {
    const double av = arow[l];
    const double* brow = b + l * n;
    for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

inline void matmul_tn_row(const double* a, const double* b, double* c, int64_t i, int64_t m,
                          int64_t k, int64_t n) {
  // a is [k x m]; row i of the result uses column i of a.
  double* crow = c + i * n;
  for (int64_t j = 0; j < n; ++j) crow[j] = 0.0;
  for (int64_t l = 0; l < k; ++l) {
    const double av = a[l * m + i];
    const double* brow = b + l * n;
    for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

inline void matmul_nt_row(const double* a, const double* b, double* c, int64_t i, int64_t k,
                          int64_t n) {
  const double* arow = a + i * k;
  double* crow = c + i * n;
  for (int64_t j = 0; j < n; ++j) {
    const double* brow = b + j * k;
    double acc = 0.0;
    for (int64_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
    crow[j] = acc;
  }
}

inline double apply_unary(Unary f, double v, double arg) {
  switch (f) {
    case Unary::LeakyRelu:
      return v >= 0.0 ? v : arg * v;
    case Unary::LeakyReluGrad:
      return v >= 0.0 ? 1.0 : arg;  // subgradient at 0 is 1
    case Unary::Sigmoid:
      return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    case Unary::Tanh:
      return std::tanh(v);
    case Unary::Neg:
      return -v;
  }
  return v;
}

inline double apply_binary(Binary op, double x, double y) {
  switch (op) {
    case Binary::Add:
      return x + y;
    case Binary::Sub:
      return x - y;
    case Binary::Mul:
      return x * y;
  }
  return 0.0;
}

}  // namespace

void set_parallel(bool enabled) { g_parallel.store(enabled); }
bool parallel_enabled() { return g_parallel.load(); }

void matmul_serial(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) matmul_row(a, b, c, i, k, n);
}

void matmul_omp(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) matmul_row(a, b, c, i, k, n);
}

void matmul(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  if (go_parallel(m * k * n))
    matmul_omp(a, b, c, m, k, n);
  else
    matmul_serial(a, b, c, m, k, n);
}

void matmul_tn_serial(const double* a, const double* b, double* c, int64_t m, int64_t k,
                      int64_t n) {
  for (int64_t i = 0; i < m; ++i) matmul_tn_row(a, b, c, i, m, k, n);
}

void matmul_tn_omp(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) matmul_tn_row(a, b, c, i, m, k, n);
}

void matmul_tn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  if (go_parallel(m * k * n))
    matmul_tn_omp(a, b, c, m, k, n);
  else
    matmul_tn_serial(a, b, c, m, k, n);
}

void matmul_nt_serial(const double* a, const double* b, double* c, int64_t m, int64_t k,
                      int64_t n) {
  for (int64_t i = 0; i < m; ++i) matmul_nt_row(a, b, c, i, k, n);
}

void matmul_nt_omp(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) matmul_nt_row(a, b, c, i, k, n);
}

void matmul_nt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
  if (go_parallel(m * k * n))
    matmul_nt_omp(a, b, c, m, k, n);
  else
    matmul_nt_serial(a, b, c, m, k, n);
}

void bmm_serial(const double* a, const double* b, double* c, int64_t batch, int64_t m, int64_t k,
                int64_t n) {
  for (int64_t s = 0; s < batch; ++s)
    matmul_serial(a + s * m * k, b + s * k * n, c + s * m * n, m, k, n);
}

void bmm_omp(const double* a, const double* b, double* c, int64_t batch, int64_t m, int64_t k,
             int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < batch * m; ++r) {
    const int64_t s = r / m, i = r % m;
    matmul_row(a + s * m * k, b + s * k * n, c + s * m * n, i, k, n);
  }
}

void bmm(const double* a, const double* b, double* c, int64_t batch, int64_t m, int64_t k,
         int64_t n) {
  if (go_parallel(batch * m * k * n))
    bmm_omp(a, b, c, batch, m, k, n);
  else
    bmm_serial(a, b, c, batch, m, k, n);
}

void bmm_nt_serial(const double* a, const double* b, double* c, int64_t batch, int64_t m,
                   int64_t k, int64_t n) {
  for (int64_t s = 0; s < batch; ++s)
    matmul_nt_serial(a + s * m * k, b + s * n * k, c + s * m * n, m, k, n);
}

void bmm_nt_omp(const double* a, const double* b, double* c, int64_t batch, int64_t m, int64_t k,
                int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < batch * m; ++r) {
    const int64_t s = r / m, i = r % m;
    matmul_nt_row(a + s * m * k, b + s * n * k, c + s * m * n, i, k, n);
  }
}

void bmm_nt(const double* a, const double* b, double* c, int64_t batch, int64_t m, int64_t k,
            int64_t n) {
  if (go_parallel(batch * m * k * n))
    bmm_nt_omp(a, b, c, batch, m, k, n);
  else
    bmm_nt_serial(a, b, c, batch, m, k, n);
}

void bmm_tn_serial(const double* a, const double* b, double* c, int64_t batch, int64_t m,
                   int64_t k, int64_t n) {
  for (int64_t s = 0; s < batch; ++s)
    matmul_tn_serial(a + s * k * m, b + s * k * n, c + s * m * n, m, k, n);
}

void bmm_tn_omp(const double* a, const double* b, double* c, int64_t batch, int64_t m, int64_t k,
                int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < batch * m; ++r) {
    const int64_t s = r / m, i = r % m;
    matmul_tn_row(a + s * k * m, b + s * k * n, c + s * m * n, i, m, k, n);
  }
}

void bmm_tn(const double* a, const double* b, double* c, int64_t batch, int64_t m, int64_t k,
            int64_t n) {
  if (go_parallel(batch * m * k * n))
    bmm_tn_omp(a, b, c, batch, m, k, n);
  else
    bmm_tn_serial(a, b, c, batch, m, k, n);
}

void map_serial(Unary f, const double* x, double* out, int64_t n, double arg) {
  for (int64_t i = 0; i < n; ++i) out[i] = apply_unary(f, x[i], arg);
}

void map_omp(Unary f, const double* x, double* out, int64_t n, double arg) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) out[i] = apply_unary(f, x[i], arg);
}

void map(Unary f, const double* x, double* out, int64_t n, double arg) {
  if (go_parallel(n * 8))
    map_omp(f, x, out, n, arg);
  else
    map_serial(f, x, out, n, arg);
}

void zip_serial(Binary op, const double* x, const double* y, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = apply_binary(op, x[i], y[i]);
}

void zip_omp(Binary op, const double* x, const double* y, double* out, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) out[i] = apply_binary(op, x[i], y[i]);
}

void zip(Binary op, const double* x, const double* y, double* out, int64_t n) {
  if (go_parallel(n * 8))
    zip_omp(op, x, y, out, n);
  else
    zip_serial(op, x, y, out, n);
}

void fma_acc_serial(const double* x, const double* y, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] += x[i] * y[i];
}

void fma_acc_omp(const double* x, const double* y, double* out, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) out[i] += x[i] * y[i];
}

void fma_acc(const double* x, const double* y, double* out, int64_t n) {
  if (go_parallel(n * 8))
    fma_acc_omp(x, y, out, n);
  else
    fma_acc_serial(x, y, out, n);
}

void axpy_serial(const double* x, double s, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] += x[i] * s;
}

void axpy_omp(const double* x, double s, double* out, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) out[i] += x[i] * s;
}

void axpy(const double* x, double s, double* out, int64_t n) {
  if (go_parallel(n * 8))
    axpy_omp(x, s, out, n);
  else
    axpy_serial(x, s, out, n);
}

}  // namespace vitalattn::kernels
