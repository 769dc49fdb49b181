#pragma once

#include <cstdint>

namespace vitalattn::kernels {

// Dense kernels behind the tensor ops. Every kernel has a serial reference
// (*_serial) and an OpenMP variant parallelized so that each output element is
// written by exactly one thread with a serial inner accumulation — results are
// bit-identical to the reference at any thread count. The unsuffixed entry
// points dispatch on kernels::parallel_enabled() and a work threshold.

void set_parallel(bool enabled);
bool parallel_enabled();

// c[m x n] = a[m x k] * b[k x n]
void matmul_serial(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void matmul_omp(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void matmul(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);

// c[m x n] = a[k x m]^T * b[k x n]
void matmul_tn_serial(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void matmul_tn_omp(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void matmul_tn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);

// c[m x n] = a[m x k] * b[n x k]^T
void matmul_nt_serial(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void matmul_nt_omp(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
void matmul_nt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);

// Batched matmul: c[b] = a[b] * op(b[b]) for each of `batch` independent slices.
void bmm_serial(const double* a, const double* b, double* c, int64_t batch, int64_t m, int64_t k,
                int64_t n);
void bmm_omp(const double* a, const double* b, double* c, int64_t batch, int64_t m, int64_t k,
             int64_t n);
void bmm(const double* a, const double* b, double* c, int64_t batch, int64_t m, int64_t k,
         int64_t n);

void bmm_nt_serial(const double* a, const double* b, double* c, int64_t batch, int64_t m,
                   int64_t k, int64_t n);
void bmm_nt_omp(const double* a, const double* b, double* c, int64_t batch, int64_t m, int64_t k,
                int64_t n);
void bmm_nt(const double* a, const double* b, double* c, int64_t batch, int64_t m, int64_t k,
            int64_t n);

void bmm_tn_serial(const double* a, const double* b, double* c, int64_t batch, int64_t m,
                   int64_t k, int64_t n);
void bmm_tn_omp(const double* a, const double* b, double* c, int64_t batch, int64_t m, int64_t k,
                int64_t n);
void bmm_tn(const double* a, const double* b, double* c, int64_t batch, int64_t m, int64_t k,
            int64_t n);

// out[i] = f(x[i]); accumulate variant does out[i] += f(x[i]).
enum class Unary { LeakyRelu, LeakyReluGrad, Sigmoid, Tanh, Neg };
void map_serial(Unary f, const double* x, double* out, int64_t n, double arg);
void map_omp(Unary f, const double* x, double* out, int64_t n, double arg);
void map(Unary f, const double* x, double* out, int64_t n, double arg = 0.0);

// out[i] = x[i] op y[i] on equal-length buffers.
enum class Binary { Add, Sub, Mul };
void zip_serial(Binary op, const double* x, const double* y, double* out, int64_t n);
void zip_omp(Binary op, const double* x, const double* y, double* out, int64_t n);
void zip(Binary op, const double* x, const double* y, double* out, int64_t n);

// out[i] += x[i] * y[i] (fused multiply-accumulate used by backward passes).
void fma_acc_serial(const double* x, const double* y, double* out, int64_t n);
void fma_acc_omp(const double* x, const double* y, double* out, int64_t n);
void fma_acc(const double* x, const double* y, double* out, int64_t n);

// out[i] += x[i] * s
void axpy_serial(const double* x, double s, double* out, int64_t n);
void axpy_omp(const double* x, double s, double* out, int64_t n);
void axpy(const double* x, double s, double* out, int64_t n);

}  // namespace vitalattn::kernels
