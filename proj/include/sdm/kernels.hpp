#pragma once

#include <cstddef>

namespace sdm::kernels {

enum class Backend { scalar, avx2 };

// Dispatch table for the arithmetic inner loops. The scalar implementations
// are the reference: they fix the exact arithmetic of every kernel, including
// accumulation order (matmul and matmul_at accumulate along k in index order;
// matmul_bt keeps four partial sums, one per k mod 4, combined as
// (s0+s1)+(s2+s3)). Vector backends must reproduce the reference bit for bit,
// so mul/add must not be contracted into fma and reductions must not be
// reassociated. The equivalence tests compare backends with exact equality,
// which keeps attack results independent of the backend selected at runtime.
struct Ops {
    // c[m*n] = a[m*k] . b[k*n]
    void (*matmul)(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n);
    // c[m*n] = a[m*k] . transpose(b[n*k])
    void (*matmul_bt)(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n);
    // c[m*n] = transpose(a[k*m]) . b[k*n]
    void (*matmul_at)(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n);
    // x[r*cols + j] += bias[j]
    void (*add_bias)(double* x, const double* bias, std::size_t rows, std::size_t cols);
    // out[i] = x[i] > 0 ? x[i] : 0
    void (*relu)(const double* x, double* out, std::size_t n);
    // out[i] = x[i] > 0 ? upstream[i] : 0
    void (*relu_mask_mul)(const double* x, const double* upstream, double* out, std::size_t n);
    // y[i] += a * x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // x[i] *= a
    void (*scale)(double a, double* x, std::size_t n);
    // out[i] = x0[i] + clamp(xc[i] - x0[i] + alpha*sgn(g[i]), -eps, eps),
    // then clamped into [0,1] when clip01 is set
    void (*linf_step)(const double* x0, const double* xc, const double* g,
                      double alpha, double eps, bool clip01, double* out, std::size_t n);
};

bool backend_available(Backend b);
Backend active_backend();
void set_backend(Backend b); // throws std::invalid_argument when unavailable
const char* backend_name(Backend b);

// Active table. The first call selects a backend: the SDM_KERNELS environment
// variable (scalar|avx2|auto) wins, otherwise the widest available one.
const Ops& ops();

} // namespace sdm::kernels
