#if defined(SDM_HAVE_AVX2)

#include "sdm/kernels.hpp"

#include <immintrin.h>

// AVX2 variants of the reference kernels. Per-element accumulation order is
// identical to kernels_scalar.cpp and no fma contraction is used, so every
// result matches the scalar backend bit for bit (asserted by the equivalence
// tests). These functions must only be called after a runtime AVX2 check.

namespace sdm::kernels {
namespace {

void matmul_avx2(const double* a, const double* b, double* c,
                 std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ar = a + i * k;
        double* cr = c + i * n;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            __m256d acc = _mm256_setzero_pd();
            for (std::size_t t = 0; t < k; ++t) {
                const __m256d av = _mm256_set1_pd(ar[t]);
                const __m256d bv = _mm256_loadu_pd(b + t * n + j);
                acc = _mm256_add_pd(acc, _mm256_mul_pd(av, bv));
            }
            _mm256_storeu_pd(cr + j, acc);
        }
        for (; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < k; ++t) {
                acc += ar[t] * b[t * n + j];
            }
            cr[j] = acc;
        }
    }
}

void matmul_bt_avx2(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ar = a + i * k;
        double* cr = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* br = b + j * k;
            __m256d acc = _mm256_setzero_pd();
            std::size_t t = 0;
            for (; t + 4 <= k; t += 4) {
                acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(ar + t),
                                                       _mm256_loadu_pd(br + t)));
            }
            alignas(32) double s[4];
            _mm256_store_pd(s, acc);
            if (t < k) s[0] += ar[t] * br[t];
            if (t + 1 < k) s[1] += ar[t + 1] * br[t + 1];
            if (t + 2 < k) s[2] += ar[t + 2] * br[t + 2];
            cr[j] = (s[0] + s[1]) + (s[2] + s[3]);
        }
    }
}

void matmul_at_avx2(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m * n; ++i) c[i] = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
        const double* ar = a + t * m;
        const double* br = b + t * n;
        for (std::size_t i = 0; i < m; ++i) {
            const __m256d av = _mm256_set1_pd(ar[i]);
            double* cr = c + i * n;
            std::size_t j = 0;
            for (; j + 4 <= n; j += 4) {
                const __m256d cv = _mm256_loadu_pd(cr + j);
                _mm256_storeu_pd(cr + j, _mm256_add_pd(cv, _mm256_mul_pd(av, _mm256_loadu_pd(br + j))));
            }
            for (; j < n; ++j) {
                cr[j] += ar[i] * br[j];
            }
        }
    }
}

void add_bias_avx2(double* x, const double* bias, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* xr = x + r * cols;
        std::size_t j = 0;
        for (; j + 4 <= cols; j += 4) {
            const __m256d xv = _mm256_loadu_pd(xr + j);
            _mm256_storeu_pd(xr + j, _mm256_add_pd(xv, _mm256_loadu_pd(bias + j)));
        }
        for (; j < cols; ++j) {
            xr[j] += bias[j];
        }
    }
}

void relu_avx2(const double* x, double* out, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    }
    for (; i < n; ++i) {
        out[i] = x[i] > 0.0 ? x[i] : 0.0;
    }
}

void relu_mask_mul_avx2(const double* x, const double* upstream, double* out, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        _mm256_storeu_pd(out + i, _mm256_and_pd(mask, _mm256_loadu_pd(upstream + i)));
    }
    for (; i < n; ++i) {
        out[i] = x[i] > 0.0 ? upstream[i] : 0.0;
    }
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d yv = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i, _mm256_add_pd(yv, _mm256_mul_pd(av, _mm256_loadu_pd(x + i))));
    }
    for (; i < n; ++i) {
        y[i] += a * x[i];
    }
}

void scale_avx2(double a, double* x, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) {
        x[i] *= a;
    }
}

void linf_step_avx2(const double* x0, const double* xc, const double* g,
                    double alpha, double eps, bool clip01, double* out, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d pos_step = _mm256_set1_pd(alpha);
    const __m256d neg_step = _mm256_set1_pd(-alpha);
    const __m256d lo = _mm256_set1_pd(-eps);
    const __m256d hi = _mm256_set1_pd(eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gv = _mm256_loadu_pd(g + i);
        const __m256d x0v = _mm256_loadu_pd(x0 + i);
        const __m256d pos = _mm256_cmp_pd(gv, zero, _CMP_GT_OQ);
        const __m256d neg = _mm256_cmp_pd(gv, zero, _CMP_LT_OQ);
        const __m256d step = _mm256_or_pd(_mm256_and_pd(pos, pos_step),
                                          _mm256_and_pd(neg, neg_step));
        __m256d p = _mm256_add_pd(_mm256_sub_pd(_mm256_loadu_pd(xc + i), x0v), step);
        p = _mm256_min_pd(_mm256_max_pd(p, lo), hi);
        __m256d v = _mm256_add_pd(x0v, p);
        if (clip01) {
            v = _mm256_min_pd(_mm256_max_pd(v, zero), one);
        }
        _mm256_storeu_pd(out + i, v);
    }
    for (; i < n; ++i) {
        const double step = g[i] > 0.0 ? alpha : (g[i] < 0.0 ? -alpha : 0.0);
        double p = xc[i] - x0[i] + step;
        p = p > -eps ? p : -eps;
        p = p < eps ? p : eps;
        double v = x0[i] + p;
        if (clip01) {
            v = v > 0.0 ? v : 0.0;
            v = v < 1.0 ? v : 1.0;
        }
        out[i] = v;
    }
}

} // namespace

const Ops& avx2_ops() {
    static const Ops table = {
        matmul_avx2,  matmul_bt_avx2, matmul_at_avx2, add_bias_avx2, relu_avx2,
        relu_mask_mul_avx2, axpy_avx2, scale_avx2, linf_step_avx2,
    };
    return table;
}

} // namespace sdm::kernels

#endif // SDM_HAVE_AVX2
