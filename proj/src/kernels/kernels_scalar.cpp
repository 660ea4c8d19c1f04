#include "sdm/kernels.hpp"

// Reference kernels. Keep these boring: the arithmetic order written here is
// the contract every other backend has to match exactly.

namespace sdm::kernels {
namespace {

void matmul_scalar(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ar = a + i * k;
        double* cr = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t t = 0; t < k; ++t) {
                acc += ar[t] * b[t * n + j];
            }
            cr[j] = acc;
        }
    }
}

void matmul_bt_scalar(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n) {
    // Four interleaved partial sums so a 4-lane vector backend can agree
    // bit for bit after the fixed (s0+s1)+(s2+s3) combine.
    for (std::size_t i = 0; i < m; ++i) {
        const double* ar = a + i * k;
        double* cr = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* br = b + j * k;
            double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
            std::size_t t = 0;
            for (; t + 4 <= k; t += 4) {
                s0 += ar[t] * br[t];
                s1 += ar[t + 1] * br[t + 1];
                s2 += ar[t + 2] * br[t + 2];
                s3 += ar[t + 3] * br[t + 3];
            }
            if (t < k) s0 += ar[t] * br[t];
            if (t + 1 < k) s1 += ar[t + 1] * br[t + 1];
            if (t + 2 < k) s2 += ar[t + 2] * br[t + 2];
            cr[j] = (s0 + s1) + (s2 + s3);
        }
    }
}

void matmul_at_scalar(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m * n; ++i) c[i] = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
        const double* ar = a + t * m;
        const double* br = b + t * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double ai = ar[i];
            double* cr = c + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                cr[j] += ai * br[j];
            }
        }
    }
}

void add_bias_scalar(double* x, const double* bias, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* xr = x + r * cols;
        for (std::size_t j = 0; j < cols; ++j) {
            xr[j] += bias[j];
        }
    }
}

void relu_scalar(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = x[i] > 0.0 ? x[i] : 0.0;
    }
}

void relu_mask_mul_scalar(const double* x, const double* upstream, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = x[i] > 0.0 ? upstream[i] : 0.0;
    }
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += a * x[i];
    }
}

void scale_scalar(double a, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        x[i] *= a;
    }
}

void linf_step_scalar(const double* x0, const double* xc, const double* g,
                      double alpha, double eps, bool clip01, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
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

const Ops& scalar_ops() {
    static const Ops table = {
        matmul_scalar,  matmul_bt_scalar, matmul_at_scalar, add_bias_scalar, relu_scalar,
        relu_mask_mul_scalar, axpy_scalar, scale_scalar, linf_step_scalar,
    };
    return table;
}

} // namespace sdm::kernels
