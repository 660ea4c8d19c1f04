#pragma once

// Test-only oracles: a plain nested-loop forward pass and textbook loss
// formulas, kept independent of the library kernels they are used to check.

#include "sdm/net.hpp"
#include "sdm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

inline std::vector<double> naive_forward(const sdm::Mlp& m, const double* x,
                                         std::vector<double>* abs_pre = nullptr) {
    std::vector<double> cur(x, x + m.input_dim());
    if (abs_pre) abs_pre->clear();
    for (std::size_t layer = 0; layer < m.num_layers(); ++layer) {
        const std::size_t in = m.layer_dims[layer], out = m.layer_dims[layer + 1];
        std::vector<double> next(out, 0.0);
        for (std::size_t j = 0; j < out; ++j) {
            double s = m.biases[layer][j];
            for (std::size_t i = 0; i < in; ++i) {
                s += cur[i] * m.weights[layer].at(i, j);
            }
            next[j] = s;
            if (abs_pre && layer + 1 < m.num_layers()) abs_pre->push_back(std::abs(s));
        }
        if (layer + 1 < m.num_layers()) {
            for (auto& v : next) v = v > 0.0 ? v : 0.0;
        }
        cur = std::move(next);
    }
    return cur;
}

// Textbook softmax, deliberately without max subtraction.
inline std::vector<double> naive_softmax(const std::vector<double>& s) {
    std::vector<double> p(s.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        p[i] = std::exp(s[i]);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}

// Loss with every data-dependent index and constant frozen at the values the
// implementation used at the evaluation point.
struct FrozenLoss {
    sdm::LossSpec::Kind kind = sdm::LossSpec::Kind::cross_entropy;
    int y = 1;
    int tau = 1;
    int nth = 1;
    double delta = 0.0;
    int sign = 0;
    double zeta = sdm::kDefaultZeta;
};

inline double frozen_loss_value(const FrozenLoss& f, const std::vector<double>& p) {
    switch (f.kind) {
        case sdm::LossSpec::Kind::cross_entropy:
            return -std::log(p[f.y - 1]);
        case sdm::LossSpec::Kind::neg_true_prob:
            return -p[f.y - 1];
        case sdm::LossSpec::Kind::prob_diff:
            return p[f.tau - 1] - p[f.y - 1];
        case sdm::LossSpec::Kind::dpdr: {
            const double u = p[f.tau - 1] - p[f.y - 1];
            const double denom =
                f.delta - f.sign * (p[f.tau - 1] - p[f.nth - 1] - f.delta) + f.zeta;
            return u / denom;
        }
    }
    return 0.0;
}

// Scalar function of a single [d] input, evaluated through the naive forward
// path. Row losses are differenced one at a time: a batch sum would let a
// huge frozen-zeta row loss swamp the floating-point resolution of the other
// rows' differences.
inline std::function<double(const sdm::Tensor&)> frozen_row_loss(const sdm::Mlp& m,
                                                                 FrozenLoss f) {
    return [&m, f](const sdm::Tensor& x) {
        return frozen_loss_value(f, naive_softmax(naive_forward(m, x.data())));
    };
}

inline double max_rel_error(const sdm::Tensor& a, const sdm::Tensor& b) {
    double scale = 1e-10;
    for (std::size_t i = 0; i < a.size(); ++i) {
        scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

// Random batch whose pre-activations stay clear of the relu kink, so central
// differences with h = 1e-5 remain valid.
inline sdm::Tensor smooth_batch(const sdm::Mlp& m, std::size_t rows, sdm::Rng& rng,
                                double kink_margin = 1e-3) {
    sdm::Tensor x({rows, m.input_dim()});
    for (std::size_t r = 0; r < rows; ++r) {
        for (int attempt = 0; attempt < 200; ++attempt) {
            for (std::size_t j = 0; j < m.input_dim(); ++j) {
                x.at(r, j) = rng.uniform01();
            }
            std::vector<double> pre;
            naive_forward(m, x.row_ptr(r), &pre);
            bool ok = true;
            for (double v : pre) {
                if (v < kink_margin) {
                    ok = false;
                    break;
                }
            }
            if (ok) break;
        }
    }
    return x;
}

struct GradCase {
    sdm::Tensor x;
    std::vector<int> y;
};

// A (batch, labels) pair on which the frozen ratio loss is finite-difference
// checkable. Even rows take y = argmax (the attack-failed state), odd rows a
// different label (the succeeded state). Batches are redrawn while any row's
// frozen denominator sits within `denom_margin` of its pole, because central
// differences are meaningless across it; the constant-denominator n=2 failed
// case (nth index == tau) is always fine. Direction correctness at degenerate
// denominators is asserted separately through sign-pattern tests.
inline GradCase gradient_check_case(const sdm::Mlp& m, std::size_t rows, int dpdr_n,
                                    const sdm::DeltaPolicy& pol, double zeta, sdm::Rng& rng,
                                    double denom_margin = 1e-3) {
    const std::size_t k = m.num_classes();
    GradCase out;
    for (int attempt = 0; attempt < 100; ++attempt) {
        out.x = smooth_batch(m, rows, rng);
        out.y.assign(rows, 1);
        sdm::Tensor probs({rows, k});
        for (std::size_t r = 0; r < rows; ++r) {
            const auto p = naive_softmax(naive_forward(m, out.x.row_ptr(r)));
            int top = 1;
            for (std::size_t j = 1; j < k; ++j) {
                if (p[j] > p[top - 1]) top = static_cast<int>(j) + 1;
            }
            out.y[r] = (r % 2 == 0) ? top : (top % static_cast<int>(k)) + 1;
            for (std::size_t j = 0; j < k; ++j) probs.at(r, j) = p[j];
        }
        const auto ctxs = sdm::build_dpdr_context(probs, out.y, dpdr_n, pol, zeta);
        bool ok = true;
        for (const auto& ctx : ctxs) {
            if (ctx.nth_label == ctx.tau) continue;
            const double denom =
                ctx.delta - ctx.sign * (ctx.p[ctx.tau - 1] - ctx.sorted_p[ctx.n - 1] - ctx.delta) +
                ctx.zeta;
            if (denom < denom_margin) {
                ok = false;
                break;
            }
        }
        if (ok) break;
    }
    return out;
}

} // namespace oracle
