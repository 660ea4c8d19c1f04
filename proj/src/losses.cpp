#include "sdm/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace sdm {

namespace {

void check_label(int y, std::size_t k, const char* who) {
    if (y < 1 || static_cast<std::size_t>(y) > k) {
        throw std::out_of_range(std::string(who) + ": label " + std::to_string(y) +
                                " outside 1.." + std::to_string(k));
    }
}

int argmax_row(const double* v, std::size_t k) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
        if (v[j] > v[best]) best = j;
    }
    return static_cast<int>(best) + 1;
}

} // namespace

int predicted_label(const Logits& s) {
    if (s.batch() != 1) throw std::invalid_argument("predicted_label: expected a single row");
    return argmax_row(s.row(0), s.num_classes());
}

std::vector<int> predicted_labels(const Tensor& logits) {
    std::vector<int> out(logits.rows());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        out[r] = argmax_row(logits.row_ptr(r), logits.cols());
    }
    return out;
}

int argmax_excluding(const double* p, std::size_t k, int excluded_label) {
    check_label(excluded_label, k, "argmax_excluding");
    int best = -1;
    for (std::size_t j = 0; j < k; ++j) {
        if (static_cast<int>(j) + 1 == excluded_label) continue;
        if (best < 0 || p[j] > p[best - 1]) best = static_cast<int>(j) + 1;
    }
    return best;
}

double margin_row(const double* p, std::size_t k, int y) {
    const int tau = argmax_excluding(p, k, y);
    return p[tau - 1] - p[y - 1];
}

double cross_entropy(const ProbVector& p, int y) {
    check_label(y, p.num_classes(), "cross_entropy");
    return -std::log(p.row(0)[y - 1]);
}

double neg_true_prob(const ProbVector& p, int y) {
    check_label(y, p.num_classes(), "neg_true_prob");
    return -p.row(0)[y - 1];
}

double prob_diff(const ProbVector& p, int y) {
    check_label(y, p.num_classes(), "prob_diff");
    return margin_row(p.row(0), p.num_classes(), y);
}

std::vector<DpdrContext> build_dpdr_context(const Tensor& probs, const std::vector<int>& y,
                                            int n, const DeltaPolicy& policy, double zeta) {
    const std::size_t rows = probs.rows(), k = probs.cols();
    if (rows == 0) throw std::invalid_argument("build_dpdr_context: empty batch");
    if (y.size() != rows) throw std::invalid_argument("build_dpdr_context: label count mismatch");
    if (n < 2 || static_cast<std::size_t>(n) > k) {
        throw std::invalid_argument("build_dpdr_context: stage order " + std::to_string(n) +
                                    " outside 2.." + std::to_string(k));
    }

    std::vector<DpdrContext> ctxs(rows);
    double max_gap = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* p = probs.row_ptr(r);
        check_label(y[r], k, "build_dpdr_context");
        DpdrContext& ctx = ctxs[r];
        ctx.p.assign(p, p + k);
        ctx.y = y[r];
        ctx.n = n;
        ctx.zeta = zeta;
        ctx.tau = argmax_excluding(p, k, y[r]);

        // Descending order, ties broken by lowest label index.
        std::vector<int> order(k);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [p](int a, int b) { return p[a] != p[b] ? p[a] > p[b] : a < b; });
        ctx.sorted_p.resize(k);
        for (std::size_t j = 0; j < k; ++j) ctx.sorted_p[j] = p[order[j]];
        ctx.nth_label = order[n - 1] + 1;

        const double u = p[ctx.tau - 1] - p[ctx.y - 1];
        ctx.sign = u > 0.0 ? 1 : (u < 0.0 ? -1 : 0);

        // tau is the top or second-ranked label, so this gap is never negative.
        max_gap = std::max(max_gap, p[ctx.tau - 1] - ctx.sorted_p[n - 1]);
    }

    const double delta =
        policy.fixed ? *policy.fixed : std::max(policy.floor, 0.5 * max_gap);
    for (auto& ctx : ctxs) ctx.delta = delta;
    return ctxs;
}

double dpdr_loss(const DpdrContext& ctx) {
    const double p_tau = ctx.p[ctx.tau - 1];
    const double p_y = ctx.p[ctx.y - 1];
    const double p_n = ctx.sorted_p[ctx.n - 1];
    const double u = p_tau - p_y;
    const double denom = ctx.delta - ctx.sign * (p_tau - p_n - ctx.delta) + ctx.zeta;
    if (!(denom > 0.0)) {
        throw std::logic_error("dpdr_loss: non-positive denominator (invariant violation)");
    }
    return u / denom;
}

void ce_logit_grad(const double* p, std::size_t k, int y, double* out) {
    check_label(y, k, "ce_logit_grad");
    for (std::size_t j = 0; j < k; ++j) out[j] = p[j];
    out[y - 1] -= 1.0;
}

void neg_true_prob_logit_grad(const double* p, std::size_t k, int y, double* out) {
    check_label(y, k, "neg_true_prob_logit_grad");
    // dL/dP = -e_y pushed through the softmax jacobian.
    const double p_y = p[y - 1];
    for (std::size_t j = 0; j < k; ++j) out[j] = p[j] * p_y;
    out[y - 1] -= p_y;
}

void prob_diff_logit_grad(const double* p, std::size_t k, int y, int tau, double* out) {
    check_label(y, k, "prob_diff_logit_grad");
    check_label(tau, k, "prob_diff_logit_grad");
    const double u = p[tau - 1] - p[y - 1];
    for (std::size_t j = 0; j < k; ++j) out[j] = -p[j] * u;
    out[tau - 1] += p[tau - 1];
    out[y - 1] -= p[y - 1];
}

void dpdr_logit_grad(const DpdrContext& ctx, double* out) {
    const std::size_t k = ctx.p.size();
    const double p_tau = ctx.p[ctx.tau - 1];
    const double p_y = ctx.p[ctx.y - 1];
    const double p_n = ctx.sorted_p[ctx.n - 1];
    const double u = p_tau - p_y;
    const double denom = ctx.delta - ctx.sign * (p_tau - p_n - ctx.delta) + ctx.zeta;
    if (!(denom > 0.0)) {
        throw std::logic_error("dpdr_logit_grad: non-positive denominator (invariant violation)");
    }

    // dL/dP is sparse: (e_tau - e_y)/denom + sign*u*(e_tau - e_nth)/denom^2,
    // with delta and sign held constant. When the nth label coincides with
    // tau the second term cancels itself.
    const double inv = 1.0 / denom;
    const double ratio_term = ctx.sign * u * inv * inv;
    std::vector<double> dldp(k, 0.0);
    dldp[ctx.tau - 1] += inv + ratio_term;
    dldp[ctx.y - 1] -= inv;
    dldp[ctx.nth_label - 1] -= ratio_term;

    double mix = 0.0;
    for (std::size_t j = 0; j < k; ++j) mix += dldp[j] * ctx.p[j];
    for (std::size_t j = 0; j < k; ++j) out[j] = ctx.p[j] * (dldp[j] - mix);
}

} // namespace sdm
