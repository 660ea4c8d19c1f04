#pragma once

#include "sdm/tensor.hpp"

#include <optional>
#include <vector>

namespace sdm {

constexpr double kDefaultZeta = 1e-10;

// Delta selection for the ratio loss. Shared across the attack batch:
// delta = max(floor, 0.5 * max over rows of (P_tau - nth largest P)),
// recomputed at every iteration step and treated as a constant by gradients.
// `fixed` overrides the computed value (tests, sensitivity runs).
struct DeltaPolicy {
    double floor = 1e-6;
    std::optional<double> fixed;
};

// Per-row quantities for the directional probability difference ratio loss.
// Labels are 1-based throughout.
struct DpdrContext {
    std::vector<double> p;        // row probabilities
    int y = 0;                    // true label
    int tau = 0;                  // argmax over labels != y, ties -> lowest
    int n = 2;                    // stage order, 2 <= n <= K
    std::vector<double> sorted_p; // p in descending order
    int nth_label = 0;            // label holding sorted_p[n-1], ties -> lowest
    double delta = 0.0;
    double zeta = kDefaultZeta;
    int sign = 0;                 // sign(P_tau - P_y), frozen for gradients
};

// 1-based index of the maximum entry, ties -> lowest index.
int predicted_label(const Logits& s);
std::vector<int> predicted_labels(const Tensor& logits);

// 1-based argmax over labels != excluded, ties -> lowest index.
int argmax_excluding(const double* p, std::size_t k, int excluded_label);

// P_tau - P_y for one probability row.
double margin_row(const double* p, std::size_t k, int y);

double cross_entropy(const ProbVector& p, int y); // -ln P_y
double neg_true_prob(const ProbVector& p, int y); // -P_y
double prob_diff(const ProbVector& p, int y);     // P_tau - P_y

std::vector<DpdrContext> build_dpdr_context(const Tensor& probs, const std::vector<int>& y,
                                            int n, const DeltaPolicy& policy = {},
                                            double zeta = kDefaultZeta);

// (P_tau - P_y) / (delta - sign(P_tau - P_y) * (P_tau - P_n - delta) + zeta).
// The denominator is positive for every context built by build_dpdr_context;
// a non-positive one trips an internal invariant check.
double dpdr_loss(const DpdrContext& ctx);

// dL/dS for a single probability row; out receives k entries. delta, the
// frozen sign and the tau / nth-label indices are constants to the gradient.
void ce_logit_grad(const double* p, std::size_t k, int y, double* out);
void neg_true_prob_logit_grad(const double* p, std::size_t k, int y, double* out);
void prob_diff_logit_grad(const double* p, std::size_t k, int y, int tau, double* out);
void dpdr_logit_grad(const DpdrContext& ctx, double* out);

} // namespace sdm
