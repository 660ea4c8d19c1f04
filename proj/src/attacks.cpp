#include "sdm/attacks.hpp"

#include "sdm/kernels.hpp"
#include "sdm/rng.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace sdm {

namespace {

double l2_norm(const double* v, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i] * v[i];
    return std::sqrt(s);
}

void l2_step_rows(const Tensor& x0, const Tensor& xc, const Tensor& g,
                  const AttackConfig& cfg, Tensor& out) {
    const std::size_t rows = xc.rows(), d = xc.cols();
    std::vector<double> p(d);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x0r = x0.row_ptr(r);
        const double* xcr = xc.row_ptr(r);
        const double* gr = g.row_ptr(r);
        const double gn = l2_norm(gr, d);
        const double step = cfg.alpha / (gn > 1e-12 ? gn : 1e-12);
        for (std::size_t i = 0; i < d; ++i) p[i] = xcr[i] - x0r[i] + step * gr[i];
        const double pn = l2_norm(p.data(), d);
        if (pn > cfg.epsilon) {
            const double shrink = cfg.epsilon / pn;
            for (std::size_t i = 0; i < d; ++i) p[i] *= shrink;
        }
        double* o = out.row_ptr(r);
        for (std::size_t i = 0; i < d; ++i) {
            double v = x0r[i] + p[i];
            if (cfg.clip_unit_box) {
                v = v > 0.0 ? v : 0.0;
                v = v < 1.0 ? v : 1.0;
            }
            o[i] = v;
        }
    }
}

Tensor apply_step(const Tensor& x0, const Tensor& xc, const Tensor& g, const AttackConfig& cfg) {
    Tensor out(xc.shape());
    if (cfg.norm == Norm::linf) {
        kernels::ops().linf_step(x0.data(), xc.data(), g.data(), cfg.alpha, cfg.epsilon,
                                 cfg.clip_unit_box, out.data(), xc.size());
    } else {
        l2_step_rows(x0, xc, g, cfg, out);
    }
    return out;
}

void check_config(const AttackConfig& cfg) {
    if (!(cfg.epsilon >= 0.0)) throw std::invalid_argument("attack: epsilon must be >= 0");
    if (!(cfg.alpha >= 0.0)) throw std::invalid_argument("attack: alpha must be >= 0");
}

Tensor pack_batch(const std::vector<LabeledExample>& batch, std::size_t d) {
    Tensor x({batch.size(), d});
    for (std::size_t r = 0; r < batch.size(); ++r) {
        if (batch[r].x.size() != d) {
            throw std::invalid_argument("attack: example dimension mismatch");
        }
        std::memcpy(x.row_ptr(r), batch[r].x.data(), d * sizeof(double));
    }
    return x;
}

std::vector<int> pack_labels(const std::vector<LabeledExample>& batch, std::size_t k) {
    std::vector<int> y(batch.size());
    for (std::size_t r = 0; r < batch.size(); ++r) {
        if (batch[r].y < 1 || static_cast<std::size_t>(batch[r].y) > k) {
            throw std::invalid_argument("attack: label outside 1.." + std::to_string(k));
        }
        y[r] = batch[r].y;
    }
    return y;
}

struct BestTracker {
    bool enabled = false;
    Tensor best;                     // [B,d]
    std::vector<double> margin;
    std::vector<bool> seeded;

    void init(std::size_t rows, std::size_t d, bool on) {
        enabled = on;
        if (!on) return;
        best = Tensor({rows, d});
        margin.assign(rows, 0.0);
        seeded.assign(rows, false);
    }

    void observe(const Tensor& xc, const Tensor& probs, const std::vector<int>& y) {
        if (!enabled) return;
        const std::size_t k = probs.cols(), d = xc.cols();
        for (std::size_t r = 0; r < probs.rows(); ++r) {
            const double m = margin_row(probs.row_ptr(r), k, y[r]);
            if (!seeded[r] || m > margin[r]) {
                seeded[r] = true;
                margin[r] = m;
                std::memcpy(best.row_ptr(r), xc.row_ptr(r), d * sizeof(double));
            }
        }
    }
};

// Shared loop body: runs the given stage plan over the batch.
struct StagePlan {
    int cycle = 1;
    int stage = 0;      // trace id
    int steps = 0;
    LossSpec loss;
};

std::vector<AttackOutcome> run_plan(const Mlp& m, const std::vector<LabeledExample>& batch,
                                    const AttackConfig& cfg,
                                    const std::vector<StagePlan>& plan, bool random_start) {
    if (batch.empty()) throw std::invalid_argument("attack: empty batch");
    check_config(cfg);
    m.validate();
    const std::size_t d = m.input_dim(), k = m.num_classes(), rows = batch.size();
    const Tensor x0 = pack_batch(batch, d);
    const std::vector<int> y = pack_labels(batch, k);

    Tensor xc = x0;
    if (random_start) {
        Rng rng(cfg.seed, /*stream=*/7);
        for (std::size_t i = 0; i < xc.size(); ++i) {
            xc[i] += rng.uniform(-cfg.epsilon, cfg.epsilon);
        }
        // Normalize the start back into the feasible set (a zero-gradient step
        // projects without moving).
        xc = apply_step(x0, xc, Tensor(xc.shape()), cfg);
    }

    BestTracker tracker;
    tracker.init(rows, d, cfg.track_best);

    std::vector<std::vector<TraceEntry>> traces(cfg.record_trace ? rows : 0);
    std::size_t steps_used = 0;

    for (const StagePlan& sp : plan) {
        for (int t = 1; t <= sp.steps; ++t) {
            LossGrad lg = loss_input_gradient(m, xc, y, sp.loss);
            for (std::size_t r = 0; r < rows; ++r) {
                if (!std::isfinite(lg.values[r])) {
                    throw std::runtime_error("attack: non-finite loss at cycle " +
                                             std::to_string(sp.cycle) + " stage " +
                                             std::to_string(sp.stage) + " step " +
                                             std::to_string(t));
                }
            }
            tracker.observe(xc, lg.probs, y);
            if (cfg.record_trace) {
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* p = lg.probs.row_ptr(r);
                    traces[r].push_back({sp.cycle, sp.stage, t, lg.values[r], p[y[r] - 1],
                                         p[argmax_excluding(p, k, y[r]) - 1]});
                }
            }
            xc = apply_step(x0, xc, lg.input_grad, cfg);
            ++steps_used;
        }
    }

    // Final evaluation for success flags and a last best-tracking observation.
    const Tensor logits = forward_logits(m, xc).values;
    const Tensor probs = softmax_rows(logits);
    tracker.observe(xc, probs, y);
    const std::vector<int> preds = predicted_labels(logits);

    std::vector<AttackOutcome> outcomes(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        AttackOutcome& o = outcomes[r];
        o.x_adv = xc.row_copy(r);
        o.success = preds[r] != y[r];
        o.steps_used = steps_used;
        if (cfg.record_trace) o.trace = std::move(traces[r]);
        if (tracker.enabled) {
            o.best_x = tracker.best.row_copy(r);
            o.best_margin = tracker.margin[r];
            const Tensor bl = forward_logits(m, o.best_x).values;
            o.best_success = predicted_label(Logits(bl)) != y[r];
        } else {
            o.best_x = o.x_adv;
            o.best_success = o.success;
        }
    }
    return outcomes;
}

} // namespace

const char* norm_name(Norm n) { return n == Norm::linf ? "linf" : "l2"; }

Norm parse_norm(const std::string& s) {
    if (s == "linf") return Norm::linf;
    if (s == "l2") return Norm::l2;
    throw std::invalid_argument("unknown norm '" + s + "' (expected linf or l2)");
}

const std::vector<Schedule>& schedule_registry() {
    static const std::vector<Schedule> table = {
        {10, 1, 5, 2},  {20, 1, 5, 4},   {50, 2, 5, 5},    {100, 2, 5, 10},
        {200, 4, 5, 10}, {500, 4, 5, 25}, {1000, 5, 5, 40},
    };
    return table;
}

Schedule schedule_lookup(int total) {
    for (const Schedule& s : schedule_registry()) {
        if (s.total == total) return s;
    }
    std::string presets;
    for (const Schedule& s : schedule_registry()) {
        if (!presets.empty()) presets += ", ";
        presets += std::to_string(s.total);
    }
    throw std::invalid_argument("no schedule preset for total " + std::to_string(total) +
                                " (supported: " + presets +
                                "; pass explicit cycles/stages/steps instead)");
}

Tensor step_update(const Tensor& x, const Tensor& x_cur, const Tensor& grad,
                   const AttackConfig& cfg) {
    if (!x.same_shape(x_cur) || !x.same_shape(grad)) {
        throw std::invalid_argument("step_update: shape mismatch");
    }
    if (!grad.all_finite()) throw std::invalid_argument("step_update: non-finite gradient");
    check_config(cfg);
    const Tensor x2 = x.rank() == 1 ? x.reshaped({1, x.size()}) : x;
    const Tensor xc2 = x_cur.rank() == 1 ? x_cur.reshaped({1, x_cur.size()}) : x_cur;
    const Tensor g2 = grad.rank() == 1 ? grad.reshaped({1, grad.size()}) : grad;
    Tensor out = apply_step(x2, xc2, g2, cfg);
    return x.rank() == 1 ? out.reshaped(x.shape()) : out;
}

AttackOutcome fgsm(const Mlp& m, const LabeledExample& ex, const AttackConfig& cfg) {
    AttackConfig c = cfg;
    c.norm = Norm::linf;
    c.alpha = cfg.epsilon;
    c.random_start = false;
    return pgd_batch(m, {ex}, c, 1).front();
}

AttackOutcome pgd(const Mlp& m, const LabeledExample& ex, const AttackConfig& cfg,
                  int total_steps) {
    return pgd_batch(m, {ex}, cfg, total_steps).front();
}

std::vector<AttackOutcome> pgd_batch(const Mlp& m, const std::vector<LabeledExample>& batch,
                                     const AttackConfig& cfg, int total_steps) {
    if (total_steps < 1) throw std::invalid_argument("pgd: total_steps must be >= 1");
    std::vector<StagePlan> plan{{1, 0, total_steps, LossSpec::ce()}};
    return run_plan(m, batch, cfg, plan, cfg.random_start);
}

std::vector<AttackOutcome> sdm_attack(const Mlp& m, const std::vector<LabeledExample>& batch,
                                      const AttackConfig& cfg) {
    if (cfg.cycles < 1) throw std::invalid_argument("sdm: cycles must be >= 1");
    if (cfg.stages < 2) {
        throw std::invalid_argument("sdm: stages must be >= 2 (stage 1 would reduce to a "
                                    "plain negative-probability ascent)");
    }
    if (cfg.steps < 1) throw std::invalid_argument("sdm: steps must be >= 1");
    if (static_cast<std::size_t>(cfg.stages) > m.num_classes()) {
        throw std::invalid_argument("sdm: stages (" + std::to_string(cfg.stages) +
                                    ") must not exceed the class count (" +
                                    std::to_string(m.num_classes()) + ")");
    }

    std::vector<StagePlan> plan;
    plan.reserve(static_cast<std::size_t>(cfg.cycles) * cfg.stages);
    for (int c = 1; c <= cfg.cycles; ++c) {
        for (int n = 1; n <= cfg.stages; ++n) {
            LossSpec loss = n == 1 ? LossSpec::neg_prob()
                                   : LossSpec::dpdr_stage(n, cfg.delta, cfg.zeta);
            plan.push_back({c, n, cfg.steps, loss});
        }
    }
    // Stage hand-off per the algorithm: the next stage starts from x'_T, which
    // a running current iterate gives for free.
    return run_plan(m, batch, cfg, plan, /*random_start=*/false);
}

const char* attack_kind_name(AttackKind k) {
    switch (k) {
        case AttackKind::none: return "none";
        case AttackKind::fgsm: return "fgsm";
        case AttackKind::pgd: return "pgd";
        case AttackKind::sdm: return "sdm";
    }
    return "?";
}

AttackKind parse_attack_kind(const std::string& s) {
    if (s == "none") return AttackKind::none;
    if (s == "fgsm") return AttackKind::fgsm;
    if (s == "pgd") return AttackKind::pgd;
    if (s == "sdm") return AttackKind::sdm;
    throw std::invalid_argument("unknown attack '" + s + "' (expected none, fgsm, pgd or sdm)");
}

std::vector<AttackOutcome> run_attack(const Mlp& m, const std::vector<LabeledExample>& batch,
                                      const AttackSpec& spec) {
    switch (spec.kind) {
        case AttackKind::none: {
            std::vector<AttackOutcome> out;
            out.reserve(batch.size());
            for (const auto& ex : batch) {
                AttackOutcome o;
                o.x_adv = ex.x;
                o.best_x = ex.x;
                const Logits s = forward_logits(m, ex.x);
                o.success = predicted_label(s) != ex.y;
                o.best_success = o.success;
                const Tensor p = softmax_rows(s.values);
                o.best_margin = margin_row(p.data(), m.num_classes(), ex.y);
                out.push_back(std::move(o));
            }
            return out;
        }
        case AttackKind::fgsm: {
            std::vector<AttackOutcome> out;
            out.reserve(batch.size());
            for (const auto& ex : batch) out.push_back(fgsm(m, ex, spec.cfg));
            return out;
        }
        case AttackKind::pgd:
            return pgd_batch(m, batch, spec.cfg, spec.total_steps);
        case AttackKind::sdm:
            return sdm_attack(m, batch, spec.cfg);
    }
    throw std::invalid_argument("run_attack: bad attack kind");
}

} // namespace sdm
