#pragma once

#include "sdm/net.hpp"

#include <cstdint>
#include <vector>

namespace sdm {

enum class Norm { linf, l2 };

const char* norm_name(Norm n);
Norm parse_norm(const std::string& s);

// (total -> cycles, stages, steps) presets; cycles*stages*steps == total.
struct Schedule {
    int total = 0;
    int cycles = 0;
    int stages = 0;
    int steps = 0;
};

const std::vector<Schedule>& schedule_registry();
Schedule schedule_lookup(int total); // throws for unknown totals, listing the presets

struct AttackConfig {
    Norm norm = Norm::linf;
    double epsilon = 8.0 / 255.0; // linf in pixel units, l2 as radius
    double alpha = 2.0 / 255.0;
    int cycles = 1;
    int stages = 5;
    int steps = 2;
    std::uint64_t seed = 0;      // used only by random_start
    bool clip_unit_box = true;
    bool track_best = true;
    bool random_start = false;   // pgd only; the staged attack always starts at x
    bool record_trace = false;
    DeltaPolicy delta;
    double zeta = kDefaultZeta;

    int total_schedule_steps() const { return cycles * stages * steps; }

    // Resolve cycles/stages/steps from a registry preset.
    AttackConfig with_total(int total) const {
        AttackConfig c = *this;
        const Schedule s = schedule_lookup(total);
        c.cycles = s.cycles;
        c.stages = s.stages;
        c.steps = s.steps;
        return c;
    }
};

struct TraceEntry {
    int cycle = 0;
    int stage = 0; // 0 for single-objective baselines
    int step = 0;
    double loss = 0.0;
    double p_true = 0.0;
    double p_tau = 0.0;
};

struct AttackOutcome {
    Tensor x_adv;            // [d]
    bool success = false;    // predicted(x_adv) != y
    std::size_t steps_used = 0;
    std::vector<TraceEntry> trace; // filled when record_trace is set
    Tensor best_x;           // iterate maximizing P_tau - P_y (track_best)
    bool best_success = false;
    double best_margin = 0.0;
};

// x'_t = x + clamp(x'_{t-1} - x + alpha*sgn(g), -eps, eps) for linf;
// normalized-gradient step with ball projection for l2; then unit-box clip.
Tensor step_update(const Tensor& x, const Tensor& x_cur, const Tensor& grad,
                   const AttackConfig& cfg);

AttackOutcome fgsm(const Mlp& m, const LabeledExample& ex, const AttackConfig& cfg);
AttackOutcome pgd(const Mlp& m, const LabeledExample& ex, const AttackConfig& cfg,
                  int total_steps);

std::vector<AttackOutcome> pgd_batch(const Mlp& m, const std::vector<LabeledExample>& batch,
                                     const AttackConfig& cfg, int total_steps);

// The staged attack: cycles of stages 1..N, each of T sign-gradient steps.
// Stage 1 ascends -P_y; stage n >= 2 ascends the ratio loss of order n, whose
// shared delta is recomputed from this batch at every step. Requires
// 2 <= stages <= K.
std::vector<AttackOutcome> sdm_attack(const Mlp& m, const std::vector<LabeledExample>& batch,
                                      const AttackConfig& cfg);

enum class AttackKind { none, fgsm, pgd, sdm };

const char* attack_kind_name(AttackKind k);
AttackKind parse_attack_kind(const std::string& s);

struct AttackSpec {
    AttackKind kind = AttackKind::none;
    AttackConfig cfg;
    int total_steps = 1; // pgd iteration count; sdm uses cfg cycles/stages/steps
};

std::vector<AttackOutcome> run_attack(const Mlp& m, const std::vector<LabeledExample>& batch,
                                      const AttackSpec& spec);

} // namespace sdm
