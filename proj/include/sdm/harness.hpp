#pragma once

#include "sdm/attacks.hpp"
#include "sdm/dataset.hpp"

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sdm {

struct EvalOptions {
    std::size_t batch_size = 0; // 0 = the whole dataset in one attack batch
    bool best_iterate = false;  // count success on the best rather than final iterate
};

// Fraction of examples whose (attacked) prediction differs from the label.
// Already-misclassified clean examples are attacked like any other.
double evaluate_error_rate(const Mlp& m, const Dataset& ds,
                           const std::optional<AttackSpec>& attack = std::nullopt,
                           const EvalOptions& opts = {});

struct DiagnosticRow {
    std::string input_name;
    std::string attack_name;
    int y = 0;
    std::vector<double> s;
    std::vector<double> p; // softmax of s
    double ce = 0.0;       // -ln p[y-1]
    int pred = 0;          // argmax of s
    bool attack_success = false;
};

struct NamedAttack {
    std::string name;
    AttackSpec spec;
};

std::vector<DiagnosticRow> diagnose(const Mlp& m, const std::vector<LabeledExample>& examples,
                                    const std::vector<NamedAttack>& attacks,
                                    const EvalOptions& opts = {});

// Rows built straight from given logits, bypassing any model.
std::vector<DiagnosticRow> diagnose_logit_rows(const std::vector<std::vector<double>>& s_rows,
                                               int y);

// Looks for (correct, misclassified) row indices with ce[correct] > ce[mis]:
// a correctly classified input carrying the higher loss.
std::optional<std::pair<std::size_t, std::size_t>>
find_high_loss_failure_pair(const std::vector<DiagnosticRow>& rows);

void write_diagnostic_csv(const std::string& path, const std::vector<DiagnosticRow>& rows);

struct BenchRow {
    std::string defense;
    std::string attack;
    Norm norm = Norm::linf;
    double epsilon = 0.0;
    int total_steps = 0;
    double error_rate = 0.0;
    double wall_ms = 0.0;
    std::uint64_t seed = 0;
};

struct BenchReport {
    std::vector<BenchRow> rows; // sorted by (defense, attack, norm, eps, steps)
    std::string dataset_name;
    std::size_t batch_size = 0;
    bool best_iterate = false;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> model_hashes; // defense -> fnv1a-64 hex
    std::string out_path;
};

// One grid of attack settings evaluated against one model.
struct BenchRun {
    std::string defense;
    std::string model_path;
    std::vector<std::string> attacks; // fgsm | pgd | sdm
    std::vector<Norm> norms;
    std::vector<double> eps;
    std::vector<double> alpha; // empty -> eps/4; one value or paired with eps
    std::vector<int> steps;    // totals; sdm resolves them via the registry
};

struct BenchConfig {
    std::string dataset_spec;
    std::string out_path;
    std::uint64_t seed = 0;
    std::size_t batch_size = 0;
    bool best_iterate = false;
    bool timing = false; // off writes wall_ms as 0 so reruns are byte-identical
    std::vector<BenchRun> runs;
};

BenchConfig parse_benchmark_config(const std::string& path);
BenchReport run_benchmark(const BenchConfig& cfg);
BenchReport run_benchmark(const std::string& config_path);
void write_bench_csv(const std::string& path, const BenchReport& report);

// Plain SGD victim: arch [d, hidden..., K] seeded end to end.
Mlp train_victim(const Dataset& train, const std::vector<std::size_t>& hidden, double lr,
                 std::size_t epochs, std::size_t batch_size, std::uint64_t seed);

// Adversarial training: every batch is replaced by its attacked version
// before the gradient step. An inner attack with epsilon 0 reproduces
// train_victim bit for bit.
Mlp adversarial_train(const Dataset& train, const std::vector<std::size_t>& hidden,
                      const AttackSpec& inner, double lr, std::size_t epochs,
                      std::size_t batch_size, std::uint64_t seed);

std::string model_hash(const Mlp& m);

} // namespace sdm
