// Command line front end: victim training, adversarial training, single
// attack runs, benchmark grids, diagnostics and the schedule registry.

#include "CLI11.hpp"

#include "sdm/harness.hpp"
#include "sdm/kernels.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

// Accepts plain decimals and pixel fractions like 8/255.
double parse_real(const std::string& s) {
    const std::size_t slash = s.find('/');
    if (slash == std::string::npos) return std::stod(s);
    return std::stod(s.substr(0, slash)) / std::stod(s.substr(slash + 1));
}

std::vector<std::size_t> parse_dims(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stoul(item));
    }
    return out;
}

struct AttackFlags {
    std::string attack = "sdm";
    std::string norm = "linf";
    std::string eps = "8/255";
    std::string alpha;
    int total_steps = 0;
    int cycles = 0, stages = 0, steps = 0;
    std::uint64_t seed = 0;
    bool track_best = true;
    bool random_start = false;

    void add_to(CLI::App* cmd, bool with_kind = true, bool with_seed = true) {
        if (with_kind) {
            cmd->add_option("--attack", attack, "fgsm, pgd or sdm")
                ->check(CLI::IsMember({"fgsm", "pgd", "sdm"}));
        }
        cmd->add_option("--norm", norm, "linf or l2")->check(CLI::IsMember({"linf", "l2"}));
        cmd->add_option("--eps", eps, "perturbation budget (accepts a/b)");
        cmd->add_option("--alpha", alpha, "step size (accepts a/b); default eps/4");
        cmd->add_option("--total-steps", total_steps, "total steps (sdm: registry preset)");
        cmd->add_option("--cycles", cycles, "sdm cycles (with --stages/--steps)");
        cmd->add_option("--stages", stages, "sdm stages");
        cmd->add_option("--steps", steps, "sdm steps per stage");
        if (with_seed) cmd->add_option("--seed", seed, "attack seed (random starts only)");
        cmd->add_flag("--track-best,!--no-track-best", track_best,
                      "track the best-margin iterate (default on)");
        cmd->add_flag("--random-start", random_start, "pgd: start from a random point");
    }

    sdm::AttackSpec build() const {
        sdm::AttackSpec spec;
        spec.kind = sdm::parse_attack_kind(attack);
        spec.cfg.norm = sdm::parse_norm(norm);
        spec.cfg.epsilon = parse_real(eps);
        spec.cfg.alpha = alpha.empty() ? spec.cfg.epsilon / 4.0 : parse_real(alpha);
        spec.cfg.seed = seed;
        spec.cfg.track_best = track_best;
        spec.cfg.random_start = random_start;
        if (spec.kind == sdm::AttackKind::sdm) {
            if (cycles > 0 || stages > 0 || steps > 0) {
                if (cycles < 1 || stages < 1 || steps < 1) {
                    throw CLI::ValidationError("--cycles/--stages/--steps must all be set");
                }
                spec.cfg.cycles = cycles;
                spec.cfg.stages = stages;
                spec.cfg.steps = steps;
            } else {
                spec.cfg = spec.cfg.with_total(total_steps > 0 ? total_steps : 100);
            }
            spec.total_steps = spec.cfg.total_schedule_steps();
        } else {
            spec.total_steps = total_steps > 0 ? total_steps : 1;
        }
        return spec;
    }
};

void write_single_row_csv(const std::string& path, const std::string& defense,
                          const std::string& attack, const sdm::AttackSpec& spec, double rate,
                          std::uint64_t seed) {
    sdm::BenchReport report;
    report.rows.push_back({defense, attack, spec.cfg.norm, spec.cfg.epsilon, spec.total_steps,
                           rate, 0.0, seed});
    sdm::write_bench_csv(path, report);
}

std::string defense_name_from_path(const std::string& path) {
    std::size_t slash = path.find_last_of("/\\");
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    const std::size_t dot = base.find_last_of('.');
    if (dot != std::string::npos) base = base.substr(0, dot);
    return base.empty() ? "model" : base;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"adversarial attack engine: staged sign-gradient attacks, baselines, "
                 "victim training and benchmarking"};
    app.require_subcommand(1);

    std::string kernels = "auto";
    app.add_option("--kernels", kernels, "kernel backend: scalar, avx2 or auto")
        ->check(CLI::IsMember({"scalar", "avx2", "auto"}));

    // train
    auto* train = app.add_subcommand("train", "train a plain victim model");
    std::string train_dataset, train_model, train_hidden = "32";
    std::size_t train_epochs = 40, train_batch = 32;
    double train_lr = 0.2;
    std::uint64_t train_seed = 1;
    train->add_option("--dataset", train_dataset, "dataset spec")->required();
    train->add_option("--model", train_model, "output model path")->required();
    train->add_option("--hidden", train_hidden, "hidden layer sizes, e.g. 32,16");
    train->add_option("--epochs", train_epochs, "training epochs");
    train->add_option("--lr", train_lr, "learning rate");
    train->add_option("--batch-size", train_batch, "sgd batch size");
    train->add_option("--seed", train_seed, "init and shuffle seed");

    // advtrain
    auto* advtrain = app.add_subcommand("advtrain", "adversarially train a victim model");
    std::string adv_dataset, adv_model, adv_hidden = "32";
    std::size_t adv_epochs = 40, adv_batch = 32;
    double adv_lr = 0.2;
    std::uint64_t adv_seed = 1;
    AttackFlags adv_attack;
    adv_attack.total_steps = 10;
    advtrain->add_option("--dataset", adv_dataset, "dataset spec")->required();
    advtrain->add_option("--model", adv_model, "output model path")->required();
    advtrain->add_option("--hidden", adv_hidden, "hidden layer sizes");
    advtrain->add_option("--epochs", adv_epochs, "training epochs");
    advtrain->add_option("--lr", adv_lr, "learning rate");
    advtrain->add_option("--batch-size", adv_batch, "sgd batch size");
    advtrain->add_option("--seed", adv_seed, "init and shuffle seed");
    adv_attack.add_to(advtrain, /*with_kind=*/true, /*with_seed=*/false);

    // attack
    auto* attack = app.add_subcommand("attack", "attack a model over a dataset");
    std::string atk_dataset, atk_model, atk_out;
    std::size_t atk_batch = 0;
    bool atk_best_iterate = false;
    AttackFlags atk_flags;
    attack->add_option("--dataset", atk_dataset, "dataset spec")->required();
    attack->add_option("--model", atk_model, "model path")->required();
    attack->add_option("--out", atk_out, "write a one-row benchmark csv");
    attack->add_option("--batch-size", atk_batch, "attack batch size (0 = whole set)");
    attack->add_flag("--best-iterate", atk_best_iterate, "count success on best iterates");
    atk_flags.add_to(attack);

    // bench
    auto* bench = app.add_subcommand("bench", "run a benchmark config");
    std::string bench_config;
    bench->add_option("--config", bench_config, "benchmark config file")->required();

    // diagnose
    auto* diagnose = app.add_subcommand("diagnose", "per-label score/probability rows");
    std::string diag_dataset, diag_model, diag_attacks = "pgd:100,sdm:100", diag_out;
    std::string diag_logits_csv;
    int diag_label = 0;
    std::size_t diag_limit = 50;
    AttackFlags diag_flags;
    diagnose->add_option("--dataset", diag_dataset, "dataset spec");
    diagnose->add_option("--model", diag_model, "model path");
    diagnose->add_option("--attacks", diag_attacks, "list like pgd:100,sdm:100,fgsm");
    diagnose->add_option("--limit", diag_limit, "examples to diagnose");
    diagnose->add_option("--out", diag_out, "write diagnostic csv");
    diagnose->add_option("--logits-csv", diag_logits_csv,
                         "csv of raw logit rows; bypasses --dataset/--model");
    diagnose->add_option("--label", diag_label, "true label for --logits-csv rows");
    diag_flags.add_to(diagnose, /*with_kind=*/false);

    // schedule
    auto* schedule = app.add_subcommand("schedule", "print the total-steps registry");

    try {
        app.parse(argc, argv);

        if (kernels == "scalar") {
            sdm::kernels::set_backend(sdm::kernels::Backend::scalar);
        } else if (kernels == "avx2") {
            sdm::kernels::set_backend(sdm::kernels::Backend::avx2);
        }

        if (*schedule) {
            std::printf("total  cycles  stages  steps\n");
            for (const auto& s : sdm::schedule_registry()) {
                std::printf("%5d  %6d  %6d  %5d\n", s.total, s.cycles, s.stages, s.steps);
            }
            return 0;
        }

        if (*train) {
            const sdm::Dataset ds = sdm::parse_dataset_spec(train_dataset);
            const sdm::Mlp model = sdm::train_victim(ds, parse_dims(train_hidden), train_lr,
                                                     train_epochs, train_batch, train_seed);
            sdm::save_model(model, train_model);
            const double err = sdm::evaluate_error_rate(model, ds);
            std::printf("trained on %s (%zu examples, d=%zu, k=%zu)\n", ds.name.c_str(),
                        ds.size(), ds.d, ds.k);
            std::printf("clean error rate %.4f; model %s -> %s\n", err,
                        sdm::model_hash(model).c_str(), train_model.c_str());
            return 0;
        }

        if (*advtrain) {
            const sdm::Dataset ds = sdm::parse_dataset_spec(adv_dataset);
            const sdm::AttackSpec inner = adv_attack.build();
            const sdm::Mlp model = sdm::adversarial_train(ds, parse_dims(adv_hidden), inner,
                                                          adv_lr, adv_epochs, adv_batch, adv_seed);
            sdm::save_model(model, adv_model);
            const double err = sdm::evaluate_error_rate(model, ds);
            std::printf("adversarially trained (inner %s, eps %.6g, %d total steps)\n",
                        sdm::attack_kind_name(inner.kind), inner.cfg.epsilon, inner.total_steps);
            std::printf("clean error rate %.4f; model %s -> %s\n", err,
                        sdm::model_hash(model).c_str(), adv_model.c_str());
            return 0;
        }

        if (*attack) {
            const sdm::Dataset ds = sdm::parse_dataset_spec(atk_dataset);
            const sdm::Mlp model = sdm::load_model(atk_model);
            const sdm::AttackSpec spec = atk_flags.build();
            const sdm::EvalOptions opts{atk_batch, atk_best_iterate};
            const double clean = sdm::evaluate_error_rate(model, ds);
            const double attacked = sdm::evaluate_error_rate(model, ds, spec, opts);
            std::printf("dataset %s, model %s\n", ds.name.c_str(),
                        sdm::model_hash(model).c_str());
            std::printf("clean error rate    %.6f\n", clean);
            std::printf("%s(%d) error rate  %.6f  (norm %s, eps %.6g, alpha %.6g%s)\n",
                        sdm::attack_kind_name(spec.kind), spec.total_steps, attacked,
                        sdm::norm_name(spec.cfg.norm), spec.cfg.epsilon, spec.cfg.alpha,
                        atk_best_iterate ? ", best-iterate" : "");
            if (!atk_out.empty()) {
                write_single_row_csv(atk_out, defense_name_from_path(atk_model),
                                     sdm::attack_kind_name(spec.kind), spec, attacked,
                                     atk_flags.seed);
                std::printf("wrote %s\n", atk_out.c_str());
            }
            return 0;
        }

        if (*bench) {
            const sdm::BenchReport report = sdm::run_benchmark(bench_config);
            std::printf("dataset %s, batch_size %zu, accounting %s, seed %llu\n",
                        report.dataset_name.c_str(), report.batch_size,
                        report.best_iterate ? "best-iterate" : "final-iterate",
                        static_cast<unsigned long long>(report.seed));
            for (const auto& [defense, hash] : report.model_hashes) {
                std::printf("model %-16s %s\n", defense.c_str(), hash.c_str());
            }
            for (const auto& row : report.rows) {
                std::printf("%-14s %-5s %-4s eps=%-9.6g steps=%-5d error=%.6f\n",
                            row.defense.c_str(), row.attack.c_str(), sdm::norm_name(row.norm),
                            row.epsilon, row.total_steps, row.error_rate);
            }
            if (!report.out_path.empty()) std::printf("wrote %s\n", report.out_path.c_str());
            return 0;
        }

        if (*diagnose) {
            std::vector<sdm::DiagnosticRow> rows;
            if (!diag_logits_csv.empty()) {
                if (diag_label < 1) throw CLI::ValidationError("--label is required with --logits-csv");
                std::ifstream f(diag_logits_csv);
                if (!f) throw std::runtime_error("cannot open " + diag_logits_csv);
                std::vector<std::vector<double>> s_rows;
                std::string line;
                while (std::getline(f, line)) {
                    if (line.empty()) continue;
                    std::vector<double> row;
                    std::stringstream ss(line);
                    std::string item;
                    while (std::getline(ss, item, ',')) row.push_back(std::stod(item));
                    s_rows.push_back(std::move(row));
                }
                rows = sdm::diagnose_logit_rows(s_rows, diag_label);
            } else {
                if (diag_dataset.empty() || diag_model.empty()) {
                    throw CLI::ValidationError("diagnose needs --dataset and --model "
                                               "(or --logits-csv)");
                }
                const sdm::Dataset ds = sdm::parse_dataset_spec(diag_dataset);
                const sdm::Mlp model = sdm::load_model(diag_model);
                std::vector<sdm::LabeledExample> subset(
                    ds.examples.begin(),
                    ds.examples.begin() + std::min(diag_limit, ds.size()));
                std::vector<sdm::NamedAttack> attacks;
                std::stringstream ss(diag_attacks);
                std::string item;
                while (std::getline(ss, item, ',')) {
                    if (item.empty()) continue;
                    AttackFlags flags = diag_flags;
                    const std::size_t colon = item.find(':');
                    flags.attack = item.substr(0, colon);
                    flags.total_steps =
                        colon == std::string::npos ? 0 : std::stoi(item.substr(colon + 1));
                    attacks.push_back({item, flags.build()});
                }
                rows = sdm::diagnose(model, subset, attacks);
            }

            for (const auto& row : rows) {
                std::printf("%-6s %-10s y=%-3d pred=%-3d ce=%.4f %s\n", row.input_name.c_str(),
                            row.attack_name.c_str(), row.y, row.pred, row.ce,
                            row.attack_success ? "success" : "failed");
            }
            if (const auto pair = sdm::find_high_loss_failure_pair(rows)) {
                const auto& hi = rows[pair->first];
                const auto& lo = rows[pair->second];
                std::printf("higher-loss-but-correct pair: %s/%s (ce=%.4f, correct) vs "
                            "%s/%s (ce=%.4f, misclassified)\n",
                            hi.input_name.c_str(), hi.attack_name.c_str(), hi.ce,
                            lo.input_name.c_str(), lo.attack_name.c_str(), lo.ce);
            } else {
                std::printf("no higher-loss-but-correct pair in these rows\n");
            }
            if (!diag_out.empty()) {
                sdm::write_diagnostic_csv(diag_out, rows);
                std::printf("wrote %s\n", diag_out.c_str());
            }
            return 0;
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
