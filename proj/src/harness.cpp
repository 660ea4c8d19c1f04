#include "sdm/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace sdm {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

bool parse_on_off(const std::string& v, const std::string& key) {
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw std::runtime_error("config: " + key + " must be on or off, got '" + v + "'");
}

std::string format_double(const char* fmt, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v);
    return buf;
}

void assert_budget(const Tensor& clean, const Tensor& adv, const AttackConfig& cfg) {
    double dist = 0.0;
    if (cfg.norm == Norm::linf) {
        for (std::size_t j = 0; j < clean.size(); ++j) {
            dist = std::max(dist, std::abs(adv[j] - clean[j]));
        }
    } else {
        for (std::size_t j = 0; j < clean.size(); ++j) {
            const double v = adv[j] - clean[j];
            dist += v * v;
        }
        dist = std::sqrt(dist);
    }
    if (dist > cfg.epsilon + 1e-9) {
        throw std::logic_error("attack budget invariant violated");
    }
    if (cfg.clip_unit_box) {
        for (std::size_t j = 0; j < adv.size(); ++j) {
            if (!(adv[j] >= 0.0 && adv[j] <= 1.0)) {
                throw std::logic_error("attack box invariant violated");
            }
        }
    }
}

std::vector<LabeledExample> attacked_batch(const Mlp& m,
                                           const std::vector<LabeledExample>& batch,
                                           const AttackSpec& spec, bool best_iterate,
                                           std::vector<bool>& misclassified) {
    const auto outcomes = run_attack(m, batch, spec);
    AttackConfig effective = spec.cfg;
    if (spec.kind == AttackKind::fgsm) effective.norm = Norm::linf;
    std::vector<LabeledExample> out;
    out.reserve(outcomes.size());
    misclassified.clear();
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& o = outcomes[i];
        if (spec.kind != AttackKind::none) {
            assert_budget(batch[i].x, o.x_adv, effective);
            assert_budget(batch[i].x, o.best_x, effective);
        }
        misclassified.push_back(best_iterate ? o.best_success : o.success);
        out.push_back({best_iterate ? o.best_x : o.x_adv, batch[i].y});
    }
    return out;
}

DiagnosticRow make_row(std::string input_name, std::string attack_name,
                       std::vector<double> s_row, int y, bool success) {
    DiagnosticRow row;
    row.input_name = std::move(input_name);
    row.attack_name = std::move(attack_name);
    row.y = y;
    row.s = std::move(s_row);
    const Tensor st = Tensor::vec(row.s);
    const Tensor pt = softmax_rows(st);
    row.p.assign(pt.data(), pt.data() + pt.size());
    row.ce = -std::log(row.p[static_cast<std::size_t>(y) - 1]);
    row.pred = predicted_labels(st).front();
    row.attack_success = success;
    return row;
}

} // namespace

double evaluate_error_rate(const Mlp& m, const Dataset& ds,
                           const std::optional<AttackSpec>& attack, const EvalOptions& opts) {
    ds.validate();
    if (ds.d != m.input_dim() || ds.k > m.num_classes()) {
        throw std::invalid_argument("evaluate_error_rate: dataset does not match the model");
    }
    const std::size_t chunk = opts.batch_size == 0 ? ds.size() : opts.batch_size;
    std::size_t wrong = 0;
    for (std::size_t start = 0; start < ds.size(); start += chunk) {
        const std::size_t bs = std::min(chunk, ds.size() - start);
        std::vector<LabeledExample> batch(ds.examples.begin() + start,
                                          ds.examples.begin() + start + bs);
        if (!attack || attack->kind == AttackKind::none) {
            Tensor xb({bs, ds.d});
            for (std::size_t r = 0; r < bs; ++r) {
                std::memcpy(xb.row_ptr(r), batch[r].x.data(), ds.d * sizeof(double));
            }
            const auto preds = predicted_labels(forward_logits(m, xb).values);
            for (std::size_t r = 0; r < bs; ++r) {
                if (preds[r] != batch[r].y) ++wrong;
            }
        } else {
            AttackSpec spec = *attack;
            if (opts.best_iterate) spec.cfg.track_best = true;
            std::vector<bool> mis;
            attacked_batch(m, batch, spec, opts.best_iterate, mis);
            for (bool b : mis) {
                if (b) ++wrong;
            }
        }
    }
    return static_cast<double>(wrong) / static_cast<double>(ds.size());
}

std::vector<DiagnosticRow> diagnose(const Mlp& m, const std::vector<LabeledExample>& examples,
                                    const std::vector<NamedAttack>& attacks,
                                    const EvalOptions& opts) {
    if (examples.empty()) throw std::invalid_argument("diagnose: no examples");
    std::vector<DiagnosticRow> rows;
    rows.reserve(examples.size() * attacks.size());
    for (const auto& na : attacks) {
        AttackSpec spec = na.spec;
        if (opts.best_iterate) spec.cfg.track_best = true;
        std::vector<bool> mis;
        const auto adv = attacked_batch(m, examples, spec, opts.best_iterate, mis);
        for (std::size_t i = 0; i < adv.size(); ++i) {
            const Logits s = forward_logits(m, adv[i].x);
            std::vector<double> s_row(s.row(0), s.row(0) + s.num_classes());
            rows.push_back(make_row("ex" + std::to_string(i), na.name, std::move(s_row),
                                    examples[i].y, mis[i]));
        }
    }
    return rows;
}

std::vector<DiagnosticRow> diagnose_logit_rows(const std::vector<std::vector<double>>& s_rows,
                                               int y) {
    std::vector<DiagnosticRow> rows;
    rows.reserve(s_rows.size());
    for (std::size_t i = 0; i < s_rows.size(); ++i) {
        const Tensor st = Tensor::vec(s_rows[i]);
        const bool success = predicted_labels(st).front() != y;
        rows.push_back(make_row("row" + std::to_string(i), "given", s_rows[i], y, success));
    }
    return rows;
}

std::optional<std::pair<std::size_t, std::size_t>>
find_high_loss_failure_pair(const std::vector<DiagnosticRow>& rows) {
    std::optional<std::size_t> best_correct, best_mis;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const bool correct = rows[i].pred == rows[i].y;
        if (correct) {
            if (!best_correct || rows[i].ce > rows[*best_correct].ce) best_correct = i;
        } else {
            if (!best_mis || rows[i].ce < rows[*best_mis].ce) best_mis = i;
        }
    }
    if (best_correct && best_mis && rows[*best_correct].ce > rows[*best_mis].ce) {
        return std::make_pair(*best_correct, *best_mis);
    }
    return std::nullopt;
}

void write_diagnostic_csv(const std::string& path, const std::vector<DiagnosticRow>& rows) {
    if (rows.empty()) throw std::invalid_argument("write_diagnostic_csv: no rows");
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("write_diagnostic_csv: cannot open " + path);
    const std::size_t k = rows.front().s.size();
    f << "input,attack,y,pred,ce,result";
    for (std::size_t j = 1; j <= k; ++j) f << ",s" << j;
    for (std::size_t j = 1; j <= k; ++j) f << ",p" << j;
    f << "\n";
    for (const auto& row : rows) {
        f << row.input_name << ',' << row.attack_name << ',' << row.y << ',' << row.pred << ','
          << format_double("%.6f", row.ce) << ',' << (row.attack_success ? "success" : "failed");
        for (double v : row.s) f << ',' << format_double("%.9g", v);
        for (double v : row.p) f << ',' << format_double("%.9g", v);
        f << "\n";
    }
    if (!f) throw std::runtime_error("write_diagnostic_csv: write failed for " + path);
}

BenchConfig parse_benchmark_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);

    BenchConfig cfg;
    BenchRun* run = nullptr;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        std::string t = trim(line);
        const std::size_t hash = t.find('#');
        if (hash != std::string::npos) t = trim(t.substr(0, hash));
        if (t.empty()) continue;

        if (t.front() == '[') {
            if (t != "[run]") {
                throw std::runtime_error("config line " + std::to_string(line_no) +
                                         ": unknown section '" + t + "'");
            }
            cfg.runs.emplace_back();
            run = &cfg.runs.back();
            continue;
        }

        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": expected key = value");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));

        if (run == nullptr) {
            if (key == "dataset") {
                cfg.dataset_spec = value;
            } else if (key == "out") {
                cfg.out_path = value;
            } else if (key == "seed") {
                cfg.seed = std::stoull(value);
            } else if (key == "batch_size") {
                cfg.batch_size = std::stoul(value);
            } else if (key == "best_iterate") {
                cfg.best_iterate = parse_on_off(value, key);
            } else if (key == "timing") {
                cfg.timing = parse_on_off(value, key);
            } else {
                throw std::runtime_error("config line " + std::to_string(line_no) +
                                         ": unknown global key '" + key + "'");
            }
        } else {
            if (key == "defense") {
                run->defense = value;
            } else if (key == "model") {
                run->model_path = value;
            } else if (key == "attacks") {
                run->attacks = split_list(value);
            } else if (key == "norms") {
                for (const auto& n : split_list(value)) run->norms.push_back(parse_norm(n));
            } else if (key == "eps") {
                for (const auto& e : split_list(value)) run->eps.push_back(std::stod(e));
            } else if (key == "alpha") {
                for (const auto& a : split_list(value)) run->alpha.push_back(std::stod(a));
            } else if (key == "steps") {
                for (const auto& s : split_list(value)) run->steps.push_back(std::stoi(s));
            } else {
                throw std::runtime_error("config line " + std::to_string(line_no) +
                                         ": unknown run key '" + key + "'");
            }
        }
    }

    if (cfg.dataset_spec.empty()) throw std::runtime_error("config: missing dataset");
    if (cfg.runs.empty()) throw std::runtime_error("config: no [run] sections");
    for (const auto& r : cfg.runs) {
        if (r.defense.empty()) throw std::runtime_error("config: run without defense name");
        if (r.model_path.empty()) throw std::runtime_error("config: run without model path");
        if (r.attacks.empty()) throw std::runtime_error("config: run without attacks");
        if (r.eps.empty()) throw std::runtime_error("config: run without eps");
        if (!r.alpha.empty() && r.alpha.size() != 1 && r.alpha.size() != r.eps.size()) {
            throw std::runtime_error("config: alpha must be one value or paired with eps");
        }
        for (const auto& a : r.attacks) parse_attack_kind(a); // validates names
    }
    return cfg;
}

BenchReport run_benchmark(const BenchConfig& cfg) {
    const Dataset ds = parse_dataset_spec(cfg.dataset_spec);
    BenchReport report;
    report.dataset_name = ds.name;
    report.batch_size = cfg.batch_size;
    report.best_iterate = cfg.best_iterate;
    report.seed = cfg.seed;
    report.out_path = cfg.out_path;

    const EvalOptions opts{cfg.batch_size, cfg.best_iterate};
    for (const auto& run : cfg.runs) {
        const Mlp model = load_model(run.model_path);
        report.model_hashes[run.defense] = model_hash(model);
        const std::vector<Norm> norms = run.norms.empty() ? std::vector<Norm>{Norm::linf}
                                                          : run.norms;
        for (const auto& attack_name : run.attacks) {
            const AttackKind kind = parse_attack_kind(attack_name);
            for (Norm norm : norms) {
                for (std::size_t ei = 0; ei < run.eps.size(); ++ei) {
                    const double eps = run.eps[ei];
                    const double alpha = run.alpha.empty()
                                             ? eps / 4.0
                                             : run.alpha[run.alpha.size() == 1 ? 0 : ei];
                    const std::vector<int> totals =
                        kind == AttackKind::fgsm ? std::vector<int>{1} : run.steps;
                    if (totals.empty()) {
                        throw std::runtime_error("config: run '" + run.defense +
                                                 "' needs a steps list for " + attack_name);
                    }
                    for (int total : totals) {
                        AttackSpec spec;
                        spec.kind = kind;
                        spec.cfg.norm = norm;
                        spec.cfg.epsilon = eps;
                        spec.cfg.alpha = alpha;
                        spec.cfg.seed = cfg.seed;
                        spec.total_steps = total;
                        if (kind == AttackKind::sdm) spec.cfg = spec.cfg.with_total(total);

                        const auto t0 = std::chrono::steady_clock::now();
                        const double rate = evaluate_error_rate(model, ds, spec, opts);
                        const auto t1 = std::chrono::steady_clock::now();
                        const double wall =
                            cfg.timing
                                ? std::chrono::duration<double, std::milli>(t1 - t0).count()
                                : 0.0;
                        report.rows.push_back({run.defense, attack_name, norm, eps, total, rate,
                                               wall, cfg.seed});
                    }
                }
            }
        }
    }

    std::sort(report.rows.begin(), report.rows.end(), [](const BenchRow& a, const BenchRow& b) {
        return std::tie(a.defense, a.attack, a.norm, a.epsilon, a.total_steps) <
               std::tie(b.defense, b.attack, b.norm, b.epsilon, b.total_steps);
    });
    if (!cfg.out_path.empty()) write_bench_csv(cfg.out_path, report);
    return report;
}

BenchReport run_benchmark(const std::string& config_path) {
    return run_benchmark(parse_benchmark_config(config_path));
}

void write_bench_csv(const std::string& path, const BenchReport& report) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("write_bench_csv: cannot open " + path);
    f << "defense,attack,norm,epsilon,total_steps,error_rate,wall_ms,seed\n";
    for (const auto& row : report.rows) {
        f << row.defense << ',' << row.attack << ',' << norm_name(row.norm) << ','
          << format_double("%.9g", row.epsilon) << ',' << row.total_steps << ','
          << format_double("%.6f", row.error_rate) << ',' << format_double("%.3f", row.wall_ms)
          << ',' << row.seed << "\n";
    }
    if (!f) throw std::runtime_error("write_bench_csv: write failed for " + path);
}

Mlp train_victim(const Dataset& train, const std::vector<std::size_t>& hidden, double lr,
                 std::size_t epochs, std::size_t batch_size, std::uint64_t seed) {
    train.validate();
    std::vector<std::size_t> dims;
    dims.push_back(train.d);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(train.k);
    Mlp model = Mlp::random(dims, seed);
    return sgd_train(std::move(model), train.examples, lr, epochs, batch_size, seed);
}

Mlp adversarial_train(const Dataset& train, const std::vector<std::size_t>& hidden,
                      const AttackSpec& inner, double lr, std::size_t epochs,
                      std::size_t batch_size, std::uint64_t seed) {
    train.validate();
    if (inner.kind != AttackKind::pgd && inner.kind != AttackKind::sdm) {
        throw std::invalid_argument("adversarial_train: inner attack must be pgd or sdm");
    }
    std::vector<std::size_t> dims;
    dims.push_back(train.d);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(train.k);
    Mlp model = Mlp::random(dims, seed);

    // Each batch is attacked against the current parameters, then the usual
    // gradient step runs on the attacked inputs.
    const BatchTransform attack_hook = [&inner](const Mlp& current, Tensor& xb,
                                                const std::vector<int>& yb) {
        std::vector<LabeledExample> batch(xb.rows());
        for (std::size_t r = 0; r < xb.rows(); ++r) {
            batch[r] = {xb.row_copy(r), yb[r]};
        }
        const auto outcomes = run_attack(current, batch, inner);
        for (std::size_t r = 0; r < outcomes.size(); ++r) {
            std::memcpy(xb.row_ptr(r), outcomes[r].x_adv.data(), xb.cols() * sizeof(double));
        }
    };
    return sgd_train(std::move(model), train.examples, lr, epochs, batch_size, seed, attack_hook);
}

std::string model_hash(const Mlp& m) {
    const std::string bytes = serialize_model(m);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace sdm
