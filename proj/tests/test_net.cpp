#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracle_utils.hpp"
#include "sdm/net.hpp"
#include "sdm/rng.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

using namespace sdm;

namespace {

std::string temp_path(const std::string& stem) {
    return (std::filesystem::temp_directory_path() / stem).string();
}

Mlp zero_model(const std::vector<std::size_t>& dims, const std::vector<double>& bias_top) {
    Mlp m = Mlp::random(dims, 1);
    for (auto& w : m.weights) {
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.0;
    }
    for (auto& b : m.biases) {
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = 0.0;
    }
    for (std::size_t i = 0; i < bias_top.size(); ++i) m.biases.back()[i] = bias_top[i];
    return m;
}

std::vector<LabeledExample> two_blob_data(std::size_t per_class, Rng& rng) {
    // Two separable clusters labelled 1 and 2 inside a 3-label space.
    std::vector<LabeledExample> data;
    for (std::size_t i = 0; i < per_class; ++i) {
        Tensor a({2});
        a[0] = 0.25 + 0.05 * rng.normal();
        a[1] = 0.25 + 0.05 * rng.normal();
        Tensor b({2});
        b[0] = 0.75 + 0.05 * rng.normal();
        b[1] = 0.75 + 0.05 * rng.normal();
        for (Tensor* t : {&a, &b}) {
            for (std::size_t j = 0; j < 2; ++j) {
                (*t)[j] = std::min(1.0, std::max(0.0, (*t)[j]));
            }
        }
        data.push_back({std::move(a), 1});
        data.push_back({std::move(b), 2});
    }
    return data;
}

} // namespace

TEST_CASE("class-count invariant is enforced") {
    CHECK_THROWS_AS(Mlp::random({2, 2}, 1), std::invalid_argument);
    CHECK_NOTHROW(Mlp::random({2, 3}, 1));
}

TEST_CASE("zero-weight model returns its bias and zero gradients") {
    const Mlp m = zero_model({2, 4}, {0.1, -0.3, 0.7, 0.0});
    const Tensor x = Tensor::vec({0.2, 0.8});
    const Logits s = forward_logits(m, x);
    CHECK(s.row(0)[0] == 0.1);
    CHECK(s.row(0)[2] == 0.7);

    for (const LossSpec& loss : {LossSpec::ce(), LossSpec::neg_prob(), LossSpec::diff(),
                                 LossSpec::dpdr_stage(2)}) {
        const LossGrad lg = loss_input_gradient(m, x, {1}, loss);
        for (std::size_t i = 0; i < lg.input_grad.size(); ++i) {
            CHECK(lg.input_grad[i] == 0.0);
        }
    }
}

TEST_CASE("forward pass equals layer-by-layer composition") {
    Rng rng(31);
    const Mlp m = Mlp::random({3, 5, 4}, 77);
    Tensor x({2, 3});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform01();

    const Tensor z0 = affine_forward(x, m.weights[0], m.biases[0]);
    const Tensor a1 = relu_forward(z0);
    const Tensor z1 = affine_forward(a1, m.weights[1], m.biases[1]);
    const Logits got = forward_logits(m, x);
    CHECK(got.values == z1);

    // Determinism: repeated evaluation is bit-identical.
    CHECK(forward_logits(m, x).values == z1);

    CHECK_THROWS_AS(forward_logits(m, Tensor::vec({0.1, 0.2})), std::invalid_argument);
}

TEST_CASE("input gradients match finite differences for every loss") {
    Rng rng(32);
    int cases = 0;
    for (int rep = 0; rep < 25; ++rep) {
        const std::size_t d = 3 + rng.below(5);
        const std::size_t h = 4 + rng.below(6);
        const std::size_t k = 5 + rng.below(4);
        const Mlp m = Mlp::random({d, h, k}, 1000 + rep);
        const std::size_t rows = 1 + rng.below(3);
        const int n = 2 + static_cast<int>(rng.below(3));
        const DeltaPolicy frozen_delta{1e-6, 1.0};
        const auto gc = oracle::gradient_check_case(m, rows, n, frozen_delta, kDefaultZeta, rng);

        for (const LossSpec& loss :
             {LossSpec::ce(), LossSpec::neg_prob(), LossSpec::diff(),
              LossSpec::dpdr_stage(n, frozen_delta)}) {
            const LossGrad lg = loss_input_gradient(m, gc.x, gc.y, loss);

            for (std::size_t r = 0; r < rows; ++r) {
                oracle::FrozenLoss f;
                f.kind = loss.kind;
                f.y = gc.y[r];
                const double* p = lg.probs.row_ptr(r);
                f.tau = argmax_excluding(p, k, gc.y[r]);
                if (loss.kind == LossSpec::Kind::dpdr) {
                    const auto ctxs = build_dpdr_context(lg.probs, gc.y, loss.dpdr_n, loss.delta,
                                                         loss.zeta);
                    f.nth = ctxs[r].nth_label;
                    f.delta = ctxs[r].delta;
                    f.sign = ctxs[r].sign;
                    f.zeta = ctxs[r].zeta;
                }
                const Tensor x_row = gc.x.row_copy(r);
                const Tensor fd = finite_difference_input_grad(
                    oracle::frozen_row_loss(m, f), x_row, 1e-5);
                const Tensor got = lg.input_grad.row_copy(r);
                CHECK(oracle::max_rel_error(got, fd) < 1e-4);
            }
            ++cases;
        }
    }
    CHECK(cases == 100);
}

TEST_CASE("training separates two blobs") {
    Rng rng(33);
    const auto data = two_blob_data(100, rng);
    Mlp m = Mlp::random({2, 8, 3}, 5);
    m = sgd_train(std::move(m), data, 0.5, 50, 16, 5);

    std::size_t correct = 0;
    for (const auto& ex : data) {
        if (predicted_label(forward_logits(m, ex.x)) == ex.y) ++correct;
    }
    CHECK(static_cast<double>(correct) / data.size() >= 0.95);
}

TEST_CASE("lr=0 leaves parameters untouched and seeds reproduce bit-exactly") {
    Rng rng(34);
    const auto data = two_blob_data(20, rng);
    const Mlp init = Mlp::random({2, 6, 3}, 9);
    const Mlp after = sgd_train(init, data, 0.0, 3, 8, 9);
    CHECK(after == init);

    const Mlp a = sgd_train(init, data, 0.3, 5, 8, 42);
    const Mlp b = sgd_train(init, data, 0.3, 5, 8, 42);
    CHECK(a == b);

    CHECK_THROWS_AS(sgd_train(init, {}, 0.1, 1, 8, 1), std::invalid_argument);

    // A divergent run reports the epoch and batch it blew up in.
    CHECK_THROWS_WITH_AS(sgd_train(init, data, 1e6, 50, 8, 1),
                         doctest::Contains("non-finite loss at epoch"), std::runtime_error);
}

TEST_CASE("model serialization round-trips bit-exactly") {
    const Mlp m = Mlp::random({7, 11, 5}, 123);
    const std::string path = temp_path("sdm_test_model.sdmm");
    save_model(m, path);
    const Mlp back = load_model(path);
    CHECK(back == m);

    // Corrupted magic.
    {
        std::string bytes = serialize_model(m);
        bytes[0] = 'X';
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_WITH_AS(load_model(path), "model file: bad magic", std::runtime_error);

    // Declared dimensions exceeding the payload.
    {
        std::string bytes = serialize_model(m);
        bytes.resize(bytes.size() / 2);
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_WITH_AS(load_model(path), "model file: truncated", std::runtime_error);

    std::filesystem::remove(path);
}

TEST_CASE("concurrent read-only forward equals sequential bit-exactly") {
    const Mlp m = Mlp::random({6, 12, 4}, 55);
    Rng rng(35);
    std::vector<Tensor> batches;
    for (int i = 0; i < 8; ++i) {
        Tensor x({16, 6});
        for (std::size_t j = 0; j < x.size(); ++j) x[j] = rng.uniform01();
        batches.push_back(std::move(x));
    }

    std::vector<Tensor> sequential;
    sequential.reserve(batches.size());
    for (const auto& x : batches) sequential.push_back(forward_logits(m, x).values);

    std::vector<Tensor> parallel(batches.size());
    std::vector<std::thread> threads;
    threads.reserve(batches.size());
    for (std::size_t i = 0; i < batches.size(); ++i) {
        threads.emplace_back(
            [&, i] { parallel[i] = forward_logits(m, batches[i]).values; });
    }
    for (auto& t : threads) t.join();

    for (std::size_t i = 0; i < batches.size(); ++i) {
        CHECK(parallel[i] == sequential[i]);
    }
}
