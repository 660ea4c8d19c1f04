#include "sdm/net.hpp"

#include "sdm/kernels.hpp"
#include "sdm/rng.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace sdm {

namespace {

constexpr char kMagic[4] = {'S', 'D', 'M', 'M'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxDim = 1u << 24;

struct ForwardPass {
    std::vector<Tensor> pre; // z_i = act_i . W_i + b_i
    std::vector<Tensor> act; // act_0 = x, act_{i+1} = relu(z_i) below the top
};

ForwardPass run_forward(const Mlp& m, const Tensor& x2d) {
    ForwardPass fp;
    fp.act.push_back(x2d);
    for (std::size_t i = 0; i < m.num_layers(); ++i) {
        Tensor z = affine_forward(fp.act.back(), m.weights[i], m.biases[i]);
        if (i + 1 < m.num_layers()) {
            fp.act.push_back(relu_forward(z));
        }
        fp.pre.push_back(std::move(z));
    }
    return fp;
}

Tensor as_batch(const Tensor& x) {
    return x.rank() == 1 ? x.reshaped({1, x.size()}) : x;
}

void check_input(const Mlp& m, const Tensor& x2d) {
    if (x2d.rank() != 2 || x2d.cols() != m.input_dim()) {
        throw std::invalid_argument("net: input dimension mismatch");
    }
    if (!x2d.all_finite()) {
        throw std::invalid_argument("net: non-finite input");
    }
}

void append_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct Cursor {
    const std::string& bytes;
    std::size_t pos = 0;

    std::uint32_t u32() {
        if (pos + 4 > bytes.size()) throw std::runtime_error("model file: truncated");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        }
        pos += 4;
        return v;
    }

    double f64() {
        if (pos + 8 > bytes.size()) throw std::runtime_error("model file: truncated");
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
        }
        pos += 8;
        double d;
        std::memcpy(&d, &v, 8);
        return d;
    }
};

} // namespace

Mlp Mlp::random(const std::vector<std::size_t>& dims, std::uint64_t seed) {
    Mlp m;
    m.layer_dims = dims;
    Rng rng(seed, /*stream=*/0);
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const std::size_t in = dims[i], out = dims[i + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Tensor w({in, out});
        for (std::size_t j = 0; j < w.size(); ++j) w[j] = rng.uniform(-bound, bound);
        Tensor b({out});
        for (std::size_t j = 0; j < b.size(); ++j) b[j] = rng.uniform(-bound, bound);
        m.weights.push_back(std::move(w));
        m.biases.push_back(std::move(b));
    }
    m.validate();
    return m;
}

void Mlp::validate() const {
    if (layer_dims.size() < 2) throw std::invalid_argument("mlp: need at least one layer");
    if (weights.size() != layer_dims.size() - 1 || biases.size() != weights.size()) {
        throw std::invalid_argument("mlp: layer count mismatch");
    }
    if (layer_dims.front() < 1) throw std::invalid_argument("mlp: input dim must be >= 1");
    if (layer_dims.back() < 3) {
        throw std::invalid_argument("mlp: need at least 3 classes, got " +
                                    std::to_string(layer_dims.back()));
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i].rank() != 2 || weights[i].rows() != layer_dims[i] ||
            weights[i].cols() != layer_dims[i + 1] || biases[i].size() != layer_dims[i + 1]) {
            throw std::invalid_argument("mlp: parameter shape mismatch at layer " +
                                        std::to_string(i));
        }
        if (!weights[i].all_finite() || !biases[i].all_finite()) {
            throw std::invalid_argument("mlp: non-finite parameters at layer " + std::to_string(i));
        }
    }
}

bool operator==(const Mlp& a, const Mlp& b) {
    return a.layer_dims == b.layer_dims && a.weights == b.weights && a.biases == b.biases;
}

Logits forward_logits(const Mlp& m, const Tensor& x) {
    const Tensor x2d = as_batch(x);
    check_input(m, x2d);
    ForwardPass fp = run_forward(m, x2d);
    Tensor logits = std::move(fp.pre.back());
    if (x.rank() == 1) logits = logits.reshaped({logits.cols()});
    return Logits(std::move(logits));
}

LossGrad loss_input_gradient(const Mlp& m, const Tensor& x, const std::vector<int>& y,
                             const LossSpec& loss) {
    const Tensor x2d = as_batch(x);
    check_input(m, x2d);
    const std::size_t batch = x2d.rows(), k = m.num_classes();
    if (y.size() != batch) throw std::invalid_argument("loss_input_gradient: label count mismatch");

    ForwardPass fp = run_forward(m, x2d);
    const Tensor& logits = fp.pre.back();
    Tensor probs = softmax_rows(logits);

    LossGrad out;
    out.values.resize(batch);
    Tensor ds({batch, k});
    switch (loss.kind) {
        case LossSpec::Kind::cross_entropy:
            for (std::size_t r = 0; r < batch; ++r) {
                out.values[r] = -std::log(probs.at(r, y[r] - 1));
                ce_logit_grad(probs.row_ptr(r), k, y[r], ds.row_ptr(r));
            }
            break;
        case LossSpec::Kind::neg_true_prob:
            for (std::size_t r = 0; r < batch; ++r) {
                out.values[r] = -probs.at(r, y[r] - 1);
                neg_true_prob_logit_grad(probs.row_ptr(r), k, y[r], ds.row_ptr(r));
            }
            break;
        case LossSpec::Kind::prob_diff:
            for (std::size_t r = 0; r < batch; ++r) {
                const int tau = argmax_excluding(probs.row_ptr(r), k, y[r]);
                out.values[r] = probs.at(r, tau - 1) - probs.at(r, y[r] - 1);
                prob_diff_logit_grad(probs.row_ptr(r), k, y[r], tau, ds.row_ptr(r));
            }
            break;
        case LossSpec::Kind::dpdr: {
            const auto ctxs = build_dpdr_context(probs, y, loss.dpdr_n, loss.delta, loss.zeta);
            for (std::size_t r = 0; r < batch; ++r) {
                out.values[r] = dpdr_loss(ctxs[r]);
                dpdr_logit_grad(ctxs[r], ds.row_ptr(r));
            }
            break;
        }
    }

    // Reverse pass down to the input.
    const auto& k_ops = kernels::ops();
    Tensor dz = std::move(ds);
    for (std::size_t i = m.num_layers(); i-- > 0;) {
        const std::size_t in = m.layer_dims[i], outw = m.layer_dims[i + 1];
        Tensor da({batch, in});
        k_ops.matmul_bt(dz.data(), m.weights[i].data(), da.data(), batch, outw, in);
        if (i == 0) {
            out.input_grad = std::move(da);
        } else {
            dz = relu_input_grad(fp.pre[i - 1], da);
        }
    }
    out.probs = std::move(probs);
    return out;
}

Mlp sgd_train(Mlp model, const std::vector<LabeledExample>& data, double lr,
              std::size_t epochs, std::size_t batch_size, std::uint64_t seed,
              const BatchTransform& pre_step) {
    model.validate();
    if (data.empty()) throw std::invalid_argument("sgd_train: empty dataset");
    if (batch_size == 0) throw std::invalid_argument("sgd_train: batch size must be >= 1");
    const std::size_t d = model.input_dim(), k = model.num_classes();
    for (const auto& ex : data) {
        if (ex.x.size() != d) throw std::invalid_argument("sgd_train: example dimension mismatch");
        if (ex.y < 1 || static_cast<std::size_t>(ex.y) > k) {
            throw std::invalid_argument("sgd_train: label outside 1.." + std::to_string(k));
        }
    }

    const auto& k_ops = kernels::ops();
    Rng shuffle_rng(seed, /*stream=*/1);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < data.size(); start += batch_size, ++batch_index) {
            const std::size_t bs = std::min(batch_size, data.size() - start);
            Tensor xb({bs, d});
            std::vector<int> yb(bs);
            for (std::size_t r = 0; r < bs; ++r) {
                const auto& ex = data[order[start + r]];
                std::memcpy(xb.row_ptr(r), ex.x.data(), d * sizeof(double));
                yb[r] = ex.y;
            }
            if (pre_step) pre_step(model, xb, yb);

            ForwardPass fp = run_forward(model, xb);
            Tensor probs = softmax_rows(fp.pre.back());
            double loss = 0.0;
            for (std::size_t r = 0; r < bs; ++r) loss -= std::log(probs.at(r, yb[r] - 1));
            loss /= static_cast<double>(bs);
            if (!std::isfinite(loss)) {
                throw std::runtime_error("sgd_train: non-finite loss at epoch " +
                                         std::to_string(epoch) + " batch " +
                                         std::to_string(batch_index));
            }

            // dL/dS of mean cross-entropy.
            Tensor dz = probs;
            const double inv_bs = 1.0 / static_cast<double>(bs);
            for (std::size_t r = 0; r < bs; ++r) {
                dz.at(r, yb[r] - 1) -= 1.0;
            }
            k_ops.scale(inv_bs, dz.data(), dz.size());

            for (std::size_t i = model.num_layers(); i-- > 0;) {
                const std::size_t in = model.layer_dims[i], outw = model.layer_dims[i + 1];
                Tensor dw({in, outw});
                k_ops.matmul_at(fp.act[i].data(), dz.data(), dw.data(), in, bs, outw);
                Tensor db({outw});
                for (std::size_t r = 0; r < bs; ++r) {
                    for (std::size_t j = 0; j < outw; ++j) db[j] += dz.at(r, j);
                }
                if (i > 0) {
                    Tensor da({bs, in});
                    k_ops.matmul_bt(dz.data(), model.weights[i].data(), da.data(), bs, outw, in);
                    dz = relu_input_grad(fp.pre[i - 1], da);
                }
                if (lr != 0.0) {
                    k_ops.axpy(-lr, dw.data(), model.weights[i].data(), dw.size());
                    k_ops.axpy(-lr, db.data(), model.biases[i].data(), db.size());
                }
            }
        }
    }
    return model;
}

std::string serialize_model(const Mlp& m) {
    m.validate();
    std::string out;
    out.append(kMagic, 4);
    append_u32(out, kVersion);
    append_u32(out, static_cast<std::uint32_t>(m.num_layers()));
    for (std::size_t i = 0; i < m.num_layers(); ++i) {
        append_u32(out, static_cast<std::uint32_t>(m.layer_dims[i]));
        append_u32(out, static_cast<std::uint32_t>(m.layer_dims[i + 1]));
    }
    for (std::size_t i = 0; i < m.num_layers(); ++i) {
        for (std::size_t j = 0; j < m.weights[i].size(); ++j) append_f64(out, m.weights[i][j]);
        for (std::size_t j = 0; j < m.biases[i].size(); ++j) append_f64(out, m.biases[i][j]);
    }
    return out;
}

Mlp deserialize_model(const std::string& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw std::runtime_error("model file: bad magic");
    }
    Cursor cur{bytes, 4};
    const std::uint32_t version = cur.u32();
    if (version != kVersion) {
        throw std::runtime_error("model file: unsupported version " + std::to_string(version));
    }
    const std::uint32_t layers = cur.u32();
    if (layers == 0 || layers > 1024) throw std::runtime_error("model file: bad layer count");

    Mlp m;
    for (std::uint32_t i = 0; i < layers; ++i) {
        const std::uint32_t in = cur.u32(), out = cur.u32();
        if (in == 0 || out == 0 || in > kMaxDim || out > kMaxDim) {
            throw std::runtime_error("model file: dimension overflow");
        }
        if (i == 0) {
            m.layer_dims.push_back(in);
        } else if (m.layer_dims.back() != in) {
            throw std::runtime_error("model file: inconsistent layer dimensions");
        }
        m.layer_dims.push_back(out);
    }
    for (std::uint32_t i = 0; i < layers; ++i) {
        const std::size_t in = m.layer_dims[i], out = m.layer_dims[i + 1];
        Tensor w({in, out});
        for (std::size_t j = 0; j < w.size(); ++j) w[j] = cur.f64();
        Tensor b({out});
        for (std::size_t j = 0; j < b.size(); ++j) b[j] = cur.f64();
        m.weights.push_back(std::move(w));
        m.biases.push_back(std::move(b));
    }
    if (cur.pos != bytes.size()) throw std::runtime_error("model file: trailing bytes");
    m.validate();
    return m;
}

void save_model(const Mlp& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("save_model: cannot open " + path);
    const std::string bytes = serialize_model(m);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("save_model: write failed for " + path);
}

Mlp load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_model: cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

} // namespace sdm
