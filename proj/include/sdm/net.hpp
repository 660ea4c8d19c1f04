#pragma once

#include "sdm/losses.hpp"
#include "sdm/tensor.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace sdm {

struct LabeledExample {
    Tensor x; // shape [d], entries in [0,1]
    int y = 1; // 1-based label
};

// The scalar objective an attack ascends, evaluated on the classifier output.
struct LossSpec {
    enum class Kind { cross_entropy, neg_true_prob, prob_diff, dpdr };
    Kind kind = Kind::cross_entropy;
    int dpdr_n = 2;
    DeltaPolicy delta;
    double zeta = kDefaultZeta;

    static LossSpec ce() { return {}; }
    static LossSpec neg_prob() { return {Kind::neg_true_prob, 2, {}, kDefaultZeta}; }
    static LossSpec diff() { return {Kind::prob_diff, 2, {}, kDefaultZeta}; }
    static LossSpec dpdr_stage(int n, DeltaPolicy policy = {}, double zeta = kDefaultZeta) {
        return {Kind::dpdr, n, policy, zeta};
    }
};

// Feed-forward classifier: relu between layers, identity at the output.
// Immutable once trained; safe to share across threads for reads.
struct Mlp {
    std::vector<std::size_t> layer_dims; // [d, h1, ..., K], K >= 3
    std::vector<Tensor> weights;         // [in_i, out_i]
    std::vector<Tensor> biases;          // [out_i]

    // Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)], seeded.
    static Mlp random(const std::vector<std::size_t>& dims, std::uint64_t seed);

    std::size_t input_dim() const { return layer_dims.front(); }
    std::size_t num_classes() const { return layer_dims.back(); }
    std::size_t num_layers() const { return weights.size(); }
    void validate() const; // throws on broken invariants
};

bool operator==(const Mlp& a, const Mlp& b);

// x is [B,d] or [d]; the result keeps the input's rank.
Logits forward_logits(const Mlp& m, const Tensor& x);

struct LossGrad {
    std::vector<double> values; // per-row loss
    Tensor probs;               // [B,K] softmax at the evaluated point
    Tensor input_grad;          // [B,d] exact reverse-mode dL/dx
};

// Exact input gradient of the chosen loss; delta and the sign factor of the
// ratio loss are constants to the gradient. The dpdr delta is shared across
// the rows of this call, which is why the whole attack batch comes in at once.
LossGrad loss_input_gradient(const Mlp& m, const Tensor& x, const std::vector<int>& y,
                             const LossSpec& loss);

// Mutates batch inputs in place before each gradient step (adversarial
// training hook); `current` is the model state the step will update. Must not
// change shapes.
using BatchTransform =
    std::function<void(const Mlp& current, Tensor& xb, const std::vector<int>& yb)>;

// Plain SGD on mean cross-entropy. Deterministic per seed: fixed shuffle
// stream, fixed batch order. Throws if a non-finite loss shows up, naming the
// epoch and batch.
Mlp sgd_train(Mlp model, const std::vector<LabeledExample>& data, double lr,
              std::size_t epochs, std::size_t batch_size, std::uint64_t seed,
              const BatchTransform& pre_step = nullptr);

std::string serialize_model(const Mlp& m);
Mlp deserialize_model(const std::string& bytes);
void save_model(const Mlp& m, const std::string& path);
Mlp load_model(const std::string& path);

} // namespace sdm
