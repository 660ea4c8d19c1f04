#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace sdm {

// Dense row-major tensor of 64-bit reals. 2-d tensors are [rows, cols] with
// the batch dimension first; a rank-1 tensor acts as a single row where a
// matrix is expected. Operations return fresh tensors and never alias inputs.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor vec(std::vector<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t i) const;
    std::size_t rows() const;
    std::size_t cols() const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    const double* row_ptr(std::size_t r) const { return data_.data() + r * cols(); }
    double* row_ptr(std::size_t r) { return data_.data() + r * cols(); }

    Tensor reshaped(std::vector<std::size_t> shape) const;
    Tensor row_copy(std::size_t r) const; // rank-1 copy of one row
    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;
    bool empty() const { return data_.empty(); }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }
    friend bool operator!=(const Tensor& a, const Tensor& b) { return !(a == b); }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// Raw classifier scores S, shape [K] or [B,K] with K >= 3.
struct Logits {
    Tensor values;
    explicit Logits(Tensor v);
    std::size_t batch() const { return values.rows(); }
    std::size_t num_classes() const { return values.cols(); }
    const double* row(std::size_t r) const { return values.row_ptr(r); }
};

// Normalized probabilities P: every entry in (0,1), rows summing to 1 within
// 1e-9. Construction validates; softmax output satisfies this for any
// reasonably scaled finite logits.
struct ProbVector {
    Tensor values;
    explicit ProbVector(Tensor v);
    std::size_t batch() const { return values.rows(); }
    std::size_t num_classes() const { return values.cols(); }
    const double* row(std::size_t r) const { return values.row_ptr(r); }
};

// out[i,j] = sum_t x[i,t] * w[t,j] + b[j]
Tensor affine_forward(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor relu_forward(const Tensor& x);
// Passes upstream where x > 0, zero elsewhere (including exactly at 0).
Tensor relu_input_grad(const Tensor& x, const Tensor& upstream);

// Row-wise max-subtracted softmax on raw storage.
Tensor softmax_rows(const Tensor& logits);
ProbVector softmax(const Logits& s);

// Central difference (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
// Throws when f produces a non-finite value.
Tensor finite_difference_input_grad(const std::function<double(const Tensor&)>& f,
                                    const Tensor& x, double h);

} // namespace sdm
