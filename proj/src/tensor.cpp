#include "sdm/tensor.hpp"

#include "sdm/kernels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sdm {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t p = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw std::invalid_argument("tensor: zero dimension");
        p *= d;
    }
    return p;
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_product(shape_) != data_.size()) {
        throw std::invalid_argument("tensor: shape does not match data length");
    }
}

Tensor Tensor::vec(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
    return Tensor({rows, cols}, std::move(data));
}

std::size_t Tensor::dim(std::size_t i) const {
    if (i >= shape_.size()) throw std::out_of_range("tensor: dim index");
    return shape_[i];
}

std::size_t Tensor::rows() const {
    if (rank() == 1) return 1;
    if (rank() == 2) return shape_[0];
    throw std::invalid_argument("tensor: rows() needs rank 1 or 2");
}

std::size_t Tensor::cols() const {
    if (rank() == 1) return shape_[0];
    if (rank() == 2) return shape_[1];
    throw std::invalid_argument("tensor: cols() needs rank 1 or 2");
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
    if (shape_product(shape) != data_.size()) {
        throw std::invalid_argument("tensor: reshape changes element count");
    }
    return Tensor(std::move(shape), data_);
}

Tensor Tensor::row_copy(std::size_t r) const {
    const std::size_t c = cols();
    std::vector<double> out(data_.begin() + r * c, data_.begin() + (r + 1) * c);
    return Tensor::vec(std::move(out));
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Logits::Logits(Tensor v) : values(std::move(v)) {
    if (values.rank() < 1 || values.rank() > 2) {
        throw std::invalid_argument("logits: rank must be 1 or 2");
    }
    if (values.cols() < 3) {
        throw std::invalid_argument("logits: need at least 3 classes, got " +
                                    std::to_string(values.cols()));
    }
    if (!values.all_finite()) {
        throw std::invalid_argument("logits: non-finite entries");
    }
}

ProbVector::ProbVector(Tensor v) : values(std::move(v)) {
    if (values.rank() < 1 || values.rank() > 2) {
        throw std::invalid_argument("probabilities: rank must be 1 or 2");
    }
    for (std::size_t r = 0; r < values.rows(); ++r) {
        const double* p = values.row_ptr(r);
        double sum = 0.0;
        for (std::size_t j = 0; j < values.cols(); ++j) {
            if (!(p[j] > 0.0 && p[j] < 1.0)) {
                throw std::invalid_argument("probabilities: entries must lie in (0,1)");
            }
            sum += p[j];
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw std::invalid_argument("probabilities: row does not sum to 1");
        }
    }
}

Tensor affine_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    const std::size_t m = x.rows(), k = x.cols();
    if (w.rank() != 2 || w.rows() != k) {
        throw std::invalid_argument("affine_forward: x cols must match w rows");
    }
    const std::size_t n = w.cols();
    if (b.size() != n) {
        throw std::invalid_argument("affine_forward: bias length must match w cols");
    }
    Tensor out = x.rank() == 1 ? Tensor({n}) : Tensor({m, n});
    const auto& k_ops = kernels::ops();
    k_ops.matmul(x.data(), w.data(), out.data(), m, k, n);
    k_ops.add_bias(out.data(), b.data(), m, n);
    return out;
}

Tensor relu_forward(const Tensor& x) {
    Tensor out(x.shape());
    kernels::ops().relu(x.data(), out.data(), x.size());
    return out;
}

Tensor relu_input_grad(const Tensor& x, const Tensor& upstream) {
    if (!x.same_shape(upstream)) {
        throw std::invalid_argument("relu_input_grad: shape mismatch");
    }
    Tensor out(x.shape());
    kernels::ops().relu_mask_mul(x.data(), upstream.data(), out.data(), x.size());
    return out;
}

Tensor softmax_rows(const Tensor& logits) {
    Tensor out(logits.shape());
    const std::size_t rows = logits.rows(), cols = logits.cols();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* s = logits.row_ptr(r);
        double* p = out.row_ptr(r);
        double mx = s[0];
        for (std::size_t j = 1; j < cols; ++j) {
            if (s[j] > mx) mx = s[j];
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            p[j] = std::exp(s[j] - mx);
            sum += p[j];
        }
        for (std::size_t j = 0; j < cols; ++j) {
            p[j] /= sum;
        }
    }
    return out;
}

ProbVector softmax(const Logits& s) { return ProbVector(softmax_rows(s.values)); }

Tensor finite_difference_input_grad(const std::function<double(const Tensor&)>& f,
                                    const Tensor& x, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_difference_input_grad: h must be > 0");
    Tensor grad(x.shape());
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double up = f(probe);
        probe[i] = orig - h;
        const double down = f(probe);
        probe[i] = orig;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw std::runtime_error("finite_difference_input_grad: non-finite function value");
        }
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

} // namespace sdm
