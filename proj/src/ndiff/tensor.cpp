#include "gap/ndiff/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gap::ndiff {

std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

std::size_t shape_product(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

namespace {
void validate_shape(const Shape& shape) {
    if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one extent");
    for (auto e : shape) {
        if (e == 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_string(shape));
    }
}
}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(shape_product(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (shape_product(shape_) != data_.size()) {
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_string(shape_));
    }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    if (rows.size() == 0) throw std::invalid_argument("from_rows needs at least one row");
    const std::size_t cols = rows.begin()->size();
    std::vector<double> data;
    data.reserve(rows.size() * cols);
    for (const auto& r : rows) {
        if (r.size() != cols) throw std::invalid_argument("from_rows: ragged rows");
        data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor({rows.size(), cols}, std::move(data));
}

Tensor Tensor::row(std::span<const double> values) {
    return Tensor({1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

std::size_t Tensor::rows() const {
    return rank() == 2 ? shape_[0] : 1;
}

std::size_t Tensor::cols() const {
    if (rank() == 2) return shape_[1];
    if (rank() == 1) return shape_[0];
    throw std::logic_error("cols() on tensor of shape " + shape_string(shape_));
}

double Tensor::item() const {
    if (data_.size() != 1) throw std::logic_error("item() on non-scalar tensor " + shape_string(shape_));
    return data_[0];
}

bool Tensor::all_finite() const noexcept {
    // v - v is NaN exactly when v is infinite or NaN; the sum vectorises.
    double acc = 0.0;
    for (double v : data_) acc += v - v;
    return acc == 0.0;
}

void Tensor::fill(double v) noexcept {
    std::fill(data_.begin(), data_.end(), v);
}

namespace kernels {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<RowMajor> as_matrix(Tensor& t) { return {t.raw(), Eigen::Index(t.rows()), Eigen::Index(t.cols())}; }
Eigen::Map<const RowMajor> as_matrix(const Tensor& t) {
    return {t.raw(), Eigen::Index(t.rows()), Eigen::Index(t.cols())};
}

}  // namespace


Tensor matmul(const Tensor& a, const Tensor& b) {
    if (b.rows() != a.cols()) {
        throw std::invalid_argument("matmul: inner extents differ, " + shape_string(a.shape()) + " x " +
                                    shape_string(b.shape()));
    }
    Tensor c = Tensor::matrix(a.rows(), b.cols());
    as_matrix(c).noalias() = as_matrix(a) * as_matrix(b);
    return c;
}

void matmul_tn_accumulate(const Tensor& a, const Tensor& b, Tensor& c) {
    if (b.rows() != a.rows() || c.rows() != a.cols() || c.cols() != b.cols()) {
        throw std::invalid_argument("matmul_tn: incompatible shapes " + shape_string(a.shape()) + ", " +
                                    shape_string(b.shape()) + " into " + shape_string(c.shape()));
    }
    as_matrix(c).noalias() += as_matrix(a).transpose() * as_matrix(b);
}

void matmul_nt_accumulate(const Tensor& a, const Tensor& b, Tensor& c) {
    if (b.cols() != a.cols() || c.rows() != a.rows() || c.cols() != b.rows()) {
        throw std::invalid_argument("matmul_nt: incompatible shapes " + shape_string(a.shape()) + ", " +
                                    shape_string(b.shape()) + " into " + shape_string(c.shape()));
    }
    as_matrix(c).noalias() += as_matrix(a) * as_matrix(b).transpose();
}

Tensor transpose(const Tensor& a) {
    const std::size_t n = a.rows(), m = a.cols();
    Tensor t = Tensor::matrix(m, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

void add_row_inplace(Tensor& a, const Tensor& row) {
    const std::size_t m = a.cols();
    if (row.size() != m) {
        throw std::invalid_argument("add_row: row " + shape_string(row.shape()) + " does not fit " +
                                    shape_string(a.shape()));
    }
    const double* r = row.raw();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* arow = a.raw() + i * m;
        for (std::size_t j = 0; j < m; ++j) arow[j] += r[j];
    }
}

void relu_inplace(Tensor& a) {
    for (double& v : a.data()) v = v > 0.0 ? v : 0.0;
}

void sigmoid_inplace(Tensor& a) {
    for (double& v : a.data()) v = 1.0 / (1.0 + std::exp(-v));
}

void clamp_inplace(Tensor& a, double lo, double hi) {
    for (double& v : a.data()) v = std::clamp(v, lo, hi);
}

void axpy(double alpha, const Tensor& x, Tensor& y) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("axpy: " + shape_string(x.shape()) + " vs " + shape_string(y.shape()));
    }
    const double* xs = x.raw();
    double* ys = y.raw();
    for (std::size_t i = 0, n = x.size(); i < n; ++i) ys[i] += alpha * xs[i];
}

Tensor hconcat(std::span<const Tensor* const> parts) {
    if (parts.empty()) throw std::invalid_argument("concat of zero tensors");
    const std::size_t n = parts.front()->rows();
    std::size_t total = 0;
    for (const Tensor* p : parts) {
        if (p->rows() != n) {
            throw std::invalid_argument("concat: row counts differ, " + shape_string(parts.front()->shape()) +
                                        " vs " + shape_string(p->shape()));
        }
        total += p->cols();
    }
    Tensor out = Tensor::matrix(n, total);
    for (std::size_t i = 0; i < n; ++i) {
        double* dst = out.raw() + i * total;
        for (const Tensor* p : parts) {
            auto src = p->row_span(i);
            dst = std::copy(src.begin(), src.end(), dst);
        }
    }
    return out;
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
    if (begin >= end || end > a.cols()) {
        throw std::invalid_argument("slice [" + std::to_string(begin) + "," + std::to_string(end) +
                                    ") out of range for " + shape_string(a.shape()));
    }
    const std::size_t n = a.rows(), w = end - begin;
    Tensor out = Tensor::matrix(n, w);
    for (std::size_t i = 0; i < n; ++i) {
        auto src = a.row_span(i).subspan(begin, w);
        std::copy(src.begin(), src.end(), out.raw() + i * w);
    }
    return out;
}

}  // namespace kernels

}  // namespace gap::ndiff
