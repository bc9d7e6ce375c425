#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace gap::ndiff {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles. Operations in this module treat rank-2
/// tensors as matrices (rows = batch, cols = features); a rank-1 tensor is
/// only a storage convenience.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
        return Tensor({rows, cols}, fill);
    }
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor row(std::span<const double> values);
    static Tensor scalar(double v) { return Tensor({1, 1}, std::vector<double>{v}); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::size_t rows() const;
    std::size_t cols() const;

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    double* raw() noexcept { return data_.data(); }
    const double* raw() const noexcept { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    std::span<double> row_span(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
    std::span<const double> row_span(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

    double item() const;
    bool all_finite() const noexcept;
    void fill(double v) noexcept;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

std::size_t shape_product(const Shape& shape);

/// Value-only kernels used by both the autodiff graph and inference paths.
namespace kernels {

/// C = A * B.
Tensor matmul(const Tensor& a, const Tensor& b);
/// C += A^T * B, with C of shape (a.cols, b.cols).
void matmul_tn_accumulate(const Tensor& a, const Tensor& b, Tensor& c);
/// C += A * B^T, with C of shape (a.rows, b.rows).
void matmul_nt_accumulate(const Tensor& a, const Tensor& b, Tensor& c);
Tensor transpose(const Tensor& a);
/// Adds a 1×n row to every row of an m×n matrix in place.
void add_row_inplace(Tensor& a, const Tensor& row);
void relu_inplace(Tensor& a);
void sigmoid_inplace(Tensor& a);
void clamp_inplace(Tensor& a, double lo, double hi);
void axpy(double alpha, const Tensor& x, Tensor& y);
Tensor hconcat(std::span<const Tensor* const> parts);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);

}  // namespace kernels

}  // namespace gap::ndiff
