#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace npnet {

/// Dense row-major matrix of doubles with cheap column/row insertion and
/// removal, sized for networks whose layer widths change during training.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t i, std::size_t j) {
        assert(i < rows_ && j < cols_);
        return data_[i * cols_ + j];
    }
    double operator()(std::size_t i, std::size_t j) const {
        assert(i < rows_ && j < cols_);
        return data_[i * cols_ + j];
    }

    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }
    std::span<double> row_span(std::size_t i) { return {row(i), cols_}; }
    std::span<const double> row_span(std::size_t i) const { return {row(i), cols_}; }

    std::span<double> flat() { return {data_.data(), data_.size()}; }
    std::span<const double> flat() const { return {data_.data(), data_.size()}; }

    void fill(double v) { data_.assign(data_.size(), v); }

    void get_col(std::size_t j, std::vector<double>& out) const {
        out.resize(rows_);
        for (std::size_t i = 0; i < rows_; ++i) out[i] = data_[i * cols_ + j];
    }
    void set_col(std::size_t j, std::span<const double> v) {
        assert(v.size() == rows_);
        for (std::size_t i = 0; i < rows_; ++i) data_[i * cols_ + j] = v[i];
    }
    bool col_is_zero(std::size_t j) const {
        for (std::size_t i = 0; i < rows_; ++i)
            if (data_[i * cols_ + j] != 0.0) return false;
        return true;
    }
    bool row_is_zero(std::size_t i) const {
        const double* r = row(i);
        for (std::size_t j = 0; j < cols_; ++j)
            if (r[j] != 0.0) return false;
        return true;
    }

    /// Appends a column (zeros unless values given).
    void add_col(std::span<const double> v = {}) {
        assert(v.empty() || v.size() == rows_);
        std::vector<double> next(rows_ * (cols_ + 1));
        for (std::size_t i = 0; i < rows_; ++i) {
            const double* src = data_.data() + i * cols_;
            double* dst = next.data() + i * (cols_ + 1);
            for (std::size_t j = 0; j < cols_; ++j) dst[j] = src[j];
            dst[cols_] = v.empty() ? 0.0 : v[i];
        }
        data_ = std::move(next);
        ++cols_;
    }

    void remove_col(std::size_t j) {
        assert(j < cols_);
        std::vector<double> next(rows_ * (cols_ - 1));
        for (std::size_t i = 0; i < rows_; ++i) {
            const double* src = data_.data() + i * cols_;
            double* dst = next.data() + i * (cols_ - 1);
            for (std::size_t k = 0, o = 0; k < cols_; ++k)
                if (k != j) dst[o++] = src[k];
        }
        data_ = std::move(next);
        --cols_;
    }

    /// Appends a zero row.
    void add_row() {
        data_.resize((rows_ + 1) * cols_, 0.0);
        ++rows_;
    }

    void remove_row(std::size_t i) {
        assert(i < rows_);
        data_.erase(data_.begin() + static_cast<std::ptrdiff_t>(i * cols_),
                    data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols_));
        --rows_;
    }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    bool operator==(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

/// out = A * B
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
/// out = A^T * B
void matmul_at_b(const Matrix& a, const Matrix& b, Matrix& out);
/// out = A * B^T
void matmul_a_bt(const Matrix& a, const Matrix& b, Matrix& out);

// Small vector helpers shared by the optimizers and regularizer.
double vec_norm2(std::span<const double> v);
double vec_dot(std::span<const double> a, std::span<const double> b);

} // namespace npnet
