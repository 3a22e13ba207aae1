#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace gkd {

// Row-major dense real matrix.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    bool same_shape(const DenseMatrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    bool all_finite() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);      // a * b
DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b); // aT * b
DenseMatrix matmul_a_bt(const DenseMatrix& a, const DenseMatrix& b); // a * bT
DenseMatrix transpose(const DenseMatrix& a);

DenseMatrix select_rows(const DenseMatrix& m, const std::vector<std::size_t>& indices);

// Throws NumericError naming `context` if any entry is NaN/Inf.
void require_finite(const DenseMatrix& m, const char* context);

} // namespace gkd
