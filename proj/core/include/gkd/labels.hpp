#pragma once

#include "gkd/matrix.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace gkd {

// N x C matrix whose rows live on the probability simplex.
class LabelMatrix {
public:
    LabelMatrix() = default;

    // Validates entries are finite and >= 0 and row sums are 1 within `tol`.
    static LabelMatrix from_matrix(DenseMatrix m, double tol = 1e-9);

    static LabelMatrix one_hot(const std::vector<int>& class_ids, std::size_t num_classes);

    const DenseMatrix& matrix() const { return m_; }
    std::size_t rows() const { return m_.rows(); }
    std::size_t cols() const { return m_.cols(); }
    std::span<const double> row(std::size_t r) const { return m_.row(r); }

    // Per-row argmax; ties resolve to the lowest class index.
    std::vector<int> argmax_rows() const;

    std::vector<double> column(std::size_t c) const;

private:
    explicit LabelMatrix(DenseMatrix m) : m_(std::move(m)) {}
    DenseMatrix m_;
};

} // namespace gkd
