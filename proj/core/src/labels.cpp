#include "gkd/labels.hpp"

#include "gkd/errors.hpp"

#include <cmath>
#include <string>

namespace gkd {

LabelMatrix LabelMatrix::from_matrix(DenseMatrix m, double tol) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double sum = 0.0;
        for (double v : m.row(i)) {
            if (!(v >= 0.0) || !std::isfinite(v)) {
                throw ValidationError("label row " + std::to_string(i) +
                                      ": entries must be finite and non-negative");
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > tol) {
            throw ValidationError("label row " + std::to_string(i) + ": sum " +
                                  std::to_string(sum) + " is off the simplex");
        }
    }
    return LabelMatrix(std::move(m));
}

LabelMatrix LabelMatrix::one_hot(const std::vector<int>& class_ids, std::size_t num_classes) {
    DenseMatrix m(class_ids.size(), num_classes);
    for (std::size_t i = 0; i < class_ids.size(); ++i) {
        const int c = class_ids[i];
        if (c < 0 || static_cast<std::size_t>(c) >= num_classes) {
            throw ValidationError("one_hot: class id " + std::to_string(c) + " out of range at row " +
                                  std::to_string(i));
        }
        m(i, static_cast<std::size_t>(c)) = 1.0;
    }
    return LabelMatrix(std::move(m));
}

std::vector<int> LabelMatrix::argmax_rows() const {
    std::vector<int> out(m_.rows());
    for (std::size_t i = 0; i < m_.rows(); ++i) {
        const auto row = m_.row(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < row.size(); ++j) {
            if (row[j] > row[best]) best = j;
        }
        out[i] = static_cast<int>(best);
    }
    return out;
}

std::vector<double> LabelMatrix::column(std::size_t c) const {
    std::vector<double> out(m_.rows());
    for (std::size_t i = 0; i < m_.rows(); ++i) out[i] = m_(i, c);
    return out;
}

} // namespace gkd
