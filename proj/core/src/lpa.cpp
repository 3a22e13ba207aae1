#include "gkd/lpa.hpp"

#include "gkd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace gkd {

namespace {

void check_inputs(const PropagationOperator& p, const LabelMatrix& y0, const LabelMatrix& y_l,
                  const Mask& labeled_mask, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw UsageError("lpa: alpha must be in (0, 1]");
    if (y0.rows() != p.node_count()) throw ShapeError("lpa: label rows must match node count");
    if (y_l.rows() != y0.rows() || y_l.cols() != y0.cols()) {
        throw ShapeError("lpa: Y_L shape must match Y0");
    }
    if (labeled_mask.size() != y0.rows()) throw ShapeError("lpa: mask length mismatch");
    for (std::size_t i = 0; i < y0.rows(); ++i) {
        if (!labeled_mask[i]) continue;
        const auto a = y0.row(i);
        const auto b = y_l.row(i);
        for (std::size_t c = 0; c < a.size(); ++c) {
            if (a[c] != b[c]) {
                throw ValidationError("lpa: labeled row " + std::to_string(i) +
                                      " of Y0 does not equal Y_L");
            }
        }
    }
}

void clamp_labeled(DenseMatrix& y, const LabelMatrix& y_l, const Mask& labeled_mask) {
    for (std::size_t i = 0; i < y.rows(); ++i) {
        if (!labeled_mask[i]) continue;
        const auto src = y_l.row(i);
        auto dst = y.row(i);
        std::copy(src.begin(), src.end(), dst.begin());
    }
}

} // namespace

void LPAConfig::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw UsageError("LPAConfig: alpha must be in (0, 1]");
    if (max_iterations < 1) throw UsageError("LPAConfig: max_iterations must be >= 1");
    if (!(tolerance > 0.0)) throw UsageError("LPAConfig: tolerance must be positive");
}

LabelMatrix propagate(const PropagationOperator& p, const LabelMatrix& y0, const LabelMatrix& y_l,
                      const Mask& labeled_mask, const LPAConfig& cfg, PropagateStats* stats) {
    cfg.validate();
    check_inputs(p, y0, y_l, labeled_mask, cfg.alpha);

    DenseMatrix y = y0.matrix();
    const double retained = 1.0 - cfg.alpha;
    if (stats) *stats = {};
    for (std::size_t iter = 0; iter < cfg.max_iterations; ++iter) {
        DenseMatrix next = p.apply(y);
        {
            // Y0 + (1-a)(PY - Y0): equals (1-a) PY + a Y0 and is exact
            // (bitwise Y0) wherever PY == Y0, e.g. for a = 1 or P = I.
            auto nv = next.values();
            const auto y0v = y0.matrix().values();
            for (std::size_t k = 0; k < nv.size(); ++k) {
                nv[k] = y0v[k] + retained * (nv[k] - y0v[k]);
            }
        }
        clamp_labeled(next, y_l, labeled_mask);
        double change = 0.0;
        {
            const auto a = next.values();
            const auto b = y.values();
            for (std::size_t k = 0; k < a.size(); ++k) change = std::max(change, std::abs(a[k] - b[k]));
        }
        y = std::move(next);
        if (stats) {
            stats->iterations = iter + 1;
            stats->change_per_iteration.push_back(change);
        }
        if (change < cfg.tolerance) {
            if (stats) stats->converged = true;
            break;
        }
    }
    return LabelMatrix::from_matrix(std::move(y));
}

LabelMatrix lpa_fixed_point_oracle(const PropagationOperator& p, const LabelMatrix& y0,
                                   const LabelMatrix& y_l, const Mask& labeled_mask, double alpha) {
    check_inputs(p, y0, y_l, labeled_mask, alpha);
    if (p.node_count() > 200) throw UsageError("lpa_fixed_point_oracle: dense solve capped at N = 200");

    const std::size_t n = y0.rows();
    const std::size_t c = y0.cols();
    const std::vector<std::size_t> unlabeled = mask_indices(invert_mask(labeled_mask));
    const std::size_t u = unlabeled.size();

    DenseMatrix out = y0.matrix();
    clamp_labeled(out, y_l, labeled_mask);
    if (u == 0) return LabelMatrix::from_matrix(std::move(out));

    std::vector<std::size_t> position(n, SIZE_MAX);
    for (std::size_t k = 0; k < u; ++k) position[unlabeled[k]] = k;

    // system (I - (1-a) P_UU) Y_U = (1-a) P_UL Y_L + a Y0_U
    const DenseMatrix p_dense = p.dense();
    DenseMatrix system(u, u);
    DenseMatrix rhs(u, c);
    const double retained = 1.0 - alpha;
    for (std::size_t r = 0; r < u; ++r) {
        const std::size_t i = unlabeled[r];
        system(r, r) = 1.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double w = p_dense(i, j);
            if (w == 0.0) continue;
            if (position[j] != SIZE_MAX) {
                system(r, position[j]) -= retained * w;
            } else {
                const auto lab = y_l.row(j);
                for (std::size_t col = 0; col < c; ++col) rhs(r, col) += retained * w * lab[col];
            }
        }
        const auto init = y0.row(i);
        for (std::size_t col = 0; col < c; ++col) rhs(r, col) += alpha * init[col];
    }

    // Gaussian elimination with partial pivoting. The system is strictly
    // diagonally dominant for alpha > 0, so a vanishing pivot means bad input.
    for (std::size_t k = 0; k < u; ++k) {
        std::size_t pivot = k;
        for (std::size_t r = k + 1; r < u; ++r) {
            if (std::abs(system(r, k)) > std::abs(system(pivot, k))) pivot = r;
        }
        if (std::abs(system(pivot, k)) < 1e-12) {
            throw NumericError("lpa_fixed_point_oracle: singular system");
        }
        if (pivot != k) {
            for (std::size_t j = 0; j < u; ++j) std::swap(system(k, j), system(pivot, j));
            for (std::size_t j = 0; j < c; ++j) std::swap(rhs(k, j), rhs(pivot, j));
        }
        for (std::size_t r = k + 1; r < u; ++r) {
            const double factor = system(r, k) / system(k, k);
            if (factor == 0.0) continue;
            system(r, k) = 0.0;
            for (std::size_t j = k + 1; j < u; ++j) system(r, j) -= factor * system(k, j);
            for (std::size_t j = 0; j < c; ++j) rhs(r, j) -= factor * rhs(k, j);
        }
    }
    DenseMatrix solution(u, c);
    for (std::size_t r = u; r-- > 0;) {
        for (std::size_t j = 0; j < c; ++j) {
            double acc = rhs(r, j);
            for (std::size_t k = r + 1; k < u; ++k) acc -= system(r, k) * solution(k, j);
            solution(r, j) = acc / system(r, r);
        }
    }

    for (std::size_t r = 0; r < u; ++r) {
        auto dst = out.row(unlabeled[r]);
        const auto src = solution.row(r);
        for (std::size_t j = 0; j < c; ++j) {
            // solver roundoff can leave -1e-17 where the fixed point is 0
            dst[j] = (src[j] < 0.0 && src[j] > -1e-12) ? 0.0 : src[j];
        }
    }
    return LabelMatrix::from_matrix(std::move(out));
}

} // namespace gkd
