#pragma once

#include "gkd/graph.hpp"
#include "gkd/labels.hpp"
#include "gkd/mask.hpp"

#include <cstddef>
#include <vector>

namespace gkd {

struct LPAConfig {
    double alpha = 0.5;               // remembrance coefficient, in (0, 1]
    std::size_t max_iterations = 100;
    double tolerance = 1e-6;          // convergence: max absolute row change

    void validate() const;
};

struct PropagateStats {
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> change_per_iteration;
};

// Label propagation with remembrance term and labeled-row clamping:
//   Y(k) = (1 - alpha) * P * Y(k-1) + alpha * Y(0),  labeled rows := Y_L.
// Iterates until the max absolute row change drops below cfg.tolerance or
// cfg.max_iterations is reached. Labeled rows of y0 must equal y_l.
LabelMatrix propagate(const PropagationOperator& p, const LabelMatrix& y0, const LabelMatrix& y_l,
                      const Mask& labeled_mask, const LPAConfig& cfg,
                      PropagateStats* stats = nullptr);

// Exact fixed point of the clamped recurrence via a dense linear solve on the
// unlabeled block:
//   (I - (1 - alpha) P_UU) Y_U = (1 - alpha) P_UL Y_L + alpha Y0_U.
// Independent check for propagate(); N must be <= 200 (dense O(N^3)).
LabelMatrix lpa_fixed_point_oracle(const PropagationOperator& p, const LabelMatrix& y0,
                                   const LabelMatrix& y_l, const Mask& labeled_mask, double alpha);

} // namespace gkd
