#pragma once

#include "gkd/labels.hpp"
#include "gkd/mask.hpp"
#include "gkd/matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace gkd {

struct SplitMasks {
    Mask train;
    Mask val;
    Mask test;
    Mask labeled; // subset of train

    bool empty() const { return train.empty(); }
    // train/val/test partition [0, n); labeled is a subset of train.
    void validate(std::size_t n) const;
};

struct SplitSpec {
    double train_fraction = 0.55;
    double val_fraction = 0.10;
    double test_fraction = 0.35;
    double labeled_fraction = 0.4; // of the train split
    std::uint64_t seed = 0;

    void validate() const;
};

struct Dataset {
    DenseMatrix features;     // N x F node features
    LabelMatrix labels;       // N x C exact one-hot
    std::vector<int> class_ids;
    DenseMatrix graph_features;              // N x d_g; missing entries hold 0
    std::vector<std::uint8_t> graph_observed; // N x d_g row-major, 1 = observed
    SplitMasks splits;        // empty until make_splits is applied

    std::size_t n() const { return features.rows(); }
    std::size_t feature_dim() const { return features.cols(); }
    std::size_t num_classes() const { return labels.cols(); }
    std::size_t graph_dim() const { return graph_features.cols(); }

    bool graph_entry_observed(std::size_t row, std::size_t col) const {
        return graph_observed[row * graph_features.cols() + col] != 0;
    }

    void validate() const;
};

struct SyntheticSpec {
    std::size_t n = 2000;          // even; classes are exactly balanced
    std::size_t node_dim = 128;
    std::size_t graph_dim = 4;
    std::size_t informative_dims = 8; // informative subspace of the node features
    double class_sep = 1.0;
    double p_missing = 0.0;
    std::uint64_t seed = 0;
};

// Two-class multi-modal generator. Node features are normal around opposite
// hypercube vertices (+/- class_sep on the informative dims, pure noise
// elsewhere); graph features are normal with per-class means -/+ class_sep
// on every coordinate; each graph entry is then dropped independently with
// probability p_missing.
Dataset generate_synthetic(const SyntheticSpec& spec);

// Seeded uniform shuffle, then partition by floor(fraction * n) with the
// remainder assigned to train; the labeled subset is drawn uniformly from
// the train split.
SplitMasks make_splits(std::size_t n, const SplitSpec& spec);

// Flips each observed entry to missing independently with probability
// p_missing; deterministic under seed.
void apply_missing(DenseMatrix& graph_features, std::vector<std::uint8_t>& observed,
                   double p_missing, std::uint64_t seed);

// CSV triple: features N x F numeric, labels one integer class id per row,
// graph features N x d_g numeric with empty cells for missing entries.
// Comma-delimited, one header row each. Splits are not part of the files.
Dataset load_csv_dataset(const std::string& features_path, const std::string& labels_path,
                         const std::string& graph_features_path);
void save_csv_dataset(const Dataset& ds, const std::string& features_path,
                      const std::string& labels_path, const std::string& graph_features_path);

// Standalone loaders for graph-free evaluation and graph building.
DenseMatrix load_csv_matrix(const std::string& path);
std::vector<int> load_csv_labels(const std::string& path);
// As load_csv_matrix but keeping per-cell observed flags (empty cell = missing).
void load_csv_matrix_with_missing(const std::string& path, DenseMatrix& values,
                                  std::vector<std::uint8_t>& observed);

} // namespace gkd
