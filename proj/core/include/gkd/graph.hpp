#pragma once

#include "gkd/matrix.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace gkd {

// Undirected simple graph over N nodes, stored as per-node sorted neighbor
// lists. No self-loops, no duplicate edges, symmetric by construction.
class SparseGraph {
public:
    SparseGraph() = default;
    explicit SparseGraph(std::size_t node_count) : adj_(node_count) {}

    static SparseGraph from_edges(std::size_t node_count,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& edges);

    std::size_t node_count() const { return adj_.size(); }
    std::size_t edge_count() const;
    std::size_t degree(std::size_t node) const { return adj_[node].size(); }
    std::span<const std::size_t> neighbors(std::size_t node) const { return adj_[node]; }
    bool has_edge(std::size_t a, std::size_t b) const;

    // Keeps neighbor lists sorted; duplicates are ignored, self-loops rejected.
    void add_edge(std::size_t a, std::size_t b);

    // All edges as (i, j) with i < j, in ascending order.
    std::vector<std::pair<std::size_t, std::size_t>> edges() const;

    // Edge-list text format: header "N <count>" then one "i j" line per edge.
    void save_edge_list(std::ostream& out) const;
    void save_edge_list(const std::string& path) const;
    static SparseGraph load_edge_list(std::istream& in, const std::string& origin = "<stream>");
    static SparseGraph load_edge_list(const std::string& path);

private:
    std::vector<std::vector<std::size_t>> adj_;

    friend SparseGraph threshold_graph(const std::vector<std::optional<double>>&, double);
    friend SparseGraph union_graphs(const std::vector<SparseGraph>&);
    friend SparseGraph similarity_graph(const DenseMatrix&, double);
    void sort_and_dedup();
};

// Edge (i, j) iff both values are present and |v_i - v_j| < threshold.
SparseGraph threshold_graph(const std::vector<std::optional<double>>& values, double threshold);

// Set union of the edge sets; all graphs must share the node count.
SparseGraph union_graphs(const std::vector<SparseGraph>& graphs);

// Edge (i, j) iff cosine similarity of the embedding rows exceeds threshold.
// Zero-norm rows get no edges (a warning is printed to stderr).
SparseGraph similarity_graph(const DenseMatrix& embeddings, double threshold);

// Sparse N x N propagation matrix in CSR form, produced by the
// normalizations below.
class PropagationOperator {
public:
    PropagationOperator() = default;

    std::size_t node_count() const { return n_; }

    // operator * x for an N x C dense matrix.
    DenseMatrix apply(const DenseMatrix& x) const;

    double entry(std::size_t i, std::size_t j) const; // 0 when absent
    DenseMatrix dense() const;                        // small-N inspection

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::size_t> col_;
    std::vector<double> weight_;

    friend PropagationOperator row_normalize(const SparseGraph& g);
    friend PropagationOperator sym_normalize(const SparseGraph& g);
};

// P = D^{-1} A, row-stochastic. Isolated nodes get a self-loop row
// (P[i][i] = 1) so every row sums to 1.
PropagationOperator row_normalize(const SparseGraph& g);

// GCN renormalization D~^{-1/2} (A + I) D~^{-1/2}; symmetric.
PropagationOperator sym_normalize(const SparseGraph& g);

// TADPOLE per-biomarker connection thresholds (Abeta, Tau, pTau, FDG, AV45).
inline std::vector<double> tadpole_default_thresholds() { return {20.0, 15.0, 1.5, 0.02, 0.03}; }

} // namespace gkd
