#include "gkd/graph.hpp"

#include "gkd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace gkd {

void SparseGraph::sort_and_dedup() {
    for (auto& list : adj_) {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
    }
}

SparseGraph SparseGraph::from_edges(std::size_t node_count,
                                    const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    SparseGraph g(node_count);
    for (const auto& [a, b] : edges) g.add_edge(a, b);
    return g;
}

std::size_t SparseGraph::edge_count() const {
    std::size_t total = 0;
    for (const auto& list : adj_) total += list.size();
    return total / 2;
}

bool SparseGraph::has_edge(std::size_t a, std::size_t b) const {
    const auto& list = adj_[a];
    return std::binary_search(list.begin(), list.end(), b);
}

void SparseGraph::add_edge(std::size_t a, std::size_t b) {
    if (a == b) throw UsageError("add_edge: self-loops are not stored");
    if (a >= adj_.size() || b >= adj_.size()) throw UsageError("add_edge: node index out of range");
    auto insert = [](std::vector<std::size_t>& list, std::size_t v) {
        auto it = std::lower_bound(list.begin(), list.end(), v);
        if (it == list.end() || *it != v) list.insert(it, v);
    };
    insert(adj_[a], b);
    insert(adj_[b], a);
}

std::vector<std::pair<std::size_t, std::size_t>> SparseGraph::edges() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    out.reserve(edge_count());
    for (std::size_t i = 0; i < adj_.size(); ++i) {
        for (std::size_t j : adj_[i]) {
            if (i < j) out.emplace_back(i, j);
        }
    }
    return out;
}

void SparseGraph::save_edge_list(std::ostream& out) const {
    out << "N " << adj_.size() << "\n";
    for (std::size_t i = 0; i < adj_.size(); ++i) {
        for (std::size_t j : adj_[i]) {
            if (i < j) out << i << " " << j << "\n";
        }
    }
}

void SparseGraph::save_edge_list(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    save_edge_list(out);
    if (!out) throw IoError("write failed: " + path);
}

SparseGraph SparseGraph::load_edge_list(std::istream& in, const std::string& origin) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError(origin, 1, "missing header line");
    ++line_no;
    std::istringstream header(line);
    std::string tag;
    std::size_t n = 0;
    if (!(header >> tag >> n) || tag != "N") {
        throw ParseError(origin, line_no, "expected header \"N <count>\"");
    }
    SparseGraph g(n);
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::size_t a = 0;
        std::size_t b = 0;
        if (!(row >> a >> b)) throw ParseError(origin, line_no, "expected \"i j\" pair");
        if (a >= n || b >= n) throw ParseError(origin, line_no, "node index out of range");
        if (a == b) throw ParseError(origin, line_no, "self-loop not allowed");
        g.adj_[a].push_back(b);
        g.adj_[b].push_back(a);
    }
    g.sort_and_dedup();
    return g;
}

SparseGraph SparseGraph::load_edge_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    return load_edge_list(in, path);
}

SparseGraph threshold_graph(const std::vector<std::optional<double>>& values, double threshold) {
    if (!(threshold > 0.0)) throw UsageError("threshold_graph: threshold must be positive");
    const std::size_t n = values.size();
    SparseGraph g(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!values[i]) continue;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!values[j]) continue;
            if (std::abs(*values[i] - *values[j]) < threshold) {
                g.adj_[i].push_back(j);
                g.adj_[j].push_back(i);
            }
        }
    }
    // pairwise loop already emits sorted unique lists
    return g;
}

SparseGraph union_graphs(const std::vector<SparseGraph>& graphs) {
    if (graphs.empty()) throw UsageError("union_graphs: no graphs given");
    const std::size_t n = graphs.front().node_count();
    for (const auto& g : graphs) {
        if (g.node_count() != n) throw UsageError("union_graphs: node counts differ");
    }
    SparseGraph out(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& merged = out.adj_[i];
        for (const auto& g : graphs) {
            const auto nbrs = g.neighbors(i);
            merged.insert(merged.end(), nbrs.begin(), nbrs.end());
        }
    }
    out.sort_and_dedup();
    return out;
}

SparseGraph similarity_graph(const DenseMatrix& embeddings, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw UsageError("similarity_graph: threshold must be in (0, 1]");
    }
    require_finite(embeddings, "similarity_graph embeddings");
    const std::size_t n = embeddings.rows();
    std::vector<double> norms(n);
    std::size_t zero_norm_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double sq = 0.0;
        for (double v : embeddings.row(i)) sq += v * v;
        norms[i] = std::sqrt(sq);
        if (norms[i] == 0.0) ++zero_norm_count;
    }
    if (zero_norm_count > 0) {
        std::cerr << "gkd: warning: similarity_graph: " << zero_norm_count
                  << " zero-norm embedding row(s) get no edges\n";
    }
    SparseGraph g(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (norms[i] == 0.0) continue;
        const auto ri = embeddings.row(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            if (norms[j] == 0.0) continue;
            const auto rj = embeddings.row(j);
            double dot = 0.0;
            for (std::size_t k = 0; k < ri.size(); ++k) dot += ri[k] * rj[k];
            if (dot / (norms[i] * norms[j]) > threshold) {
                g.adj_[i].push_back(j);
                g.adj_[j].push_back(i);
            }
        }
    }
    return g;
}

DenseMatrix PropagationOperator::apply(const DenseMatrix& x) const {
    if (x.rows() != n_) throw ShapeError("PropagationOperator::apply: row count mismatch");
    DenseMatrix out(n_, x.cols());
    for (std::size_t i = 0; i < n_; ++i) {
        auto out_row = out.row(i);
        for (std::size_t e = row_ptr_[i]; e < row_ptr_[i + 1]; ++e) {
            const double w = weight_[e];
            const auto src = x.row(col_[e]);
            for (std::size_t c = 0; c < x.cols(); ++c) out_row[c] += w * src[c];
        }
    }
    return out;
}

double PropagationOperator::entry(std::size_t i, std::size_t j) const {
    for (std::size_t e = row_ptr_[i]; e < row_ptr_[i + 1]; ++e) {
        if (col_[e] == j) return weight_[e];
    }
    return 0.0;
}

DenseMatrix PropagationOperator::dense() const {
    DenseMatrix out(n_, n_);
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t e = row_ptr_[i]; e < row_ptr_[i + 1]; ++e) out(i, col_[e]) = weight_[e];
    }
    return out;
}

PropagationOperator row_normalize(const SparseGraph& g) {
    const std::size_t n = g.node_count();
    PropagationOperator p;
    p.n_ = n;
    p.row_ptr_.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        p.row_ptr_[i + 1] = p.row_ptr_[i] + std::max<std::size_t>(g.degree(i), 1);
    }
    p.col_.resize(p.row_ptr_[n]);
    p.weight_.resize(p.row_ptr_[n]);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t e = p.row_ptr_[i];
        const std::size_t deg = g.degree(i);
        if (deg == 0) {
            // isolated nodes keep their own label mass
            p.col_[e] = i;
            p.weight_[e] = 1.0;
            continue;
        }
        const double w = 1.0 / static_cast<double>(deg);
        for (std::size_t j : g.neighbors(i)) {
            p.col_[e] = j;
            p.weight_[e] = w;
            ++e;
        }
    }
    return p;
}

PropagationOperator sym_normalize(const SparseGraph& g) {
    const std::size_t n = g.node_count();
    std::vector<double> inv_sqrt(n);
    for (std::size_t i = 0; i < n; ++i) {
        inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(g.degree(i) + 1));
    }
    PropagationOperator p;
    p.n_ = n;
    p.row_ptr_.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) p.row_ptr_[i + 1] = p.row_ptr_[i] + g.degree(i) + 1;
    p.col_.resize(p.row_ptr_[n]);
    p.weight_.resize(p.row_ptr_[n]);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t e = p.row_ptr_[i];
        bool self_emitted = false;
        auto emit_self = [&]() {
            p.col_[e] = i;
            p.weight_[e] = inv_sqrt[i] * inv_sqrt[i];
            ++e;
            self_emitted = true;
        };
        for (std::size_t j : g.neighbors(i)) {
            if (!self_emitted && j > i) emit_self();
            p.col_[e] = j;
            p.weight_[e] = inv_sqrt[i] * inv_sqrt[j];
            ++e;
        }
        if (!self_emitted) emit_self();
    }
    return p;
}

} // namespace gkd
