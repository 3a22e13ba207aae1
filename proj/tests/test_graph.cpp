#include "gkd/errors.hpp"
#include "gkd/graph.hpp"
#include "gkd/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>
#include <vector>

using namespace gkd;

namespace {

using EdgeSet = std::set<std::pair<std::size_t, std::size_t>>;

EdgeSet edge_set(const SparseGraph& g) {
    const auto edges = g.edges();
    return EdgeSet(edges.begin(), edges.end());
}

SparseGraph random_graph(Rng& rng, std::size_t n, double density) {
    SparseGraph g(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (rng.uniform() < density) g.add_edge(i, j);
        }
    }
    return g;
}

} // namespace

TEST_CASE("threshold_graph direct definition and missing values") {
    const std::vector<std::optional<double>> values{10.0, 25.0, 40.0};
    const SparseGraph g = threshold_graph(values, 20.0);
    CHECK(edge_set(g) == EdgeSet{{0, 1}, {1, 2}}); // |10-40| = 30 excluded

    const std::vector<std::optional<double>> with_missing{10.0, std::nullopt, 28.0};
    const SparseGraph g2 = threshold_graph(with_missing, 20.0);
    CHECK(edge_set(g2) == EdgeSet{{0, 2}});
    CHECK(g2.degree(1) == 0);

    CHECK_THROWS_AS(threshold_graph(values, 0.0), UsageError);
    CHECK_THROWS_AS(threshold_graph(values, -1.0), UsageError);
}

TEST_CASE("tadpole default connection thresholds") {
    const std::vector<double> expected{20.0, 15.0, 1.5, 0.02, 0.03};
    CHECK(tadpole_default_thresholds() == expected);
}

TEST_CASE("threshold_graph limits: huge threshold complete, tiny threshold empty") {
    Rng rng(7);
    std::vector<std::optional<double>> values(12);
    for (auto& v : values) v = rng.normal();
    const SparseGraph complete = threshold_graph(values, 1e12);
    CHECK(complete.edge_count() == 12 * 11 / 2);
    const SparseGraph empty = threshold_graph(values, 1e-300);
    CHECK(empty.edge_count() == 0);
}

TEST_CASE("threshold_graph is permutation equivariant") {
    Rng rng(17);
    std::vector<std::optional<double>> values(15);
    for (auto& v : values) {
        if (rng.uniform() < 0.2) v = std::nullopt;
        else v = rng.normal();
    }
    const SparseGraph base = threshold_graph(values, 0.8);

    std::vector<std::size_t> perm(values.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm);
    std::vector<std::optional<double>> permuted(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) permuted[perm[i]] = values[i];
    const SparseGraph mapped = threshold_graph(permuted, 0.8);

    EdgeSet expected;
    for (const auto& [a, b] : base.edges()) {
        expected.insert({std::min(perm[a], perm[b]), std::max(perm[a], perm[b])});
    }
    CHECK(edge_set(mapped) == expected);
}

TEST_CASE("union_graphs identity, basic union and error") {
    SparseGraph g(3);
    g.add_edge(0, 1);
    const SparseGraph empty(3);
    CHECK(edge_set(union_graphs({g, empty})) == edge_set(g));

    SparseGraph h(3);
    h.add_edge(1, 2);
    CHECK(edge_set(union_graphs({g, h})) == EdgeSet{{0, 1}, {1, 2}});

    const SparseGraph wrong(4);
    CHECK_THROWS_AS(union_graphs({g, wrong}), UsageError);
    CHECK_THROWS_AS(union_graphs({}), UsageError);
}

TEST_CASE("union_graphs equals a dense pairwise OR oracle") {
    Rng rng(27);
    const std::size_t n = 40;
    std::vector<SparseGraph> parts;
    for (int k = 0; k < 4; ++k) {
        std::vector<std::optional<double>> values(n);
        for (auto& v : values) {
            if (rng.uniform() < 0.3) v = std::nullopt;
            else v = rng.normal();
        }
        parts.push_back(threshold_graph(values, 0.5));
    }
    const SparseGraph merged = union_graphs(parts);

    // dense boolean OR of the adjacency matrices
    std::vector<std::vector<bool>> dense(n, std::vector<bool>(n, false));
    for (const auto& part : parts) {
        for (const auto& [a, b] : part.edges()) {
            dense[a][b] = true;
            dense[b][a] = true;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            CHECK(merged.has_edge(i, j) == dense[i][j]);
        }
    }
}

TEST_CASE("union_graphs is idempotent, commutative and associative") {
    Rng rng(37);
    const SparseGraph a = random_graph(rng, 12, 0.3);
    const SparseGraph b = random_graph(rng, 12, 0.3);
    const SparseGraph c = random_graph(rng, 12, 0.3);
    CHECK(edge_set(union_graphs({a, a})) == edge_set(a));
    CHECK(edge_set(union_graphs({a, b})) == edge_set(union_graphs({b, a})));
    CHECK(edge_set(union_graphs({union_graphs({a, b}), c})) ==
          edge_set(union_graphs({a, union_graphs({b, c})})));
}

TEST_CASE("similarity_graph trivial and oracle cases") {
    DenseMatrix same(4, 3);
    for (std::size_t i = 0; i < 4; ++i) {
        same(i, 0) = 1.0;
        same(i, 1) = 2.0;
        same(i, 2) = -1.0;
    }
    CHECK(similarity_graph(same, 0.9).edge_count() == 4 * 3 / 2);

    const DenseMatrix ortho = DenseMatrix::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    CHECK(similarity_graph(ortho, 0.5).edge_count() == 0);

    Rng rng(47);
    DenseMatrix random(10, 4);
    for (double& v : random.values()) v = rng.normal();
    const SparseGraph g = similarity_graph(random, 0.3);
    for (std::size_t i = 0; i < 10; ++i) {
        for (std::size_t j = i + 1; j < 10; ++j) {
            double dot = 0.0, ni = 0.0, nj = 0.0;
            for (std::size_t k = 0; k < 4; ++k) {
                dot += random(i, k) * random(j, k);
                ni += random(i, k) * random(i, k);
                nj += random(j, k) * random(j, k);
            }
            const bool expected = dot / (std::sqrt(ni) * std::sqrt(nj)) > 0.3;
            CHECK(g.has_edge(i, j) == expected);
        }
    }

    DenseMatrix with_zero = DenseMatrix::from_rows({{0, 0}, {1, 1}, {1, 0.9}});
    const SparseGraph gz = similarity_graph(with_zero, 0.5);
    CHECK(gz.degree(0) == 0);

    CHECK_THROWS_AS(similarity_graph(random, 0.0), UsageError);
    CHECK_THROWS_AS(similarity_graph(random, 1.5), UsageError);
}

TEST_CASE("row_normalize on a path and on isolated nodes") {
    SparseGraph path(3);
    path.add_edge(0, 1);
    path.add_edge(1, 2);
    const PropagationOperator p = row_normalize(path);
    CHECK(p.entry(1, 0) == 0.5);
    CHECK(p.entry(1, 1) == 0.0);
    CHECK(p.entry(1, 2) == 0.5);
    CHECK(p.entry(0, 1) == 1.0);
    CHECK(p.entry(2, 1) == 1.0);

    SparseGraph with_isolated(2);
    const PropagationOperator q = row_normalize(with_isolated);
    CHECK(q.entry(0, 0) == 1.0);
    CHECK(q.entry(1, 1) == 1.0);
}

TEST_CASE("row_normalize rows sum to one on random graphs") {
    Rng rng(57);
    const SparseGraph g = random_graph(rng, 20, 0.15);
    const PropagationOperator p = row_normalize(g);
    DenseMatrix ones(20, 1, 1.0);
    const DenseMatrix sums = p.apply(ones);
    for (std::size_t i = 0; i < 20; ++i) {
        CHECK(std::abs(sums(i, 0) - 1.0) <= 1e-12);
    }
}

TEST_CASE("sym_normalize single node, pair, and spectral radius bound") {
    const SparseGraph single(1);
    const PropagationOperator p1 = sym_normalize(single);
    CHECK(p1.entry(0, 0) == 1.0);

    SparseGraph pair(2);
    pair.add_edge(0, 1);
    const PropagationOperator p2 = sym_normalize(pair);
    // A~ = ones(2), D~ = diag(2, 2)
    CHECK(p2.entry(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p2.entry(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p2.entry(1, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p2.entry(1, 1) == doctest::Approx(0.5).epsilon(1e-15));

    Rng rng(67);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t n = 5 + rng.index(16);
        const SparseGraph g = random_graph(rng, n, 0.25);
        const DenseMatrix dense = sym_normalize(g).dense();
        // symmetric
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                CHECK(dense(i, j) == doctest::Approx(dense(j, i)).epsilon(1e-15));
            }
        }
        // power iteration for the dominant eigenvalue
        std::vector<double> v(n);
        for (auto& x : v) x = rng.uniform(0.1, 1.0);
        double lambda = 0.0;
        for (int it = 0; it < 300; ++it) {
            std::vector<double> next(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) next[i] += dense(i, j) * v[j];
            }
            double norm = 0.0;
            for (double x : next) norm += x * x;
            norm = std::sqrt(norm);
            if (norm == 0.0) break;
            for (std::size_t i = 0; i < n; ++i) v[i] = next[i] / norm;
            lambda = norm;
        }
        CHECK(lambda <= 1.0 + 1e-9);
    }
}

TEST_CASE("edge-list round trip and parse errors") {
    Rng rng(77);
    const SparseGraph g = random_graph(rng, 9, 0.4);
    std::stringstream buffer;
    g.save_edge_list(buffer);
    const SparseGraph loaded = SparseGraph::load_edge_list(buffer, "<test>");
    CHECK(loaded.node_count() == g.node_count());
    CHECK(edge_set(loaded) == edge_set(g));

    std::stringstream bad_header("X 4\n0 1\n");
    CHECK_THROWS_AS(SparseGraph::load_edge_list(bad_header, "<test>"), ParseError);
    std::stringstream out_of_range("N 3\n0 7\n");
    CHECK_THROWS_AS(SparseGraph::load_edge_list(out_of_range, "<test>"), ParseError);
    std::stringstream self_loop("N 3\n1 1\n");
    CHECK_THROWS_AS(SparseGraph::load_edge_list(self_loop, "<test>"), ParseError);
}

TEST_CASE("SparseGraph bookkeeping: symmetry, dedup, self-loop rejection") {
    SparseGraph g(5);
    g.add_edge(3, 1);
    g.add_edge(1, 3);
    CHECK(g.edge_count() == 1);
    CHECK(g.has_edge(1, 3));
    CHECK(g.has_edge(3, 1));
    CHECK_THROWS_AS(g.add_edge(2, 2), UsageError);
    CHECK_THROWS_AS(g.add_edge(0, 9), UsageError);
    const auto nbrs = g.neighbors(1);
    CHECK(std::is_sorted(nbrs.begin(), nbrs.end()));
}
