#include "gkd/dataset.hpp"
#include "gkd/graph.hpp"
#include "gkd/lpa.hpp"
#include "gkd/metrics.hpp"
#include "gkd/mlp.hpp"
#include "gkd/rng.hpp"

#include <benchmark/benchmark.h>

#include <optional>
#include <vector>

namespace {

using namespace gkd;

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    DenseMatrix m(rows, cols);
    Rng rng(seed);
    for (double& v : m.values()) v = rng.normal();
    return m;
}

void MlpForward(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    const MLPParams params = init_mlp({128, 64, 2}, 1);
    const DenseMatrix x = random_matrix(n, 128, 2);
    for (auto _ : state) {
        DenseMatrix logits = mlp_forward(params, x, RunMode::kEval);
        benchmark::DoNotOptimize(logits);
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(MlpForward)->RangeMultiplier(4)->Range(64, 4096)->Complexity();

void MlpBackward(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    const MLPParams params = init_mlp({128, 64, 2}, 1);
    const DenseMatrix x = random_matrix(n, 128, 2);
    std::vector<int> classes(n);
    for (std::size_t i = 0; i < n; ++i) classes[i] = static_cast<int>(i % 2);
    const LabelMatrix target = LabelMatrix::one_hot(classes, 2);
    const Mask mask = full_mask(n);
    for (auto _ : state) {
        MLPGrads grads = mlp_backward(params, x, target, mask);
        benchmark::DoNotOptimize(grads);
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(MlpBackward)->RangeMultiplier(4)->Range(64, 4096)->Complexity();

SparseGraph bench_graph(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::optional<double>> values(n);
    for (auto& v : values) v = rng.normal();
    return threshold_graph(values, 0.2);
}

void PropagateIteration(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    const SparseGraph g = bench_graph(n, 3);
    const PropagationOperator p = row_normalize(g);
    Rng rng(4);
    DenseMatrix y0(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = rng.uniform();
        y0(i, 0) = a;
        y0(i, 1) = 1.0 - a;
    }
    const LabelMatrix labels = LabelMatrix::from_matrix(std::move(y0));
    Mask labeled(n, 0);
    for (std::size_t i = 0; i < n / 10 + 1; ++i) labeled[i] = 1;
    DenseMatrix clamped = labels.matrix();
    for (std::size_t i = 0; i < n; ++i) {
        if (!labeled[i]) continue;
        clamped(i, 0) = 1.0;
        clamped(i, 1) = 0.0;
    }
    const LabelMatrix y_l = LabelMatrix::from_matrix(std::move(clamped));
    LPAConfig cfg;
    cfg.max_iterations = 1;
    cfg.tolerance = 1e-300; // force exactly one iteration
    for (auto _ : state) {
        LabelMatrix yt = propagate(p, y_l, y_l, labeled, cfg);
        benchmark::DoNotOptimize(yt);
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(PropagateIteration)->RangeMultiplier(2)->Range(256, 2048)->Complexity();

void ThresholdGraphBuild(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    Rng rng(5);
    std::vector<std::optional<double>> values(n);
    for (auto& v : values) v = rng.normal();
    for (auto _ : state) {
        SparseGraph g = threshold_graph(values, 0.1);
        benchmark::DoNotOptimize(g);
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(ThresholdGraphBuild)->RangeMultiplier(2)->Range(256, 2048)->Complexity();

void AucBinary(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    Rng rng(6);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        scores[i] = rng.uniform();
        labels[i] = static_cast<int>(i % 2);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(auc_binary(scores, labels));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(AucBinary)->RangeMultiplier(8)->Range(1024, 65536)->Complexity();

} // namespace

BENCHMARK_MAIN();
