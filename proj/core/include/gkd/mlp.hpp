#pragma once

#include "gkd/labels.hpp"
#include "gkd/mask.hpp"
#include "gkd/matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace gkd {

struct LinearLayer {
    DenseMatrix weight;       // in_dim x out_dim
    std::vector<double> bias; // out_dim
};

// Fully connected network with ReLU hidden activations; the last layer
// emits raw logits.
struct MLPParams {
    std::vector<LinearLayer> layers;

    std::size_t input_dim() const;
    std::size_t output_dim() const;
    std::size_t parameter_count() const;
    void validate() const; // consecutive layer dims must chain
};

// Gradients share the parameter layout.
using MLPGrads = MLPParams;

enum class RunMode { kTrain, kEval };

struct TrainConfig {
    double learning_rate = 1e-2;              // searched over {5e-3, 1e-2}
    double dropout = 0.1;                      // searched over {0.1, 0.3, 0.5}
    std::vector<std::size_t> hidden = {64};    // 1-3 hidden layers
    std::size_t epochs = 200;
    std::uint64_t seed = 0;

    void validate() const;
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<LinearLayer> first_moment;  // shaped like the tracked params
    std::vector<LinearLayer> second_moment;
    std::uint64_t step = 0;

    static AdamState like(const MLPParams& params);
};

// Glorot-uniform weights in +/- sqrt(6 / (fan_in + fan_out)), zero biases.
MLPParams init_mlp(const std::vector<std::size_t>& dims, std::uint64_t seed);

// Forward pass. In kTrain mode, inverted dropout with rate `dropout` is
// applied to each hidden activation using masks drawn from `seed`; in
// kEval mode dropout is the identity.
DenseMatrix mlp_forward(const MLPParams& params, const DenseMatrix& x, RunMode mode,
                        std::uint64_t seed = 0, double dropout = 0.0);

// Row-wise softmax, stabilized by row-max subtraction.
LabelMatrix softmax_rows(const DenseMatrix& logits);

// Mean over masked rows of -sum_c target * log(max(pred, 1e-12)).
double cross_entropy_soft(const LabelMatrix& pred, const LabelMatrix& target, const Mask& row_mask);

// Analytic gradients of cross_entropy_soft(softmax_rows(mlp_forward(params, x,
// kEval)), target, row_mask) with respect to every weight and bias.
MLPGrads mlp_backward(const MLPParams& params, const DenseMatrix& x,
                      const LabelMatrix& target, const Mask& row_mask);

// Bias-corrected Adam update, applied elementwise. Increments state.step.
void adam_step(MLPParams& params, const MLPGrads& grads, AdamState& state, double learning_rate,
               const AdamConfig& adam = {});

struct TrainHistory {
    std::vector<double> loss;         // training loss per epoch
    std::vector<double> val_accuracy; // per epoch, when a validation set was given
    std::size_t best_epoch = 0;       // argmax of val_accuracy (earliest on ties)
};

struct EvalSet {
    const DenseMatrix* features = nullptr;
    const std::vector<int>* class_ids = nullptr;
};

// Full-batch Adam training for cfg.epochs; weight init and per-epoch dropout
// masks are derived from cfg.seed, so identical inputs give bitwise-identical
// parameters. Returns the final parameters. When `val` is set, per-epoch
// validation accuracy is recorded into `history`.
MLPParams train_mlp(const DenseMatrix& x, const LabelMatrix& target, const Mask& row_mask,
                    const TrainConfig& cfg, TrainHistory* history = nullptr,
                    const EvalSet& val = {});

} // namespace gkd
