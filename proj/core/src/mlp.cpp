#include "gkd/mlp.hpp"

#include "gkd/errors.hpp"
#include "gkd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace gkd {

namespace {

constexpr double kLogClamp = 1e-12;

// Dropout mask entries are 0 (dropped) or 1/(1-p) (kept, inverted scaling).
DenseMatrix draw_dropout_mask(Rng& rng, std::size_t rows, std::size_t cols, double p) {
    DenseMatrix mask(rows, cols);
    const double scale = 1.0 / (1.0 - p);
    for (double& v : mask.values()) v = rng.uniform() < p ? 0.0 : scale;
    return mask;
}

struct ForwardTrace {
    std::vector<DenseMatrix> pre;    // pre-activation per hidden layer
    std::vector<DenseMatrix> hidden; // post-ReLU (and post-dropout) per hidden layer
    DenseMatrix logits;
};

DenseMatrix affine(const DenseMatrix& x, const LinearLayer& layer) {
    DenseMatrix z = matmul(x, layer.weight);
    for (std::size_t i = 0; i < z.rows(); ++i) {
        auto row = z.row(i);
        for (std::size_t j = 0; j < z.cols(); ++j) row[j] += layer.bias[j];
    }
    return z;
}

ForwardTrace forward_trace(const MLPParams& params, const DenseMatrix& x,
                           const std::vector<DenseMatrix>* dropout_masks) {
    ForwardTrace trace;
    const std::size_t hidden_count = params.layers.size() - 1;
    trace.pre.reserve(hidden_count);
    trace.hidden.reserve(hidden_count);
    const DenseMatrix* current = &x;
    for (std::size_t l = 0; l < hidden_count; ++l) {
        DenseMatrix z = affine(*current, params.layers[l]);
        trace.pre.push_back(z);
        for (double& v : z.values()) v = v > 0.0 ? v : 0.0;
        if (dropout_masks) {
            const auto mask = (*dropout_masks)[l].values();
            auto vals = z.values();
            for (std::size_t k = 0; k < vals.size(); ++k) vals[k] *= mask[k];
        }
        trace.hidden.push_back(std::move(z));
        current = &trace.hidden.back();
    }
    trace.logits = affine(*current, params.layers.back());
    return trace;
}

// dLoss/dLogits of the masked-mean soft cross-entropy through softmax.
DenseMatrix logits_gradient(const DenseMatrix& logits, const LabelMatrix& target,
                            const Mask& row_mask) {
    const double inv_count = 1.0 / static_cast<double>(mask_count(row_mask));
    const LabelMatrix pred = softmax_rows(logits);
    DenseMatrix grad(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        if (!row_mask[i]) continue;
        const auto p = pred.row(i);
        const auto t = target.row(i);
        auto g = grad.row(i);
        for (std::size_t j = 0; j < logits.cols(); ++j) g[j] = (p[j] - t[j]) * inv_count;
    }
    return grad;
}

std::vector<double> column_sums(const DenseMatrix& m) {
    std::vector<double> sums(m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto row = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) sums[j] += row[j];
    }
    return sums;
}

MLPGrads backward_from_trace(const MLPParams& params, const DenseMatrix& x,
                             const ForwardTrace& trace, const LabelMatrix& target,
                             const Mask& row_mask,
                             const std::vector<DenseMatrix>* dropout_masks) {
    MLPGrads grads;
    grads.layers.resize(params.layers.size());
    DenseMatrix delta = logits_gradient(trace.logits, target, row_mask);
    for (std::size_t l = params.layers.size(); l-- > 0;) {
        const DenseMatrix& input = l == 0 ? x : trace.hidden[l - 1];
        grads.layers[l].weight = matmul_at_b(input, delta);
        grads.layers[l].bias = column_sums(delta);
        if (l == 0) break;
        delta = matmul_a_bt(delta, params.layers[l].weight);
        if (dropout_masks) {
            const auto mask = (*dropout_masks)[l - 1].values();
            auto vals = delta.values();
            for (std::size_t k = 0; k < vals.size(); ++k) vals[k] *= mask[k];
        }
        const auto pre = trace.pre[l - 1].values();
        auto vals = delta.values();
        for (std::size_t k = 0; k < vals.size(); ++k) {
            if (pre[k] <= 0.0) vals[k] = 0.0;
        }
    }
    return grads;
}

void check_forward_shapes(const MLPParams& params, const DenseMatrix& x) {
    params.validate();
    if (x.cols() != params.input_dim()) {
        throw ShapeError("mlp_forward: input has " + std::to_string(x.cols()) +
                         " columns, first layer expects " + std::to_string(params.input_dim()));
    }
}

void check_target_and_mask(const DenseMatrix& x, const LabelMatrix& target, const Mask& row_mask) {
    if (target.rows() != x.rows()) throw ShapeError("target row count does not match input");
    if (row_mask.size() != x.rows()) throw ShapeError("row mask length does not match input");
    if (mask_count(row_mask) == 0) throw UsageError("row mask selects no rows");
}

std::vector<DenseMatrix> draw_all_masks(const MLPParams& params, std::size_t rows, double dropout,
                                        std::uint64_t seed) {
    std::vector<DenseMatrix> masks;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < params.layers.size(); ++l) {
        masks.push_back(draw_dropout_mask(rng, rows, params.layers[l].weight.cols(), dropout));
    }
    return masks;
}

} // namespace

std::size_t MLPParams::input_dim() const { return layers.front().weight.rows(); }
std::size_t MLPParams::output_dim() const { return layers.back().weight.cols(); }

std::size_t MLPParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers) n += layer.weight.size() + layer.bias.size();
    return n;
}

void MLPParams::validate() const {
    if (layers.empty()) throw ShapeError("network has no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].bias.size() != layers[l].weight.cols()) {
            throw ShapeError("layer " + std::to_string(l) + ": bias width mismatch");
        }
        if (l > 0 && layers[l].weight.rows() != layers[l - 1].weight.cols()) {
            throw ShapeError("layer " + std::to_string(l) + ": input dim does not chain");
        }
    }
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw UsageError("learning rate must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("dropout must be in [0, 1)");
    for (std::size_t h : hidden) {
        if (h == 0) throw UsageError("hidden width must be positive");
    }
}

AdamState AdamState::like(const MLPParams& params) {
    AdamState state;
    for (const auto& layer : params.layers) {
        LinearLayer zero;
        zero.weight = DenseMatrix(layer.weight.rows(), layer.weight.cols());
        zero.bias.assign(layer.bias.size(), 0.0);
        state.first_moment.push_back(zero);
        state.second_moment.push_back(std::move(zero));
    }
    return state;
}

MLPParams init_mlp(const std::vector<std::size_t>& dims, std::uint64_t seed) {
    if (dims.size() < 2) throw UsageError("init_mlp: need at least input and output dims");
    Rng rng(seed);
    MLPParams params;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        LinearLayer layer;
        layer.weight = DenseMatrix(dims[l], dims[l + 1]);
        const double bound = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
        for (double& v : layer.weight.values()) v = rng.uniform(-bound, bound);
        layer.bias.assign(dims[l + 1], 0.0);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

DenseMatrix mlp_forward(const MLPParams& params, const DenseMatrix& x, RunMode mode,
                        std::uint64_t seed, double dropout) {
    check_forward_shapes(params, x);
    if (mode == RunMode::kTrain && dropout > 0.0) {
        const auto masks = draw_all_masks(params, x.rows(), dropout, seed);
        DenseMatrix logits = forward_trace(params, x, &masks).logits;
        require_finite(logits, "mlp_forward");
        return logits;
    }
    DenseMatrix logits = forward_trace(params, x, nullptr).logits;
    require_finite(logits, "mlp_forward");
    return logits;
}

LabelMatrix softmax_rows(const DenseMatrix& logits) {
    require_finite(logits, "softmax_rows");
    DenseMatrix out(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const auto in = logits.row(i);
        auto row = out.row(i);
        double max = in[0];
        for (double v : in) max = std::max(max, v);
        double sum = 0.0;
        for (std::size_t j = 0; j < in.size(); ++j) {
            row[j] = std::exp(in[j] - max);
            sum += row[j];
        }
        for (std::size_t j = 0; j < in.size(); ++j) row[j] /= sum;
    }
    return LabelMatrix::from_matrix(std::move(out));
}

double cross_entropy_soft(const LabelMatrix& pred, const LabelMatrix& target, const Mask& row_mask) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
        throw ShapeError("cross_entropy_soft: shape mismatch");
    }
    if (row_mask.size() != pred.rows()) throw ShapeError("cross_entropy_soft: mask length mismatch");
    const std::size_t count = mask_count(row_mask);
    if (count == 0) throw UsageError("cross_entropy_soft: mask selects no rows");
    double total = 0.0;
    for (std::size_t i = 0; i < pred.rows(); ++i) {
        if (!row_mask[i]) continue;
        const auto p = pred.row(i);
        const auto t = target.row(i);
        double row_loss = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j) {
            if (t[j] != 0.0) row_loss -= t[j] * std::log(std::max(p[j], kLogClamp));
        }
        total += row_loss;
    }
    return total / static_cast<double>(count);
}

MLPGrads mlp_backward(const MLPParams& params, const DenseMatrix& x, const LabelMatrix& target,
                      const Mask& row_mask) {
    check_forward_shapes(params, x);
    check_target_and_mask(x, target, row_mask);
    if (target.cols() != params.output_dim()) {
        throw ShapeError("mlp_backward: target width does not match output dim");
    }
    const ForwardTrace trace = forward_trace(params, x, nullptr);
    return backward_from_trace(params, x, trace, target, row_mask, nullptr);
}

void adam_step(MLPParams& params, const MLPGrads& grads, AdamState& state, double learning_rate,
               const AdamConfig& adam) {
    if (grads.layers.size() != params.layers.size() ||
        state.first_moment.size() != params.layers.size()) {
        throw ShapeError("adam_step: state/gradient layer count mismatch");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(state.step));
    auto update = [&](double& param, double grad, double& m, double& v) {
        m = adam.beta1 * m + (1.0 - adam.beta1) * grad;
        v = adam.beta2 * v + (1.0 - adam.beta2) * grad * grad;
        const double m_hat = m / bc1;
        const double v_hat = v / bc2;
        param -= learning_rate * m_hat / (std::sqrt(v_hat) + adam.epsilon);
    };
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto& layer = params.layers[l];
        if (!layer.weight.same_shape(grads.layers[l].weight) ||
            layer.bias.size() != grads.layers[l].bias.size()) {
            throw ShapeError("adam_step: layer " + std::to_string(l) + " shape mismatch");
        }
        auto w = layer.weight.values();
        const auto gw = grads.layers[l].weight.values();
        auto mw = state.first_moment[l].weight.values();
        auto vw = state.second_moment[l].weight.values();
        for (std::size_t k = 0; k < w.size(); ++k) update(w[k], gw[k], mw[k], vw[k]);
        for (std::size_t k = 0; k < layer.bias.size(); ++k) {
            update(layer.bias[k], grads.layers[l].bias[k], state.first_moment[l].bias[k],
                   state.second_moment[l].bias[k]);
        }
    }
}

MLPParams train_mlp(const DenseMatrix& x, const LabelMatrix& target, const Mask& row_mask,
                    const TrainConfig& cfg, TrainHistory* history, const EvalSet& val) {
    cfg.validate();
    check_target_and_mask(x, target, row_mask);

    std::vector<std::size_t> dims;
    dims.push_back(x.cols());
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(target.cols());

    MLPParams params = init_mlp(dims, cfg.seed);
    if (cfg.epochs == 0) return params;

    AdamState state = AdamState::like(params);
    double best_val = -1.0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<DenseMatrix> masks;
        const bool use_dropout = cfg.dropout > 0.0 && !cfg.hidden.empty();
        if (use_dropout) {
            Rng rng(mix_seed(cfg.seed, 1 + epoch));
            for (std::size_t l = 0; l + 1 < params.layers.size(); ++l) {
                masks.push_back(
                    draw_dropout_mask(rng, x.rows(), params.layers[l].weight.cols(), cfg.dropout));
            }
        }
        const ForwardTrace trace = forward_trace(params, x, use_dropout ? &masks : nullptr);
        if (history) {
            history->loss.push_back(cross_entropy_soft(softmax_rows(trace.logits), target, row_mask));
        }
        const MLPGrads grads =
            backward_from_trace(params, x, trace, target, row_mask, use_dropout ? &masks : nullptr);
        adam_step(params, grads, state, cfg.learning_rate);

        if (val.features && val.class_ids) {
            const DenseMatrix val_logits = mlp_forward(params, *val.features, RunMode::kEval);
            std::size_t hits = 0;
            for (std::size_t i = 0; i < val_logits.rows(); ++i) {
                const auto row = val_logits.row(i);
                std::size_t best = 0;
                for (std::size_t j = 1; j < row.size(); ++j) {
                    if (row[j] > row[best]) best = j;
                }
                hits += static_cast<int>(best) == (*val.class_ids)[i];
            }
            const double acc = static_cast<double>(hits) / static_cast<double>(val_logits.rows());
            if (history) {
                history->val_accuracy.push_back(acc);
                if (acc > best_val) {
                    best_val = acc;
                    history->best_epoch = epoch;
                }
            }
        }
    }
    return params;
}

} // namespace gkd
