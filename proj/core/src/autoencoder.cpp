#include "gkd/autoencoder.hpp"

#include "gkd/errors.hpp"
#include "gkd/mlp.hpp"
#include "gkd/rng.hpp"

#include <cmath>
#include <utility>

namespace gkd {

namespace {

LinearLayer init_layer(std::size_t in_dim, std::size_t out_dim, Rng& rng) {
    LinearLayer layer;
    layer.weight = DenseMatrix(in_dim, out_dim);
    const double bound = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
    for (double& v : layer.weight.values()) v = rng.uniform(-bound, bound);
    layer.bias.assign(out_dim, 0.0);
    return layer;
}

DenseMatrix affine(const DenseMatrix& x, const LinearLayer& layer) {
    DenseMatrix z = matmul(x, layer.weight);
    for (std::size_t i = 0; i < z.rows(); ++i) {
        auto row = z.row(i);
        for (std::size_t j = 0; j < z.cols(); ++j) row[j] += layer.bias[j];
    }
    return z;
}

std::vector<double> column_sums(const DenseMatrix& m) {
    std::vector<double> sums(m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto row = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) sums[j] += row[j];
    }
    return sums;
}

} // namespace

AutoencoderResult autoencoder_embed(const DenseMatrix& x_aux, const LabelMatrix& y_l,
                                    const Mask& labeled_mask, const AutoencoderConfig& cfg) {
    if (cfg.latent_dim == 0 || cfg.latent_dim >= x_aux.cols()) {
        throw UsageError("autoencoder: latent dim must be in [1, input dim)");
    }
    if (y_l.rows() != x_aux.rows() || labeled_mask.size() != x_aux.rows()) {
        throw ShapeError("autoencoder: labels/mask row count mismatch");
    }
    if (!(cfg.recon_weight >= 0.0)) throw UsageError("autoencoder: recon weight must be >= 0");
    require_finite(x_aux, "autoencoder input");

    const std::size_t n = x_aux.rows();
    const std::size_t d = x_aux.cols();
    const std::size_t labeled_count = mask_count(labeled_mask);

    Rng rng(cfg.seed);
    MLPParams bundle; // parameter container: encoder, decoder, classifier heads
    bundle.layers.push_back(init_layer(d, cfg.latent_dim, rng));
    bundle.layers.push_back(init_layer(cfg.latent_dim, d, rng));
    bundle.layers.push_back(init_layer(cfg.latent_dim, y_l.cols(), rng));
    AdamState state = AdamState::like(bundle);

    AutoencoderResult result;
    const double mse_scale = 1.0 / static_cast<double>(n * d);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const DenseMatrix pre = affine(x_aux, bundle.layers[0]);
        DenseMatrix z = pre;
        for (double& v : z.values()) v = v > 0.0 ? v : 0.0;
        const DenseMatrix recon = affine(z, bundle.layers[1]);
        const DenseMatrix logits = affine(z, bundle.layers[2]);

        // reconstruction term and its gradient
        DenseMatrix d_recon(n, d);
        double recon_loss = 0.0;
        {
            const auto xv = x_aux.values();
            const auto rv = recon.values();
            auto gv = d_recon.values();
            for (std::size_t k = 0; k < xv.size(); ++k) {
                const double diff = rv[k] - xv[k];
                recon_loss += diff * diff;
                gv[k] = cfg.recon_weight * 2.0 * diff * mse_scale;
            }
            recon_loss *= mse_scale;
        }

        // supervised term over labeled rows
        DenseMatrix d_logits(n, y_l.cols());
        double ce_loss = 0.0;
        if (labeled_count > 0) {
            const LabelMatrix pred = softmax_rows(logits);
            ce_loss = cross_entropy_soft(pred, y_l, labeled_mask);
            const double inv = 1.0 / static_cast<double>(labeled_count);
            for (std::size_t i = 0; i < n; ++i) {
                if (!labeled_mask[i]) continue;
                const auto p = pred.row(i);
                const auto t = y_l.row(i);
                auto g = d_logits.row(i);
                for (std::size_t j = 0; j < d_logits.cols(); ++j) g[j] = (p[j] - t[j]) * inv;
            }
        }
        result.loss_history.push_back(cfg.recon_weight * recon_loss + ce_loss);

        MLPGrads grads;
        grads.layers.resize(3);
        grads.layers[1].weight = matmul_at_b(z, d_recon);
        grads.layers[1].bias = column_sums(d_recon);
        grads.layers[2].weight = matmul_at_b(z, d_logits);
        grads.layers[2].bias = column_sums(d_logits);

        DenseMatrix d_z = matmul_a_bt(d_recon, bundle.layers[1].weight);
        {
            const DenseMatrix d_z_clf = matmul_a_bt(d_logits, bundle.layers[2].weight);
            auto dz = d_z.values();
            const auto dc = d_z_clf.values();
            const auto pv = pre.values();
            for (std::size_t k = 0; k < dz.size(); ++k) {
                dz[k] = pv[k] > 0.0 ? dz[k] + dc[k] : 0.0;
            }
        }
        grads.layers[0].weight = matmul_at_b(x_aux, d_z);
        grads.layers[0].bias = column_sums(d_z);

        adam_step(bundle, grads, state, cfg.learning_rate);
    }

    DenseMatrix latent = affine(x_aux, bundle.layers[0]);
    for (double& v : latent.values()) v = v > 0.0 ? v : 0.0;
    require_finite(latent, "autoencoder latent");
    result.latent = std::move(latent);
    return result;
}

} // namespace gkd
