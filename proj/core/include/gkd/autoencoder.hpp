#pragma once

#include "gkd/labels.hpp"
#include "gkd/mask.hpp"
#include "gkd/matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace gkd {

struct AutoencoderConfig {
    std::size_t latent_dim = 8;
    double recon_weight = 1.0; // weight of the reconstruction MSE term
    double learning_rate = 1e-2;
    std::size_t epochs = 200;
    std::uint64_t seed = 0;
};

struct AutoencoderResult {
    DenseMatrix latent;               // N x latent_dim encoder output
    std::vector<double> loss_history; // combined loss per epoch
};

// Jointly trains encoder (linear + ReLU), decoder (linear) and classifier
// (linear) heads with
//   loss = recon_weight * MSE(decoder(z), x) over all rows
//        + CE(softmax(classifier(z)), y_l) over labeled rows
// and returns the per-node latent representation.
AutoencoderResult autoencoder_embed(const DenseMatrix& x_aux, const LabelMatrix& y_l,
                                    const Mask& labeled_mask, const AutoencoderConfig& cfg);

} // namespace gkd
