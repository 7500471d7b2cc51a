#pragma once

#include <vector>

#include "fdialab/linalg.hpp"
#include "fdialab/rng.hpp"

namespace fdialab {

/// Structure-blind baseline: affine/ReLU stack over the flattened [P, Q]
/// features, sigmoid outputs of size n+1. The grid bit is its own logit
/// rather than a max over nodes, since an MLP head has no node geometry.
struct MlpParams {
    std::vector<Mat> weights;  // layer l maps in -> out as (out x in)
    std::vector<Vec> biases;

    std::size_t input_width() const { return weights.front().cols(); }
    std::size_t output_width() const { return weights.back().rows(); }
};

struct MlpCache {
    std::vector<Vec> inputs;    // input to each affine layer
    std::vector<Vec> pre_acts;  // affine outputs before activation
    Vec probs;
};

/// hidden_layers ReLU layers of `units`, then a linear head of width n+1.
MlpParams make_mlp(std::size_t n, int hidden_layers, int units, Rng& rng);

/// Returns the n+1 output probabilities (node probs then grid prob).
Vec mlp_forward(const MlpParams& params, const Vec& x_flat, MlpCache* cache = nullptr);

/// grad_probs is dLoss/dprobs; parameter gradients accumulate into grads.
/// Returns dLoss/dx_flat.
Vec mlp_backward(const MlpParams& params, const MlpCache& cache, const Vec& grad_probs,
                 MlpParams& grads);

MlpParams zeros_like(const MlpParams& params);

}  // namespace fdialab
