#include "fdialab/baseline_mlp.hpp"

#include <cmath>

namespace fdialab {

namespace {

void init_uniform(Mat& w, Rng& rng) {
    const double r = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (std::size_t i = 0; i < w.rows(); ++i) {
        for (std::size_t j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-r, r);
    }
}

}  // namespace

MlpParams make_mlp(std::size_t n, int hidden_layers, int units, Rng& rng) {
    if (hidden_layers < 1 || units < 1) throw ContractError("make_mlp: bad architecture");
    MlpParams params;
    std::size_t in = 2 * n;
    for (int l = 0; l < hidden_layers; ++l) {
        params.weights.emplace_back(static_cast<std::size_t>(units), in);
        params.biases.emplace_back(static_cast<std::size_t>(units), 0.0);
        init_uniform(params.weights.back(), rng);
        in = static_cast<std::size_t>(units);
    }
    params.weights.emplace_back(n + 1, in);
    params.biases.emplace_back(n + 1, 0.0);
    init_uniform(params.weights.back(), rng);
    return params;
}

Vec mlp_forward(const MlpParams& params, const Vec& x_flat, MlpCache* cache) {
    if (params.weights.empty() || x_flat.size() != params.input_width()) {
        throw ContractError("mlp_forward: input width mismatch");
    }
    if (cache) {
        cache->inputs.clear();
        cache->pre_acts.clear();
    }
    Vec a = x_flat;
    const std::size_t layers = params.weights.size();
    for (std::size_t l = 0; l < layers; ++l) {
        if (cache) cache->inputs.push_back(a);
        Vec z = matvec(params.weights[l], a);
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += params.biases[l][i];
        if (cache) cache->pre_acts.push_back(z);
        if (l + 1 < layers) {
            for (auto& v : z) v = v > 0.0 ? v : 0.0;
        } else {
            for (auto& v : z) v = 1.0 / (1.0 + std::exp(-v));
        }
        a = std::move(z);
    }
    if (cache) cache->probs = a;
    return a;
}

Vec mlp_backward(const MlpParams& params, const MlpCache& cache, const Vec& grad_probs,
                 MlpParams& grads) {
    const std::size_t layers = params.weights.size();
    if (cache.inputs.size() != layers || grad_probs.size() != params.output_width()) {
        throw ContractError("mlp_backward: cache/gradient mismatch");
    }
    // sigmoid head
    Vec gz(grad_probs.size());
    for (std::size_t i = 0; i < gz.size(); ++i) {
        const double p = cache.probs[i];
        gz[i] = grad_probs[i] * p * (1.0 - p);
    }
    for (std::size_t l = layers; l-- > 0;) {
        const Vec& in = cache.inputs[l];
        Mat& gw = grads.weights[l];
        Vec& gb = grads.biases[l];
        for (std::size_t i = 0; i < gz.size(); ++i) {
            gb[i] += gz[i];
            if (gz[i] == 0.0) continue;
            double* gwi = gw.row(i);
            for (std::size_t j = 0; j < in.size(); ++j) gwi[j] += gz[i] * in[j];
        }
        Vec gin(in.size(), 0.0);
        for (std::size_t i = 0; i < gz.size(); ++i) {
            if (gz[i] == 0.0) continue;
            const double* wi = params.weights[l].row(i);
            for (std::size_t j = 0; j < in.size(); ++j) gin[j] += wi[j] * gz[i];
        }
        if (l > 0) {
            const Vec& pre = cache.pre_acts[l - 1];
            for (std::size_t j = 0; j < gin.size(); ++j) {
                gin[j] = pre[j] > 0.0 ? gin[j] : 0.0;
            }
        }
        gz = std::move(gin);
    }
    return gz;
}

MlpParams zeros_like(const MlpParams& params) {
    MlpParams z;
    for (const auto& w : params.weights) z.weights.emplace_back(w.rows(), w.cols());
    for (const auto& b : params.biases) z.biases.emplace_back(b.size(), 0.0);
    return z;
}

}  // namespace fdialab
