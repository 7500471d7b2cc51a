#include "fdialab/gnn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>

#include "json.hpp"

namespace fdialab {

using nlohmann::json;

std::string to_string(Family f) {
    switch (f) {
        case Family::Arma: return "arma";
        case Family::Cheb: return "cheb";
        case Family::Mlp: return "mlp";
    }
    return "arma";
}

Family family_from_string(const std::string& s) {
    if (s == "arma") return Family::Arma;
    if (s == "cheb") return Family::Cheb;
    if (s == "mlp") return Family::Mlp;
    throw ConfigError("unknown model family: " + s);
}

Family family_of(const AnyDetector& model) {
    if (std::holds_alternative<MlpParams>(model)) return Family::Mlp;
    const auto& graph = std::get<DetectorModel>(model);
    if (graph.hidden.empty()) throw ContractError("detector has no hidden layers");
    return std::holds_alternative<ArmaKParams>(graph.hidden.front()) ? Family::Arma : Family::Cheb;
}

namespace {

void init_uniform(Mat& w, Rng& rng) {
    const double r = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (std::size_t i = 0; i < w.rows(); ++i) {
        for (std::size_t j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-r, r);
    }
}

void add_row_bias(Mat& m, const Vec& bias) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double* row = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) row[j] += bias[j];
    }
}

Mat relu(const Mat& m) {
    Mat out = m;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        double* row = out.row(i);
        for (std::size_t j = 0; j < out.cols(); ++j) row[j] = row[j] > 0.0 ? row[j] : 0.0;
    }
    return out;
}

constexpr double kProbClampLow = 1e-7;
constexpr double kProbClampHigh = 1.0 - 1e-7;

double clamp_prob(double p) { return std::min(std::max(p, kProbClampLow), kProbClampHigh); }

}  // namespace

DetectorModel make_arma_detector(std::size_t n, int layers, int units, int k_stacks,
                                 int iterations, Rng& rng, std::size_t in_features) {
    if (layers < 1 || units < 1 || k_stacks < 1 || iterations < 1) {
        throw ConfigError("make_arma_detector: bad architecture");
    }
    DetectorModel model;
    std::size_t c_in = in_features;
    for (int l = 0; l < layers; ++l) {
        const std::size_t c_out = (l == layers - 1) ? 1 : static_cast<std::size_t>(units);
        ArmaKParams layer;
        for (int k = 0; k < k_stacks; ++k) {
            Arma1Params stack;
            stack.alpha = Mat(c_out, c_out);
            stack.beta = Mat(c_in, c_out);
            stack.theta = Vec(c_out, 0.0);
            stack.iterations = iterations;
            init_uniform(stack.alpha, rng);
            stack.alpha *= 0.5 / static_cast<double>(iterations);
            init_uniform(stack.beta, rng);
            layer.stacks.push_back(std::move(stack));
        }
        model.hidden.emplace_back(std::move(layer));
        c_in = c_out;
    }
    model.dense.w = Mat(n, n);
    model.dense.b = Vec(n, 0.0);
    init_uniform(model.dense.w, rng);
    return model;
}

DetectorModel make_cheb_detector(std::size_t n, int layers, int units, int k_order, Rng& rng,
                                 std::size_t in_features) {
    if (layers < 1 || units < 1 || k_order < 1) {
        throw ConfigError("make_cheb_detector: bad architecture");
    }
    DetectorModel model;
    std::size_t c_in = in_features;
    for (int l = 0; l < layers; ++l) {
        const std::size_t c_out = (l == layers - 1) ? 1 : static_cast<std::size_t>(units);
        ChebParams layer;
        for (int k = 0; k < k_order; ++k) {
            layer.coeffs.emplace_back(c_in, c_out);
            init_uniform(layer.coeffs.back(), rng);
        }
        model.hidden.emplace_back(std::move(layer));
        c_in = c_out;
    }
    model.dense.w = Mat(n, n);
    model.dense.b = Vec(n, 0.0);
    init_uniform(model.dense.w, rng);
    return model;
}

// ---------------------------------------------------------------------------
// Layer forward/backward
// ---------------------------------------------------------------------------

Mat arma1_forward(const Arma1Params& params, const Mat& l_mod, const Mat& x, Arma1Cache* cache) {
    if (x.cols() != params.beta.rows() || l_mod.rows() != x.rows()) {
        throw ContractError("arma1_forward: shape mismatch");
    }
    if (params.iterations < 1) throw ContractError("arma1_forward: iterations must be >= 1");
    Mat base = matmul(x, params.beta);
    add_row_bias(base, params.theta);
    if (cache) {
        cache->iterates.clear();
        cache->iterates.reserve(static_cast<std::size_t>(params.iterations) + 1);
    }
    Mat y = base;
    if (cache) cache->iterates.push_back(y);
    for (int t = 0; t < params.iterations; ++t) {
        Mat next = matmul(matmul(l_mod, y), params.alpha);
        next += base;
        y = std::move(next);
        if (cache) cache->iterates.push_back(y);
    }
    return y;
}

Mat arma1_backward(const Arma1Params& params, const Mat& l_mod, const Mat& x,
                   const Arma1Cache& cache, const Mat& grad_out, Arma1Params& grads) {
    const auto t_total = static_cast<std::size_t>(params.iterations);
    if (cache.iterates.size() != t_total + 1) {
        throw ContractError("arma1_backward: cache mismatch");
    }
    Mat gx(x.rows(), x.cols());
    Mat g = grad_out;
    for (std::size_t t = t_total; t >= 1; --t) {
        // y^t = L~ y^{t-1} alpha + x beta + theta
        const Mat ly = matmul(l_mod, cache.iterates[t - 1]);
        matmul_tn_acc(ly, g, grads.alpha);
        matmul_tn_acc(x, g, grads.beta);
        const Vec gb = colsum(g);
        for (std::size_t c = 0; c < gb.size(); ++c) grads.theta[c] += gb[c];
        matmul_nt_acc(g, params.beta, gx);
        g = matmul_tn(l_mod, matmul_nt(g, params.alpha));
    }
    // y^0 = x beta + theta
    matmul_tn_acc(x, g, grads.beta);
    const Vec gb = colsum(g);
    for (std::size_t c = 0; c < gb.size(); ++c) grads.theta[c] += gb[c];
    matmul_nt_acc(g, params.beta, gx);
    return gx;
}

Mat armaK_forward(const ArmaKParams& params, const Mat& l_mod, const Mat& x, ArmaKCache* cache) {
    if (params.stacks.empty()) throw ContractError("armaK_forward: no stacks");
    if (cache) cache->stacks.resize(params.stacks.size());
    Mat sum;
    for (std::size_t k = 0; k < params.stacks.size(); ++k) {
        Mat yk = arma1_forward(params.stacks[k], l_mod, x, cache ? &cache->stacks[k] : nullptr);
        if (k == 0) {
            sum = std::move(yk);
        } else {
            sum += yk;
        }
    }
    sum *= 1.0 / static_cast<double>(params.stacks.size());
    return sum;
}

Mat armaK_backward(const ArmaKParams& params, const Mat& l_mod, const Mat& x,
                   const ArmaKCache& cache, const Mat& grad_out, ArmaKParams& grads) {
    if (cache.stacks.size() != params.stacks.size()) {
        throw ContractError("armaK_backward: cache mismatch");
    }
    Mat scaled = grad_out;
    scaled *= 1.0 / static_cast<double>(params.stacks.size());
    Mat gx(x.rows(), x.cols());
    for (std::size_t k = 0; k < params.stacks.size(); ++k) {
        gx += arma1_backward(params.stacks[k], l_mod, x, cache.stacks[k], scaled,
                             grads.stacks[k]);
    }
    return gx;
}

Mat cheb_forward(const ChebParams& params, const Mat& l_scaled, const Mat& x, ChebCache* cache) {
    const std::size_t order = params.coeffs.size();
    if (order == 0) throw ContractError("cheb_forward: no coefficients");
    if (x.cols() != params.coeffs.front().rows()) {
        throw ContractError("cheb_forward: shape mismatch");
    }
    std::vector<Mat> z;
    z.reserve(order);
    z.push_back(x);
    if (order > 1) z.push_back(matmul(l_scaled, x));
    for (std::size_t k = 2; k < order; ++k) {
        Mat next = matmul(l_scaled, z[k - 1]);
        next *= 2.0;
        next -= z[k - 2];
        z.push_back(std::move(next));
    }
    Mat y = matmul(z[0], params.coeffs[0]);
    for (std::size_t k = 1; k < order; ++k) matmul_acc(z[k], params.coeffs[k], y);
    if (cache) cache->z = std::move(z);
    return y;
}

Mat cheb_backward(const ChebParams& params, const Mat& l_scaled, const Mat& x,
                  const ChebCache& cache, const Mat& grad_out, ChebParams& grads) {
    const std::size_t order = params.coeffs.size();
    if (cache.z.size() != order) throw ContractError("cheb_backward: cache mismatch");
    std::vector<Mat> gz(order);
    for (std::size_t k = 0; k < order; ++k) {
        matmul_tn_acc(cache.z[k], grad_out, grads.coeffs[k]);
        gz[k] = matmul_nt(grad_out, params.coeffs[k]);
    }
    for (std::size_t k = order; k-- > 2;) {
        // z_k = 2 L z_{k-1} - z_{k-2}
        Mat back = matmul_tn(l_scaled, gz[k]);
        back *= 2.0;
        gz[k - 1] += back;
        gz[k - 2] -= gz[k];
    }
    Mat gx = std::move(gz[0]);
    if (order > 1) gx += matmul_tn(l_scaled, gz[1]);
    (void)x;
    return gx;
}

// ---------------------------------------------------------------------------
// Whole-model forward/backward
// ---------------------------------------------------------------------------

namespace {

using HiddenCache = std::variant<ArmaKCache, ChebCache>;

struct GraphCache {
    std::vector<Mat> inputs;    // input to each hidden layer
    std::vector<HiddenCache> layer_caches;
    std::vector<Mat> pre_relu;  // layer outputs before activation
    Vec dense_in;               // flattened n x 1 hidden output
    Vec logits;
    Vec node_probs;
    std::size_t argmax = 0;
};

const Mat& operator_for(const DetectorModel& model, const GraphTopology& topo) {
    return std::holds_alternative<ArmaKParams>(model.hidden.front()) ? topo.l_modified
                                                                     : topo.l_scaled;
}

Prediction graph_forward(const DetectorModel& model, const GraphTopology& topo, const Mat& x,
                         GraphCache* cache) {
    if (model.hidden.empty()) throw ContractError("graph_forward: no hidden layers");
    const Mat& op = operator_for(model, topo);
    if (cache) {
        cache->inputs.clear();
        cache->layer_caches.clear();
        cache->pre_relu.clear();
    }
    Mat h = x;
    for (const auto& layer : model.hidden) {
        if (cache) cache->inputs.push_back(h);
        Mat pre;
        if (const auto* arma = std::get_if<ArmaKParams>(&layer)) {
            ArmaKCache lc;
            pre = armaK_forward(*arma, op, h, cache ? &lc : nullptr);
            if (cache) cache->layer_caches.emplace_back(std::move(lc));
        } else {
            const auto& cheb = std::get<ChebParams>(layer);
            ChebCache lc;
            pre = cheb_forward(cheb, op, h, cache ? &lc : nullptr);
            if (cache) cache->layer_caches.emplace_back(std::move(lc));
        }
        if (cache) cache->pre_relu.push_back(pre);
        h = relu(pre);
    }
    if (h.cols() != 1) {
        throw ContractError("graph_forward: last hidden layer must have one output channel");
    }
    const std::size_t n = h.rows();
    Vec hv(n);
    for (std::size_t i = 0; i < n; ++i) hv[i] = h(i, 0);
    Vec logits = matvec(model.dense.w, hv);
    for (std::size_t i = 0; i < n; ++i) logits[i] += model.dense.b[i];

    Vec probs(n);
    std::size_t argmax = 0;
    for (std::size_t i = 0; i < n; ++i) {
        probs[i] = 1.0 / (1.0 + std::exp(-logits[i]));
        if (probs[i] > probs[argmax]) argmax = i;  // first index wins ties
    }
    if (cache) {
        cache->dense_in = hv;
        cache->logits = logits;
        cache->node_probs = probs;
        cache->argmax = argmax;
    }
    Prediction pred;
    pred.probs = std::move(probs);
    pred.probs.push_back(pred.probs[argmax]);  // S = max(Y)
    return pred;
}

/// grad_pred has n+1 entries (node probabilities + grid probability).
void graph_backward(const DetectorModel& model, const GraphTopology& topo,
                    const GraphCache& cache, const Vec& grad_pred, DetectorModel& grads) {
    const Mat& op = operator_for(model, topo);
    const std::size_t n = cache.node_probs.size();
    Vec gp(grad_pred.begin(), grad_pred.begin() + static_cast<std::ptrdiff_t>(n));
    gp[cache.argmax] += grad_pred[n];  // winner-take-all subgradient of max

    Vec glogit(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = cache.node_probs[i];
        glogit[i] = gp[i] * p * (1.0 - p);
    }
    // dense: logits = W h + b
    for (std::size_t i = 0; i < n; ++i) {
        grads.dense.b[i] += glogit[i];
        if (glogit[i] == 0.0) continue;
        double* gwrow = grads.dense.w.row(i);
        for (std::size_t j = 0; j < n; ++j) gwrow[j] += glogit[i] * cache.dense_in[j];
    }
    Mat gh(n, 1);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += model.dense.w(i, j) * glogit[i];
        gh(j, 0) = s;
    }

    for (std::size_t l = model.hidden.size(); l-- > 0;) {
        // through ReLU
        const Mat& pre = cache.pre_relu[l];
        for (std::size_t i = 0; i < gh.rows(); ++i) {
            for (std::size_t j = 0; j < gh.cols(); ++j) {
                if (pre(i, j) <= 0.0) gh(i, j) = 0.0;
            }
        }
        const Mat& layer_in = cache.inputs[l];
        if (const auto* arma = std::get_if<ArmaKParams>(&model.hidden[l])) {
            gh = armaK_backward(*arma, op, layer_in, std::get<ArmaKCache>(cache.layer_caches[l]),
                                gh, std::get<ArmaKParams>(grads.hidden[l]));
        } else {
            const auto& cheb = std::get<ChebParams>(model.hidden[l]);
            gh = cheb_backward(cheb, op, layer_in, std::get<ChebCache>(cache.layer_caches[l]), gh,
                               std::get<ChebParams>(grads.hidden[l]));
        }
    }
}

Vec flatten_features(const Mat& x) { return Vec(x.data(), x.data() + x.size()); }

}  // namespace

Prediction model_forward(const DetectorModel& model, const GraphTopology& topo, const Mat& x) {
    return graph_forward(model, topo, x, nullptr);
}

Prediction detector_forward(const AnyDetector& model, const GraphTopology* topo, const Mat& x) {
    if (const auto* graph = std::get_if<DetectorModel>(&model)) {
        if (!topo) throw ContractError("graph detector needs a topology");
        return model_forward(*graph, *topo, x);
    }
    Prediction pred;
    pred.probs = mlp_forward(std::get<MlpParams>(model), flatten_features(x));
    return pred;
}

double bce_loss(const Vec& probs, const AttackLabel& label) {
    if (probs.size() != label.per_bus.size() + 1) {
        throw ContractError("bce_loss: prediction/label size mismatch");
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        const double y = k < label.per_bus.size() ? static_cast<double>(label.per_bus[k])
                                                  : static_cast<double>(label.grid);
        const double p = clamp_prob(probs[k]);
        acc -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    return acc / static_cast<double>(probs.size());
}

namespace {

Vec bce_loss_grad(const Vec& probs, const AttackLabel& label) {
    Vec grad(probs.size(), 0.0);
    const double scale = 1.0 / static_cast<double>(probs.size());
    for (std::size_t k = 0; k < probs.size(); ++k) {
        const double y = k < label.per_bus.size() ? static_cast<double>(label.per_bus[k])
                                                  : static_cast<double>(label.grid);
        const double p = probs[k];
        if (p <= kProbClampLow || p >= kProbClampHigh) continue;  // clamped: flat region
        grad[k] = scale * (-y / p + (1.0 - y) / (1.0 - p));
    }
    return grad;
}

}  // namespace

DetectorModel zeros_like(const DetectorModel& model) {
    DetectorModel z;
    for (const auto& layer : model.hidden) {
        if (const auto* arma = std::get_if<ArmaKParams>(&layer)) {
            ArmaKParams zl;
            for (const auto& stack : arma->stacks) {
                Arma1Params zs;
                zs.alpha = Mat(stack.alpha.rows(), stack.alpha.cols());
                zs.beta = Mat(stack.beta.rows(), stack.beta.cols());
                zs.theta = Vec(stack.theta.size(), 0.0);
                zs.iterations = stack.iterations;
                zl.stacks.push_back(std::move(zs));
            }
            z.hidden.emplace_back(std::move(zl));
        } else {
            const auto& cheb = std::get<ChebParams>(layer);
            ChebParams zl;
            for (const auto& c : cheb.coeffs) zl.coeffs.emplace_back(c.rows(), c.cols());
            z.hidden.emplace_back(std::move(zl));
        }
    }
    z.dense.w = Mat(model.dense.w.rows(), model.dense.w.cols());
    z.dense.b = Vec(model.dense.b.size(), 0.0);
    return z;
}

AnyDetector zeros_like(const AnyDetector& model) {
    if (const auto* graph = std::get_if<DetectorModel>(&model)) {
        return zeros_like(*graph);
    }
    return zeros_like(std::get<MlpParams>(model));
}

double batch_loss_and_gradients(const AnyDetector& model, const GraphTopology* topo,
                                const std::vector<LabeledSample>& samples,
                                const std::vector<std::size_t>& batch_indices,
                                AnyDetector& grads) {
    if (batch_indices.empty()) throw ContractError("batch_loss_and_gradients: empty batch");
    double loss = 0.0;
    if (const auto* graph = std::get_if<DetectorModel>(&model)) {
        if (!topo) throw ContractError("graph detector needs a topology");
        auto& ggrads = std::get<DetectorModel>(grads);
        GraphCache cache;
        for (std::size_t idx : batch_indices) {
            const LabeledSample& sample = samples[idx];
            Prediction pred = graph_forward(*graph, *topo, sample.x, &cache);
            loss += bce_loss(pred.probs, sample.y);
            const Vec gpred = bce_loss_grad(pred.probs, sample.y);
            graph_backward(*graph, *topo, cache, gpred, ggrads);
        }
    } else {
        const auto& mlp = std::get<MlpParams>(model);
        auto& mgrads = std::get<MlpParams>(grads);
        MlpCache cache;
        for (std::size_t idx : batch_indices) {
            const LabeledSample& sample = samples[idx];
            const Vec probs = mlp_forward(mlp, flatten_features(sample.x), &cache);
            loss += bce_loss(probs, sample.y);
            const Vec gpred = bce_loss_grad(probs, sample.y);
            mlp_backward(mlp, cache, gpred, mgrads);
        }
    }
    const double inv = 1.0 / static_cast<double>(batch_indices.size());
    for_each_param(grads, [&](const std::string&, double* p, std::size_t len) {
        for (std::size_t i = 0; i < len; ++i) p[i] *= inv;
    });
    return loss * inv;
}

double batch_loss(const AnyDetector& model, const GraphTopology* topo,
                  const std::vector<LabeledSample>& samples) {
    if (samples.empty()) throw ContractError("batch_loss: empty sample list");
    double loss = 0.0;
    for (const auto& sample : samples) {
        const Prediction pred = detector_forward(model, topo, sample.x);
        loss += bce_loss(pred.probs, sample.y);
    }
    return loss / static_cast<double>(samples.size());
}

// ---------------------------------------------------------------------------
// Parameter traversal
// ---------------------------------------------------------------------------

namespace {

template <typename ModelT, typename Fn>
void traverse_params(ModelT& model, Fn&& fn) {
    if (auto* graph = std::get_if<DetectorModel>(&model)) {
        for (std::size_t l = 0; l < graph->hidden.size(); ++l) {
            const std::string base = "hidden" + std::to_string(l);
            if (auto* arma = std::get_if<ArmaKParams>(&graph->hidden[l])) {
                for (std::size_t k = 0; k < arma->stacks.size(); ++k) {
                    auto& stack = arma->stacks[k];
                    const std::string sb = base + ".stack" + std::to_string(k);
                    fn(sb + ".alpha", stack.alpha.data(), stack.alpha.size());
                    fn(sb + ".beta", stack.beta.data(), stack.beta.size());
                    fn(sb + ".theta", stack.theta.data(), stack.theta.size());
                }
            } else {
                auto& cheb = std::get<ChebParams>(graph->hidden[l]);
                for (std::size_t k = 0; k < cheb.coeffs.size(); ++k) {
                    fn(base + ".coeff" + std::to_string(k), cheb.coeffs[k].data(),
                       cheb.coeffs[k].size());
                }
            }
        }
        fn("dense.weight", graph->dense.w.data(), graph->dense.w.size());
        fn("dense.bias", graph->dense.b.data(), graph->dense.b.size());
    } else {
        auto& mlp = std::get<MlpParams>(model);
        for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
            const std::string base = "layer" + std::to_string(l);
            fn(base + ".weight", mlp.weights[l].data(), mlp.weights[l].size());
            fn(base + ".bias", mlp.biases[l].data(), mlp.biases[l].size());
        }
    }
}

}  // namespace

void for_each_param(AnyDetector& model,
                    const std::function<void(const std::string&, double*, std::size_t)>& fn) {
    traverse_params(model, fn);
}

void for_each_param(
    const AnyDetector& model,
    const std::function<void(const std::string&, const double*, std::size_t)>& fn) {
    traverse_params(const_cast<AnyDetector&>(model),
                    [&](const std::string& name, double* p, std::size_t len) { fn(name, p, len); });
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TrainRun make_train_run(AnyDetector model) {
    TrainRun run;
    std::size_t total_params = 0;
    for_each_param(model,
                   [&](const std::string&, double*, std::size_t len) { total_params += len; });
    run.adam_m.assign(total_params, 0.0);
    run.adam_v.assign(total_params, 0.0);
    run.best = model;
    run.last = std::move(model);
    return run;
}

TrainResult train_run(TrainRun& run, const GraphTopology* topo, const DatasetSplits& splits,
                      const TrainConfig& config) {
    if (splits.train.empty() || splits.validation.empty()) {
        throw ContractError("train: train and validation splits must be nonempty");
    }
    if (config.batch_size < 1 || config.max_epochs < 1) {
        throw ConfigError("train: bad batch size or epoch count");
    }

    AnyDetector& model = run.last;
    std::vector<std::size_t> order(splits.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainResult result;
    result.best_val_loss = run.best_val_loss;
    result.best_epoch = run.best_epoch;
    result.epochs_run = run.epochs_done;

    AnyDetector grads = zeros_like(model);
    // parameter storage is stable for the whole run; walk it once
    std::vector<std::pair<double*, std::size_t>> model_spans, grad_spans;
    for_each_param(model, [&](const std::string&, double* p, std::size_t len) {
        model_spans.emplace_back(p, len);
    });
    for_each_param(grads, [&](const std::string&, double* p, std::size_t len) {
        grad_spans.emplace_back(p, len);
    });
    const Rng master(config.seed);

    for (int epoch = run.epochs_done; epoch < config.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        // batch order is a pure function of (seed, epoch) so resumed runs
        // replay the schedule a longer run would have used
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng epoch_rng = master.fork(0xE90C0000ULL + static_cast<std::uint64_t>(epoch));
        epoch_rng.shuffle(order);
        double train_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                 order.begin() + static_cast<std::ptrdiff_t>(end));
            // zero grads
            for_each_param(grads, [](const std::string&, double* p, std::size_t len) {
                std::fill(p, p + len, 0.0);
            });
            const double loss = batch_loss_and_gradients(model, topo, splits.train, batch, grads);
            if (!std::isfinite(loss)) {
                throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch));
            }
            train_loss += loss * static_cast<double>(batch.size());
            seen += batch.size();

            // Adam step
            ++run.adam_steps;
            const double bias1 =
                1.0 - std::pow(config.adam_beta1, static_cast<double>(run.adam_steps));
            const double bias2 =
                1.0 - std::pow(config.adam_beta2, static_cast<double>(run.adam_steps));
            std::size_t offset = 0;
            for (std::size_t s = 0; s < model_spans.size(); ++s) {
                double* p = model_spans[s].first;
                const double* g = grad_spans[s].first;
                const std::size_t len = model_spans[s].second;
                for (std::size_t i = 0; i < len; ++i) {
                    const std::size_t idx = offset + i;
                    run.adam_m[idx] = config.adam_beta1 * run.adam_m[idx] +
                                      (1.0 - config.adam_beta1) * g[i];
                    run.adam_v[idx] = config.adam_beta2 * run.adam_v[idx] +
                                      (1.0 - config.adam_beta2) * g[i] * g[i];
                    const double mh = run.adam_m[idx] / bias1;
                    const double vh = run.adam_v[idx] / bias2;
                    p[i] -= config.learning_rate * mh / (std::sqrt(vh) + config.adam_eps);
                }
                offset += len;
            }
        }
        train_loss /= static_cast<double>(seen);
        const double val_loss = batch_loss(model, topo, splits.validation);
        if (!std::isfinite(val_loss)) {
            throw NumericalError("train: non-finite validation loss at epoch " +
                                 std::to_string(epoch));
        }
        const auto t1 = std::chrono::steady_clock::now();
        const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        result.history.push_back({epoch, train_loss, val_loss, ms});
        run.epochs_done = epoch + 1;
        result.epochs_run = run.epochs_done;

        const bool significant = run.best_val_loss - val_loss > config.min_delta;
        if (val_loss < run.best_val_loss) {
            run.best_val_loss = val_loss;
            run.best_epoch = epoch;
            run.best = model;
            result.best_val_loss = val_loss;
            result.best_epoch = epoch;
        }
        if (significant) {
            run.wait = 0;
        } else if (++run.wait >= config.patience) {
            result.early_stopped = true;
            break;
        }
    }
    return result;
}

TrainResult train(AnyDetector& model, const GraphTopology* topo, const DatasetSplits& splits,
                  const TrainConfig& config) {
    TrainRun run = make_train_run(std::move(model));
    const TrainResult result = train_run(run, topo, splits, config);
    model = std::move(run.best);
    return result;
}

// ---------------------------------------------------------------------------
// Architecture descriptor + checkpoints
// ---------------------------------------------------------------------------

std::string arch_to_json(const ArchDescriptor& arch) {
    json j;
    j["schema"] = "fdialab.arch.v1";
    j["family"] = to_string(arch.family);
    j["n"] = arch.n;
    j["in_features"] = arch.in_features;
    j["layers"] = arch.layers;
    j["units"] = arch.units;
    j["k"] = arch.k;
    j["iterations"] = arch.iterations;
    return j.dump(2);
}

ArchDescriptor arch_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("arch json: ") + e.what());
    }
    ArchDescriptor arch;
    arch.family = family_from_string(j.at("family").get<std::string>());
    arch.n = j.at("n").get<std::size_t>();
    arch.in_features = j.at("in_features").get<std::size_t>();
    arch.layers = j.at("layers").get<int>();
    arch.units = j.at("units").get<int>();
    arch.k = j.at("k").get<int>();
    arch.iterations = j.at("iterations").get<int>();
    return arch;
}

AnyDetector build_from_arch(const ArchDescriptor& arch, Rng& rng) {
    switch (arch.family) {
        case Family::Arma:
            return make_arma_detector(arch.n, arch.layers, arch.units, arch.k, arch.iterations,
                                      rng, arch.in_features);
        case Family::Cheb:
            return make_cheb_detector(arch.n, arch.layers, arch.units, arch.k, rng,
                                      arch.in_features);
        case Family::Mlp:
            return make_mlp(arch.n, arch.layers, arch.units, rng);
    }
    throw ConfigError("build_from_arch: unknown family");
}

namespace {
constexpr char kCheckpointMagic[4] = {'F', 'D', 'L', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

void save_checkpoint(const std::string& path, const AnyDetector& model) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot write checkpoint: " + path);
    out.write(kCheckpointMagic, 4);
    out.write(reinterpret_cast<const char*>(&kCheckpointVersion), sizeof(kCheckpointVersion));
    std::uint32_t count = 0;
    for_each_param(model, [&](const std::string&, const double*, std::size_t) { ++count; });
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    for_each_param(model, [&](const std::string& name, const double* p, std::size_t len) {
        const auto name_len = static_cast<std::uint32_t>(name.size());
        out.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        const auto len64 = static_cast<std::uint64_t>(len);
        out.write(reinterpret_cast<const char*>(&len64), sizeof(len64));
        out.write(reinterpret_cast<const char*>(p),
                  static_cast<std::streamsize>(len * sizeof(double)));
    });
}

void load_checkpoint_params(const std::string& path, AnyDetector& model) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw ParseError("bad checkpoint magic in " + path);
    }
    std::uint32_t version = 0, count = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != kCheckpointVersion) throw ParseError("unsupported checkpoint version");
    in.read(reinterpret_cast<char*>(&count), sizeof(count));

    std::map<std::string, Vec> blobs;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t name_len = 0;
        in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        std::uint64_t len = 0;
        in.read(reinterpret_cast<char*>(&len), sizeof(len));
        Vec data(len);
        if (!in.read(reinterpret_cast<char*>(data.data()),
                     static_cast<std::streamsize>(len * sizeof(double)))) {
            throw ParseError("checkpoint truncated at blob " + name);
        }
        blobs.emplace(std::move(name), std::move(data));
    }
    for_each_param(model, [&](const std::string& name, double* p, std::size_t len) {
        const auto it = blobs.find(name);
        if (it == blobs.end()) throw ParseError("checkpoint missing parameter " + name);
        if (it->second.size() != len) {
            throw ParseError("checkpoint parameter " + name + " has wrong size");
        }
        std::copy(it->second.begin(), it->second.end(), p);
    });
}

}  // namespace fdialab
