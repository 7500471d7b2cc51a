#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "fdialab/baseline_mlp.hpp"
#include "fdialab/dataset.hpp"
#include "fdialab/grid_model.hpp"
#include "fdialab/linalg.hpp"
#include "fdialab/rng.hpp"

namespace fdialab {

// ---------------------------------------------------------------------------
// Layer parameter blocks
// ---------------------------------------------------------------------------

/// First-order recursive graph filter, unrolled into `iterations` fixed steps:
///   y0 = x beta + theta,  y_{t+1} = L~ y_t alpha + x beta + theta.
struct Arma1Params {
    Mat alpha;   // c_out x c_out
    Mat beta;    // c_in x c_out
    Vec theta;   // c_out
    int iterations = 1;
};

/// K parallel first-order filters, outputs averaged. The averaging gives the
/// layer a rational spectral response.
struct ArmaKParams {
    std::vector<Arma1Params> stacks;
};

/// Truncated Chebyshev polynomial filter; coeffs[k] weights T_k(L~scaled) x.
struct ChebParams {
    std::vector<Mat> coeffs;  // K matrices, each c_in x c_out
};

/// Node-mixing head: maps the flattened n x 1 hidden output to n logits.
struct DenseParams {
    Mat w;  // n x n
    Vec b;  // n
};

using HiddenParams = std::variant<ArmaKParams, ChebParams>;

/// Graph detector: hidden graph-filter layers with ReLU after each, a dense
/// node-mixing layer, sigmoid node probabilities, and the grid-level score
/// S = max over node probabilities.
struct DetectorModel {
    std::vector<HiddenParams> hidden;
    DenseParams dense;
};

/// The trainable families share one training loop and checkpoint format.
using AnyDetector = std::variant<DetectorModel, MlpParams>;

enum class Family : std::uint8_t { Arma, Cheb, Mlp };
std::string to_string(Family f);
Family family_from_string(const std::string& s);
Family family_of(const AnyDetector& model);

// ---------------------------------------------------------------------------
// Builders (spec'd initialization: U(+-sqrt(6/(c_in+c_out))) per matrix,
// ARMA alpha additionally scaled by 0.5/T, biases zero)
// ---------------------------------------------------------------------------

DetectorModel make_arma_detector(std::size_t n, int layers, int units, int k_stacks,
                                 int iterations, Rng& rng, std::size_t in_features = 2);
DetectorModel make_cheb_detector(std::size_t n, int layers, int units, int k_order, Rng& rng,
                                 std::size_t in_features = 2);

// ---------------------------------------------------------------------------
// Layer forward/backward
// ---------------------------------------------------------------------------

struct Arma1Cache {
    std::vector<Mat> iterates;  // y^0 .. y^T
};
struct ArmaKCache {
    std::vector<Arma1Cache> stacks;
};
struct ChebCache {
    std::vector<Mat> z;  // T_k(L) x for k = 0 .. K-1
};

Mat arma1_forward(const Arma1Params& params, const Mat& l_mod, const Mat& x,
                  Arma1Cache* cache = nullptr);
Mat armaK_forward(const ArmaKParams& params, const Mat& l_mod, const Mat& x,
                  ArmaKCache* cache = nullptr);
Mat cheb_forward(const ChebParams& params, const Mat& l_scaled, const Mat& x,
                 ChebCache* cache = nullptr);

/// Each backward accumulates parameter gradients into `grads` and returns
/// dLoss/dx.
Mat arma1_backward(const Arma1Params& params, const Mat& l_mod, const Mat& x,
                   const Arma1Cache& cache, const Mat& grad_out, Arma1Params& grads);
Mat armaK_backward(const ArmaKParams& params, const Mat& l_mod, const Mat& x,
                   const ArmaKCache& cache, const Mat& grad_out, ArmaKParams& grads);
Mat cheb_backward(const ChebParams& params, const Mat& l_scaled, const Mat& x,
                  const ChebCache& cache, const Mat& grad_out, ChebParams& grads);

// ---------------------------------------------------------------------------
// Whole-model forward/backward
// ---------------------------------------------------------------------------

/// n node probabilities followed by the grid probability.
struct Prediction {
    Vec probs;

    double grid() const { return probs.back(); }
    std::size_t nodes() const { return probs.size() - 1; }
};

struct ModelCache;  // opaque; defined in gnn.cpp

Prediction model_forward(const DetectorModel& model, const GraphTopology& topo, const Mat& x);
Prediction detector_forward(const AnyDetector& model, const GraphTopology* topo, const Mat& x);

/// Mean binary cross-entropy over the n node terms plus the grid term,
/// probabilities clamped to [1e-7, 1 - 1e-7].
double bce_loss(const Vec& probs, const AttackLabel& label);

DetectorModel zeros_like(const DetectorModel& model);
AnyDetector zeros_like(const AnyDetector& model);

/// Mean loss over the batch; parameter gradients of the mean accumulate into
/// `grads` (which must be zeros_like(model)-shaped).
double batch_loss_and_gradients(const AnyDetector& model, const GraphTopology* topo,
                                const std::vector<LabeledSample>& samples,
                                const std::vector<std::size_t>& batch_indices,
                                AnyDetector& grads);

double batch_loss(const AnyDetector& model, const GraphTopology* topo,
                  const std::vector<LabeledSample>& samples);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
    int batch_size = 256;
    int max_epochs = 256;
    int patience = 16;
    double min_delta = 1e-4;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 1;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double elapsed_ms = 0.0;  // timing only; kept out of deterministic artifacts
};

struct TrainResult {
    int epochs_run = 0;
    int best_epoch = 0;
    double best_val_loss = 0.0;
    bool early_stopped = false;
    std::vector<EpochRecord> history;
};

/// Restartable training state: last-epoch weights, best-validation weights,
/// Adam moments, and the early-stopping bookkeeping. Mini-batch order is a
/// pure function of (seed, epoch), so a resumed run reproduces the epochs a
/// longer run would have produced.
struct TrainRun {
    AnyDetector last;
    AnyDetector best;
    Vec adam_m, adam_v;
    std::uint64_t adam_steps = 0;
    int epochs_done = 0;
    int best_epoch = 0;
    double best_val_loss = std::numeric_limits<double>::infinity();
    int wait = 0;
};

TrainRun make_train_run(AnyDetector model);

/// Continue a run until max_epochs or the patience budget; returns the
/// records of the newly executed epochs. run.best holds the weights to ship.
TrainResult train_run(TrainRun& run, const GraphTopology* topo, const DatasetSplits& splits,
                      const TrainConfig& config);

/// Adam + shuffled mini-batches + early stopping on validation BCE with
/// best-weight restore. Deterministic under a fixed seed. topo may be null
/// for the MLP family.
TrainResult train(AnyDetector& model, const GraphTopology* topo, const DatasetSplits& splits,
                  const TrainConfig& config);

// ---------------------------------------------------------------------------
// Checkpoints: binary parameter blobs + a JSON architecture descriptor
// ---------------------------------------------------------------------------

struct ArchDescriptor {
    Family family = Family::Arma;
    std::size_t n = 0;
    std::size_t in_features = 2;
    int layers = 1;
    int units = 16;
    int k = 2;           // stacks (ARMA) or polynomial order (CHEB)
    int iterations = 4;  // ARMA only
};

std::string arch_to_json(const ArchDescriptor& arch);
ArchDescriptor arch_from_json(const std::string& text);

AnyDetector build_from_arch(const ArchDescriptor& arch, Rng& rng);

void save_checkpoint(const std::string& path, const AnyDetector& model);
void load_checkpoint_params(const std::string& path, AnyDetector& model);

/// Deterministic traversal of every parameter array in the model; the Adam
/// state and the checkpoint blob order both come from this.
void for_each_param(AnyDetector& model,
                    const std::function<void(const std::string&, double*, std::size_t)>& fn);
void for_each_param(const AnyDetector& model,
                    const std::function<void(const std::string&, const double*, std::size_t)>& fn);

}  // namespace fdialab
