#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fdialab/dataset.hpp"
#include "fdialab/eval.hpp"
#include "fdialab/gnn.hpp"
#include "fdialab/spectral.hpp"

namespace fdialab {

/// Resolved experiment configuration. Every field has a default; a config
/// file overrides by key. Unknown keys are rejected before any work starts.
/// How the fitted ARMA blocks in the freq-response experiment carry their
/// weights. PerIteration unrolls T iterations with independent skip
/// parameters (the realization used by reference ARMA graph-conv layers and
/// the one that reproduces the published response orderings); Shared is the
/// strict single-(alpha, beta) recursion the detector layers use.
enum class ArmaWeightMode : std::uint8_t { PerIteration, Shared };

struct ExperimentConfig {
    std::string case_path;
    std::uint64_t seed = 1;

    struct DatasetSection {
        std::size_t samples = 3456;
        double noise_sigma_rel = 0.01;
        std::size_t area_size_min = 1;
        std::size_t area_size_max = 0;  // 0 -> ceil(n/5)
        double stealth_magnitude = 1.0;
        std::size_t replay_min_lag = 30;
        std::size_t replay_max_lag = 720;
        std::string load_csv;  // empty -> synthetic profile
    } dataset;

    struct ModelSection {
        Family family = Family::Arma;
        int layers = 3;
        int units = 16;
        int k = 2;
        int iterations = 4;
    } model;

    struct TrainingSection {
        int batch_size = 256;
        int max_epochs = 256;
        int patience = 16;
        double min_delta = 1e-4;
        double learning_rate = 1e-3;
    } training;

    struct FreqResponseSection {
        IdealFilterKind filter = IdealFilterKind::BandpassThirds;
        int signals_log2 = 12;
        int batch_size = 64;
        std::vector<int> arma_orders = {3, 5};
        std::vector<int> cheb_orders = {3, 11};
        int iterations = 10;  // unrolled depth of the fitted ARMA blocks
        double learning_rate = 0.02;
        int max_epochs = 400;
        int patience = 25;
        double min_delta = 1e-7;
        bool per_iteration_relu = false;  // activation inside iterations (fidelity flag)
        ArmaWeightMode weight_mode = ArmaWeightMode::PerIteration;
    } freq_response;

    struct OrderSweepSection {
        std::vector<int> orders = {2, 3, 4, 5, 7};
    } order_sweep;

    struct GridSearchSection {
        std::vector<int> layers = {1, 2, 3};
        std::vector<int> units = {16, 32, 64, 128};
        std::vector<int> k = {2, 3, 4};
        std::vector<int> iterations = {2, 3, 4, 5};
    } grid_search;

    int jobs = 1;
};

/// Parse + validate a config file against the documented schema; defaults
/// fill anything left unspecified. Throws ConfigError on unknown keys or
/// type mismatches.
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& config);

/// Run-directory helper: artifacts are staged in "<dir>.partial" and the
/// directory is renamed into place once the command finished. An existing
/// destination is an error unless force is set.
class RunDir {
public:
    RunDir(std::string dir, bool force);
    ~RunDir();

    RunDir(const RunDir&) = delete;
    RunDir& operator=(const RunDir&) = delete;

    const std::string& staging() const { return staging_; }
    std::string path(const std::string& name) const { return staging_ + "/" + name; }

    void write_text(const std::string& name, const std::string& content);

    /// Write the manifest and atomically rename into the final location.
    void commit(const std::string& command);

private:
    std::string final_;
    std::string staging_;
    std::vector<std::string> artifacts_;
    bool committed_ = false;
};

// Command entry points; the CLI maps exceptions to exit codes.
void cmd_case(const std::string& case_path, const std::string& out_dir, bool spectrum_csv,
              bool force);
void cmd_dataset(const ExperimentConfig& config, const std::string& out_dir, bool force);
void cmd_train(const ExperimentConfig& config, const std::string& dataset_dir,
               const std::string& out_dir, bool force, const std::string& resume_dir = "");
void cmd_eval(const std::string& model_dir, const std::string& dataset_dir,
              const std::string& case_path, const std::string& out_dir, bool grid_search,
              bool force);
void cmd_freq_response(const ExperimentConfig& config, const std::string& out_dir, bool force);
void cmd_order_sweep(const ExperimentConfig& config, const std::string& dataset_dir,
                     const std::string& out_dir, bool force);
void cmd_report(const std::string& run_dir, const std::string& out_file);

/// Shared by cmd_freq_response and the acceptance suite: fit single-layer
/// scalar graph filters to (x, ideal-filtered x) pairs and measure each
/// model's empirical response against the target.
struct FilterFitResult {
    std::string name;      // e.g. "arma3", "cheb11"
    FrequencyResponse response;
    double mse = 0.0;      // empirical response vs ideal, over defined lambdas
    int epochs = 0;
};

std::vector<FilterFitResult> fit_ideal_filter(const GraphTopology& topo,
                                              const GraphSpectrum& spectrum,
                                              const ExperimentConfig::FreqResponseSection& cfg,
                                              std::uint64_t seed);

/// Detection metrics of a trained detector over a sample list, at the fixed
/// 0.5 probability threshold.
struct DetectionReport {
    DetectionMetrics grid;           // from the grid-level output
    LocalizationSummary sample_wise;
    LocalizationSummary node_wise;
};

DetectionReport evaluate_detector(const AnyDetector& model, const GraphTopology* topo,
                                  const std::vector<LabeledSample>& samples);

}  // namespace fdialab
