#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fdialab/attacks.hpp"
#include "fdialab/grid_model.hpp"
#include "fdialab/powerflow.hpp"

namespace fdialab {

struct LoadProfile {
    Vec values;  // total-load scale factors, one per minute
    int resolution_min = 1;
};

struct SynthProfileOptions {
    double low = 0.70;   // overnight valley
    double high = 1.15;  // evening peak
    double ar_rho = 0.95;
    double ar_sigma = 0.01;
};

/// Synthetic daily double-peak profile plus AR(1) noise, clipped positive.
LoadProfile synth_load_profile(int days, std::uint64_t rng_seed,
                               const SynthProfileOptions& opt = {});

/// Parse `timestamp,load` rows (epoch seconds or minutes offset) and
/// interpolate linearly to 1-minute resolution, normalized by the mean load.
LoadProfile ingest_load_csv(const std::string& text);

struct Scenario {
    MeasurementFrame frame;  // noisy measurements
    StateVector state;       // the solved operating point behind them
};

struct ScenarioOptions {
    double noise_sigma_rel = 0.01;
    double noise_floor = 1e-3;
    double jitter_low = 0.98;  // per-bus load jitter bounds
    double jitter_high = 1.02;
    double max_skip_fraction = 0.01;
    int jobs = 1;  // timestamps are independent; results are slot-ordered
};

struct ScenarioSet {
    std::vector<Scenario> scenarios;
    std::size_t attempted = 0;
    std::size_t skipped = 0;
};

/// For each timestamp: scale bus loads by the profile factor and per-bus
/// jitter, run AC power flow, emit the noisy frame. Diverged timestamps are
/// skipped; a skip rate above max_skip_fraction aborts generation.
ScenarioSet generate_scenarios(const GridCase& grid, const LoadProfile& profile,
                               std::size_t count, std::uint64_t rng_seed,
                               const ScenarioOptions& opt = {});

enum class AttackKind : std::uint8_t { None, Stealth, Replay, Distribution, Scale };

/// Serialization names follow the conventional attack-family labels:
/// A_o (consistent state spoofing), A_r (replay), A_d (distribution), A_s (scale).
std::string to_string(AttackKind k);
AttackKind attack_kind_from_string(const std::string& s);

struct LabeledSample {
    Mat x;  // n x 2 standardized [P_i, Q_i]
    AttackLabel y;
    AttackKind kind = AttackKind::None;
    std::size_t raw_frame_ref = 0;
};

/// Per-(bus, channel) statistics fitted on the train split only.
struct Standardizer {
    Mat mean;    // n x 2
    Mat stddev;  // n x 2, floored at 1e-8

    Mat apply(const Mat& features) const;
};

struct AttackMixConfig {
    std::size_t area_size_min = 1;
    std::size_t area_size_max = 0;  // 0 -> ceil(n/5)
    double stealth_magnitude = 1.0;
    std::size_t replay_min_lag = 30;
    std::size_t replay_max_lag = 720;
    std::vector<AttackKind> train_kinds = {AttackKind::Stealth, AttackKind::Distribution};
    std::vector<AttackKind> test_kinds = {AttackKind::Stealth, AttackKind::Replay,
                                          AttackKind::Distribution, AttackKind::Scale};
};

struct DatasetSplits {
    std::size_t n = 0;
    std::vector<LabeledSample> train;
    std::vector<LabeledSample> validation;
    std::vector<LabeledSample> test;
    Standardizer standardizer;
};

/// Shuffle, split 2/3 : 1/6 : 1/6, attack half of each split with the
/// split's allowed kinds in equal proportion, standardize on train stats.
DatasetSplits assemble_dataset(const GridCase& grid, const ScenarioSet& scenarios,
                               const AttackMixConfig& config, std::uint64_t rng_seed);

/// Persist as meta.json + one binary matrix file and one packed label
/// bitmask file per split (formats documented in the README).
void save_dataset(const std::string& dir, const DatasetSplits& splits,
                  const std::string& case_name, std::uint64_t seed);
DatasetSplits load_dataset(const std::string& dir);

/// Flat CSV export (one row per sample) for interoperability.
void export_dataset_csv(const std::string& dir, const DatasetSplits& splits);

}  // namespace fdialab
