#pragma once

#include <cstdint>
#include <vector>

#include "fdialab/powerflow.hpp"
#include "fdialab/rng.hpp"

namespace fdialab {

/// Attacker's target: t_x are the state buses being spoofed, t_z the indices
/// (canonical stacking order) of every measurement whose value depends on a
/// t_x state. Altering exactly that support is what keeps a consistent
/// attack invisible to residual tests.
struct TargetArea {
    std::vector<std::size_t> t_x;  // bus positions, sorted
    std::vector<std::size_t> t_z;  // measurement indices, sorted
};

struct AttackLabel {
    std::vector<std::uint8_t> per_bus;
    std::uint8_t grid = 0;
};

AttackLabel label_for(const TargetArea& area, std::size_t n);

struct AttackedFrame {
    MeasurementFrame frame;
    AttackLabel label;
};

struct SizeRange {
    std::size_t min = 1;
    std::size_t max = 1;
};

/// Random connected bus set grown by BFS from a random non-slack seed bus;
/// the slack bus is never included.
TargetArea sample_target_area(const GridCase& grid, SizeRange size_range, Rng& rng);

/// Measurement support of a given bus set (exposed for tests and for the
/// Fig.-2-style fixed-area scenarios).
TargetArea area_from_buses(const GridCase& grid, std::vector<std::size_t> t_x);

struct StealthOptions {
    double magnitude = 1.0;   // scales both perturbation ranges
    double v_range = 0.02;    // +-2% magnitude perturbation
    double theta_range_deg = 2.0;  // +-2 degrees angle perturbation
    int max_tries = 10;
};

/// State-perturbation stealth attack: perturb v/theta of t_x buses, then
/// overwrite every t_z measurement with its value under the perturbed state.
/// Measurements outside t_z are bit-identical to the base frame.
AttackedFrame attack_stealth(const GridCase& grid, const MeasurementFrame& base,
                             const StateVector& x_base, const TargetArea& area, Rng& rng,
                             const StealthOptions& opt = {});

/// Replay: t_z measurements replaced by their values tau frames earlier.
AttackedFrame attack_replay(const std::vector<MeasurementFrame>& history, std::size_t t,
                            std::size_t tau, const TargetArea& area);

/// Scaling: each t_z measurement multiplied by an independent U(0.9, 1.1).
AttackedFrame attack_scale(const MeasurementFrame& frame, const TargetArea& area, Rng& rng);

/// Per-measurement mean/variance over an observation window, feeding the
/// distribution-based attack.
struct MeasurementStats {
    Vec mean;
    Vec variance;
};

MeasurementStats measurement_stats(const std::vector<MeasurementFrame>& history);

/// Distribution mimicry: each t_z measurement replaced by an independent
/// draw from N(mean_i, variance_i) of its own history.
AttackedFrame attack_distribution(const MeasurementStats& stats, const MeasurementFrame& frame,
                                  const TargetArea& area, Rng& rng);

}  // namespace fdialab
