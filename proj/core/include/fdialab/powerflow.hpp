#pragma once

#include <cstdint>

#include "fdialab/grid_model.hpp"
#include "fdialab/linalg.hpp"

namespace fdialab {

struct StateVector {
    Vec v;      // per-unit magnitudes
    Vec theta;  // radians; slack pinned to 0

    bool operator==(const StateVector&) const = default;
};

/// One scenario's physical signal. Flow vectors hold both directions:
/// entry b is the from-side flow of branch b, entry |branches|+b the to-side.
struct MeasurementFrame {
    Vec p_inj;
    Vec q_inj;
    Vec p_flow;
    Vec q_flow;
    std::int64_t timestamp = 0;

    std::size_t size() const {
        return p_inj.size() + q_inj.size() + p_flow.size() + q_flow.size();
    }

    bool operator==(const MeasurementFrame&) const = default;
};

/// Canonical stacking order [p_inj, q_inj, p_flow, q_flow] shared by the
/// estimator, the attack support sets, and the noise model.
Vec frame_to_vector(const MeasurementFrame& frame);
MeasurementFrame frame_from_vector(const Vec& z, std::size_t n, std::size_t branches,
                                   std::int64_t timestamp);

struct PowerFlowOptions {
    int max_iter = 20;
    double tol = 1e-8;  // infinity norm of the power mismatch
};

/// Per-bus multiplicative load scaling for a scenario.
struct Loading {
    Vec p_scale;
    Vec q_scale;

    static Loading uniform(std::size_t n, double factor) {
        return Loading{Vec(n, factor), Vec(n, factor)};
    }
};

/// Newton-Raphson AC power flow in polar form, flat start.
StateVector solve_power_flow(const GridCase& grid, const Loading& loading,
                             const PowerFlowOptions& opt = {});

/// Exact polar-form injections and branch flows at x. Shared by the power
/// flow mismatch, the estimator, and stealth attack construction.
MeasurementFrame measurement_function(const GridCase& grid, const StateVector& x);

/// Gaussian measurement noise, sigma_i = sigma_rel * max(|z_i|, floor).
MeasurementFrame add_noise(const MeasurementFrame& frame, double sigma_rel, std::uint64_t rng_seed,
                           double floor = 1e-3);

/// The per-measurement sigmas the noise model would use; feeds the
/// estimator's R diagonal.
Vec noise_sigmas(const MeasurementFrame& frame, double sigma_rel, double floor = 1e-3);

/// Measurement Jacobian d z / d [theta (non-slack), v (all)], rows in
/// canonical stacking order. Used by the WLS estimator and checked against
/// finite differences in tests.
Mat measurement_jacobian(const GridCase& grid, const AdmittanceMatrix& ybus,
                         const StateVector& x);

/// State packing helpers shared with the estimator: [theta w/o slack, v].
Vec pack_state(const GridCase& grid, const StateVector& x);
StateVector unpack_state(const GridCase& grid, const Vec& u);

}  // namespace fdialab
