#pragma once

#include <vector>

#include "fdialab/powerflow.hpp"

namespace fdialab {

struct EstimationResult {
    StateVector x_hat;
    Vec residuals;             // z - h(x_hat), canonical stacking order
    Vec normalized_residuals;  // residual / (sigma * sqrt(sensitivity))
    int iterations = 0;
    bool converged = false;
};

struct WlseOptions {
    int max_iter = 30;
    double gradient_tol = 1e-6;  // infinity norm of J^T R^-1 (z - h)
    double step_tol = 1e-10;     // infinity norm of the Gauss-Newton step
};

/// Gauss-Newton minimizer of (z - h(x))^T R^-1 (z - h(x)). r_diag carries
/// per-measurement variances in canonical stacking order. Non-convergence is
/// flagged, the last iterate returned.
EstimationResult wlse_estimate(const GridCase& grid, const MeasurementFrame& z, const Vec& r_diag,
                               const WlseOptions& opt = {});

struct BddOutcome {
    bool clean = true;
    std::vector<std::size_t> bad;  // measurement indices above threshold
};

/// Largest normalized residual test: flags every measurement whose
/// |normalized residual| exceeds the threshold (conventional cut 3.0).
BddOutcome lnrt_bdd(const EstimationResult& result, double threshold = 3.0);

}  // namespace fdialab
