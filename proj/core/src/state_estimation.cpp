#include "fdialab/state_estimation.hpp"

#include <cmath>

namespace fdialab {

namespace {

/// G = J^T R^-1 J for a diagonal R given as inverse variances.
Mat gain_matrix(const Mat& jac, const Vec& w) {
    const std::size_t s = jac.cols();
    Mat g(s, s);
    for (std::size_t i = 0; i < jac.rows(); ++i) {
        const double* ji = jac.row(i);
        const double wi = w[i];
        for (std::size_t a = 0; a < s; ++a) {
            const double f = wi * ji[a];
            if (f == 0.0) continue;
            double* ga = g.row(a);
            for (std::size_t b = 0; b < s; ++b) ga[b] += f * ji[b];
        }
    }
    return g;
}

Vec weighted_gradient(const Mat& jac, const Vec& w, const Vec& resid) {
    Vec grad(jac.cols(), 0.0);
    for (std::size_t i = 0; i < resid.size(); ++i) {
        const double wr = w[i] * resid[i];
        if (wr == 0.0) continue;
        const double* ji = jac.row(i);
        for (std::size_t c = 0; c < grad.size(); ++c) grad[c] += ji[c] * wr;
    }
    return grad;
}

}  // namespace

EstimationResult wlse_estimate(const GridCase& grid, const MeasurementFrame& z, const Vec& r_diag,
                               const WlseOptions& opt) {
    const std::size_t n = grid.n();
    const Vec zv = frame_to_vector(z);
    if (r_diag.size() != zv.size()) {
        throw ContractError("wlse_estimate: r_diag length mismatch");
    }
    Vec w(r_diag.size());  // R^-1 diagonal
    for (std::size_t i = 0; i < r_diag.size(); ++i) {
        if (!(r_diag[i] > 0.0)) throw ContractError("wlse_estimate: variances must be positive");
        w[i] = 1.0 / r_diag[i];
    }
    const AdmittanceMatrix adm = build_ybus(grid);
    const std::size_t slack = grid.slack_index();

    StateVector x;
    x.v.assign(n, 1.0);
    x.theta.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (grid.buses[i].kind != BusKind::PQ) x.v[i] = grid.buses[i].v_set;
    }

    EstimationResult result;
    for (int iter = 0; iter < opt.max_iter; ++iter) {
        const Vec h = frame_to_vector(measurement_function(grid, x));
        Vec resid(zv.size());
        for (std::size_t i = 0; i < zv.size(); ++i) resid[i] = zv[i] - h[i];
        const Mat jac = measurement_jacobian(grid, adm, x);
        const Vec grad = weighted_gradient(jac, w, resid);
        if (max_abs(grad) <= opt.gradient_tol) {
            result.converged = true;
            break;
        }
        Vec step;
        try {
            step = lu_solve(gain_matrix(jac, w), grad);
        } catch (const NumericalError&) {
            break;  // unobservable/degenerate: return the last iterate, flagged
        }
        Vec u = pack_state(grid, x);
        for (std::size_t c = 0; c < u.size(); ++c) u[c] += step[c];
        x = unpack_state(grid, u);
        x.theta[slack] = 0.0;  // slack angle is the reference
        result.iterations = iter + 1;
        // the raw gradient scales with R^-1 (~1e10 for 1% sigmas with the
        // 1e-3 pu floor), so a machine-level fixed point is detected on the
        // step in state units
        if (max_abs(step) <= opt.step_tol) {
            result.converged = true;
            break;
        }
    }

    result.x_hat = x;
    const Vec h = frame_to_vector(measurement_function(grid, x));
    result.residuals.resize(zv.size());
    for (std::size_t i = 0; i < zv.size(); ++i) result.residuals[i] = zv[i] - h[i];
    const Mat jac = measurement_jacobian(grid, adm, x);

    // normalized residuals: r_i / sqrt(omega_ii) with
    // omega_ii = R_ii - [J (J^T R^-1 J)^-1 J^T]_ii
    result.normalized_residuals.assign(zv.size(), 0.0);
    const std::size_t s = jac.cols();
    try {
        const LuFactor gf(gain_matrix(jac, w));
        Vec hi(s);
        for (std::size_t i = 0; i < zv.size(); ++i) {
            const double* ji = jac.row(i);
            hi.assign(ji, ji + s);
            const Vec gi = gf.solve(hi);
            double sens = 0.0;
            for (std::size_t c = 0; c < s; ++c) sens += ji[c] * gi[c];
            const double omega = r_diag[i] - sens;
            // leverage ~1 means no redundancy at this measurement
            if (omega <= 1e-10 * r_diag[i]) continue;
            result.normalized_residuals[i] = result.residuals[i] / std::sqrt(omega);
        }
    } catch (const NumericalError&) {
        for (std::size_t i = 0; i < zv.size(); ++i) {
            result.normalized_residuals[i] = result.residuals[i] / std::sqrt(r_diag[i]);
        }
    }
    return result;
}

BddOutcome lnrt_bdd(const EstimationResult& result, double threshold) {
    BddOutcome out;
    for (std::size_t i = 0; i < result.normalized_residuals.size(); ++i) {
        if (std::abs(result.normalized_residuals[i]) > threshold) {
            out.bad.push_back(i);
        }
    }
    out.clean = out.bad.empty();
    return out;
}

}  // namespace fdialab
