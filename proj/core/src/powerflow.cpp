#include "fdialab/powerflow.hpp"

#include <cmath>

#include "fdialab/rng.hpp"

namespace fdialab {

Vec frame_to_vector(const MeasurementFrame& frame) {
    Vec z;
    z.reserve(frame.size());
    z.insert(z.end(), frame.p_inj.begin(), frame.p_inj.end());
    z.insert(z.end(), frame.q_inj.begin(), frame.q_inj.end());
    z.insert(z.end(), frame.p_flow.begin(), frame.p_flow.end());
    z.insert(z.end(), frame.q_flow.begin(), frame.q_flow.end());
    return z;
}

MeasurementFrame frame_from_vector(const Vec& z, std::size_t n, std::size_t branches,
                                   std::int64_t timestamp) {
    const std::size_t f = 2 * branches;
    if (z.size() != 2 * n + 2 * f) throw ContractError("frame_from_vector: length mismatch");
    MeasurementFrame frame;
    frame.timestamp = timestamp;
    frame.p_inj.assign(z.begin(), z.begin() + n);
    frame.q_inj.assign(z.begin() + n, z.begin() + 2 * n);
    frame.p_flow.assign(z.begin() + 2 * n, z.begin() + 2 * n + f);
    frame.q_flow.assign(z.begin() + 2 * n + f, z.end());
    return frame;
}

namespace {

struct RectState {
    std::vector<Complex> v;  // v_i * e^{j theta_i}

    explicit RectState(const StateVector& x) {
        v.resize(x.v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = std::polar(x.v[i], x.theta[i]);
        }
    }
};

struct BranchTwoPort {
    Complex y_ff, y_ft, y_tf, y_tt;
};

BranchTwoPort branch_two_port(const Branch& br) {
    const Complex ys = 1.0 / Complex(br.r, br.x);
    const Complex ych(0.0, br.b_charging / 2.0);
    const double a = br.tap;
    return {(ys + ych) / (a * a), -ys / a, -ys / a, ys + ych};
}

/// Injection values plus the four polar derivative blocks, all dense n x n.
struct InjectionDerivatives {
    Vec p, q;
    Mat dp_dth, dp_dv, dq_dth, dq_dv;
};

InjectionDerivatives injection_derivatives(const CMat& y, const StateVector& x) {
    const std::size_t n = y.rows();
    InjectionDerivatives d;
    d.p.assign(n, 0.0);
    d.q.assign(n, 0.0);
    d.dp_dth = Mat(n, n);
    d.dp_dv = Mat(n, n);
    d.dq_dth = Mat(n, n);
    d.dq_dv = Mat(n, n);

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const Complex yij = y(i, j);
            if (yij == Complex(0.0, 0.0)) continue;
            const double g = yij.real(), b = yij.imag();
            const double tij = x.theta[i] - x.theta[j];
            const double c = std::cos(tij), s = std::sin(tij);
            d.p[i] += x.v[i] * x.v[j] * (g * c + b * s);
            d.q[i] += x.v[i] * x.v[j] * (g * s - b * c);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Complex yii = y(i, i);
        const double gii = yii.real(), bii = yii.imag();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) {
                d.dp_dth(i, i) = -d.q[i] - bii * x.v[i] * x.v[i];
                d.dp_dv(i, i) = d.p[i] / x.v[i] + gii * x.v[i];
                d.dq_dth(i, i) = d.p[i] - gii * x.v[i] * x.v[i];
                d.dq_dv(i, i) = d.q[i] / x.v[i] - bii * x.v[i];
                continue;
            }
            const Complex yij = y(i, j);
            if (yij == Complex(0.0, 0.0)) continue;
            const double g = yij.real(), b = yij.imag();
            const double tij = x.theta[i] - x.theta[j];
            const double c = std::cos(tij), s = std::sin(tij);
            d.dp_dth(i, j) = x.v[i] * x.v[j] * (g * s - b * c);
            d.dp_dv(i, j) = x.v[i] * (g * c + b * s);
            d.dq_dth(i, j) = -x.v[i] * x.v[j] * (g * c + b * s);
            d.dq_dv(i, j) = x.v[i] * (g * s - b * c);
        }
    }
    return d;
}

}  // namespace

Vec pack_state(const GridCase& grid, const StateVector& x) {
    const std::size_t n = grid.n();
    const std::size_t slack = grid.slack_index();
    Vec u;
    u.reserve(2 * n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        if (i != slack) u.push_back(x.theta[i]);
    }
    u.insert(u.end(), x.v.begin(), x.v.end());
    return u;
}

StateVector unpack_state(const GridCase& grid, const Vec& u) {
    const std::size_t n = grid.n();
    if (u.size() != 2 * n - 1) throw ContractError("unpack_state: length mismatch");
    const std::size_t slack = grid.slack_index();
    StateVector x;
    x.theta.assign(n, 0.0);
    x.v.assign(n, 0.0);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i != slack) x.theta[i] = u[k++];
    }
    for (std::size_t i = 0; i < n; ++i) x.v[i] = u[k++];
    return x;
}

StateVector solve_power_flow(const GridCase& grid, const Loading& loading,
                             const PowerFlowOptions& opt) {
    const std::size_t n = grid.n();
    if (loading.p_scale.size() != n || loading.q_scale.size() != n) {
        throw ContractError("solve_power_flow: loading length mismatch");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(loading.p_scale[i]) || !std::isfinite(loading.q_scale[i])) {
            throw ContractError("solve_power_flow: non-finite loading");
        }
    }
    const AdmittanceMatrix adm = build_ybus(grid);
    const std::size_t slack = grid.slack_index();

    // flat start: setpoint magnitudes where known, 1.0 elsewhere
    StateVector x;
    x.v.assign(n, 1.0);
    x.theta.assign(n, 0.0);
    Vec p_spec(n, 0.0), q_spec(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const Bus& b = grid.buses[i];
        if (b.kind != BusKind::PQ) x.v[i] = b.v_set;
        p_spec[i] = b.p_gen - b.p_load * loading.p_scale[i];
        q_spec[i] = b.q_gen - b.q_load * loading.q_scale[i];
    }

    // unknown layout: theta for non-slack buses, then v for PQ buses
    std::vector<std::size_t> th_buses, v_buses;
    for (std::size_t i = 0; i < n; ++i) {
        if (i != slack) th_buses.push_back(i);
        if (grid.buses[i].kind == BusKind::PQ) v_buses.push_back(i);
    }
    const std::size_t m = th_buses.size() + v_buses.size();

    double mismatch_norm = 0.0;
    for (int iter = 0; iter <= opt.max_iter; ++iter) {
        const InjectionDerivatives d = injection_derivatives(adm.y, x);
        Vec mismatch(m, 0.0);
        for (std::size_t k = 0; k < th_buses.size(); ++k) {
            mismatch[k] = d.p[th_buses[k]] - p_spec[th_buses[k]];
        }
        for (std::size_t k = 0; k < v_buses.size(); ++k) {
            mismatch[th_buses.size() + k] = d.q[v_buses[k]] - q_spec[v_buses[k]];
        }
        mismatch_norm = max_abs(mismatch);
        if (mismatch_norm <= opt.tol) return x;
        if (!std::isfinite(mismatch_norm)) {
            throw NumericalError("power flow diverged: non-finite mismatch");
        }
        if (iter == opt.max_iter) break;

        Mat jac(m, m);
        for (std::size_t r = 0; r < th_buses.size(); ++r) {
            const std::size_t i = th_buses[r];
            for (std::size_t c = 0; c < th_buses.size(); ++c) {
                jac(r, c) = d.dp_dth(i, th_buses[c]);
            }
            for (std::size_t c = 0; c < v_buses.size(); ++c) {
                jac(r, th_buses.size() + c) = d.dp_dv(i, v_buses[c]);
            }
        }
        for (std::size_t r = 0; r < v_buses.size(); ++r) {
            const std::size_t i = v_buses[r];
            for (std::size_t c = 0; c < th_buses.size(); ++c) {
                jac(th_buses.size() + r, c) = d.dq_dth(i, th_buses[c]);
            }
            for (std::size_t c = 0; c < v_buses.size(); ++c) {
                jac(th_buses.size() + r, th_buses.size() + c) = d.dq_dv(i, v_buses[c]);
            }
        }

        Vec step;
        try {
            Vec rhs(m);
            for (std::size_t k = 0; k < m; ++k) rhs[k] = -mismatch[k];
            step = lu_solve(std::move(jac), std::move(rhs));
        } catch (const NumericalError& e) {
            throw NumericalError(std::string("power flow Jacobian singular: ") + e.what());
        }
        for (std::size_t k = 0; k < th_buses.size(); ++k) x.theta[th_buses[k]] += step[k];
        for (std::size_t k = 0; k < v_buses.size(); ++k) {
            x.v[v_buses[k]] += step[th_buses.size() + k];
        }
    }
    throw NumericalError("power flow did not converge in " + std::to_string(opt.max_iter) +
                         " iterations (last mismatch " + std::to_string(mismatch_norm) + " pu)");
}

MeasurementFrame measurement_function(const GridCase& grid, const StateVector& x) {
    const std::size_t n = grid.n();
    if (x.v.size() != n || x.theta.size() != n) {
        throw ContractError("measurement_function: state length mismatch");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(x.v[i]) || !std::isfinite(x.theta[i])) {
            throw ContractError("measurement_function: non-finite state");
        }
    }
    const AdmittanceMatrix adm = build_ybus(grid);
    const RectState rect(x);
    const std::size_t nb = grid.branches.size();

    MeasurementFrame frame;
    frame.p_inj.assign(n, 0.0);
    frame.q_inj.assign(n, 0.0);
    frame.p_flow.assign(2 * nb, 0.0);
    frame.q_flow.assign(2 * nb, 0.0);

    for (std::size_t i = 0; i < n; ++i) {
        Complex current(0.0, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const Complex yij = adm.y(i, j);
            if (yij != Complex(0.0, 0.0)) current += yij * rect.v[j];
        }
        const Complex s = rect.v[i] * std::conj(current);
        frame.p_inj[i] = s.real();
        frame.q_inj[i] = s.imag();
    }

    for (std::size_t b = 0; b < nb; ++b) {
        const Branch& br = grid.branches[b];
        if (!br.status) continue;
        const BranchTwoPort tp = branch_two_port(br);
        const Complex vf = rect.v[br.from], vt = rect.v[br.to];
        const Complex sf = vf * std::conj(tp.y_ff * vf + tp.y_ft * vt);
        const Complex st = vt * std::conj(tp.y_tf * vf + tp.y_tt * vt);
        frame.p_flow[b] = sf.real();
        frame.q_flow[b] = sf.imag();
        frame.p_flow[nb + b] = st.real();
        frame.q_flow[nb + b] = st.imag();
    }
    return frame;
}

Vec noise_sigmas(const MeasurementFrame& frame, double sigma_rel, double floor) {
    const Vec z = frame_to_vector(frame);
    Vec sigma(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        sigma[i] = sigma_rel * std::max(std::abs(z[i]), floor);
    }
    return sigma;
}

MeasurementFrame add_noise(const MeasurementFrame& frame, double sigma_rel, std::uint64_t rng_seed,
                           double floor) {
    if (sigma_rel < 0.0) throw ContractError("add_noise: sigma_rel must be >= 0");
    if (sigma_rel == 0.0) return frame;
    Rng rng(rng_seed);
    Vec z = frame_to_vector(frame);
    for (auto& zi : z) {
        zi += rng.gaussian() * sigma_rel * std::max(std::abs(zi), floor);
    }
    return frame_from_vector(z, frame.p_inj.size(), frame.p_flow.size() / 2, frame.timestamp);
}

Mat measurement_jacobian(const GridCase& grid, const AdmittanceMatrix& ybus,
                         const StateVector& x) {
    const std::size_t n = grid.n();
    const std::size_t nb = grid.branches.size();
    const std::size_t slack = grid.slack_index();
    const std::size_t cols = 2 * n - 1;
    const std::size_t rows = 2 * n + 4 * nb;

    // column of theta_i (skipping slack) and of v_i
    auto th_col = [&](std::size_t i) -> std::ptrdiff_t {
        if (i == slack) return -1;
        return static_cast<std::ptrdiff_t>(i > slack ? i - 1 : i);
    };
    auto v_col = [&](std::size_t i) { return n - 1 + i; };

    Mat jac(rows, cols);
    const InjectionDerivatives d = injection_derivatives(ybus.y, x);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const auto tc = th_col(j);
            if (tc >= 0) {
                jac(i, tc) = d.dp_dth(i, j);
                jac(n + i, tc) = d.dq_dth(i, j);
            }
            jac(i, v_col(j)) = d.dp_dv(i, j);
            jac(n + i, v_col(j)) = d.dq_dv(i, j);
        }
    }

    const RectState rect(x);
    for (std::size_t b = 0; b < nb; ++b) {
        const Branch& br = grid.branches[b];
        if (!br.status) continue;
        const BranchTwoPort tp = branch_two_port(br);
        // sides: (measuring bus, other bus, y_self, y_other, row base)
        const struct {
            std::size_t at, other;
            Complex y_self, y_other;
            std::size_t row;
        } sides[2] = {
            {br.from, br.to, tp.y_ff, tp.y_ft, 2 * n + b},
            {br.to, br.from, tp.y_tt, tp.y_tf, 2 * n + nb + b},
        };
        for (const auto& s : sides) {
            const Complex va = rect.v[s.at], vo = rect.v[s.other];
            const Complex current = s.y_self * va + s.y_other * vo;
            const Complex j_im(0.0, 1.0);
            const Complex d_th_at = j_im * va * std::conj(current) -
                                    j_im * va * std::conj(s.y_self * va);
            const Complex d_th_other = -j_im * va * std::conj(s.y_other * vo);
            const Complex d_v_at =
                (va * std::conj(current) + va * std::conj(s.y_self * va)) / x.v[s.at];
            const Complex d_v_other = va * std::conj(s.y_other * vo) / x.v[s.other];

            const std::size_t p_row = s.row;
            const std::size_t q_row = s.row + 2 * nb;
            const auto tc_at = th_col(s.at);
            const auto tc_other = th_col(s.other);
            if (tc_at >= 0) {
                jac(p_row, tc_at) = d_th_at.real();
                jac(q_row, tc_at) = d_th_at.imag();
            }
            if (tc_other >= 0) {
                jac(p_row, tc_other) = d_th_other.real();
                jac(q_row, tc_other) = d_th_other.imag();
            }
            jac(p_row, v_col(s.at)) = d_v_at.real();
            jac(q_row, v_col(s.at)) = d_v_at.imag();
            jac(p_row, v_col(s.other)) = d_v_other.real();
            jac(q_row, v_col(s.other)) = d_v_other.imag();
        }
    }
    return jac;
}

}  // namespace fdialab
