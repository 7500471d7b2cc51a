#include "fdialab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fdialab {

Vec GraphSpectrum::eigenvector(std::size_t i) const {
    Vec v(u.rows());
    for (std::size_t r = 0; r < u.rows(); ++r) v[r] = u(r, i);
    return v;
}

namespace {

double offdiag_norm(const Mat& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            if (i != j) s += a(i, j) * a(i, j);
        }
    }
    return std::sqrt(s);
}

}  // namespace

GraphSpectrum symmetric_eig(const Mat& l) {
    const std::size_t n = l.rows();
    if (n != l.cols()) throw ContractError("symmetric_eig: matrix must be square");
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::abs(l(i, j) - l(j, i)) > 1e-10) {
                throw ContractError("symmetric_eig: input not symmetric within 1e-10");
            }
        }
    }

    Mat a = l;
    Mat u = Mat::identity(n);
    constexpr double kTol = 1e-11;
    constexpr int kMaxSweeps = 100;

    for (int sweep = 0; sweep < kMaxSweeps && offdiag_norm(a) > kTol; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double app = a(p, p), aqq = a(q, q);
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double ukp = u(k, p), ukq = u(k, q);
                    u(k, p) = c * ukp - s * ukq;
                    u(k, q) = s * ukp + c * ukq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

    GraphSpectrum spec;
    spec.lambda.resize(n);
    spec.u = Mat(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        const std::size_t src = order[c];
        spec.lambda[c] = a(src, src);
        // sign convention: largest-magnitude entry positive
        std::size_t arg = 0;
        double best = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            if (std::abs(u(r, src)) > best) {
                best = std::abs(u(r, src));
                arg = r;
            }
        }
        const double sign = u(arg, src) < 0.0 ? -1.0 : 1.0;
        for (std::size_t r = 0; r < n; ++r) spec.u(r, c) = sign * u(r, src);
    }
    return spec;
}

Mat gft(const GraphSpectrum& spectrum, const Mat& x) { return matmul_tn(spectrum.u, x); }

Mat igft(const GraphSpectrum& spectrum, const Mat& x_tilde) { return matmul(spectrum.u, x_tilde); }

Mat spectral_filter(const GraphSpectrum& spectrum, const std::function<double(double)>& h,
                    const Mat& x) {
    Mat coeffs = gft(spectrum, x);
    for (std::size_t i = 0; i < coeffs.rows(); ++i) {
        const double hi = h(spectrum.lambda[i]);
        for (std::size_t j = 0; j < coeffs.cols(); ++j) coeffs(i, j) *= hi;
    }
    return igft(spectrum, coeffs);
}

double IdealFilter::response(double lambda) const {
    switch (kind) {
        case IdealFilterKind::BandpassThirds:
            return (lambda > lambda_max / 3.0 && lambda < 2.0 * lambda_max / 3.0) ? 1.0 : 0.0;
        case IdealFilterKind::LowpassHalf:
            return lambda < lambda_max / 2.0 ? 1.0 : 0.0;
        case IdealFilterKind::Allpass:
            return 1.0;
    }
    return 0.0;
}

FrequencyResponse empirical_frequency_response(const GraphSpectrum& spectrum,
                                               const std::vector<std::pair<Vec, Vec>>& pairs,
                                               double floor) {
    const std::size_t n = spectrum.n();
    FrequencyResponse resp;
    resp.lambda = spectrum.lambda;
    resp.h.assign(n, 0.0);
    resp.defined.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec ui = spectrum.eigenvector(i);
        double acc = 0.0;
        std::size_t used = 0;
        for (const auto& [x, y] : pairs) {
            const double den = dot(ui, x);
            if (std::abs(den) <= floor) continue;
            acc += dot(ui, y) / den;
            ++used;
        }
        if (used > 0) {
            resp.h[i] = acc / static_cast<double>(used);
            resp.defined[i] = 1;
        }
    }
    return resp;
}

double response_mse(const FrequencyResponse& estimate, const IdealFilter& target) {
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < estimate.lambda.size(); ++i) {
        if (!estimate.defined[i]) continue;
        const double d = estimate.h[i] - target.response(estimate.lambda[i]);
        acc += d * d;
        ++count;
    }
    if (count == 0) throw ContractError("response_mse: no defined frequencies");
    return acc / static_cast<double>(count);
}

}  // namespace fdialab
