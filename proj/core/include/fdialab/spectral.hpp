#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "fdialab/linalg.hpp"

namespace fdialab {

struct GraphSpectrum {
    Mat u;       // columns are orthonormal eigenvectors
    Vec lambda;  // ascending eigenvalues

    std::size_t n() const { return lambda.size(); }
    /// Column i of u as a vector.
    Vec eigenvector(std::size_t i) const;
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Eigenpairs are
/// sorted ascending; each eigenvector's largest-magnitude entry is positive.
/// Input must be symmetric within 1e-10.
GraphSpectrum symmetric_eig(const Mat& l);

/// Forward GFT: U^T x, for x with one signal per column.
Mat gft(const GraphSpectrum& spectrum, const Mat& x);
/// Inverse GFT: U x_tilde.
Mat igft(const GraphSpectrum& spectrum, const Mat& x_tilde);

/// Exact spectral filtering y = U diag(h(lambda)) U^T x.
Mat spectral_filter(const GraphSpectrum& spectrum, const std::function<double(double)>& h,
                    const Mat& x);

enum class IdealFilterKind { BandpassThirds, LowpassHalf, Allpass };

/// Ideal graph filters used as regression targets: a bandpass over the
/// middle third of the spectrum, a lowpass over its lower half, and a
/// trivial allpass for representability checks.
struct IdealFilter {
    IdealFilterKind kind = IdealFilterKind::BandpassThirds;
    double lambda_max = 2.0;

    double response(double lambda) const;
};

struct FrequencyResponse {
    Vec lambda;
    Vec h;                          // estimated response per eigenvalue
    std::vector<std::uint8_t> defined;  // 0 where every pair fell below the floor
};

/// Empirical response h(lambda_i) = mean over pairs of (u_i^T y)/(u_i^T x),
/// skipping terms with |u_i^T x| below the floor.
FrequencyResponse empirical_frequency_response(const GraphSpectrum& spectrum,
                                               const std::vector<std::pair<Vec, Vec>>& pairs,
                                               double floor = 1e-8);

/// Mean squared deviation between a response estimate and a target filter,
/// over the defined frequencies.
double response_mse(const FrequencyResponse& estimate, const IdealFilter& target);

}  // namespace fdialab
