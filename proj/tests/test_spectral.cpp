#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fdialab/grid_model.hpp"
#include "fdialab/rng.hpp"
#include "fdialab/spectral.hpp"

using namespace fdialab;

namespace {

std::string read_fixture(const std::string& name) {
    std::ifstream in(std::string(FDIALAB_FIXTURE_DIR) + "/" + name);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Mat random_symmetric(std::size_t n, Rng& rng) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double v = rng.uniform(-1.0, 1.0);
            m(i, j) = v;
            m(j, i) = v;
        }
    }
    return m;
}

Mat reconstruct(const GraphSpectrum& spec) {
    const std::size_t n = spec.n();
    Mat lam(n, n);
    for (std::size_t i = 0; i < n; ++i) lam(i, i) = spec.lambda[i];
    return matmul(matmul(spec.u, lam), transpose(spec.u));
}

GraphTopology path3_topology() {
    const char* text = R"(function mpc = path3
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1.0	0	0	1	1.06	0.94;
	2	1	1	0	0	0	1	1.0	0	0	1	1.06	0.94;
	3	1	1	0	0	0	1	1.0	0	0	1	1.06	0.94;
];
mpc.branch = [
	1	2	0	0.1	0	0	0	0	0	0	1	-360	360;
	2	3	0	0.1	0	0	0	0	0	0	1	-360	360;
];
)";
    return build_topology(build_ybus(parse_case(text)));
}

}  // namespace

TEST_CASE("2x2 analytic eigenpairs") {
    Mat l(2, 2);
    l(0, 0) = 1.0;
    l(0, 1) = -1.0;
    l(1, 0) = -1.0;
    l(1, 1) = 1.0;
    const GraphSpectrum spec = symmetric_eig(l);
    CHECK(spec.lambda[0] == doctest::Approx(0.0));
    CHECK(spec.lambda[1] == doctest::Approx(2.0));
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(spec.u(0, 0) == doctest::Approx(inv_sqrt2));
    CHECK(spec.u(1, 0) == doctest::Approx(inv_sqrt2));
}

TEST_CASE("diagonal matrix: eigenvalues are the diagonal, vectors unit") {
    Mat d(3, 3);
    d(0, 0) = 3.0;
    d(1, 1) = -1.0;
    d(2, 2) = 0.5;
    const GraphSpectrum spec = symmetric_eig(d);
    CHECK(spec.lambda[0] == doctest::Approx(-1.0));
    CHECK(spec.lambda[1] == doctest::Approx(0.5));
    CHECK(spec.lambda[2] == doctest::Approx(3.0));
    // each eigenvector is a signed unit vector; the convention makes it +1
    CHECK(spec.u(1, 0) == doctest::Approx(1.0));
    CHECK(spec.u(2, 1) == doctest::Approx(1.0));
    CHECK(spec.u(0, 2) == doctest::Approx(1.0));
}

TEST_CASE("random 20x20: reconstruction and orthonormality") {
    Rng rng(17);
    const Mat m = random_symmetric(20, rng);
    const GraphSpectrum spec = symmetric_eig(m);
    CHECK(max_abs(reconstruct(spec) - m) <= 1e-8);
    const Mat gram = matmul_tn(spec.u, spec.u);
    CHECK(max_abs(gram - Mat::identity(20)) <= 1e-9);
    for (std::size_t i = 1; i < spec.lambda.size(); ++i) {
        CHECK(spec.lambda[i - 1] <= spec.lambda[i]);
    }
}

TEST_CASE("non-symmetric input is a contract error") {
    Mat m(2, 2);
    m(0, 1) = 1.0;
    CHECK_THROWS_AS(symmetric_eig(m), ContractError);
}

TEST_CASE("gft identities") {
    const GraphTopology topo = path3_topology();
    const GraphSpectrum spec = symmetric_eig(topo.l);

    SUBCASE("an eigenvector transforms to a unit coefficient vector") {
        Mat x(3, 1);
        for (std::size_t i = 0; i < 3; ++i) x(i, 0) = spec.u(i, 2);
        const Mat coeffs = gft(spec, x);
        CHECK(std::abs(coeffs(2, 0) - 1.0) < 1e-10);
        CHECK(std::abs(coeffs(0, 0)) < 1e-10);
        CHECK(std::abs(coeffs(1, 0)) < 1e-10);
    }
    SUBCASE("round trip is the identity and Parseval holds") {
        Rng rng(5);
        Mat x(3, 2);
        for (std::size_t i = 0; i < 3; ++i) {
            x(i, 0) = rng.gaussian();
            x(i, 1) = rng.gaussian();
        }
        const Mat xt = gft(spec, x);
        CHECK(max_abs(igft(spec, xt) - x) <= 1e-10);
        CHECK(std::abs(frobenius_norm(x) - frobenius_norm(xt)) <= 1e-10);
    }
}

TEST_CASE("spectral_filter identities") {
    const GraphTopology topo = path3_topology();
    const GraphSpectrum spec = symmetric_eig(topo.l);
    Rng rng(11);
    Mat x(3, 1);
    for (std::size_t i = 0; i < 3; ++i) x(i, 0) = rng.gaussian();

    SUBCASE("h == 1 is the identity") {
        const Mat y = spectral_filter(spec, [](double) { return 1.0; }, x);
        CHECK(max_abs(y - x) <= 1e-10);
    }
    SUBCASE("h(lambda) = lambda applies the Laplacian") {
        const Mat y = spectral_filter(spec, [](double l) { return l; }, x);
        CHECK(max_abs(y - matmul(topo.l, x)) <= 1e-9);
    }
    SUBCASE("bandpass keeps exactly the middle band on the path graph") {
        // the path spectrum is {0, 1, 2}; build x as the sum of eigenvectors
        Mat sum(3, 1);
        for (std::size_t i = 0; i < 3; ++i) {
            sum(i, 0) = spec.u(i, 0) + spec.u(i, 1) + spec.u(i, 2);
        }
        IdealFilter band{IdealFilterKind::BandpassThirds, spec.lambda.back()};
        const Mat y =
            spectral_filter(spec, [&](double l) { return band.response(l); }, sum);
        Mat middle(3, 1);
        for (std::size_t i = 0; i < 3; ++i) middle(i, 0) = spec.u(i, 1);
        CHECK(max_abs(y - middle) <= 1e-9);
    }
    SUBCASE("filtering is linear") {
        Mat x2(3, 1);
        for (std::size_t i = 0; i < 3; ++i) x2(i, 0) = rng.gaussian();
        auto h = [](double l) { return 1.0 / (1.0 + l); };
        Mat ax = x;
        ax *= 0.7;
        Mat bx2 = x2;
        bx2 *= -1.3;
        const Mat lhs = spectral_filter(spec, h, ax + bx2);
        Mat rhs = spectral_filter(spec, h, x);
        rhs *= 0.7;
        Mat rhs2 = spectral_filter(spec, h, x2);
        rhs2 *= -1.3;
        rhs += rhs2;
        CHECK(max_abs(lhs - rhs) <= 1e-9);
    }
}

TEST_CASE("ideal filter responses are the stated indicators") {
    IdealFilter band{IdealFilterKind::BandpassThirds, 1.8};
    CHECK(band.response(0.5) == 0.0);
    CHECK(band.response(0.9) == 1.0);
    CHECK(band.response(1.3) == 0.0);
    IdealFilter low{IdealFilterKind::LowpassHalf, 1.8};
    CHECK(low.response(0.8) == 1.0);
    CHECK(low.response(0.95) == 0.0);
}

TEST_CASE("empirical response recovers the exact filter from pairs") {
    const GridCase grid = parse_case(read_fixture("case14.m"));
    const GraphTopology topo = build_topology(build_ybus(grid));
    const GraphSpectrum spec = symmetric_eig(topo.l);
    auto h = [](double l) { return 0.3 + 0.5 * std::cos(l); };

    Rng rng(23);
    std::vector<std::pair<Vec, Vec>> pairs;
    for (int k = 0; k < 24; ++k) {
        Mat x(grid.n(), 1);
        for (std::size_t i = 0; i < grid.n(); ++i) x(i, 0) = rng.gaussian();
        const Mat y = spectral_filter(spec, h, x);
        Vec xv(grid.n()), yv(grid.n());
        for (std::size_t i = 0; i < grid.n(); ++i) {
            xv[i] = x(i, 0);
            yv[i] = y(i, 0);
        }
        pairs.emplace_back(std::move(xv), std::move(yv));
    }
    const FrequencyResponse resp = empirical_frequency_response(spec, pairs);
    for (std::size_t i = 0; i < spec.n(); ++i) {
        REQUIRE(resp.defined[i] == 1);
        CHECK(std::abs(resp.h[i] - h(spec.lambda[i])) <= 1e-9);
    }
}

TEST_CASE("single-pair estimate equals the coefficient ratio") {
    const GraphTopology topo = path3_topology();
    const GraphSpectrum spec = symmetric_eig(topo.l);
    const Vec u1 = spec.eigenvector(1);
    Vec y = u1;
    for (auto& v : y) v *= 2.5;
    const FrequencyResponse resp =
        empirical_frequency_response(spec, {{u1, y}});
    CHECK(resp.defined[1] == 1);
    CHECK(resp.h[1] == doctest::Approx(2.5));
    // orthogonal frequencies see |u^T x| = 0 and stay undefined
    CHECK(resp.defined[0] == 0);
    CHECK(resp.defined[2] == 0);
}
