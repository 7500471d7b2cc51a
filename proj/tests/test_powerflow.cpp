#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fdialab/powerflow.hpp"
#include "fdialab/rng.hpp"

using namespace fdialab;

namespace {

std::string read_fixture(const std::string& name) {
    std::ifstream in(std::string(FDIALAB_FIXTURE_DIR) + "/" + name);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kTwoBusCase = R"(function mpc = case2
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1.0	0	0	1	1.06	0.94;
	2	1	10	0	0	0	1	1.0	0	0	1	1.06	0.94;
];
mpc.gen = [
	1	0	0	10	-10	1.0	100	1	100	0;
];
mpc.branch = [
	1	2	0	0.1	0	0	0	0	0	0	1	-360	360;
];
)";

const char* kFlatCase = R"(function mpc = flat3
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1.0	0	0	1	1.06	0.94;
	2	1	0	0	0	0	1	1.0	0	0	1	1.06	0.94;
	3	2	0	0	0	0	1	1.0	0	0	1	1.06	0.94;
];
mpc.gen = [
	1	0	0	10	-10	1.0	100	1	100	0;
	3	0	0	10	-10	1.0	100	1	100	0;
];
mpc.branch = [
	1	2	0.01	0.1	0	0	0	0	0	0	1	-360	360;
	2	3	0.01	0.1	0	0	0	0	0	0	1	-360	360;
];
)";

/// 1-D oracle for the 2-bus lossless case: with V1 = 1, x = 0.1 the balance
/// equations reduce to V2 = cos(th2) and 5 sin(2 th2) = -P_load; solve the
/// angle by bisection.
void two_bus_oracle(double p_load, double& v2, double& th2) {
    auto f = [&](double th) { return 5.0 * std::sin(2.0 * th) + p_load; };
    double lo = -0.5, hi = 0.0;
    REQUIRE(f(lo) < 0.0);
    REQUIRE(f(hi) >= 0.0);
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
    }
    th2 = 0.5 * (lo + hi);
    v2 = std::cos(th2);
}

}  // namespace

TEST_CASE("zero load, uniform setpoints: flat start is the solution") {
    const GridCase grid = parse_case(kFlatCase);
    PowerFlowOptions opt;
    const StateVector x = solve_power_flow(grid, Loading::uniform(grid.n(), 1.0), opt);
    for (std::size_t i = 0; i < grid.n(); ++i) {
        CHECK(x.v[i] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(x.theta[i] == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("2-bus case matches the bisection oracle") {
    const GridCase grid = parse_case(kTwoBusCase);
    const StateVector x = solve_power_flow(grid, Loading::uniform(2, 1.0));
    double v2 = 0.0, th2 = 0.0;
    two_bus_oracle(0.1, v2, th2);
    CHECK(std::abs(x.v[1] - v2) < 1e-8);
    CHECK(std::abs(x.theta[1] - th2) < 1e-8);
    CHECK(x.theta[0] == 0.0);

    // the state reproduces the load it was solved for
    const MeasurementFrame h = measurement_function(grid, x);
    CHECK(std::abs(h.p_inj[1] - (-0.1)) < 1e-8);
}

TEST_CASE("IEEE 14 converges to the published operating point") {
    const GridCase grid = parse_case(read_fixture("case14.m"));
    const StateVector x = solve_power_flow(grid, Loading::uniform(grid.n(), 1.0));

    // mismatch at the solution
    const MeasurementFrame h = measurement_function(grid, x);
    const std::size_t slack = grid.slack_index();
    for (std::size_t i = 0; i < grid.n(); ++i) {
        const Bus& b = grid.buses[i];
        if (i != slack) {
            CHECK(std::abs(h.p_inj[i] - (b.p_gen - b.p_load)) < 1e-8);
        }
        if (b.kind == BusKind::PQ) {
            CHECK(std::abs(h.q_inj[i] - (b.q_gen - b.q_load)) < 1e-8);
        }
    }
    // sanity band plus the fixture's stored solution voltages (3-decimal data)
    const double published_vm[14] = {1.06,  1.045, 1.01,  1.019, 1.02,  1.07,  1.062,
                                     1.09,  1.056, 1.051, 1.057, 1.055, 1.05,  1.036};
    for (std::size_t i = 0; i < grid.n(); ++i) {
        CHECK(x.v[i] > 0.9);
        CHECK(x.v[i] < 1.1);
        CHECK(x.v[i] == doctest::Approx(published_vm[i]).epsilon(2e-3));
    }
}

TEST_CASE("power balance holds at any converged state") {
    const GridCase grid = parse_case(read_fixture("case14.m"));
    for (double factor : {0.8, 1.0, 1.1}) {
        CAPTURE(factor);
        const StateVector x = solve_power_flow(grid, Loading::uniform(grid.n(), factor));
        const MeasurementFrame h = measurement_function(grid, x);
        // total injection equals losses; equivalently generation = load + losses
        double total_p = 0.0;
        for (double p : h.p_inj) total_p += p;
        double losses = 0.0;
        const std::size_t nb = grid.branches.size();
        for (std::size_t b = 0; b < nb; ++b) {
            losses += h.p_flow[b] + h.p_flow[nb + b];
        }
        CHECK(std::abs(total_p - losses) < 1e-6);
    }
}

TEST_CASE("divergence raises a numerical error") {
    const GridCase grid = parse_case(kTwoBusCase);
    // 12 pu of load across a 0.1 pu reactance is far beyond the nose point
    CHECK_THROWS_AS(solve_power_flow(grid, Loading::uniform(2, 120.0)), NumericalError);
}

TEST_CASE("measurement function is pure and zero at the trivial state") {
    const GridCase grid = parse_case(kFlatCase);
    StateVector x;
    x.v.assign(3, 1.0);
    x.theta.assign(3, 0.0);
    const MeasurementFrame a = measurement_function(grid, x);
    const MeasurementFrame b = measurement_function(grid, x);
    CHECK(a == b);
    for (double v : frame_to_vector(a)) CHECK(v == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("injections equal the signed flow sums plus shunt terms") {
    const GridCase grid = parse_case(read_fixture("case14.m"));
    const StateVector x = solve_power_flow(grid, Loading::uniform(grid.n(), 1.0));
    const MeasurementFrame h = measurement_function(grid, x);
    const std::size_t nb = grid.branches.size();
    for (std::size_t i = 0; i < grid.n(); ++i) {
        double p = 0.0, q = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
            if (grid.branches[b].from == i) {
                p += h.p_flow[b];
                q += h.q_flow[b];
            }
            if (grid.branches[b].to == i) {
                p += h.p_flow[nb + b];
                q += h.q_flow[nb + b];
            }
        }
        p += grid.buses[i].shunt_g * x.v[i] * x.v[i];
        q -= grid.buses[i].shunt_b * x.v[i] * x.v[i];
        CHECK(std::abs(h.p_inj[i] - p) < 1e-8);
        CHECK(std::abs(h.q_inj[i] - q) < 1e-8);
    }
}

TEST_CASE("analytic measurement jacobian matches central finite differences") {
    const GridCase grid = parse_case(read_fixture("case14.m"));
    const AdmittanceMatrix adm = build_ybus(grid);
    Rng rng(31);
    StateVector x;
    x.v.resize(grid.n());
    x.theta.resize(grid.n());
    for (std::size_t i = 0; i < grid.n(); ++i) {
        x.v[i] = rng.uniform(0.95, 1.05);
        x.theta[i] = rng.uniform(-0.2, 0.2);
    }
    x.theta[grid.slack_index()] = 0.0;

    const Mat jac = measurement_jacobian(grid, adm, x);
    const Vec u0 = pack_state(grid, x);
    const double step = 1e-6;
    for (std::size_t c = 0; c < u0.size(); ++c) {
        Vec up = u0, dn = u0;
        up[c] += step;
        dn[c] -= step;
        const Vec hp = frame_to_vector(measurement_function(grid, unpack_state(grid, up)));
        const Vec hm = frame_to_vector(measurement_function(grid, unpack_state(grid, dn)));
        for (std::size_t r = 0; r < hp.size(); ++r) {
            const double fd = (hp[r] - hm[r]) / (2.0 * step);
            const double an = jac(r, c);
            const double scale = std::max({std::abs(fd), std::abs(an), 1.0});
            CHECK(std::abs(fd - an) / scale < 1e-5);
        }
    }
}

TEST_CASE("noise is deterministic, unbiased, and respects sigma") {
    const GridCase grid = parse_case(read_fixture("case14.m"));
    const StateVector x = solve_power_flow(grid, Loading::uniform(grid.n(), 1.0));
    const MeasurementFrame clean = measurement_function(grid, x);

    SUBCASE("sigma zero is the identity") {
        CHECK(add_noise(clean, 0.0, 99) == clean);
    }
    SUBCASE("fixed seed reproduces the frame bit-exactly") {
        CHECK(add_noise(clean, 0.01, 4711) == add_noise(clean, 0.01, 4711));
    }
    SUBCASE("sample std tracks the declared sigma within 5%") {
        const Vec base = frame_to_vector(clean);
        const Vec sigma = noise_sigmas(clean, 0.01);
        const int reps = 10000;
        std::vector<double> sq(base.size(), 0.0);
        for (int r = 0; r < reps; ++r) {
            const Vec noisy = frame_to_vector(add_noise(clean, 0.01, 1000 + r));
            for (std::size_t i = 0; i < base.size(); ++i) {
                const double d = noisy[i] - base[i];
                sq[i] += d * d;
            }
        }
        for (std::size_t i = 0; i < base.size(); ++i) {
            const double sample_std = std::sqrt(sq[i] / reps);
            CHECK(sample_std == doctest::Approx(sigma[i]).epsilon(0.05));
        }
    }
}
