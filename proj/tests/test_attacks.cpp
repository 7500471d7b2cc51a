#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "fdialab/attacks.hpp"
#include "fdialab/state_estimation.hpp"

using namespace fdialab;

namespace {

std::string read_fixture(const std::string& name) {
    std::ifstream in(std::string(FDIALAB_FIXTURE_DIR) + "/" + name);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

GridCase ieee14() { return parse_case(read_fixture("case14.m")); }

bool connected_in_grid(const GridCase& grid, const std::vector<std::size_t>& buses) {
    if (buses.empty()) return false;
    std::set<std::size_t> want(buses.begin(), buses.end());
    std::set<std::size_t> seen{buses.front()};
    std::vector<std::size_t> stack{buses.front()};
    while (!stack.empty()) {
        const std::size_t u = stack.back();
        stack.pop_back();
        for (const auto& br : grid.branches) {
            std::size_t v = SIZE_MAX;
            if (br.from == u && want.count(br.to)) v = br.to;
            if (br.to == u && want.count(br.from)) v = br.from;
            if (v != SIZE_MAX && !seen.count(v)) {
                seen.insert(v);
                stack.push_back(v);
            }
        }
    }
    return seen.size() == want.size();
}

/// Bit-exact equality outside the support set.
void check_untouched_outside(const MeasurementFrame& base, const MeasurementFrame& attacked,
                             const TargetArea& area) {
    const Vec zb = frame_to_vector(base);
    const Vec za = frame_to_vector(attacked);
    REQUIRE(zb.size() == za.size());
    std::set<std::size_t> support(area.t_z.begin(), area.t_z.end());
    for (std::size_t i = 0; i < zb.size(); ++i) {
        if (!support.count(i)) {
            CHECK(za[i] == zb[i]);
        }
    }
}

}  // namespace

TEST_CASE("single-bus area: own injections plus incident flows are in the support") {
    const GridCase grid = ieee14();
    Rng rng(1);
    const TargetArea area = sample_target_area(grid, {1, 1}, rng);
    REQUIRE(area.t_x.size() == 1);
    const std::size_t bus = area.t_x[0];
    CHECK(bus != grid.slack_index());

    const std::size_t n = grid.n();
    const std::size_t nb = grid.branches.size();
    std::set<std::size_t> support(area.t_z.begin(), area.t_z.end());
    CHECK(support.count(bus));          // own P injection
    CHECK(support.count(n + bus));      // own Q injection
    for (std::size_t b = 0; b < nb; ++b) {
        const auto& br = grid.branches[b];
        if (br.from == bus || br.to == bus) {
            CHECK(support.count(2 * n + b));
            CHECK(support.count(2 * n + nb + b));
            CHECK(support.count(2 * n + 2 * nb + b));
            CHECK(support.count(2 * n + 3 * nb + b));
        }
    }
}

TEST_CASE("sampled areas are connected, sized, and never include the slack") {
    const GridCase grid = ieee14();
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const TargetArea area = sample_target_area(grid, {5, 5}, rng);
        CHECK(area.t_x.size() == 5);
        CHECK(connected_in_grid(grid, area.t_x));
        CHECK(std::find(area.t_x.begin(), area.t_x.end(), grid.slack_index()) == area.t_x.end());
    }
}

TEST_CASE("the example area {4,7,9,10,14} is connected on IEEE 14") {
    const GridCase grid = ieee14();
    std::vector<std::size_t> buses;
    for (int id : {4, 7, 9, 10, 14}) buses.push_back(grid.index_of(id));
    CHECK(connected_in_grid(grid, buses));
    const TargetArea area = area_from_buses(grid, buses);
    const AttackLabel label = label_for(area, grid.n());
    CHECK(label.grid == 1);
    std::size_t marked = 0;
    for (auto b : label.per_bus) marked += b;
    CHECK(marked == 5);
}

TEST_CASE("labels satisfy grid = OR(per_bus)") {
    const GridCase grid = ieee14();
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const TargetArea area = sample_target_area(grid, {1, 4}, rng);
        const AttackLabel label = label_for(area, grid.n());
        std::uint8_t any = 0;
        for (std::size_t i = 0; i < grid.n(); ++i) {
            any |= label.per_bus[i];
            const bool in_area =
                std::find(area.t_x.begin(), area.t_x.end(), i) != area.t_x.end();
            CHECK(label.per_bus[i] == (in_area ? 1 : 0));
        }
        CHECK(label.grid == any);
    }
}

TEST_CASE("stealth attack on a noiseless base") {
    const GridCase grid = ieee14();
    const StateVector x = solve_power_flow(grid, Loading::uniform(grid.n(), 1.0));
    const MeasurementFrame clean = measurement_function(grid, x);
    const Vec sigmas = noise_sigmas(clean, 0.01);
    Vec r_diag(sigmas.size());
    for (std::size_t i = 0; i < sigmas.size(); ++i) r_diag[i] = sigmas[i] * sigmas[i];

    SUBCASE("magnitude 0 is the identity") {
        Rng rng(5);
        const TargetArea area = sample_target_area(grid, {3, 3}, rng);
        StealthOptions opt;
        opt.magnitude = 0.0;
        const AttackedFrame out = attack_stealth(grid, clean, x, area, rng, opt);
        CHECK(out.frame == clean);
    }
    SUBCASE("support entries change, the rest are bit-identical") {
        Rng rng(6);
        const TargetArea area = sample_target_area(grid, {3, 3}, rng);
        const AttackedFrame out = attack_stealth(grid, clean, x, area, rng);
        check_untouched_outside(clean, out.frame, area);
        double moved = 0.0;
        const Vec zb = frame_to_vector(clean), za = frame_to_vector(out.frame);
        for (std::size_t idx : area.t_z) moved += std::abs(za[idx] - zb[idx]);
        CHECK(moved > 1e-4);
    }
    SUBCASE("full-grid target on a noiseless base is exactly BDD-clean") {
        std::vector<std::size_t> all;
        for (std::size_t i = 0; i < grid.n(); ++i) {
            if (i != grid.slack_index()) all.push_back(i);
        }
        const TargetArea area = area_from_buses(grid, all);
        Rng rng(8);
        const AttackedFrame out = attack_stealth(grid, clean, x, area, rng);
        const EstimationResult est = wlse_estimate(grid, out.frame, r_diag);
        REQUIRE(est.converged);
        CHECK(lnrt_bdd(est, 3.0).clean);
    }
}

TEST_CASE("stealth detection on noisy bases stays at the false-alarm level") {
    const GridCase grid = ieee14();
    const StateVector x = solve_power_flow(grid, Loading::uniform(grid.n(), 1.0));
    const MeasurementFrame clean = measurement_function(grid, x);
    const Vec sigmas = noise_sigmas(clean, 0.01);
    Vec r_diag(sigmas.size());
    for (std::size_t i = 0; i < sigmas.size(); ++i) r_diag[i] = sigmas[i] * sigmas[i];

    const int frames = 60;
    int clean_alarms = 0, stealth_alarms = 0;
    Rng rng(42);
    for (int f = 0; f < frames; ++f) {
        const MeasurementFrame noisy = add_noise(clean, 0.01, 10000 + f);
        if (!lnrt_bdd(wlse_estimate(grid, noisy, r_diag), 3.0).clean) ++clean_alarms;

        const TargetArea area = sample_target_area(grid, {1, 3}, rng);
        const AttackedFrame attacked = attack_stealth(grid, noisy, x, area, rng);
        if (!lnrt_bdd(wlse_estimate(grid, attacked.frame, r_diag), 3.0).clean) ++stealth_alarms;
    }
    // the stealth rate may not exceed the false-alarm rate by more than 5 pp
    // (binomial noise at 60 frames adds a small allowance)
    CHECK(stealth_alarms <= clean_alarms + frames * 5 / 100 + 3);
}

TEST_CASE("replay attack") {
    const GridCase grid = ieee14();
    const StateVector x = solve_power_flow(grid, Loading::uniform(grid.n(), 1.0));
    const MeasurementFrame f0 = add_noise(measurement_function(grid, x), 0.01, 1);
    const MeasurementFrame f1 = add_noise(measurement_function(grid, x), 0.01, 2);
    std::vector<MeasurementFrame> history = {f0, f1, f0};  // frame 2 repeats frame 0

    Rng rng(11);
    const TargetArea area = sample_target_area(grid, {2, 2}, rng);

    SUBCASE("degenerate replay: identical frames give z_a = z_o") {
        const AttackedFrame out = attack_replay(history, 2, 2, area);
        CHECK(out.frame == history[2]);
    }
    SUBCASE("replayed support equals the lagged frame exactly") {
        const AttackedFrame out = attack_replay(history, 1, 1, area);
        const Vec za = frame_to_vector(out.frame);
        const Vec z0 = frame_to_vector(history[0]);
        for (std::size_t idx : area.t_z) CHECK(za[idx] == z0[idx]);
        check_untouched_outside(history[1], out.frame, area);
        // the load changed between frames, so the attack moved something
        bool any_changed = false;
        const Vec z1 = frame_to_vector(history[1]);
        for (std::size_t idx : area.t_z) any_changed |= (za[idx] != z1[idx]);
        CHECK(any_changed);
    }
    SUBCASE("insufficient history is an error") {
        CHECK_THROWS_AS(attack_replay(history, 1, 2, area), ContractError);
    }
}

TEST_CASE("scale attack") {
    const GridCase grid = ieee14();
    const StateVector x = solve_power_flow(grid, Loading::uniform(grid.n(), 1.0));
    MeasurementFrame frame = measurement_function(grid, x);
    Rng rng(13);
    const TargetArea area = sample_target_area(grid, {3, 3}, rng);

    SUBCASE("attacked values stay within the uniform band around originals") {
        const AttackedFrame out = attack_scale(frame, area, rng);
        const Vec zb = frame_to_vector(frame), za = frame_to_vector(out.frame);
        for (std::size_t idx : area.t_z) {
            if (zb[idx] == 0.0) {
                CHECK(za[idx] == 0.0);
            } else {
                const double ratio = za[idx] / zb[idx];
                CHECK(ratio >= 0.9);
                CHECK(ratio <= 1.1);
            }
        }
        check_untouched_outside(frame, out.frame, area);
    }
    SUBCASE("scale factors are mean-one over many draws") {
        // one unit-valued measurement makes the drawn factor observable
        double acc = 0.0;
        const int reps = 10000;
        MeasurementFrame unit = frame;
        unit.p_inj[area.t_x[0]] = 1.0;
        for (int r = 0; r < reps; ++r) {
            Rng draw_rng(500 + r);
            const AttackedFrame out = attack_scale(unit, area, draw_rng);
            acc += out.frame.p_inj[area.t_x[0]];
        }
        const double mean = acc / reps;
        CHECK(mean >= 0.995);
        CHECK(mean <= 1.005);
    }
}

TEST_CASE("distribution attack") {
    const GridCase grid = ieee14();
    const StateVector x = solve_power_flow(grid, Loading::uniform(grid.n(), 1.0));
    const MeasurementFrame base = measurement_function(grid, x);
    Rng rng(17);
    const TargetArea area = sample_target_area(grid, {2, 2}, rng);

    SUBCASE("zero-variance history reproduces the mean exactly") {
        const std::vector<MeasurementFrame> history = {base, base, base};
        const MeasurementStats stats = measurement_stats(history);
        const AttackedFrame out = attack_distribution(stats, base, area, rng);
        const Vec za = frame_to_vector(out.frame);
        for (std::size_t idx : area.t_z) CHECK(za[idx] == stats.mean[idx]);
    }
    SUBCASE("fixed seed determinism") {
        std::vector<MeasurementFrame> history;
        for (int f = 0; f < 8; ++f) history.push_back(add_noise(base, 0.01, 100 + f));
        const MeasurementStats stats = measurement_stats(history);
        Rng a(99), b(99);
        const AttackedFrame fa = attack_distribution(stats, base, area, a);
        const AttackedFrame fb = attack_distribution(stats, base, area, b);
        CHECK(fa.frame == fb.frame);
    }
    SUBCASE("sample mean of draws approaches the historical mean") {
        std::vector<MeasurementFrame> history;
        for (int f = 0; f < 32; ++f) history.push_back(add_noise(base, 0.01, 300 + f));
        const MeasurementStats stats = measurement_stats(history);
        const std::size_t idx = area.t_z.front();
        const double sigma = std::sqrt(stats.variance[idx]);
        const int reps = 10000;
        double acc = 0.0;
        for (int r = 0; r < reps; ++r) {
            Rng draw_rng(7000 + r);
            acc += frame_to_vector(attack_distribution(stats, base, area, draw_rng).frame)[idx];
        }
        const double mean = acc / reps;
        const double standard_error = sigma / std::sqrt(static_cast<double>(reps));
        CHECK(std::abs(mean - stats.mean[idx]) <= 3.0 * standard_error);
    }
}
