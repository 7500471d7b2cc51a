#include "fdialab/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace fdialab {

AttackLabel label_for(const TargetArea& area, std::size_t n) {
    AttackLabel label;
    label.per_bus.assign(n, 0);
    for (std::size_t i : area.t_x) label.per_bus.at(i) = 1;
    label.grid = area.t_x.empty() ? 0 : 1;
    return label;
}

TargetArea area_from_buses(const GridCase& grid, std::vector<std::size_t> t_x) {
    const std::size_t n = grid.n();
    const std::size_t nb = grid.branches.size();
    std::sort(t_x.begin(), t_x.end());
    t_x.erase(std::unique(t_x.begin(), t_x.end()), t_x.end());
    if (t_x.empty()) throw ContractError("target area must be nonempty");
    for (std::size_t i : t_x) {
        if (i >= n) throw ContractError("target bus out of range");
    }
    std::vector<char> in_area(n, 0);
    for (std::size_t i : t_x) in_area[i] = 1;

    // touched[i]: the injection at bus i depends on some t_x state, i.e. i is
    // in t_x or adjacent to it.
    std::vector<char> touched = in_area;
    std::set<std::size_t> z;
    for (std::size_t b = 0; b < nb; ++b) {
        const Branch& br = grid.branches[b];
        if (!br.status) continue;
        if (in_area[br.from] || in_area[br.to]) {
            touched[br.from] = 1;
            touched[br.to] = 1;
            z.insert(2 * n + b);            // p_flow from side
            z.insert(2 * n + nb + b);       // p_flow to side
            z.insert(2 * n + 2 * nb + b);   // q_flow from side
            z.insert(2 * n + 3 * nb + b);   // q_flow to side
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (touched[i]) {
            z.insert(i);      // p_inj
            z.insert(n + i);  // q_inj
        }
    }

    TargetArea area;
    area.t_x = std::move(t_x);
    area.t_z.assign(z.begin(), z.end());
    return area;
}

TargetArea sample_target_area(const GridCase& grid, SizeRange size_range, Rng& rng) {
    const std::size_t n = grid.n();
    const std::size_t slack = grid.slack_index();
    if (size_range.min < 1 || size_range.min > size_range.max || size_range.max > n - 1) {
        throw ContractError("sample_target_area: invalid size range");
    }
    std::vector<std::vector<std::size_t>> adj(n);
    for (const auto& br : grid.branches) {
        if (!br.status) continue;
        adj[br.from].push_back(br.to);
        adj[br.to].push_back(br.from);
    }
    const std::size_t want =
        size_range.min + rng.uniform_index(size_range.max - size_range.min + 1);

    // BFS growth from a random non-slack seed; neighbors are visited in a
    // shuffled order so areas of the same size vary in shape.
    std::vector<char> in_area(n, 0);
    std::vector<std::size_t> members;
    std::vector<std::size_t> frontier;
    std::size_t seed = slack;
    while (seed == slack) seed = rng.uniform_index(n);
    in_area[seed] = 1;
    members.push_back(seed);
    frontier.push_back(seed);

    while (members.size() < want && !frontier.empty()) {
        const std::size_t pick = rng.uniform_index(frontier.size());
        const std::size_t u = frontier[pick];
        std::vector<std::size_t> candidates;
        for (std::size_t v : adj[u]) {
            if (!in_area[v] && v != slack) candidates.push_back(v);
        }
        if (candidates.empty()) {
            frontier.erase(frontier.begin() + static_cast<std::ptrdiff_t>(pick));
            continue;
        }
        const std::size_t v = candidates[rng.uniform_index(candidates.size())];
        in_area[v] = 1;
        members.push_back(v);
        frontier.push_back(v);
    }
    // a slack-adjacent pocket can run out of room below size_range.min; the
    // grown set is still connected, so accept what fits
    return area_from_buses(grid, std::move(members));
}

namespace {

MeasurementFrame overwrite_support(const MeasurementFrame& base, const Vec& values,
                                   const TargetArea& area) {
    Vec z = frame_to_vector(base);
    for (std::size_t idx : area.t_z) {
        if (idx >= z.size()) throw ContractError("t_z index out of range");
        z[idx] = values[idx];
    }
    return frame_from_vector(z, base.p_inj.size(), base.p_flow.size() / 2, base.timestamp);
}

}  // namespace

AttackedFrame attack_stealth(const GridCase& grid, const MeasurementFrame& base,
                             const StateVector& x_base, const TargetArea& area, Rng& rng,
                             const StealthOptions& opt) {
    const double theta_range = opt.theta_range_deg * std::numbers::pi / 180.0;
    for (int attempt = 0; attempt < opt.max_tries; ++attempt) {
        StateVector spoofed = x_base;
        for (std::size_t i : area.t_x) {
            spoofed.v[i] *= 1.0 + opt.magnitude * rng.uniform(-opt.v_range, opt.v_range);
            spoofed.theta[i] += opt.magnitude * rng.uniform(-theta_range, theta_range);
        }
        MeasurementFrame at_spoofed;
        try {
            at_spoofed = measurement_function(grid, spoofed);
        } catch (const ContractError&) {
            continue;  // non-finite state, resample
        }
        const Vec values = frame_to_vector(at_spoofed);
        bool finite = true;
        for (std::size_t idx : area.t_z) {
            if (!std::isfinite(values[idx])) {
                finite = false;
                break;
            }
        }
        if (!finite) continue;
        AttackedFrame out;
        out.frame = overwrite_support(base, values, area);
        out.label = label_for(area, grid.n());
        return out;
    }
    throw NumericalError("attack_stealth: no finite perturbation found in " +
                         std::to_string(opt.max_tries) + " tries");
}

AttackedFrame attack_replay(const std::vector<MeasurementFrame>& history, std::size_t t,
                            std::size_t tau, const TargetArea& area) {
    if (t >= history.size()) throw ContractError("attack_replay: t out of range");
    if (tau > t) {
        throw ContractError("attack_replay: insufficient history (t - tau < 0)");
    }
    const MeasurementFrame& base = history[t];
    const Vec past = frame_to_vector(history[t - tau]);
    AttackedFrame out;
    out.frame = overwrite_support(base, past, area);
    out.label = label_for(area, base.p_inj.size());
    return out;
}

AttackedFrame attack_scale(const MeasurementFrame& frame, const TargetArea& area, Rng& rng) {
    Vec z = frame_to_vector(frame);
    for (std::size_t idx : area.t_z) {
        if (idx >= z.size()) throw ContractError("t_z index out of range");
        z[idx] *= rng.uniform(0.9, 1.1);
    }
    AttackedFrame out;
    out.frame = frame_from_vector(z, frame.p_inj.size(), frame.p_flow.size() / 2, frame.timestamp);
    out.label = label_for(area, frame.p_inj.size());
    return out;
}

MeasurementStats measurement_stats(const std::vector<MeasurementFrame>& history) {
    if (history.empty()) throw ContractError("measurement_stats: empty history");
    const std::size_t m = history.front().size();
    MeasurementStats stats;
    stats.mean.assign(m, 0.0);
    stats.variance.assign(m, 0.0);
    Vec lo = frame_to_vector(history.front());
    Vec hi = lo;
    for (const auto& frame : history) {
        const Vec z = frame_to_vector(frame);
        if (z.size() != m) throw ContractError("measurement_stats: inconsistent frame sizes");
        for (std::size_t i = 0; i < m; ++i) {
            stats.mean[i] += z[i];
            lo[i] = std::min(lo[i], z[i]);
            hi[i] = std::max(hi[i], z[i]);
        }
    }
    for (auto& v : stats.mean) v /= static_cast<double>(history.size());
    for (const auto& frame : history) {
        const Vec z = frame_to_vector(frame);
        for (std::size_t i = 0; i < m; ++i) {
            const double d = z[i] - stats.mean[i];
            stats.variance[i] += d * d;
        }
    }
    for (auto& v : stats.variance) v /= static_cast<double>(history.size());
    // a constant series is exactly its value, not value +- rounding
    for (std::size_t i = 0; i < m; ++i) {
        if (lo[i] == hi[i]) {
            stats.mean[i] = lo[i];
            stats.variance[i] = 0.0;
        }
    }
    return stats;
}

AttackedFrame attack_distribution(const MeasurementStats& stats, const MeasurementFrame& frame,
                                  const TargetArea& area, Rng& rng) {
    if (stats.mean.size() != frame.size()) {
        throw ContractError("attack_distribution: stats length mismatch");
    }
    Vec z = frame_to_vector(frame);
    for (std::size_t idx : area.t_z) {
        if (idx >= z.size()) throw ContractError("t_z index out of range");
        z[idx] = rng.gaussian(stats.mean[idx], std::sqrt(stats.variance[idx]));
    }
    AttackedFrame out;
    out.frame = frame_from_vector(z, frame.p_inj.size(), frame.p_flow.size() / 2, frame.timestamp);
    out.label = label_for(area, frame.p_inj.size());
    return out;
}

}  // namespace fdialab
