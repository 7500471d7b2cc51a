#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fdialab/linalg.hpp"

namespace fdialab {

enum class BusKind : std::uint8_t { Slack, PV, PQ };

std::string to_string(BusKind k);
BusKind bus_kind_from_string(const std::string& s);

struct Bus {
    int id = 0;  // identifier from the case file; internal code uses positions
    BusKind kind = BusKind::PQ;
    double p_load = 0.0;  // pu on system base
    double q_load = 0.0;
    double p_gen = 0.0;  // scheduled active generation (slack value is a hint)
    double q_gen = 0.0;  // scheduled reactive generation (PQ buses only)
    double v_set = 1.0;  // setpoint magnitude for slack/PV buses
    double shunt_g = 0.0;
    double shunt_b = 0.0;

    bool operator==(const Bus&) const = default;
};

struct Branch {
    std::size_t from = 0;  // zero-based bus positions
    std::size_t to = 0;
    double r = 0.0;
    double x = 0.0;
    double b_charging = 0.0;  // total line charging susceptance
    double tap = 1.0;         // off-nominal turns ratio on the from side
    bool status = true;

    bool operator==(const Branch&) const = default;
};

struct GridCase {
    std::string name;
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;

    std::size_t n() const { return buses.size(); }
    std::size_t slack_index() const;
    /// Position of a bus id, or throws ModelError.
    std::size_t index_of(int bus_id) const;

    bool operator==(const GridCase&) const = default;
};

struct AdmittanceMatrix {
    CMat y;
};

struct GraphTopology {
    Mat w;           // weighted adjacency |Ybus| with zero diagonal
    Vec d;           // degrees (row sums of w)
    Mat l;           // normalized Laplacian I - D^-1/2 W D^-1/2
    Mat l_scaled;    // 2 L / lambda_max - I
    Mat l_modified;  // I - L
    double lambda_max = 0.0;

    std::size_t n() const { return w.rows(); }
};

/// Parse a MATPOWER-style case listing (function header, mpc.baseMVA,
/// mpc.bus / mpc.gen / mpc.branch matrices). Quantities are converted to
/// per-unit on base_mva. Unknown mpc.* fields are collected as warnings.
GridCase parse_case(const std::string& text, std::vector<std::string>* warnings = nullptr);

GridCase load_case_file(const std::string& path, std::vector<std::string>* warnings = nullptr);

/// Standard nodal admittance assembly: series 1/(r+jx), charging b/2 at each
/// end, tap on the from side, bus shunts on the diagonal.
AdmittanceMatrix build_ybus(const GridCase& grid);

/// Adjacency, degree, and the Laplacian family used by the spectral and
/// filter layers. lambda_max is estimated by power iteration.
GraphTopology build_topology(const AdmittanceMatrix& ybus);

/// JSON round trip for the documented case schema (case.json).
std::string case_to_json(const GridCase& grid);
GridCase case_from_json(const std::string& json_text);

/// topology.json emission for the CLI `case` subcommand.
std::string topology_to_json(const GraphTopology& topo);

}  // namespace fdialab
