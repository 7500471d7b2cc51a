#include "fdialab/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace fdialab {

using nlohmann::json;

std::string to_string(BusKind k) {
    switch (k) {
        case BusKind::Slack: return "slack";
        case BusKind::PV: return "pv";
        case BusKind::PQ: return "pq";
    }
    return "pq";
}

BusKind bus_kind_from_string(const std::string& s) {
    if (s == "slack") return BusKind::Slack;
    if (s == "pv") return BusKind::PV;
    if (s == "pq") return BusKind::PQ;
    throw ParseError("unknown bus kind: " + s);
}

std::size_t GridCase::slack_index() const {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].kind == BusKind::Slack) return i;
    }
    throw ModelError("case has no slack bus");
}

std::size_t GridCase::index_of(int bus_id) const {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].id == bus_id) return i;
    }
    throw ModelError("unknown bus id " + std::to_string(bus_id));
}

namespace {

struct NumericTable {
    std::vector<std::vector<double>> rows;
    std::vector<int> line_numbers;
};

std::string strip_comment(const std::string& line) {
    const auto pos = line.find('%');
    return pos == std::string::npos ? line : line.substr(0, pos);
}

bool parse_row(const std::string& text, int line_no, std::vector<double>& out) {
    out.clear();
    std::istringstream is(text);
    std::string tok;
    while (is >> tok) {
        if (tok == ";") continue;
        if (!tok.empty() && tok.back() == ';') tok.pop_back();
        if (tok.empty()) continue;
        try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used != tok.size()) {
                throw ParseError("line " + std::to_string(line_no) + ": bad number '" + tok + "'");
            }
            out.push_back(v);
        } catch (const std::invalid_argument&) {
            throw ParseError("line " + std::to_string(line_no) + ": bad number '" + tok + "'");
        }
    }
    return !out.empty();
}

/// Read the numeric matrix between "mpc.<field> = [" and "];".
std::map<std::string, NumericTable> scan_tables(const std::string& text, std::string& case_name,
                                                double& base_mva, bool& base_seen,
                                                std::vector<std::string>* warnings) {
    static const std::vector<std::string> known = {"bus", "gen", "branch"};
    static const std::vector<std::string> silently_ignored = {"version", "baseMVA"};
    std::map<std::string, NumericTable> tables;

    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    std::string active;  // table currently being filled, empty if none

    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = strip_comment(raw);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        if (line.empty()) continue;

        if (!active.empty()) {
            const bool closes = line.find(']') != std::string::npos;
            const std::string body = closes ? line.substr(0, line.find(']')) : line;
            std::vector<double> row;
            if (parse_row(body, line_no, row)) {
                tables[active].rows.push_back(std::move(row));
                tables[active].line_numbers.push_back(line_no);
            }
            if (closes) active.clear();
            continue;
        }

        if (line.rfind("function", 0) == 0) {
            const auto eq = line.find('=');
            if (eq != std::string::npos) {
                std::istringstream ns(line.substr(eq + 1));
                ns >> case_name;
                if (!case_name.empty() && case_name.back() == ';') case_name.pop_back();
            }
            continue;
        }

        if (line.rfind("mpc.", 0) == 0) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw ParseError("line " + std::to_string(line_no) + ": expected '=' after field");
            }
            std::string field = line.substr(4, eq - 4);
            field.erase(std::remove_if(field.begin(), field.end(), ::isspace), field.end());
            std::string rhs = line.substr(eq + 1);

            if (field == "baseMVA") {
                std::vector<double> row;
                std::string body = rhs;
                std::replace(body.begin(), body.end(), ';', ' ');
                if (!parse_row(body, line_no, row) || row.size() != 1) {
                    throw ParseError("line " + std::to_string(line_no) + ": bad baseMVA");
                }
                base_mva = row[0];
                base_seen = true;
                continue;
            }

            const bool is_known = std::find(known.begin(), known.end(), field) != known.end();
            const auto bracket = rhs.find('[');
            if (!is_known) {
                const bool silent = std::find(silently_ignored.begin(), silently_ignored.end(),
                                              field) != silently_ignored.end();
                if (warnings && !silent) {
                    warnings->push_back("ignored unsupported field mpc." + field);
                }
                if (bracket != std::string::npos && rhs.find(']') == std::string::npos) {
                    // skip to the closing bracket of the ignored block
                    while (std::getline(in, raw)) {
                        ++line_no;
                        if (strip_comment(raw).find(']') != std::string::npos) break;
                    }
                }
                continue;
            }
            if (bracket == std::string::npos) {
                throw ParseError("line " + std::to_string(line_no) + ": expected '[' for mpc." +
                                 field);
            }
            active = field;
            const std::string inline_part = rhs.substr(bracket + 1);
            const bool closes = inline_part.find(']') != std::string::npos;
            const std::string body =
                closes ? inline_part.substr(0, inline_part.find(']')) : inline_part;
            std::vector<double> row;
            if (parse_row(body, line_no, row)) {
                tables[active].rows.push_back(std::move(row));
                tables[active].line_numbers.push_back(line_no);
            }
            if (closes) active.clear();
        }
    }
    if (!active.empty()) throw ParseError("unterminated mpc." + active + " table");
    return tables;
}

void check_connected(const GridCase& grid) {
    const std::size_t n = grid.n();
    if (n == 0) throw ModelError("case has no buses");
    std::vector<std::vector<std::size_t>> adj(n);
    for (const auto& br : grid.branches) {
        if (!br.status) continue;
        adj[br.from].push_back(br.to);
        adj[br.to].push_back(br.from);
    }
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> stack = {0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
        const std::size_t u = stack.back();
        stack.pop_back();
        for (std::size_t v : adj[u]) {
            if (!seen[v]) {
                seen[v] = 1;
                ++count;
                stack.push_back(v);
            }
        }
    }
    if (count != n) {
        throw TopologyError("network is not a single island (" + std::to_string(count) + " of " +
                            std::to_string(n) + " buses reachable)");
    }
}

void validate(const GridCase& grid) {
    std::size_t slack_count = 0;
    for (const auto& b : grid.buses) {
        if (b.kind == BusKind::Slack) ++slack_count;
        if (b.kind != BusKind::PQ && !(b.v_set > 0.0)) {
            throw ModelError("bus " + std::to_string(b.id) + ": v_set must be positive");
        }
    }
    if (slack_count == 0) throw ModelError("case has no slack bus");
    if (slack_count > 1) throw ModelError("case has " + std::to_string(slack_count) + " slack buses");

    for (const auto& br : grid.branches) {
        if (br.from >= grid.n() || br.to >= grid.n()) {
            throw ModelError("branch references nonexistent bus");
        }
        if (br.r == 0.0 && br.x == 0.0) {
            throw ModelError("branch " + std::to_string(grid.buses[br.from].id) + "-" +
                             std::to_string(grid.buses[br.to].id) + " has zero impedance");
        }
        if (!(br.tap > 0.0)) throw ModelError("branch tap must be positive");
    }
    check_connected(grid);
}

}  // namespace

GridCase parse_case(const std::string& text, std::vector<std::string>* warnings) {
    GridCase grid;
    bool base_seen = false;
    auto tables = scan_tables(text, grid.name, grid.base_mva, base_seen, warnings);
    if (grid.name.empty()) grid.name = "case";
    if (!base_seen) throw ParseError("missing mpc.baseMVA");
    if (!tables.count("bus")) throw ParseError("missing mpc.bus table");
    if (!tables.count("branch")) throw ParseError("missing mpc.branch table");

    const double sb = grid.base_mva;
    std::map<int, std::size_t> by_id;

    const auto& bus_tab = tables["bus"];
    for (std::size_t r = 0; r < bus_tab.rows.size(); ++r) {
        const auto& row = bus_tab.rows[r];
        if (row.size() < 8) {
            throw ParseError("line " + std::to_string(bus_tab.line_numbers[r]) +
                             ": bus row needs at least 8 columns");
        }
        Bus b;
        b.id = static_cast<int>(row[0]);
        const int type = static_cast<int>(row[1]);
        switch (type) {
            case 1: b.kind = BusKind::PQ; break;
            case 2: b.kind = BusKind::PV; break;
            case 3: b.kind = BusKind::Slack; break;
            default:
                throw ParseError("line " + std::to_string(bus_tab.line_numbers[r]) +
                                 ": unknown bus type " + std::to_string(type));
        }
        b.p_load = row[2] / sb;
        b.q_load = row[3] / sb;
        b.shunt_g = row[4] / sb;
        b.shunt_b = row[5] / sb;
        b.v_set = row[7];  // VM column; overwritten by the gen table setpoint
        if (by_id.count(b.id)) {
            throw ModelError("duplicate bus id " + std::to_string(b.id));
        }
        by_id[b.id] = grid.buses.size();
        grid.buses.push_back(b);
    }

    if (tables.count("gen")) {
        const auto& gen_tab = tables["gen"];
        for (std::size_t r = 0; r < gen_tab.rows.size(); ++r) {
            const auto& row = gen_tab.rows[r];
            if (row.size() < 8) {
                throw ParseError("line " + std::to_string(gen_tab.line_numbers[r]) +
                                 ": gen row needs at least 8 columns");
            }
            const int bus_id = static_cast<int>(row[0]);
            const auto it = by_id.find(bus_id);
            if (it == by_id.end()) {
                throw ModelError("gen row references nonexistent bus " + std::to_string(bus_id));
            }
            const bool in_service = row[7] > 0.0;
            if (!in_service) continue;
            Bus& b = grid.buses[it->second];
            b.p_gen += row[1] / sb;
            b.q_gen += row[2] / sb;
            if (b.kind != BusKind::PQ) b.v_set = row[5];
        }
    }

    const auto& br_tab = tables["branch"];
    for (std::size_t r = 0; r < br_tab.rows.size(); ++r) {
        const auto& row = br_tab.rows[r];
        if (row.size() < 11) {
            throw ParseError("line " + std::to_string(br_tab.line_numbers[r]) +
                             ": branch row needs at least 11 columns");
        }
        Branch br;
        const int f = static_cast<int>(row[0]);
        const int t = static_cast<int>(row[1]);
        const auto fi = by_id.find(f);
        const auto ti = by_id.find(t);
        if (fi == by_id.end() || ti == by_id.end()) {
            throw ModelError("line " + std::to_string(br_tab.line_numbers[r]) +
                             ": branch references nonexistent bus " +
                             std::to_string(fi == by_id.end() ? f : t));
        }
        br.from = fi->second;
        br.to = ti->second;
        br.r = row[2];
        br.x = row[3];
        br.b_charging = row[4];
        br.tap = row[8] == 0.0 ? 1.0 : row[8];
        br.status = row[10] > 0.0;
        grid.branches.push_back(br);
    }

    validate(grid);
    return grid;
}

GridCase load_case_file(const std::string& path, std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open case file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_case(ss.str(), warnings);
}

AdmittanceMatrix build_ybus(const GridCase& grid) {
    const std::size_t n = grid.n();
    AdmittanceMatrix adm;
    adm.y = CMat(n, n);
    for (const auto& br : grid.branches) {
        if (!br.status) continue;
        if (br.r == 0.0 && br.x == 0.0) {
            throw ModelError("branch " + std::to_string(grid.buses[br.from].id) + "-" +
                             std::to_string(grid.buses[br.to].id) + " has zero impedance");
        }
        const Complex ys = 1.0 / Complex(br.r, br.x);
        const Complex ych(0.0, br.b_charging / 2.0);
        const double a = br.tap;
        adm.y(br.from, br.from) += (ys + ych) / (a * a);
        adm.y(br.to, br.to) += ys + ych;
        adm.y(br.from, br.to) += -ys / a;
        adm.y(br.to, br.from) += -ys / a;
    }
    for (std::size_t i = 0; i < n; ++i) {
        adm.y(i, i) += Complex(grid.buses[i].shunt_g, grid.buses[i].shunt_b);
    }
    return adm;
}

namespace {

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double power_iteration_lambda_max(const Mat& m, int max_iter, double rel_tol) {
    const std::size_t n = m.rows();
    Vec x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = 1.0 + 0.5 * std::sin(static_cast<double>(i) + 1.0);
    double lambda = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Vec y = matvec(m, x);
        const double norm = norm2(y);
        if (norm == 0.0) return 0.0;
        for (auto& v : y) v /= norm;
        const double next = dot(y, matvec(m, y));
        x = std::move(y);
        if (it > 0 && std::abs(next - lambda) <= rel_tol * std::abs(next)) {
            return next;
        }
        lambda = next;
    }
    return lambda;
}

}  // namespace

GraphTopology build_topology(const AdmittanceMatrix& ybus) {
    const std::size_t n = ybus.y.rows();
    GraphTopology topo;
    topo.w = Mat(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            topo.w(i, j) = std::abs(ybus.y(i, j));
        }
    }
    // enforce exact symmetry (tap branches make |Y| mildly asymmetric)
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = 0.5 * (topo.w(i, j) + topo.w(j, i));
            topo.w(i, j) = v;
            topo.w(j, i) = v;
        }
    }

    topo.d = Vec(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += topo.w(i, j);
        topo.d[i] = s;
        if (s <= 0.0) {
            throw TopologyError("bus position " + std::to_string(i) + " is isolated (zero degree)");
        }
    }

    topo.l = Mat::identity(n);
    Vec inv_sqrt_d(n);
    for (std::size_t i = 0; i < n; ++i) inv_sqrt_d[i] = 1.0 / std::sqrt(topo.d[i]);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (topo.w(i, j) == 0.0) continue;
            const double v = -topo.w(i, j) * inv_sqrt_d[i] * inv_sqrt_d[j];
            topo.l(i, j) = v;
            topo.l(j, i) = v;
        }
    }

    topo.lambda_max = power_iteration_lambda_max(topo.l, 200, 1e-6);

    topo.l_scaled = topo.l;
    topo.l_scaled *= 2.0 / topo.lambda_max;
    topo.l_scaled -= Mat::identity(n);

    topo.l_modified = Mat::identity(n);
    topo.l_modified -= topo.l;
    return topo;
}

namespace {

json mat_to_json(const Mat& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

std::string case_to_json(const GridCase& grid) {
    json j;
    j["schema"] = "fdialab.case.v1";
    j["name"] = grid.name;
    j["base_mva"] = grid.base_mva;
    json buses = json::array();
    for (const auto& b : grid.buses) {
        buses.push_back({{"id", b.id},
                         {"kind", to_string(b.kind)},
                         {"p_load", b.p_load},
                         {"q_load", b.q_load},
                         {"p_gen", b.p_gen},
                         {"q_gen", b.q_gen},
                         {"v_set", b.v_set},
                         {"shunt_g", b.shunt_g},
                         {"shunt_b", b.shunt_b}});
    }
    j["buses"] = std::move(buses);
    json branches = json::array();
    for (const auto& br : grid.branches) {
        branches.push_back({{"from", grid.buses[br.from].id},
                            {"to", grid.buses[br.to].id},
                            {"r", br.r},
                            {"x", br.x},
                            {"b_charging", br.b_charging},
                            {"tap", br.tap},
                            {"status", br.status}});
    }
    j["branches"] = std::move(branches);
    return j.dump(2);
}

GridCase case_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("case json: ") + e.what());
    }
    GridCase grid;
    grid.name = j.at("name").get<std::string>();
    grid.base_mva = j.at("base_mva").get<double>();
    std::map<int, std::size_t> by_id;
    for (const auto& bj : j.at("buses")) {
        Bus b;
        b.id = bj.at("id").get<int>();
        b.kind = bus_kind_from_string(bj.at("kind").get<std::string>());
        b.p_load = bj.at("p_load").get<double>();
        b.q_load = bj.at("q_load").get<double>();
        b.p_gen = bj.at("p_gen").get<double>();
        b.q_gen = bj.at("q_gen").get<double>();
        b.v_set = bj.at("v_set").get<double>();
        b.shunt_g = bj.at("shunt_g").get<double>();
        b.shunt_b = bj.at("shunt_b").get<double>();
        if (by_id.count(b.id)) throw ModelError("duplicate bus id " + std::to_string(b.id));
        by_id[b.id] = grid.buses.size();
        grid.buses.push_back(b);
    }
    for (const auto& rj : j.at("branches")) {
        Branch br;
        const int f = rj.at("from").get<int>();
        const int t = rj.at("to").get<int>();
        if (!by_id.count(f) || !by_id.count(t)) {
            throw ModelError("branch references nonexistent bus");
        }
        br.from = by_id[f];
        br.to = by_id[t];
        br.r = rj.at("r").get<double>();
        br.x = rj.at("x").get<double>();
        br.b_charging = rj.at("b_charging").get<double>();
        br.tap = rj.at("tap").get<double>();
        br.status = rj.at("status").get<bool>();
        grid.branches.push_back(br);
    }
    validate(grid);
    return grid;
}

std::string topology_to_json(const GraphTopology& topo) {
    json j;
    j["schema"] = "fdialab.topology.v1";
    j["n"] = topo.n();
    j["lambda_max"] = topo.lambda_max;
    j["degree"] = topo.d;
    j["w"] = mat_to_json(topo.w);
    j["laplacian"] = mat_to_json(topo.l);
    j["laplacian_scaled"] = mat_to_json(topo.l_scaled);
    j["laplacian_modified"] = mat_to_json(topo.l_modified);
    return j.dump(2);
}

}  // namespace fdialab
