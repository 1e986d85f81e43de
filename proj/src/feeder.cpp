#include "ufd/feeder.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace ufd {

using json = nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    return j;
}

const json& field(const json& j, const std::string& key, const std::string& ctx) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(ctx + ": missing field '" + key + "'");
    return *it;
}

double num(const json& j, const std::string& key, const std::string& ctx) {
    const json& v = field(j, key, ctx);
    if (!v.is_number()) throw ParseError(ctx + ": field '" + key + "' is not a number");
    return v.get<double>();
}

double num_or(const json& j, const std::string& key, double fallback) {
    auto it = j.find(key);
    return it == j.end() ? fallback : it->get<double>();
}

std::string str(const json& j, const std::string& key, const std::string& ctx) {
    const json& v = field(j, key, ctx);
    if (!v.is_string()) throw ParseError(ctx + ": field '" + key + "' is not a string");
    return v.get<std::string>();
}

Eigen::MatrixXcd parse_impedance(const json& entries, const PhaseSet& phases, double scale,
                                 const std::string& ctx) {
    const int d = phases.size();
    Eigen::MatrixXcd z = Eigen::MatrixXcd::Zero(d, d);
    Eigen::MatrixXd seen = Eigen::MatrixXd::Zero(d, d);
    if (!entries.is_array()) throw ParseError(ctx + ": impedance must be an array of [pi,pj,R,X]");
    for (const auto& e : entries) {
        if (!e.is_array() || e.size() != 4) throw ParseError(ctx + ": impedance entry must be [pi,pj,R,X]");
        Phase pi = parse_phase(e[0].get<std::string>());
        Phase pj = parse_phase(e[1].get<std::string>());
        if (!phases.contains(pi) || !phases.contains(pj))
            throw ValidationError(ctx + ": impedance entry on absent phase pair " + std::string(1, phase_char(pi)) +
                                  std::string(1, phase_char(pj)));
        const int i = phases.index_of(pi), j = phases.index_of(pj);
        const cplx v(e[2].get<double>() * scale, e[3].get<double>() * scale);
        z(i, j) = v;
        z(j, i) = v;
        seen(i, j) = seen(j, i) = 1.0;
    }
    return z;
}

json impedance_to_json(const BranchSpec& br) {
    json arr = json::array();
    auto phases = br.phases.list();
    for (int i = 0; i < static_cast<int>(phases.size()); ++i)
        for (int j = i; j < static_cast<int>(phases.size()); ++j) {
            const cplx v = br.z(i, j);
            if (v == cplx(0, 0) && i != j) continue;
            arr.push_back(json::array({std::string(1, phase_char(phases[i])), std::string(1, phase_char(phases[j])),
                                       v.real(), v.imag()}));
        }
    return arr;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    for (auto& s : out) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        s = (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
    }
    return out;
}

}  // namespace

int FeederModel::bus_index(const std::string& id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].id == id) return static_cast<int>(i);
    throw ValidationError("unknown bus id '" + id + "'");
}

std::pair<int, Phase> FeederModel::bus_phase_at(int k) const {
    for (std::size_t b = 0; b + 1 < bus_phase_offsets_.size(); ++b) {
        if (k < static_cast<int>(bus_phase_offsets_[b + 1])) {
            const int local = k - static_cast<int>(bus_phase_offsets_[b]);
            return {static_cast<int>(b), buses[b].phases.list()[local]};
        }
    }
    throw ValidationError("bus-phase index out of range");
}

void FeederModel::finalize() {
    bus_phase_offsets_.assign(1, 0);
    for (const auto& bus : buses) bus_phase_offsets_.push_back(bus_phase_offsets_.back() + bus.phases.size());
}

TimeSeries TimeSeries::zeros(const FeederModel& model, int steps, double dt_hours) {
    TimeSeries ts;
    ts.dt_hours = dt_hours;
    ts.steps = steps;
    ts.demand.assign(model.bus_phase_count(), std::vector<cplx>(steps, cplx(0, 0)));
    ts.solar_avail.assign(model.bus_phase_count(), std::vector<double>(steps, 0.0));
    return ts;
}

TimeSeries TimeSeries::window(int t0, int len) const {
    if (t0 < 0 || len < 1 || t0 + len > steps)
        throw ValidationError("time-series window [" + std::to_string(t0) + ", " + std::to_string(t0 + len) +
                              ") outside horizon of " + std::to_string(steps) + " steps");
    TimeSeries out;
    out.dt_hours = dt_hours;
    out.steps = len;
    out.demand.resize(demand.size());
    out.solar_avail.resize(solar_avail.size());
    for (std::size_t k = 0; k < demand.size(); ++k) {
        out.demand[k].assign(demand[k].begin() + t0, demand[k].begin() + t0 + len);
        out.solar_avail[k].assign(solar_avail[k].begin() + t0, solar_avail[k].begin() + t0 + len);
    }
    return out;
}

TopologyReport validate_radial(const FeederModel& model) {
    const int nb = static_cast<int>(model.buses.size());
    const int nl = static_cast<int>(model.branches.size());
    if (nl != nb - 1)
        throw ValidationError("not radial: " + std::to_string(nl) + " branches for " + std::to_string(nb) +
                              " buses (need |buses|-1)");

    std::vector<std::vector<std::pair<int, int>>> adj(nb);  // (neighbor bus, branch)
    for (int l = 0; l < nl; ++l) {
        adj[model.branches[l].from].push_back({model.branches[l].to, l});
        adj[model.branches[l].to].push_back({model.branches[l].from, l});
    }

    TopologyReport rep;
    rep.depth.assign(nb, -1);
    rep.parent_branch.assign(nb, -1);
    rep.children.assign(nb, {});
    rep.depth[model.slack_bus] = 0;
    std::deque<int> queue{model.slack_bus};
    while (!queue.empty()) {
        const int u = queue.front();
        queue.pop_front();
        rep.order.push_back(u);
        for (auto [v, l] : adj[u]) {
            if (rep.depth[v] >= 0) continue;
            rep.depth[v] = rep.depth[u] + 1;
            rep.parent_branch[v] = l;
            rep.children[u].push_back(l);
            queue.push_back(v);
        }
    }
    if (static_cast<int>(rep.order.size()) != nb) {
        std::string missing;
        for (int b = 0; b < nb; ++b)
            if (rep.depth[b] < 0) missing += (missing.empty() ? "" : ", ") + model.buses[b].id;
        throw ValidationError("not radial: unreachable buses {" + missing + "}");
    }
    return rep;
}

void validate_model(FeederModel& model) {
    if (model.buses.empty()) throw ValidationError("model has no buses");
    if (model.slack_bus < 0 || model.slack_bus >= static_cast<int>(model.buses.size()))
        throw ValidationError("slack bus index out of range");

    for (const auto& bus : model.buses) {
        if (!(bus.v_min > 0) || !(bus.v_min < bus.v_max))
            throw ValidationError("bus " + bus.id + ": need 0 < v_min < v_max");
    }

    TopologyReport rep = validate_radial(model);

    // Orient every branch parent -> child. Impedance is symmetric, so
    // swapping endpoints does not alter it.
    for (int b = 0; b < static_cast<int>(model.buses.size()); ++b) {
        for (int l : rep.children[b]) {
            auto& br = model.branches[l];
            if (br.from != b) std::swap(br.from, br.to);
        }
    }
    model.parent_branch = rep.parent_branch;
    model.children = rep.children;
    model.depth = rep.depth;

    for (const auto& br : model.branches) {
        const auto& fb = model.buses[br.from];
        const auto& tb = model.buses[br.to];
        if (!fb.phases.contains(br.phases) || !tb.phases.contains(br.phases))
            throw ValidationError("branch " + br.id + ": phases '" + br.phases.str() +
                                  "' not present at both endpoints");
        // Downstream buses are energized only through their feeding branch.
        if (!(br.phases == tb.phases))
            throw ValidationError("branch " + br.id + ": feeding branch phases '" + br.phases.str() +
                                  "' must equal child bus " + tb.id + " phases '" + tb.phases.str() + "'");
        const int d = br.phases.size();
        if (br.z.rows() != d || br.z.cols() != d)
            throw ValidationError("branch " + br.id + ": impedance block is not " + std::to_string(d) + "x" +
                                  std::to_string(d));
        if (!br.z.allFinite()) throw ValidationError("branch " + br.id + ": non-finite impedance entry");
        if ((br.z - br.z.transpose()).cwiseAbs().maxCoeff() > 1e-12)
            throw ValidationError("branch " + br.id + ": impedance matrix not symmetric");
        for (int i = 0; i < d; ++i)
            if (br.z(i, i).real() < 0) throw ValidationError("branch " + br.id + ": negative series resistance");
        if (br.s_max.size() != d) throw ValidationError("branch " + br.id + ": s_max size mismatch");
        for (int i = 0; i < d; ++i)
            if (!(br.s_max(i) > 0)) throw ValidationError("branch " + br.id + ": s_max must be positive");
    }

    for (const auto& der : model.ders) {
        if (der.bus < 0 || der.bus >= static_cast<int>(model.buses.size()))
            throw ValidationError("der " + der.id + ": bus index out of range");
        if (der.bus == model.slack_bus) throw ValidationError("der " + der.id + ": DER at slack bus not supported");
        if (!model.buses[der.bus].phases.contains(der.phase))
            throw ValidationError("der " + der.id + ": phase " + std::string(1, phase_char(der.phase)) +
                                  " absent at bus " + model.buses[der.bus].id);
        if (der.battery) {
            const auto& bt = *der.battery;
            if (!(bt.b_min <= bt.b_init && bt.b_init <= bt.b_max))
                throw ValidationError("der " + der.id + ": need b_min <= b_init <= b_max");
            if (!(bt.eta_c > 0 && bt.eta_c <= 1 && bt.eta_d > 0 && bt.eta_d <= 1))
                throw ValidationError("der " + der.id + ": efficiencies must lie in (0, 1]");
            if (bt.p_max < 0 || bt.h_max < 0) throw ValidationError("der " + der.id + ": negative power limit");
        }
        if (der.solar && der.solar->g_max < 0) throw ValidationError("der " + der.id + ": negative g_max");
    }

    model.finalize();
}

FeederModel load_feeder(const std::string& path) {
    const json j = read_json_file(path);
    if (j.value("format_version", 0) != kFormatVersion)
        throw ParseError(path + ": unsupported or missing format_version (expected " +
                         std::to_string(kFormatVersion) + ")");

    FeederModel m;
    m.name = j.value("name", "feeder");
    const json& base = field(j, "base", path);
    m.base_voltage = num(base, "voltage_v", path + ".base");
    m.base_power = num(base, "power_va", path + ".base");
    if (!(m.base_voltage > 0) || !(m.base_power > 0)) throw ValidationError(path + ": bases must be positive");

    for (const auto& bj : field(j, "buses", path)) {
        BusSpec bus;
        bus.id = str(bj, "id", path + ".buses");
        bus.phases = PhaseSet::parse(str(bj, "phases", "bus " + bus.id));
        bus.v_min = num(bj, "v_min_pu", "bus " + bus.id);
        bus.v_max = num(bj, "v_max_pu", "bus " + bus.id);
        m.buses.push_back(bus);
    }
    for (std::size_t i = 0; i < m.buses.size(); ++i)
        for (std::size_t k = i + 1; k < m.buses.size(); ++k)
            if (m.buses[i].id == m.buses[k].id) throw ValidationError("duplicate bus id '" + m.buses[i].id + "'");

    m.slack_bus = m.bus_index(str(j, "slack_bus", path));

    m.slack_voltage = Eigen::Vector3cd::Zero();
    {
        double mag = 1.0;
        std::array<double, 3> ang{0.0, -120.0, 120.0};
        if (j.contains("slack_voltage")) {
            const json& sv = j["slack_voltage"];
            mag = num_or(sv, "magnitude_pu", 1.0);
            if (sv.contains("angles_deg")) {
                const auto& a = sv["angles_deg"];
                for (int p = 0; p < 3; ++p) ang[p] = a.at(p).get<double>();
            }
        }
        for (int p = 0; p < 3; ++p) m.slack_voltage(p) = std::polar(mag, ang[p] * M_PI / 180.0);
    }

    const double z_base = m.z_base();
    for (const auto& lj : field(j, "branches", path)) {
        BranchSpec br;
        br.id = str(lj, "id", path + ".branches");
        br.from = m.bus_index(str(lj, "from", "branch " + br.id));
        br.to = m.bus_index(str(lj, "to", "branch " + br.id));
        br.phases = PhaseSet::parse(str(lj, "phases", "branch " + br.id));
        if (lj.contains("z_pu"))
            br.z = parse_impedance(lj["z_pu"], br.phases, 1.0, "branch " + br.id);
        else if (lj.contains("z_ohm"))
            br.z = parse_impedance(lj["z_ohm"], br.phases, 1.0 / z_base, "branch " + br.id);
        else
            throw ParseError("branch " + br.id + ": needs z_pu or z_ohm");
        const int d = br.phases.size();
        br.s_max.resize(d);
        const json& sm = field(lj, "s_max_pu", "branch " + br.id);
        if (sm.is_number()) {
            br.s_max.setConstant(sm.get<double>());
        } else {
            auto phl = br.phases.list();
            for (int i = 0; i < d; ++i)
                br.s_max(i) = num(sm, std::string(1, phase_char(phl[i])), "branch " + br.id + ".s_max_pu");
        }
        m.branches.push_back(br);
    }

    if (j.contains("ders")) {
        for (const auto& dj : j["ders"]) {
            DerSpec der;
            der.id = str(dj, "id", path + ".ders");
            der.bus = m.bus_index(str(dj, "bus", "der " + der.id));
            der.phase = parse_phase(str(dj, "phase", "der " + der.id));
            if (dj.contains("battery")) {
                const json& bt = dj["battery"];
                BatterySpec b;
                b.p_max = num(bt, "p_max_pu", "der " + der.id);
                b.h_max = num(bt, "h_max_pu", "der " + der.id);
                b.b_min = num(bt, "b_min_puh", "der " + der.id);
                b.b_max = num(bt, "b_max_puh", "der " + der.id);
                b.b_init = num(bt, "b_init_puh", "der " + der.id);
                b.eta_c = num_or(bt, "eta_c", 1.0);
                b.eta_d = num_or(bt, "eta_d", 1.0);
                der.battery = b;
            }
            if (dj.contains("solar")) {
                SolarSpec s;
                s.g_max = num(dj["solar"], "g_max_pu", "der " + der.id);
                der.solar = s;
            }
            m.ders.push_back(der);
        }
    }

    validate_model(m);
    return m;
}

void save_feeder(const FeederModel& m, const std::string& path) {
    json j;
    j["format_version"] = kFormatVersion;
    j["name"] = m.name;
    j["base"] = {{"voltage_v", m.base_voltage}, {"power_va", m.base_power}};
    j["slack_bus"] = m.buses[m.slack_bus].id;
    {
        json sv;
        sv["magnitude_pu"] = std::abs(m.slack_voltage(0));
        json angles = json::array();
        for (int p = 0; p < 3; ++p) angles.push_back(std::arg(m.slack_voltage(p)) * 180.0 / M_PI);
        sv["angles_deg"] = angles;
        j["slack_voltage"] = sv;
    }
    j["buses"] = json::array();
    for (const auto& bus : m.buses)
        j["buses"].push_back(
            {{"id", bus.id}, {"phases", bus.phases.str()}, {"v_min_pu", bus.v_min}, {"v_max_pu", bus.v_max}});
    j["branches"] = json::array();
    for (const auto& br : m.branches) {
        json bj = {{"id", br.id},
                   {"from", m.buses[br.from].id},
                   {"to", m.buses[br.to].id},
                   {"phases", br.phases.str()},
                   {"z_pu", impedance_to_json(br)}};
        json sm;
        auto phl = br.phases.list();
        for (int i = 0; i < br.phases.size(); ++i) sm[std::string(1, phase_char(phl[i]))] = br.s_max(i);
        bj["s_max_pu"] = sm;
        j["branches"].push_back(bj);
    }
    j["ders"] = json::array();
    for (const auto& der : m.ders) {
        json dj = {{"id", der.id}, {"bus", m.buses[der.bus].id}, {"phase", std::string(1, phase_char(der.phase))}};
        if (der.battery) {
            const auto& b = *der.battery;
            dj["battery"] = {{"p_max_pu", b.p_max},   {"h_max_pu", b.h_max}, {"b_min_puh", b.b_min},
                             {"b_max_puh", b.b_max},  {"b_init_puh", b.b_init}, {"eta_c", b.eta_c},
                             {"eta_d", b.eta_d}};
        }
        if (der.solar) dj["solar"] = {{"g_max_pu", der.solar->g_max}};
        j["ders"].push_back(dj);
    }
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write file: " + path);
    out << j.dump(2) << "\n";
}

TimeSeries load_series(const FeederModel& model, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);

    double dt_hours = 1.0 / 60.0;
    int format_version = -1;
    std::string line;
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream meta(line.substr(1));
            std::string key;
            meta >> key;
            if (key == "format_version") meta >> format_version;
            if (key == "dt_hours") meta >> dt_hours;
            continue;
        }
        rows.push_back(split_csv(line));
    }
    if (format_version != kFormatVersion)
        throw ParseError(path + ": unsupported or missing '# format_version' line");
    if (rows.empty() || rows[0].size() < 4 || rows[0][0] != "bus")
        throw ParseError(path + ": expected header 'bus,phase,quantity,t0,...'");
    const int steps = static_cast<int>(rows[0].size()) - 3;

    TimeSeries ts = TimeSeries::zeros(model, steps, dt_hours);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (static_cast<int>(row.size()) != steps + 3)
            throw ParseError(path + ": row " + std::to_string(r) + " has " + std::to_string(row.size() - 3) +
                             " steps, header has " + std::to_string(steps));
        const int bus = model.bus_index(row[0]);
        const Phase ph = parse_phase(row[1]);
        if (!model.buses[bus].phases.contains(ph))
            throw ValidationError(path + ": series for absent phase " + row[1] + " at bus " + row[0]);
        const int k = model.bus_phase_index(bus, ph);
        std::vector<double> vals(steps);
        for (int t = 0; t < steps; ++t) {
            try {
                vals[t] = std::stod(row[t + 3]);
            } catch (const std::exception&) {
                throw ParseError(path + ": bad number '" + row[t + 3] + "' in row " + std::to_string(r));
            }
        }
        if (row[2] == "demand_p") {
            for (int t = 0; t < steps; ++t) ts.demand[k][t] = cplx(vals[t], ts.demand[k][t].imag());
        } else if (row[2] == "demand_q") {
            for (int t = 0; t < steps; ++t) ts.demand[k][t] = cplx(ts.demand[k][t].real(), vals[t]);
        } else if (row[2] == "solar_avail") {
            ts.solar_avail[k] = vals;
        } else {
            throw ParseError(path + ": unknown quantity '" + row[2] + "'");
        }
    }
    if (!(ts.dt_hours > 0)) throw ValidationError(path + ": dt_hours must be positive");
    return ts;
}

void save_series(const FeederModel& model, const TimeSeries& ts, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write file: " + path);
    char buf[64];
    out << "# format_version " << kFormatVersion << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", ts.dt_hours);
    out << "# dt_hours " << buf << "\n";
    out << "bus,phase,quantity";
    for (int t = 0; t < ts.steps; ++t) out << ",t" << t;
    out << "\n";
    auto write_row = [&](int bus, Phase ph, const std::string& qty, auto getter) {
        out << model.buses[bus].id << "," << phase_char(ph) << "," << qty;
        for (int t = 0; t < ts.steps; ++t) {
            std::snprintf(buf, sizeof(buf), "%.17g", getter(t));
            out << "," << buf;
        }
        out << "\n";
    };
    for (int b = 0; b < static_cast<int>(model.buses.size()); ++b) {
        for (Phase ph : model.buses[b].phases.list()) {
            const int k = model.bus_phase_index(b, ph);
            write_row(b, ph, "demand_p", [&](int t) { return ts.demand[k][t].real(); });
            write_row(b, ph, "demand_q", [&](int t) { return ts.demand[k][t].imag(); });
            write_row(b, ph, "solar_avail", [&](int t) { return ts.solar_avail[k][t]; });
        }
    }
}

}  // namespace ufd
