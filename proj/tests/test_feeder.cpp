#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "ufd/feeder.hpp"

using namespace ufd;
namespace fs = std::filesystem;

namespace {

std::string fixture(const std::string& name) { return std::string(UFD_FIXTURE_DIR) + "/" + name; }

std::string write_temp(const std::string& name, const std::string& body) {
    fs::path p = fs::temp_directory_path() / name;
    std::ofstream out(p);
    out << body;
    return p.string();
}

// Depth oracle built on a different traversal: frontier sets over an
// adjacency matrix instead of a queue with parent pointers.
std::vector<int> depth_oracle(const FeederModel& m) {
    const int n = static_cast<int>(m.buses.size());
    std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
    for (const auto& br : m.branches) {
        adj[br.from][br.to] = true;
        adj[br.to][br.from] = true;
    }
    std::vector<int> depth(n, -1);
    std::set<int> frontier{m.slack_bus};
    depth[m.slack_bus] = 0;
    int d = 0;
    while (!frontier.empty()) {
        std::set<int> next;
        for (int u : frontier)
            for (int v = 0; v < n; ++v)
                if (adj[u][v] && depth[v] < 0) {
                    depth[v] = d + 1;
                    next.insert(v);
                }
        frontier = std::move(next);
        ++d;
    }
    return depth;
}

FeederModel star_feeder(int leaves) {
    FeederModel m;
    m.name = "star";
    m.base_voltage = 2400;
    m.base_power = 1e6;
    m.slack_bus = 0;
    for (int p = 0; p < 3; ++p) m.slack_voltage(p) = std::polar(1.0, -2.0 * M_PI / 3.0 * p);
    BusSpec hub;
    hub.id = "hub";
    hub.phases = PhaseSet::parse("a");
    m.buses.push_back(hub);
    for (int i = 0; i < leaves; ++i) {
        BusSpec leaf;
        leaf.id = "leaf" + std::to_string(i);
        leaf.phases = PhaseSet::parse("a");
        m.buses.push_back(leaf);
        BranchSpec br;
        br.id = "l" + std::to_string(i);
        br.from = 0;
        br.to = i + 1;
        br.phases = PhaseSet::parse("a");
        br.z = Eigen::MatrixXcd::Constant(1, 1, cplx(0.01, 0.02));
        br.s_max = Eigen::VectorXd::Constant(1, 2.0);
        m.branches.push_back(br);
    }
    return m;
}

}  // namespace

TEST_CASE("two-bus fixture loads with expected shape") {
    FeederModel m = load_feeder(fixture("feeder_2bus.json"));
    CHECK(m.buses.size() == 2);
    CHECK(m.branches.size() == 1);
    CHECK(m.slack_bus == m.bus_index("sub"));
    CHECK(m.buses[1].phases.size() == 1);
    CHECK(m.branches[0].z(0, 0) == cplx(0.01, 0.02));
    CHECK(m.branches[0].s_max(0) == doctest::Approx(2.0));
    CHECK(m.bus_phase_count() == 2);
    CHECK(m.ders.empty());
}

TEST_CASE("thirteen-bus fixture loads with mixed laterals") {
    FeederModel m = load_feeder(fixture("feeder_13bus.json"));
    CHECK(m.buses.size() == 13);
    CHECK(m.branches.size() == 12);
    std::set<int> phase_counts;
    for (const auto& b : m.buses) phase_counts.insert(b.phases.size());
    CHECK(phase_counts == std::set<int>{1, 2, 3});
    CHECK(m.ders.size() == 14);
    int batteries = 0, solars = 0;
    for (const auto& d : m.ders) {
        if (d.battery) ++batteries;
        if (d.solar) ++solars;
    }
    CHECK(batteries == 14);
    CHECK(solars == 14);
}

TEST_CASE("two-bus depths are slack 0 and child 1") {
    FeederModel m = load_feeder(fixture("feeder_2bus.json"));
    TopologyReport rep = validate_radial(m);
    CHECK(rep.depth[m.slack_bus] == 0);
    CHECK(rep.depth[m.bus_index("b1")] == 1);
}

TEST_CASE("star feeder leaves all sit at depth one") {
    FeederModel m = star_feeder(4);
    validate_model(m);
    TopologyReport rep = validate_radial(m);
    CHECK(rep.depth[0] == 0);
    for (int i = 1; i <= 4; ++i) CHECK(rep.depth[i] == 1);
    CHECK(rep.children[0].size() == 4);
}

TEST_CASE("thirteen-bus depth map matches frontier-set traversal oracle") {
    FeederModel m = load_feeder(fixture("feeder_13bus.json"));
    TopologyReport rep = validate_radial(m);
    std::vector<int> oracle = depth_oracle(m);
    REQUIRE(oracle.size() == rep.depth.size());
    for (std::size_t b = 0; b < oracle.size(); ++b) CHECK(rep.depth[b] == oracle[b]);
    CHECK(rep.depth[m.bus_index("n675")] == 4);
    CHECK(rep.depth[m.bus_index("n632")] == 1);
}

TEST_CASE("cycle rejected as non-radial") {
    std::string path = write_temp("ufd_cycle.json", R"({
      "format_version": 1, "name": "cycle",
      "base": {"voltage_v": 2400.0, "power_va": 1e6},
      "slack_bus": "s",
      "buses": [
        {"id": "s", "phases": "a", "v_min_pu": 0.95, "v_max_pu": 1.05},
        {"id": "x", "phases": "a", "v_min_pu": 0.95, "v_max_pu": 1.05},
        {"id": "y", "phases": "a", "v_min_pu": 0.95, "v_max_pu": 1.05}
      ],
      "branches": [
        {"id": "l1", "from": "s", "to": "x", "phases": "a", "z_pu": [["a","a",0.01,0.02]], "s_max_pu": 1.0},
        {"id": "l2", "from": "x", "to": "y", "phases": "a", "z_pu": [["a","a",0.01,0.02]], "s_max_pu": 1.0},
        {"id": "l3", "from": "y", "to": "s", "phases": "a", "z_pu": [["a","a",0.01,0.02]], "s_max_pu": 1.0}
      ]
    })");
    CHECK_THROWS_WITH_AS(load_feeder(path), doctest::Contains("not radial"), ValidationError);
    std::remove(path.c_str());
}

TEST_CASE("disconnected bus reported by name") {
    std::string path = write_temp("ufd_island.json", R"({
      "format_version": 1, "name": "island",
      "base": {"voltage_v": 2400.0, "power_va": 1e6},
      "slack_bus": "s",
      "buses": [
        {"id": "s", "phases": "a", "v_min_pu": 0.95, "v_max_pu": 1.05},
        {"id": "x", "phases": "a", "v_min_pu": 0.95, "v_max_pu": 1.05},
        {"id": "y", "phases": "a", "v_min_pu": 0.95, "v_max_pu": 1.05},
        {"id": "lonely", "phases": "a", "v_min_pu": 0.95, "v_max_pu": 1.05}
      ],
      "branches": [
        {"id": "l1", "from": "s", "to": "x", "phases": "a", "z_pu": [["a","a",0.01,0.02]], "s_max_pu": 1.0},
        {"id": "l2", "from": "x", "to": "y", "phases": "a", "z_pu": [["a","a",0.01,0.02]], "s_max_pu": 1.0},
        {"id": "l3", "from": "y", "to": "x", "phases": "a", "z_pu": [["a","a",0.01,0.02]], "s_max_pu": 1.0}
      ]
    })");
    CHECK_THROWS_WITH_AS(load_feeder(path), doctest::Contains("lonely"), ValidationError);
    std::remove(path.c_str());
}

TEST_CASE("branch endpoints are reoriented parent to child") {
    std::string path = write_temp("ufd_reversed.json", R"({
      "format_version": 1, "name": "chain",
      "base": {"voltage_v": 2400.0, "power_va": 1e6},
      "slack_bus": "s",
      "buses": [
        {"id": "s", "phases": "a", "v_min_pu": 0.95, "v_max_pu": 1.05},
        {"id": "mid", "phases": "a", "v_min_pu": 0.95, "v_max_pu": 1.05},
        {"id": "end", "phases": "a", "v_min_pu": 0.95, "v_max_pu": 1.05}
      ],
      "branches": [
        {"id": "l1", "from": "mid", "to": "s", "phases": "a", "z_pu": [["a","a",0.01,0.02]], "s_max_pu": 1.0},
        {"id": "l2", "from": "end", "to": "mid", "phases": "a", "z_pu": [["a","a",0.01,0.02]], "s_max_pu": 1.0}
      ]
    })");
    FeederModel m = load_feeder(path);
    CHECK(m.buses[m.branches[0].from].id == "s");
    CHECK(m.buses[m.branches[0].to].id == "mid");
    CHECK(m.buses[m.branches[1].from].id == "mid");
    CHECK(m.buses[m.branches[1].to].id == "end");
    CHECK(m.parent_branch[m.bus_index("end")] == 1);
    std::remove(path.c_str());
}

TEST_CASE("validation failures name the offending element") {
    FeederModel m = load_feeder(fixture("feeder_13bus.json"));

    SUBCASE("asymmetric impedance") {
        m.branches[0].z(0, 1) += cplx(0.001, 0);
        CHECK_THROWS_WITH_AS(validate_model(m), doctest::Contains("sub-632"), ValidationError);
    }
    SUBCASE("negative resistance") {
        m.branches[2].z(1, 1) = cplx(-0.01, 0.02);
        CHECK_THROWS_WITH_AS(validate_model(m), doctest::Contains("633-634"), ValidationError);
    }
    SUBCASE("nonpositive flow limit") {
        m.branches[3].s_max(0) = 0.0;
        CHECK_THROWS_WITH_AS(validate_model(m), doctest::Contains("632-645"), ValidationError);
    }
    SUBCASE("voltage band inverted") {
        m.buses[4].v_min = 1.06;
        CHECK_THROWS_WITH_AS(validate_model(m), doctest::Contains("n645"), ValidationError);
    }
    SUBCASE("initial charge outside bounds") {
        m.ders[0].battery->b_init = 0.5;
        CHECK_THROWS_WITH_AS(validate_model(m), doctest::Contains("der_634a"), ValidationError);
    }
    SUBCASE("efficiency above one") {
        m.ders[1].battery->eta_c = 1.2;
        CHECK_THROWS_WITH_AS(validate_model(m), doctest::Contains("der_634b"), ValidationError);
    }
    SUBCASE("der on absent phase") {
        m.ders[9].phase = Phase::b;  // n652 carries phase a only
        CHECK_THROWS_WITH_AS(validate_model(m), doctest::Contains("der_652a"), ValidationError);
    }
    SUBCASE("branch phases must match child bus") {
        // n611 is single-phase c; feeding it with a wider branch is rejected.
        auto& br = m.branches[9];
        br.phases = PhaseSet::parse("ac");
        br.z = Eigen::MatrixXcd::Zero(2, 2);
        br.z(0, 0) = br.z(1, 1) = cplx(0.01, 0.02);
        br.s_max = Eigen::VectorXd::Constant(2, 0.8);
        CHECK_THROWS_WITH_AS(validate_model(m), doctest::Contains("684-611"), ValidationError);
    }
}

TEST_CASE("feeder save then load is the identity") {
    FeederModel a = load_feeder(fixture("feeder_13bus.json"));
    fs::path tmp = fs::temp_directory_path() / "ufd_roundtrip.json";
    save_feeder(a, tmp.string());
    FeederModel b = load_feeder(tmp.string());

    REQUIRE(a.buses.size() == b.buses.size());
    REQUIRE(a.branches.size() == b.branches.size());
    REQUIRE(a.ders.size() == b.ders.size());
    CHECK(a.base_voltage == b.base_voltage);
    CHECK(a.base_power == b.base_power);
    CHECK(a.slack_bus == b.slack_bus);
    for (int p = 0; p < 3; ++p) CHECK(std::abs(a.slack_voltage(p) - b.slack_voltage(p)) < 1e-15);
    for (std::size_t i = 0; i < a.buses.size(); ++i) {
        CHECK(a.buses[i].id == b.buses[i].id);
        CHECK(a.buses[i].phases == b.buses[i].phases);
        CHECK(a.buses[i].v_min == b.buses[i].v_min);
        CHECK(a.buses[i].v_max == b.buses[i].v_max);
    }
    for (std::size_t l = 0; l < a.branches.size(); ++l) {
        CHECK(a.branches[l].id == b.branches[l].id);
        CHECK(a.branches[l].from == b.branches[l].from);
        CHECK(a.branches[l].to == b.branches[l].to);
        CHECK(a.branches[l].phases == b.branches[l].phases);
        CHECK(a.branches[l].z == b.branches[l].z);
        CHECK(a.branches[l].s_max == b.branches[l].s_max);
    }
    for (std::size_t d = 0; d < a.ders.size(); ++d) {
        CHECK(a.ders[d].id == b.ders[d].id);
        CHECK(a.ders[d].bus == b.ders[d].bus);
        CHECK(a.ders[d].phase == b.ders[d].phase);
        REQUIRE(a.ders[d].battery.has_value() == b.ders[d].battery.has_value());
        if (a.ders[d].battery) {
            CHECK(a.ders[d].battery->p_max == b.ders[d].battery->p_max);
            CHECK(a.ders[d].battery->h_max == b.ders[d].battery->h_max);
            CHECK(a.ders[d].battery->b_min == b.ders[d].battery->b_min);
            CHECK(a.ders[d].battery->b_max == b.ders[d].battery->b_max);
            CHECK(a.ders[d].battery->b_init == b.ders[d].battery->b_init);
            CHECK(a.ders[d].battery->eta_c == b.ders[d].battery->eta_c);
            CHECK(a.ders[d].battery->eta_d == b.ders[d].battery->eta_d);
        }
        REQUIRE(a.ders[d].solar.has_value() == b.ders[d].solar.has_value());
        if (a.ders[d].solar) CHECK(a.ders[d].solar->g_max == b.ders[d].solar->g_max);
    }
    fs::remove(tmp);
}

TEST_CASE("ohm-valued impedance converts onto the declared bases") {
    FeederModel ref = load_feeder(fixture("feeder_2bus.json"));
    const double zb = ref.z_base();
    char body[1024];
    std::snprintf(body, sizeof(body), R"({
      "format_version": 1, "name": "ohms",
      "base": {"voltage_v": 2400.0, "power_va": 1000000.0},
      "slack_bus": "sub",
      "buses": [
        {"id": "sub", "phases": "a", "v_min_pu": 0.95, "v_max_pu": 1.05},
        {"id": "b1", "phases": "a", "v_min_pu": 0.95, "v_max_pu": 1.05}
      ],
      "branches": [
        {"id": "l1", "from": "sub", "to": "b1", "phases": "a",
         "z_ohm": [["a","a",%.17g,%.17g]], "s_max_pu": 2.0}
      ]
    })",
                  0.01 * zb, 0.02 * zb);
    std::string path = write_temp("ufd_ohm.json", body);
    FeederModel m = load_feeder(path);
    CHECK(m.branches[0].z(0, 0).real() == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(m.branches[0].z(0, 0).imag() == doctest::Approx(0.02).epsilon(1e-12));
    std::remove(path.c_str());
}

TEST_CASE("time series round trip and windowing") {
    FeederModel m = load_feeder(fixture("feeder_2bus.json"));
    TimeSeries ts = TimeSeries::zeros(m, 4, 1.0 / 60.0);
    const int k = m.bus_phase_index(m.bus_index("b1"), Phase::a);
    ts.demand[k] = {cplx(0.5, 0.1), cplx(0.52, 0.11), cplx(0.54, 0.12), cplx(0.56, 0.13)};
    ts.solar_avail[k] = {0.0, 0.05, 0.1, 0.15};

    fs::path tmp = fs::temp_directory_path() / "ufd_series.csv";
    save_series(m, ts, tmp.string());
    TimeSeries back = load_series(m, tmp.string());
    CHECK(back.steps == 4);
    CHECK(back.dt_hours == ts.dt_hours);
    for (int t = 0; t < 4; ++t) {
        CHECK(back.demand[k][t] == ts.demand[k][t]);
        CHECK(back.solar_avail[k][t] == ts.solar_avail[k][t]);
    }

    TimeSeries win = ts.window(1, 2);
    CHECK(win.steps == 2);
    CHECK(win.demand[k][0] == cplx(0.52, 0.11));
    CHECK(win.solar_avail[k][1] == 0.1);
    CHECK_THROWS_AS(ts.window(3, 2), ValidationError);
    fs::remove(tmp);
}

TEST_CASE("series loader rejects malformed input") {
    FeederModel m = load_feeder(fixture("feeder_2bus.json"));
    SUBCASE("unknown quantity") {
        std::string path = write_temp("ufd_badq.csv",
                                      "# format_version 1\n# dt_hours 0.016666666666666666\n"
                                      "bus,phase,quantity,t0\nb1,a,windspeed,1.0\n");
        CHECK_THROWS_AS(load_series(m, path), ParseError);
        std::remove(path.c_str());
    }
    SUBCASE("ragged row") {
        std::string path = write_temp("ufd_ragged.csv",
                                      "# format_version 1\n# dt_hours 0.016666666666666666\n"
                                      "bus,phase,quantity,t0,t1\nb1,a,demand_p,1.0\n");
        CHECK_THROWS_AS(load_series(m, path), ParseError);
        std::remove(path.c_str());
    }
    SUBCASE("missing version line") {
        std::string path = write_temp("ufd_nover.csv", "bus,phase,quantity,t0\nb1,a,demand_p,1.0\n");
        CHECK_THROWS_AS(load_series(m, path), ParseError);
        std::remove(path.c_str());
    }
}
