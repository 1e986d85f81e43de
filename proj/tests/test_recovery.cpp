#include <doctest.h>

#include <cmath>
#include <string>

#include "ufd/feeder.hpp"
#include "ufd/loadflow.hpp"
#include "ufd/recovery.hpp"
#include "ufd/sensitivity.hpp"
#include "ufd/socp.hpp"

using namespace ufd;

namespace {

std::string fixture(const std::string& name) { return std::string(UFD_FIXTURE_DIR) + "/" + name; }

TimeSeries constant_series(const FeederModel& m, int steps, const std::string& bus, Phase ph, cplx demand,
                           double avail = 0.0) {
    TimeSeries s = TimeSeries::zeros(m, steps, 1.0 / 60.0);
    const int bp = m.bus_phase_index(m.bus_index(bus), ph);
    for (int t = 0; t < steps; ++t) {
        s.demand[bp][t] = demand;
        s.solar_avail[bp][t] = avail;
    }
    return s;
}

// Net injection implied by an operating point's dispatch fields, built the
// same way the planner sees it: negated demand plus each device's output.
Eigen::VectorXcd implied_injection(const FeederModel& m, const TimeSeries& s, int t,
                                   const OperatingPoint& p) {
    Eigen::VectorXcd inj(m.bus_phase_count());
    for (int bp = 0; bp < m.bus_phase_count(); ++bp) inj(bp) = -s.demand[bp][t];
    for (int d = 0; d < static_cast<int>(m.ders.size()); ++d) {
        const int bp = m.bus_phase_index(m.ders[d].bus, m.ders[d].phase);
        if (m.ders[d].battery) inj(bp) += cplx(p.p_discharge(d) - p.p_charge(d), p.q_battery(d));
        if (m.ders[d].solar) inj(bp) += p.solar(d);
    }
    return inj;
}

}  // namespace

TEST_CASE("already-consistent dispatch passes through without correction") {
    FeederModel m = load_feeder(fixture("feeder_2bus_der.json"));
    TimeSeries s = constant_series(m, 1, "b1", Phase::a, cplx(0.5, 0.1), 0.12);
    SolverConfig cfg;
    const TightenedBounds nominal = TightenedBounds::nominal(m, 1);
    SocpSolution sol = solve_dispatch(m, s, nominal, cfg);
    REQUIRE(sol.status == ConicStatus::optimal);
    REQUIRE(sol.lifted[0].relaxation_gap < 1e-6);

    FeasibleOperatingPoint fop = recover(m, sol, 0, nominal, cfg);

    CHECK(fop.iterations == 0);
    CHECK(fop.converged);
    CHECK(fop.t == 0);
    CHECK(fop.slack_total == 0.0);
    CHECK(fop.flow_excess == 0.0);

    // battery active powers are carried over bit for bit
    CHECK(fop.point.p_discharge(0) == sol.schedule.p_discharge[0](0));
    CHECK(fop.point.p_charge(0) == sol.schedule.p_charge[0](0));

    // the reactive set-points and solar output are the planned ones
    CHECK(std::abs(fop.point.q_battery(0) - sol.schedule.q_battery[0](0)) < 1e-9);
    CHECK(std::abs(fop.point.solar(0) - sol.schedule.solar[0](0)) < 1e-9);

    // and the plant agrees with the conic stage's predicted physics
    CHECK(std::abs(fop.loss - sol.lifted[0].loss) < 1e-5);
    CHECK(fop.loss >= sol.lifted[0].loss - 1e-6 * std::max(1.0, sol.lifted[0].loss));
}

TEST_CASE("recovered points are exact network solutions") {
    FeederModel m = load_feeder(fixture("feeder_2bus_der.json"));
    TimeSeries s = constant_series(m, 2, "b1", Phase::a, cplx(0.45, 0.12), 0.10);
    SolverConfig cfg;
    const TightenedBounds nominal = TightenedBounds::nominal(m, 2);
    SocpSolution sol = solve_dispatch(m, s, nominal, cfg);
    REQUIRE(sol.status == ConicStatus::optimal);

    const auto points = recover_all(m, sol, nominal, cfg, false);
    REQUIRE(points.size() == 2);
    for (int t = 0; t < 2; ++t) {
        const FeasibleOperatingPoint& fop = points[t];
        CHECK(rank1_gap(m, fop.point.state) < 1e-6);

        // the stored state must be reproducible from the stored injections
        NetworkState redo = solve_loadflow(m, fop.point.inj, m.slack_voltage);
        const double vdiff = (stack_voltages(m, redo) - stack_voltages(m, fop.point.state))
                                 .cwiseAbs()
                                 .maxCoeff();
        CHECK(vdiff < 1e-9);
        CHECK(mismatch_norm(m, fop.point.inj, fop.point.state) < 1e-8);

        // and the injections must be the ones the dispatch fields imply
        const Eigen::VectorXcd implied = implied_injection(m, s, t, fop.point);
        CHECK((implied - fop.point.inj.s_net).cwiseAbs().maxCoeff() < 1e-12);

        // energy bookkeeping follows the plan
        CHECK(std::abs(fop.point.soc(0) - sol.schedule.soc[t](0)) < 1e-7);
    }
}

TEST_CASE("recovered losses never undercut the conic lower bound") {
    FeederModel m = load_feeder(fixture("feeder_13bus.json"));
    TimeSeries s = TimeSeries::zeros(m, 3, 1.0 / 60.0);
    auto set = [&](const std::string& bus, Phase ph, double p, double q) {
        const int bp = m.bus_phase_index(m.bus_index(bus), ph);
        for (int t = 0; t < s.steps; ++t) s.demand[bp][t] = cplx(p, q);
    };
    set("n633", Phase::a, 0.03, 0.01);
    set("n634", Phase::a, 0.05, 0.02);
    set("n634", Phase::b, 0.04, 0.015);
    set("n634", Phase::c, 0.06, 0.02);
    set("n645", Phase::b, 0.06, 0.02);
    set("n646", Phase::b, 0.05, 0.015);
    set("n646", Phase::c, 0.05, 0.015);
    set("n671", Phase::a, 0.12, 0.04);
    set("n671", Phase::b, 0.10, 0.03);
    set("n671", Phase::c, 0.14, 0.045);
    set("n692", Phase::a, 0.06, 0.02);
    set("n675", Phase::a, 0.10, 0.03);
    set("n675", Phase::b, 0.08, 0.025);
    set("n675", Phase::c, 0.12, 0.04);
    set("n611", Phase::c, 0.06, 0.02);
    set("n652", Phase::a, 0.05, 0.015);
    set("n680", Phase::a, 0.04, 0.01);
    for (const auto& der : m.ders) {
        if (!der.solar) continue;
        const int bp = m.bus_phase_index(der.bus, der.phase);
        for (int t = 0; t < s.steps; ++t) s.solar_avail[bp][t] = 0.05;
    }

    SolverConfig cfg;
    const TightenedBounds nominal = TightenedBounds::nominal(m, 3);
    SocpSolution sol = solve_dispatch(m, s, nominal, cfg);
    REQUIRE(sol.status == ConicStatus::optimal);

    const auto points = recover_all(m, sol, nominal, cfg, true);
    for (int t = 0; t < 3; ++t) {
        CHECK(points[t].converged);
        CHECK(points[t].loss >=
              sol.lifted[t].loss - 1e-6 * std::max(1.0, std::abs(sol.lifted[t].loss)));
        CHECK(points[t].slack_total == 0.0);
        CHECK(points[t].flow_excess == 0.0);
        CHECK(rank1_gap(m, points[t].point.state) < 1e-6);
        // planned battery powers survive untouched across all devices
        for (int d = 0; d < static_cast<int>(m.ders.size()); ++d) {
            CHECK(points[t].point.p_discharge(d) == sol.schedule.p_discharge[t](d));
            CHECK(points[t].point.p_charge(d) == sol.schedule.p_charge[t](d));
        }
    }
}

TEST_CASE("sequential and concurrent recovery produce identical results") {
    FeederModel m = load_feeder(fixture("feeder_2bus_der.json"));
    TimeSeries s = TimeSeries::zeros(m, 12, 1.0 / 60.0);
    const int bp = m.bus_phase_index(m.bus_index("b1"), Phase::a);
    for (int t = 0; t < 12; ++t) {
        s.demand[bp][t] = cplx(0.30 + 0.02 * t, 0.05 + 0.005 * t);
        s.solar_avail[bp][t] = 0.02 * (t % 4);
    }
    SolverConfig cfg;
    const TightenedBounds nominal = TightenedBounds::nominal(m, 12);
    SocpSolution sol = solve_dispatch(m, s, nominal, cfg);
    REQUIRE(sol.status == ConicStatus::optimal);

    const auto seq = recover_all(m, sol, nominal, cfg, false);
    const auto par = recover_all(m, sol, nominal, cfg, true);
    REQUIRE(seq.size() == par.size());
    for (std::size_t t = 0; t < seq.size(); ++t) {
        CHECK(seq[t].iterations == par[t].iterations);
        CHECK(seq[t].loss == par[t].loss);
        CHECK(seq[t].objective == par[t].objective);
        CHECK(seq[t].slack_total == par[t].slack_total);
        CHECK((seq[t].point.q_battery.array() == par[t].point.q_battery.array()).all());
        CHECK((seq[t].point.solar.array() == par[t].point.solar.array()).all());
        CHECK((seq[t].point.soc.array() == par[t].point.soc.array()).all());
    }
}

TEST_CASE("unreachable voltage ceiling saturates reactive absorption and reports the residual") {
    FeederModel m = load_feeder(fixture("feeder_2bus_der.json"));
    TimeSeries s = constant_series(m, 1, "b1", Phase::a, cplx(0.01, 0.005), 0.0);
    SolverConfig cfg;
    SocpSolution sol = solve_dispatch(m, s, TightenedBounds::nominal(m, 1), cfg);
    REQUIRE(sol.status == ConicStatus::optimal);

    TightenedBounds tight = TightenedBounds::nominal(m, 1);
    const int bp = m.bus_phase_index(m.bus_index("b1"), Phase::a);
    tight.steps[0].v_upper(bp) = 0.97 * 0.97;

    FeasibleOperatingPoint fop = recover(m, sol, 0, tight, cfg);

    CHECK(fop.converged);
    CHECK(fop.iterations >= 1);
    // the ceiling is unreachable: a residual violation must be reported
    CHECK(fop.slack_hi(bp) > 1e-3);
    CHECK(fop.slack_total == fop.slack_lo.sum() + fop.slack_hi.sum());

    // both inverters should be absorbing as much reactive power as they can
    const BatterySpec& bat = *m.ders[0].battery;
    const double p = fop.point.p_discharge(0) - fop.point.p_charge(0);
    const double qcap = std::sqrt(std::max(0.0, bat.h_max * bat.h_max - p * p));
    CHECK(fop.point.q_battery(0) == doctest::Approx(-qcap).epsilon(1e-2));
    CHECK(fop.point.solar(0).imag() == doctest::Approx(-m.ders[0].solar->g_max).epsilon(1e-2));
    CHECK(std::abs(fop.point.solar(0)) <= m.ders[0].solar->g_max + 1e-6);

    // the penalized objective is consistent with its parts
    CHECK(fop.objective ==
          doctest::Approx(fop.loss + cfg.slack_penalty * (fop.slack_total + fop.flow_excess)));

    // and the point is still an exact network solution
    CHECK(rank1_gap(m, fop.point.state) < 1e-6);
}

TEST_CASE("over-tight flow cap leaves a reported excess instead of failing") {
    FeederModel m = load_feeder(fixture("feeder_2bus_der.json"));
    TimeSeries s = constant_series(m, 1, "b1", Phase::a, cplx(0.5, 0.1), 0.12);
    SolverConfig cfg;
    SocpSolution sol = solve_dispatch(m, s, TightenedBounds::nominal(m, 1), cfg);
    REQUIRE(sol.status == ConicStatus::optimal);

    TightenedBounds tight = TightenedBounds::nominal(m, 1);
    tight.steps[0].flow_upper[0](0) = 0.05;

    FeasibleOperatingPoint fop = recover(m, sol, 0, tight, cfg);
    CHECK(fop.converged);
    // devices cannot shed this much flow, so an excess remains
    CHECK(fop.flow_excess > 1e-3);
    // fixed battery power is still untouched
    CHECK(fop.point.p_discharge(0) == sol.schedule.p_discharge[0](0));
}

TEST_CASE("recovery rejects out-of-range steps and short bound tables") {
    FeederModel m = load_feeder(fixture("feeder_2bus_der.json"));
    TimeSeries s = constant_series(m, 2, "b1", Phase::a, cplx(0.3, 0.05), 0.0);
    SolverConfig cfg;
    const TightenedBounds nominal = TightenedBounds::nominal(m, 2);
    SocpSolution sol = solve_dispatch(m, s, nominal, cfg);

    CHECK_THROWS_AS(recover(m, sol, -1, nominal, cfg), ValidationError);
    CHECK_THROWS_AS(recover(m, sol, 2, nominal, cfg), ValidationError);
    CHECK_THROWS_AS(recover(m, sol, 1, TightenedBounds::nominal(m, 1), cfg), ValidationError);
}
