#include "ufd/recovery.hpp"

#include <cmath>
#include <future>
#include <memory>

#include "ufd/sensitivity.hpp"

namespace ufd {

namespace {

constexpr double kStationaryTol = 1e-6;
// A set-point this close to its exact range edge counts as sitting on it;
// interior-point extraction never lands exactly on a bound.
constexpr double kEdgeTol = 1e-6;

// Layout of the re-optimizable set-points: battery reactive power plus the
// solar inverter's real and reactive output.
struct UMap {
    std::vector<int> qb, ps, qs;  // per DER, -1 when absent
    int n = 0;
};

UMap build_umap(const FeederModel& m) {
    UMap u;
    const int nd = static_cast<int>(m.ders.size());
    u.qb.assign(nd, -1);
    u.ps.assign(nd, -1);
    u.qs.assign(nd, -1);
    for (int d = 0; d < nd; ++d) {
        if (m.ders[d].battery) u.qb[d] = u.n++;
        if (m.ders[d].solar) {
            u.ps[d] = u.n++;
            u.qs[d] = u.n++;
        }
    }
    return u;
}

struct Evaluation {
    NetworkState state;
    InjectionSet inj;
    Eigen::VectorXd w;                 // squared voltage magnitudes per bus-phase
    Eigen::VectorXd viol_lo, viol_hi;  // voltage-bound violations
    double loss = 0.0;
    double slack_total = 0.0;
    double flow_excess = 0.0;
    double objective = 0.0;
};

InjectionSet make_injections(const FeederModel& m, const TimeSeries& series, int t,
                             const Eigen::VectorXd& p_dis, const Eigen::VectorXd& p_chg,
                             const UMap& um, const Eigen::VectorXd& u) {
    InjectionSet inj = InjectionSet::zeros(m);
    for (int bp = 0; bp < m.bus_phase_count(); ++bp) inj.s_net(bp) = -series.demand[bp][t];
    for (int d = 0; d < static_cast<int>(m.ders.size()); ++d) {
        const int bp = m.bus_phase_index(m.ders[d].bus, m.ders[d].phase);
        if (um.qb[d] >= 0) inj.s_net(bp) += cplx(p_dis(d) - p_chg(d), u(um.qb[d]));
        if (um.ps[d] >= 0) inj.s_net(bp) += cplx(u(um.ps[d]), u(um.qs[d]));
    }
    return inj;
}

Evaluation evaluate(const FeederModel& m, const InjectionSet& inj, const StepBounds& sb,
                    const SolverConfig& cfg) {
    Evaluation ev;
    ev.inj = inj;
    ev.state = solve_loadflow(m, inj, m.slack_voltage);
    ev.w = stack_voltages(m, ev.state).cwiseAbs2();
    ev.viol_lo = (sb.v_lower - ev.w).cwiseMax(0.0);
    ev.viol_hi = (ev.w - sb.v_upper).cwiseMax(0.0);
    ev.loss = compute_losses(m, ev.state);
    ev.slack_total = ev.viol_lo.sum() + ev.viol_hi.sum();
    for (std::size_t l = 0; l < m.branches.size(); ++l)
        for (int k = 0; k < m.branches[l].phases.size(); ++k)
            ev.flow_excess += std::max(0.0, std::abs(ev.state.S[l](k, k)) - sb.flow_upper[l](k));
    ev.objective = ev.loss + cfg.slack_penalty * (ev.slack_total + ev.flow_excess);
    return ev;
}

// First-order responses of everything the subproblem needs, one column per
// set-point channel.
struct Derivatives {
    Eigen::MatrixXd dw;      // bus-phase squared voltage rows
    Eigen::MatrixXd dflow;   // per (branch, phase) |diag S| rows
    Eigen::VectorXd dloss;   // gradient of ohmic losses
};

Derivatives differentiate(const FeederModel& m, const Evaluation& ev, const UMap& um) {
    const int n_bp = m.bus_phase_count();
    int n_fl = 0;
    for (const auto& br : m.branches) n_fl += br.phases.size();

    Derivatives der;
    der.dw = Eigen::MatrixXd::Zero(n_bp, um.n);
    der.dflow = Eigen::MatrixXd::Zero(n_fl, um.n);
    der.dloss = Eigen::VectorXd::Zero(um.n);

    const Eigen::VectorXcd v0 = stack_voltages(m, ev.state);
    Linearization lin(m, ev.state);
    const bool analytic = lin.invertible();

    auto dv_for = [&](int bp, cplx dir) -> Eigen::VectorXcd {
        if (analytic) return lin.voltage_response(bp, dir);
        const double h = 1e-6;
        InjectionSet up = ev.inj, dn = ev.inj;
        up.s_net(bp) += h * dir;
        dn.s_net(bp) -= h * dir;
        return (stack_voltages(m, solve_loadflow(m, up, m.slack_voltage)) -
                stack_voltages(m, solve_loadflow(m, dn, m.slack_voltage))) /
               (2.0 * h);
    };

    auto fill_column = [&](int c, int bp, cplx dir) {
        const Eigen::VectorXcd dv = dv_for(bp, dir);
        for (int k = 0; k < n_bp; ++k)
            der.dw(k, c) = 2.0 * (v0(k).real() * dv(k).real() + v0(k).imag() * dv(k).imag());
        int row = 0;
        double dl = 0.0;
        for (std::size_t l = 0; l < m.branches.size(); ++l) {
            const auto& br = m.branches[l];
            const auto plist = br.phases.list();
            const int d = br.phases.size();
            Eigen::VectorXcd dvf(d), dvt(d);
            for (int k = 0; k < d; ++k) {
                dvf(k) = dv(m.bus_phase_index(br.from, plist[k]));
                dvt(k) = dv(m.bus_phase_index(br.to, plist[k]));
            }
            const Eigen::VectorXcd di = br.z.inverse() * (dvf - dvt);
            for (int k = 0; k < d; ++k) {
                dl += 2.0 * br.z(k, k).real() * (std::conj(ev.state.i[l](k)) * di(k)).real();
                const cplx s0 = ev.state.S[l](k, k);
                const cplx ds = dvf(k) * std::conj(ev.state.i[l](k)) +
                                v0(m.bus_phase_index(br.from, plist[k])) * std::conj(di(k));
                const double mag = std::abs(s0);
                der.dflow(row, c) = mag > 1e-9 ? (s0.real() * ds.real() + s0.imag() * ds.imag()) / mag
                                               : std::abs(ds);
                ++row;
            }
        }
        der.dloss(c) = dl;
    };

    for (int d = 0; d < static_cast<int>(m.ders.size()); ++d) {
        const int bp = m.bus_phase_index(m.ders[d].bus, m.ders[d].phase);
        if (um.qb[d] >= 0) fill_column(um.qb[d], bp, cplx(0.0, 1.0));
        if (um.ps[d] >= 0) {
            fill_column(um.ps[d], bp, cplx(1.0, 0.0));
            fill_column(um.qs[d], bp, cplx(0.0, 1.0));
        }
    }
    return der;
}

// Componentwise feasible range of a set-point update, ignoring the trust
// region and the solar apparent-power cone (which couples two components).
struct Box {
    Eigen::VectorXd lo, hi;
};

Box exact_box(const FeederModel& m, const UMap& um, const Eigen::VectorXd& u,
              const Eigen::VectorXd& p_dis, const Eigen::VectorXd& p_chg, const TimeSeries& series,
              int t) {
    Box box;
    box.lo = Eigen::VectorXd::Constant(um.n, -1e30);
    box.hi = Eigen::VectorXd::Constant(um.n, 1e30);
    for (int d = 0; d < static_cast<int>(m.ders.size()); ++d) {
        if (um.qb[d] >= 0) {
            const BatterySpec& bat = *m.ders[d].battery;
            const double p = p_dis(d) - p_chg(d);
            const double qcap = std::sqrt(std::max(0.0, bat.h_max * bat.h_max - p * p));
            box.lo(um.qb[d]) = -qcap - u(um.qb[d]);
            box.hi(um.qb[d]) = qcap - u(um.qb[d]);
        }
        if (um.ps[d] >= 0) {
            const int bp = m.bus_phase_index(m.ders[d].bus, m.ders[d].phase);
            box.lo(um.ps[d]) = -u(um.ps[d]);
            box.hi(um.ps[d]) = series.solar_avail[bp][t] - u(um.ps[d]);
        }
    }
    return box;
}

// True when no feasible first-order move can improve the penalized objective:
// every component either has a negligible gradient, is pinned by its exact
// range, or sits at a range edge with the gradient pointing back inside.
bool stationary(const Derivatives& der, const Box& box, const Evaluation& ev) {
    if (ev.slack_total > 0.0 || ev.flow_excess > 0.0) return false;
    for (int c = 0; c < der.dloss.size(); ++c) {
        const double g = der.dloss(c);
        if (std::abs(g) <= kStationaryTol) continue;
        if (box.hi(c) - box.lo(c) < kEdgeTol) continue;         // pinned
        if (box.hi(c) < kEdgeTol && g < 0) continue;            // at upper edge, wants up
        if (box.lo(c) > -kEdgeTol && g > 0) continue;           // at lower edge, wants down
        return false;
    }
    return true;
}

Eigen::VectorXd solve_subproblem(const FeederModel& m, const Evaluation& ev, const Derivatives& der,
                                 const UMap& um, const Eigen::VectorXd& u, const Box& box,
                                 const StepBounds& sb, const SolverConfig& cfg, double radius,
                                 double rho) {
    ConeProgramBuilder bld;
    const int du0 = bld.add_vars(um.n);
    const int damp = bld.add_vars(1);

    auto du = [&](int c) { return LinExpr::variable(du0 + c); };
    auto row_expr = [&](const Eigen::MatrixXd& mat, int r, double base) {
        LinExpr e(base);
        for (int c = 0; c < um.n; ++c)
            if (mat(r, c) != 0.0) e += LinExpr::variable(du0 + c, mat(r, c));
        return e;
    };

    // predicted loss + damping
    LinExpr obj(0.0);
    for (int c = 0; c < um.n; ++c) obj += LinExpr::variable(du0 + c, der.dloss(c));
    obj += LinExpr::variable(damp, rho);
    bld.add_objective(obj);
    {
        std::vector<LinExpr> blk;
        blk.push_back(LinExpr::variable(damp) + LinExpr(1.0));
        for (int c = 0; c < um.n; ++c) blk.push_back(2.0 * du(c));
        blk.push_back(LinExpr::variable(damp) - LinExpr(1.0));
        bld.add_soc(blk);
    }

    // linearized voltage corridor with penalty slack
    for (int bp = 0; bp < m.bus_phase_count(); ++bp) {
        if (m.bus_phase_at(bp).first == m.slack_bus) continue;
        const int vs = bld.add_vars(2);
        const LinExpr lo = LinExpr::variable(vs), hi = LinExpr::variable(vs + 1);
        bld.add_le_zero(row_expr(der.dw, bp, ev.w(bp)) - LinExpr(sb.v_upper(bp)) - hi);
        bld.add_le_zero(LinExpr(sb.v_lower(bp)) - row_expr(der.dw, bp, ev.w(bp)) - lo);
        bld.add_le_zero(-lo);
        bld.add_le_zero(-hi);
        bld.add_objective(cfg.slack_penalty * (lo + hi));
    }

    // linearized flow caps with penalty slack
    int frow = 0;
    for (std::size_t l = 0; l < m.branches.size(); ++l)
        for (int k = 0; k < m.branches[l].phases.size(); ++k) {
            const int fs = bld.add_vars(1);
            const LinExpr f = LinExpr::variable(fs);
            bld.add_le_zero(row_expr(der.dflow, frow, std::abs(ev.state.S[l](k, k))) -
                            LinExpr(sb.flow_upper[l](k)) - f);
            bld.add_le_zero(-f);
            bld.add_objective(cfg.slack_penalty * f);
            ++frow;
        }

    // exact device ranges, solar cone, and the trust region; a collapsed
    // range becomes an equality so the program keeps a strict interior
    for (int c = 0; c < um.n; ++c) {
        const double hi = std::min(box.hi(c), radius);
        const double lo = std::max(box.lo(c), -radius);
        if (hi - lo < 1e-9) {
            bld.add_eq_zero(du(c) - LinExpr(0.5 * (lo + hi)));
        } else {
            bld.add_le_zero(du(c) - LinExpr(hi));
            bld.add_le_zero(LinExpr(lo) - du(c));
        }
    }
    for (int d = 0; d < static_cast<int>(m.ders.size()); ++d)
        if (um.ps[d] >= 0)
            bld.add_soc({LinExpr(sb.solar_upper(d)), LinExpr(u(um.ps[d])) + du(um.ps[d]),
                         LinExpr(u(um.qs[d])) + du(um.qs[d])});

    ConicSolution sub = bld.solve(cfg.conic);
    if (sub.status != ConicStatus::optimal && sub.status != ConicStatus::max_iterations)
        throw SolverError(std::string("recovery subproblem: ") + to_string(sub.status));
    return sub.x.head(um.n);
}

}  // namespace

FeasibleOperatingPoint recover(const FeederModel& model, const SocpSolution& socp, int t,
                               const TightenedBounds& bounds, const SolverConfig& cfg) {
    cfg.validate();
    if (t < 0 || t >= socp.schedule.steps)
        throw ValidationError("recovery step " + std::to_string(t) + " outside the plan horizon");
    if (static_cast<int>(bounds.steps.size()) <= t)
        throw ValidationError("bounds do not cover recovery step " + std::to_string(t));

    const StepBounds& sb = bounds.steps[t];
    const UMap um = build_umap(model);
    const Eigen::VectorXd& p_dis = socp.schedule.p_discharge[t];
    const Eigen::VectorXd& p_chg = socp.schedule.p_charge[t];

    Eigen::VectorXd u(um.n);
    for (int d = 0; d < static_cast<int>(model.ders.size()); ++d) {
        if (um.qb[d] >= 0) u(um.qb[d]) = socp.schedule.q_battery[t](d);
        if (um.ps[d] >= 0) {
            u(um.ps[d]) = socp.schedule.solar[t](d).real();
            u(um.qs[d]) = socp.schedule.solar[t](d).imag();
        }
    }

    Evaluation best = evaluate(model, make_injections(model, socp.series, t, p_dis, p_chg, um, u), sb, cfg);

    FeasibleOperatingPoint out;
    out.t = t;
    double radius = cfg.trust_region;
    double rho = 0.1;

    if (um.n > 0) {
        for (int it = 0; it < cfg.recovery_max_iter; ++it) {
            const Derivatives der = differentiate(model, best, um);
            const Box box = exact_box(model, um, u, p_dis, p_chg, socp.series, t);
            if (stationary(der, box, best)) {
                out.converged = true;
                break;
            }
            const Eigen::VectorXd du =
                solve_subproblem(model, best, der, um, u, box, sb, cfg, radius, rho);
            const double step = du.size() ? du.cwiseAbs().maxCoeff() : 0.0;
            if (step < cfg.recovery_step_tol) {
                out.converged = true;
                break;
            }
            const Eigen::VectorXd u_cand = u + du;
            Evaluation cand = evaluate(
                model, make_injections(model, socp.series, t, p_dis, p_chg, um, u_cand), sb, cfg);
            if (cand.objective <= best.objective + 1e-12 * std::max(1.0, std::abs(best.objective))) {
                u = u_cand;
                best = std::move(cand);
                ++out.iterations;
                out.final_step = step;
                rho = std::max(1e-3, 0.7 * rho);
                radius = std::min(cfg.trust_region, 1.5 * radius);
                if (step < cfg.recovery_step_tol) {
                    out.converged = true;
                    break;
                }
            } else {
                radius *= 0.5;
                rho *= 4.0;
                if (radius < cfg.recovery_step_tol) {
                    out.converged = true;
                    break;
                }
            }
        }
    } else {
        out.converged = true;
    }

    out.point = OperatingPoint::sized(static_cast<int>(model.ders.size()));
    out.point.state = best.state;
    out.point.inj = best.inj;
    out.point.p_discharge = p_dis;
    out.point.p_charge = p_chg;
    for (int d = 0; d < static_cast<int>(model.ders.size()); ++d) {
        if (um.qb[d] >= 0) out.point.q_battery(d) = u(um.qb[d]);
        if (um.ps[d] >= 0) out.point.solar(d) = cplx(u(um.ps[d]), u(um.qs[d]));
        if (model.ders[d].battery) {
            double b = model.ders[d].battery->b_init;
            for (int k = 0; k <= t; ++k)
                b = soc_update(b, socp.schedule.p_charge[k](d), socp.schedule.p_discharge[k](d),
                               *model.ders[d].battery, socp.series.dt_hours);
            out.point.soc(d) = b;
        }
    }
    out.slack_lo = best.viol_lo;
    out.slack_hi = best.viol_hi;
    out.loss = best.loss;
    out.slack_total = best.slack_total;
    out.flow_excess = best.flow_excess;
    out.objective = best.objective;
    return out;
}

std::vector<FeasibleOperatingPoint> recover_all(const FeederModel& model, const SocpSolution& socp,
                                                const TightenedBounds& bounds, const SolverConfig& cfg,
                                                bool parallel) {
    const int T = socp.schedule.steps;
    std::vector<FeasibleOperatingPoint> out(T);
    auto run_step = [&](int t) {
        try {
            return recover(model, socp, t, bounds, cfg);
        } catch (const std::runtime_error& e) {
            throw SolverError("recovery step " + std::to_string(t) + ": " + e.what());
        }
    };
    if (parallel && T > 1) {
        std::vector<std::future<FeasibleOperatingPoint>> futs;
        futs.reserve(T);
        for (int t = 0; t < T; ++t)
            futs.push_back(std::async(std::launch::async, run_step, t));
        for (int t = 0; t < T; ++t) out[t] = futs[t].get();
    } else {
        for (int t = 0; t < T; ++t) out[t] = run_step(t);
    }
    return out;
}

}  // namespace ufd
