#include "ufd/socp.hpp"

#include <cmath>
#include <sstream>

namespace ufd {

namespace {

// Complex affine expression: a pair of real expressions over solver variables.
struct CExpr {
    LinExpr re, im;
};

CExpr cconst(cplx v) { return {LinExpr(v.real()), LinExpr(v.imag())}; }

CExpr operator+(const CExpr& a, const CExpr& b) { return {a.re + b.re, a.im + b.im}; }
CExpr operator-(const CExpr& a, const CExpr& b) { return {a.re - b.re, a.im - b.im}; }

CExpr cmul(cplx k, const CExpr& e) {
    return {k.real() * e.re - k.imag() * e.im, k.real() * e.im + k.imag() * e.re};
}

CExpr cconj(const CExpr& e) { return {e.re, -1.0 * e.im}; }

using CMat = std::vector<std::vector<CExpr>>;

CMat cmat(int rows, int cols) { return CMat(rows, std::vector<CExpr>(cols)); }

// Offset of the (re, im) pair (i, j), i < j, inside a packed Hermitian block.
int pair_off(int k, int i, int j) {
    const int p = i * (2 * k - i - 1) / 2 + (j - i - 1);
    return k + 2 * p;
}

CExpr herm_entry(const DispatchProgram::HermBlock& b, int i, int j) {
    if (i == j) return {LinExpr::variable(b.off + i), LinExpr(0.0)};
    if (i < j) {
        const int o = b.off + pair_off(b.k, i, j);
        return {LinExpr::variable(o), LinExpr::variable(o + 1)};
    }
    const int o = b.off + pair_off(b.k, j, i);
    return {LinExpr::variable(o), LinExpr::variable(o + 1, -1.0)};
}

CExpr full_entry(const DispatchProgram::FullBlock& b, int i, int j) {
    const int o = b.off + 2 * (i * b.k + j);
    return {LinExpr::variable(o), LinExpr::variable(o + 1)};
}

CMat herm_mat(const DispatchProgram::HermBlock& b, const std::vector<int>& pos) {
    const int k = static_cast<int>(pos.size());
    CMat m = cmat(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) m[i][j] = herm_entry(b, pos[i], pos[j]);
    return m;
}

CMat full_mat(const DispatchProgram::FullBlock& b) {
    CMat m = cmat(b.k, b.k);
    for (int i = 0; i < b.k; ++i)
        for (int j = 0; j < b.k; ++j) m[i][j] = full_entry(b, i, j);
    return m;
}

CMat lmul(const Eigen::MatrixXcd& a, const CMat& e) {
    const int r = static_cast<int>(a.rows()), k = static_cast<int>(e[0].size());
    CMat out = cmat(r, k);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < k; ++j) {
            CExpr acc = cconst(0.0);
            for (int v = 0; v < static_cast<int>(e.size()); ++v) acc = acc + cmul(a(i, v), e[v][j]);
            out[i][j] = acc;
        }
    return out;
}

CMat rmul(const CMat& e, const Eigen::MatrixXcd& a) {
    const int r = static_cast<int>(e.size()), c = static_cast<int>(a.cols());
    CMat out = cmat(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) {
            CExpr acc = cconst(0.0);
            for (int v = 0; v < static_cast<int>(e[i].size()); ++v) acc = acc + cmul(a(v, j), e[i][v]);
            out[i][j] = acc;
        }
    return out;
}

CMat cadjoint(const CMat& e) {
    const int r = static_cast<int>(e.size()), c = static_cast<int>(e[0].size());
    CMat out = cmat(c, r);
    for (int i = 0; i < c; ++i)
        for (int j = 0; j < r; ++j) out[i][j] = cconj(e[j][i]);
    return out;
}

CMat msub(const CMat& a, const CMat& b) {
    CMat out = a;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j) out[i][j] = a[i][j] - b[i][j];
    return out;
}

CMat madd(const CMat& a, const CMat& b) {
    CMat out = a;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j) out[i][j] = a[i][j] + b[i][j];
    return out;
}

Eigen::MatrixXcd unpack_herm(const Eigen::VectorXd& x, const DispatchProgram::HermBlock& b) {
    Eigen::MatrixXcd m(b.k, b.k);
    for (int i = 0; i < b.k; ++i) {
        m(i, i) = x(b.off + i);
        for (int j = i + 1; j < b.k; ++j) {
            const int o = b.off + pair_off(b.k, i, j);
            m(i, j) = cplx(x(o), x(o + 1));
            m(j, i) = std::conj(m(i, j));
        }
    }
    return m;
}

Eigen::MatrixXcd unpack_full(const Eigen::VectorXd& x, const DispatchProgram::FullBlock& b) {
    Eigen::MatrixXcd m(b.k, b.k);
    for (int i = 0; i < b.k; ++i)
        for (int j = 0; j < b.k; ++j) {
            const int o = b.off + 2 * (i * b.k + j);
            m(i, j) = cplx(x(o), x(o + 1));
        }
    return m;
}

void check_bounds_shape(const FeederModel& model, const TightenedBounds& bounds, int horizon) {
    if (static_cast<int>(bounds.steps.size()) < horizon)
        throw ValidationError("bounds cover " + std::to_string(bounds.steps.size()) +
                              " steps but the horizon needs " + std::to_string(horizon));
    for (int t = 0; t < horizon; ++t) {
        const StepBounds& sb = bounds.steps[t];
        if (sb.v_lower.size() != model.bus_phase_count() || sb.v_upper.size() != model.bus_phase_count())
            throw ValidationError("voltage bound rows do not match the model's bus-phase count");
        if (sb.flow_upper.size() != model.branches.size())
            throw ValidationError("flow bound rows do not match the model's branch count");
        if (sb.solar_upper.size() != static_cast<int>(model.ders.size()))
            throw ValidationError("solar bound rows do not match the model's DER count");
    }
}

// Summarizes which tightened caps crossed into infeasible territory; used to
// make infeasibility reports actionable.
std::string crossing_report(const FeederModel& model, const DispatchProgram& prog,
                            const TightenedBounds& bounds) {
    int v_cross = 0, flow_cross = 0, solar_cross = 0;
    for (int t = 0; t < prog.horizon; ++t) {
        const StepBounds& sb = bounds.steps[t];
        for (int k = 0; k < sb.v_lower.size(); ++k)
            if (sb.v_lower(k) > sb.v_upper(k)) ++v_cross;
        for (const auto& f : sb.flow_upper)
            for (int k = 0; k < f.size(); ++k)
                if (f(k) < 0) ++flow_cross;
        for (std::size_t d = 0; d < model.ders.size(); ++d)
            if (model.ders[d].solar && sb.solar_upper(static_cast<int>(d)) < 0) ++solar_cross;
    }
    std::ostringstream os;
    if (v_cross || flow_cross || solar_cross) {
        os << " (tightened bounds crossed on " << v_cross << " voltage, " << flow_cross << " flow, "
           << solar_cross << " solar rows)";
    }
    return os.str();
}

}  // namespace

DispatchSchedule DispatchSchedule::sized(int n_der, int steps) {
    DispatchSchedule s;
    s.steps = steps;
    s.p_discharge.assign(steps, Eigen::VectorXd::Zero(n_der));
    s.p_charge.assign(steps, Eigen::VectorXd::Zero(n_der));
    s.q_battery.assign(steps, Eigen::VectorXd::Zero(n_der));
    s.solar.assign(steps, Eigen::VectorXcd::Zero(n_der));
    s.soc.assign(steps, Eigen::VectorXd::Zero(n_der));
    return s;
}

void SolverConfig::validate() const {
    if (scd_penalty < 0) throw ConfigError("charge/discharge penalty must be nonnegative");
    if (slack_penalty < 0) throw ConfigError("slack penalty must be nonnegative");
    if (trust_region <= 0) throw ConfigError("trust region radius must be positive");
    if (recovery_max_iter < 1) throw ConfigError("recovery iteration budget must be at least 1");
}

double soc_update(double b, double p_charge, double p_discharge, const BatterySpec& spec,
                  double dt_hours) {
    return b + spec.eta_c * p_charge * dt_hours - p_discharge / spec.eta_d * dt_hours;
}

DispatchProgram build_program(const FeederModel& model, const TimeSeries& series,
                              const TightenedBounds& bounds, const SolverConfig& cfg) {
    cfg.validate();
    const int T = series.steps;
    if (T < 1) throw ValidationError("dispatch horizon must contain at least one step");
    if (static_cast<int>(series.demand.size()) != model.bus_phase_count())
        throw ValidationError("series rows do not match the model's bus-phase count");
    check_bounds_shape(model, bounds, T);

    DispatchProgram prog;
    prog.model = &model;
    prog.series = series;
    prog.cfg = cfg;
    prog.horizon = T;

    const int n_bus = static_cast<int>(model.buses.size());
    const int n_br = static_cast<int>(model.branches.size());
    const int n_der = static_cast<int>(model.ders.size());
    const int n_bp = model.bus_phase_count();
    const int slack_k = model.buses[model.slack_bus].phases.size();
    const int n_bp_ns = n_bp - slack_k;

    // DERs grouped by the bus-phase they sit on, for nodal balance rows.
    std::vector<std::vector<int>> ders_at(n_bp);
    for (int d = 0; d < n_der; ++d)
        ders_at[model.bus_phase_index(model.ders[d].bus, model.ders[d].phase)].push_back(d);

    // Non-slack bus-phases in index order; slack voltages are boundary data.
    std::vector<int> ns_bp;
    for (int k = 0; k < n_bp; ++k)
        if (model.bus_phase_at(k).first != model.slack_bus) ns_bp.push_back(k);

    auto& bld = prog.builder;

    // ---- variables -------------------------------------------------------
    for (int t = 0; t < T; ++t) {
        DispatchProgram::StepLayout lay;
        for (int nb = 0; nb < n_bus; ++nb) {
            const int k = model.buses[nb].phases.size();
            lay.w.push_back({bld.add_vars(k * k), k});
        }
        for (int l = 0; l < n_br; ++l) {
            const int k = model.branches[l].phases.size();
            lay.i.push_back({bld.add_vars(k * k), k});
            lay.s.push_back({bld.add_vars(2 * k * k), k});
        }
        lay.batt.assign(n_der, -1);
        lay.soc.assign(n_der, -1);
        lay.solar.assign(n_der, -1);
        for (int d = 0; d < n_der; ++d) {
            if (model.ders[d].battery) {
                lay.batt[d] = bld.add_vars(3);  // P^d, P^c, q^b
                lay.soc[d] = bld.add_vars(1);
            }
            if (model.ders[d].solar) lay.solar[d] = bld.add_vars(2);  // p, q
        }
        if (cfg.enable_slacks) lay.slack = bld.add_vars(2 * n_bp_ns);
        prog.steps.push_back(lay);
    }
    prog.vars_per_step = bld.num_vars() / T;

    // ---- constraints and objective, step by step --------------------------
    for (int t = 0; t < T; ++t) {
        const auto& lay = prog.steps[t];
        const StepBounds& sb = bounds.steps[t];

        // Substation voltage block is boundary data: pin it entrywise.
        {
            const auto& b = lay.w[model.slack_bus];
            const auto phases = model.buses[model.slack_bus].phases.list();
            for (int i = 0; i < b.k; ++i) {
                const cplx vi = model.slack_voltage_at(phases[i]);
                bld.add_eq_zero(LinExpr::variable(b.off + i) - LinExpr(std::norm(vi)));
                for (int j = i + 1; j < b.k; ++j) {
                    const cplx wij = vi * std::conj(model.slack_voltage_at(phases[j]));
                    const int o = b.off + pair_off(b.k, i, j);
                    bld.add_eq_zero(LinExpr::variable(o) - LinExpr(wij.real()));
                    bld.add_eq_zero(LinExpr::variable(o + 1) - LinExpr(wij.imag()));
                }
            }
        }

        for (int l = 0; l < n_br; ++l) {
            const BranchSpec& br = model.branches[l];
            const int k = br.phases.size();
            std::vector<int> pos;
            for (Phase p : br.phases.list()) pos.push_back(model.buses[br.from].phases.index_of(p));
            std::vector<int> self(k);
            for (int i = 0; i < k; ++i) self[i] = i;

            const CMat wf = herm_mat(lay.w[br.from], pos);
            const CMat wt = herm_mat(lay.w[br.to], self);
            const CMat sm = full_mat(lay.s[l]);
            const CMat im = herm_mat(lay.i[l], self);

            // Voltage propagation along the branch: the receiving-end block
            // equals the sending block minus the flow-impedance cross terms
            // plus the ohmic drop term.
            const CMat szh = rmul(sm, br.z.adjoint());
            const CMat ziz = lmul(br.z, rmul(im, br.z.adjoint()));
            const CMat drop = msub(madd(szh, cadjoint(szh)), ziz);
            for (int i = 0; i < k; ++i)
                for (int j = i; j < k; ++j) {
                    const CExpr r = wt[i][j] - wf[i][j] + drop[i][j];
                    bld.add_eq_zero(r.re);
                    if (i < j) bld.add_eq_zero(r.im);
                }

            // Nodal balance at the receiving bus: power delivered by this
            // branch, minus losses and downstream flows, covers the net
            // demand and DER injections on each phase.
            const CMat zi = lmul(br.z, im);
            const auto phase_list = br.phases.list();
            for (int u = 0; u < k; ++u) {
                const int bp = model.bus_phase_index(br.to, phase_list[u]);
                CExpr r = sm[u][u] - zi[u][u] + cconst(-series.demand[bp][t]);
                for (int child : model.children[br.to]) {
                    const BranchSpec& cb = model.branches[child];
                    if (!cb.phases.contains(phase_list[u])) continue;
                    const int v = cb.phases.index_of(phase_list[u]);
                    r = r - full_entry(lay.s[child], v, v);
                }
                for (int d : ders_at[bp]) {
                    if (lay.batt[d] >= 0) {
                        r.re += LinExpr::variable(lay.batt[d]) - LinExpr::variable(lay.batt[d] + 1);
                        r.im += LinExpr::variable(lay.batt[d] + 2);
                    }
                    if (lay.solar[d] >= 0) {
                        r.re += LinExpr::variable(lay.solar[d]);
                        r.im += LinExpr::variable(lay.solar[d] + 1);
                    }
                }
                bld.add_eq_zero(r.re);
                bld.add_eq_zero(r.im);
            }

            // Second-order relaxation blocks and flow caps.
            for (int i = 0; i < k; ++i)
                for (int j = i + 1; j < k; ++j) {
                    const CExpr off = im[i][j];
                    const LinExpr di = LinExpr::variable(lay.i[l].off + i);
                    const LinExpr dj = LinExpr::variable(lay.i[l].off + j);
                    bld.add_soc({di + dj, 2.0 * off.re, 2.0 * off.im, di - dj});
                }
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j) {
                    const LinExpr wii = LinExpr::variable(lay.w[br.from].off + pos[i]);
                    const LinExpr ijj = LinExpr::variable(lay.i[l].off + j);
                    const CExpr sij = sm[i][j];
                    bld.add_soc({wii + ijj, 2.0 * sij.re, 2.0 * sij.im, wii - ijj});
                }
            for (int u = 0; u < k; ++u) {
                const CExpr suu = sm[u][u];
                bld.add_soc({LinExpr(sb.flow_upper[l](u)), suu.re, suu.im});
                bld.add_le_zero(-LinExpr::variable(lay.i[l].off + u));
            }

            // Objective: ohmic loss on this branch.
            for (int u = 0; u < k; ++u)
                bld.add_objective(LinExpr::variable(lay.i[l].off + u, br.z(u, u).real()));
        }

        // Voltage-block pair cones away from the substation (its block is
        // constant and satisfies them identically).
        for (int nb = 0; nb < n_bus; ++nb) {
            const auto& b = lay.w[nb];
            for (int i = 0; i < b.k; ++i) bld.add_le_zero(-LinExpr::variable(b.off + i));
            if (nb == model.slack_bus) continue;
            for (int i = 0; i < b.k; ++i)
                for (int j = i + 1; j < b.k; ++j) {
                    const CExpr off = herm_entry(b, i, j);
                    const LinExpr di = LinExpr::variable(b.off + i);
                    const LinExpr dj = LinExpr::variable(b.off + j);
                    bld.add_soc({di + dj, 2.0 * off.re, 2.0 * off.im, di - dj});
                }
        }

        // Voltage magnitude bounds with optional feasibility slack.
        for (int idx = 0; idx < n_bp_ns; ++idx) {
            const int bp = ns_bp[idx];
            const auto [nb, ph] = model.bus_phase_at(bp);
            const LinExpr wii = LinExpr::variable(lay.w[nb].off + model.buses[nb].phases.index_of(ph));
            if (cfg.enable_slacks) {
                const LinExpr lo = LinExpr::variable(lay.slack + 2 * idx);
                const LinExpr hi = LinExpr::variable(lay.slack + 2 * idx + 1);
                bld.add_le_zero(wii - hi - LinExpr(sb.v_upper(bp)));
                bld.add_le_zero(LinExpr(sb.v_lower(bp)) - wii - lo);
                bld.add_le_zero(-lo);
                bld.add_le_zero(-hi);
                bld.add_objective(cfg.slack_penalty * (lo + hi));
            } else {
                bld.add_le_zero(wii - LinExpr(sb.v_upper(bp)));
                bld.add_le_zero(LinExpr(sb.v_lower(bp)) - wii);
            }
        }

        // Device envelopes.
        for (int d = 0; d < n_der; ++d) {
            const DerSpec& der = model.ders[d];
            const int bp = model.bus_phase_index(der.bus, der.phase);
            if (lay.batt[d] >= 0) {
                const BatterySpec& bat = *der.battery;
                const LinExpr pd = LinExpr::variable(lay.batt[d]);
                const LinExpr pc = LinExpr::variable(lay.batt[d] + 1);
                const LinExpr qb = LinExpr::variable(lay.batt[d] + 2);
                bld.add_le_zero(-pd);
                bld.add_le_zero(pd - LinExpr(bat.p_max));
                bld.add_le_zero(-pc);
                bld.add_le_zero(pc - LinExpr(bat.p_max));
                bld.add_soc({LinExpr(bat.h_max), pd - pc, qb});

                const LinExpr b_now = LinExpr::variable(lay.soc[d]);
                const LinExpr b_prev = t == 0 ? LinExpr(bat.b_init)
                                              : LinExpr::variable(prog.steps[t - 1].soc[d]);
                bld.add_eq_zero(b_now - b_prev - series.dt_hours * bat.eta_c * pc +
                                (series.dt_hours / bat.eta_d) * pd);
                bld.add_le_zero(LinExpr(bat.b_min) - b_now);
                bld.add_le_zero(b_now - LinExpr(bat.b_max));
                if (cfg.enforce_soc_sustainability && t == T - 1)
                    bld.add_eq_zero(b_now - LinExpr(bat.b_init));

                bld.add_objective(cfg.scd_penalty * (1.0 / bat.eta_d - bat.eta_c) * pd);
            }
            if (lay.solar[d] >= 0) {
                const LinExpr ps = LinExpr::variable(lay.solar[d]);
                const LinExpr qs = LinExpr::variable(lay.solar[d] + 1);
                bld.add_soc({LinExpr(sb.solar_upper(d)), ps, qs});
                bld.add_le_zero(-ps);
                bld.add_le_zero(ps - LinExpr(series.solar_avail[bp][t]));
            }
        }
    }

    return prog;
}

SocpSolution solve_program(const DispatchProgram& program) {
    const FeederModel& model = *program.model;
    const int T = program.horizon;
    const int n_der = static_cast<int>(model.ders.size());

    const ConicSolution res = program.builder.solve(program.cfg.conic);
    if (res.status == ConicStatus::primal_infeasible || res.status == ConicStatus::dual_infeasible ||
        res.status == ConicStatus::numerical_failure)
        throw SolverError(std::string("dispatch stage: ") + to_string(res.status));

    SocpSolution sol;
    sol.status = res.status;
    sol.gap = res.gap;
    sol.pres = res.pres;
    sol.dres = res.dres;
    sol.iterations = res.iterations;
    sol.objective = res.obj;
    sol.series = program.series;
    sol.schedule = DispatchSchedule::sized(n_der, T);

    const Eigen::VectorXd& x = res.x;
    for (int t = 0; t < T; ++t) {
        const auto& lay = program.steps[t];
        LiftedStep step;
        for (std::size_t nb = 0; nb < model.buses.size(); ++nb)
            step.W.push_back(unpack_herm(x, lay.w[nb]));
        double loss = 0.0;
        for (std::size_t l = 0; l < model.branches.size(); ++l) {
            step.I.push_back(unpack_herm(x, lay.i[l]));
            step.S.push_back(unpack_full(x, lay.s[l]));
            loss += (model.branches[l].z.real().diagonal().array() *
                     step.I.back().real().diagonal().array())
                        .sum();
        }
        step.loss = loss;
        sol.loss_total += loss;

        step.slack_lo = Eigen::VectorXd::Zero(model.bus_phase_count());
        step.slack_hi = Eigen::VectorXd::Zero(model.bus_phase_count());
        if (lay.slack >= 0) {
            int idx = 0;
            for (int bp = 0; bp < model.bus_phase_count(); ++bp) {
                if (model.bus_phase_at(bp).first == model.slack_bus) continue;
                step.slack_lo(bp) = x(lay.slack + 2 * idx);
                step.slack_hi(bp) = x(lay.slack + 2 * idx + 1);
                ++idx;
            }
            sol.slack_total += step.slack_lo.sum() + step.slack_hi.sum();
        }

        NetworkState lifted_state;
        lifted_state.W = step.W;
        lifted_state.I = step.I;
        lifted_state.S = step.S;
        step.relaxation_gap = rank1_gap(model, lifted_state);

        InjectionSet inj = InjectionSet::zeros(model);
        for (int bp = 0; bp < model.bus_phase_count(); ++bp) inj.s_net(bp) = -program.series.demand[bp][t];
        for (int d = 0; d < n_der; ++d) {
            const int bp = model.bus_phase_index(model.ders[d].bus, model.ders[d].phase);
            if (lay.batt[d] >= 0) {
                sol.schedule.p_discharge[t](d) = x(lay.batt[d]);
                sol.schedule.p_charge[t](d) = x(lay.batt[d] + 1);
                sol.schedule.q_battery[t](d) = x(lay.batt[d] + 2);
                sol.schedule.soc[t](d) = x(lay.soc[d]);
                inj.s_net(bp) += cplx(x(lay.batt[d]) - x(lay.batt[d] + 1), x(lay.batt[d] + 2));
            }
            if (lay.solar[d] >= 0) {
                sol.schedule.solar[t](d) = cplx(x(lay.solar[d]), x(lay.solar[d] + 1));
                inj.s_net(bp) += sol.schedule.solar[t](d);
            }
        }
        sol.injections.push_back(std::move(inj));
        sol.lifted.push_back(std::move(step));
    }
    return sol;
}

SocpSolution solve_dispatch(const FeederModel& model, const TimeSeries& series,
                            const TightenedBounds& bounds, const SolverConfig& cfg) {
    DispatchProgram prog = build_program(model, series, bounds, cfg);
    try {
        return solve_program(prog);
    } catch (const SolverError& e) {
        throw SolverError(std::string(e.what()) + crossing_report(model, prog, bounds));
    }
}

}  // namespace ufd
