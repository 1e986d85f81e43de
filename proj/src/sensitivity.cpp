#include "ufd/sensitivity.hpp"

#include <cmath>

namespace ufd {

namespace {

constexpr double kMagnitudeFloor = 1e-9;

// Bus-phase admittance matrix assembled from the branch impedance blocks.
Eigen::MatrixXcd assemble_ybus(const FeederModel& m) {
    const int n = m.bus_phase_count();
    Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& br : m.branches) {
        const Eigen::MatrixXcd yl = br.z.inverse();
        auto phl = br.phases.list();
        const int d = static_cast<int>(phl.size());
        std::vector<int> fi(d), ti(d);
        for (int k = 0; k < d; ++k) {
            fi[k] = m.bus_phase_index(br.from, phl[k]);
            ti[k] = m.bus_phase_index(br.to, phl[k]);
        }
        for (int a = 0; a < d; ++a)
            for (int bcol = 0; bcol < d; ++bcol) {
                Y(fi[a], fi[bcol]) += yl(a, bcol);
                Y(ti[a], ti[bcol]) += yl(a, bcol);
                Y(fi[a], ti[bcol]) -= yl(a, bcol);
                Y(ti[a], fi[bcol]) -= yl(a, bcol);
            }
    }
    return Y;
}

// Branch quantities needed to chain voltage responses into |diag S| rows.
struct BranchPoint {
    std::vector<int> from_rows, to_rows;  // global bus-phase indices
    Eigen::MatrixXcd zinv;
};

BranchPoint branch_point(const FeederModel& m, int l) {
    const auto& br = m.branches[l];
    BranchPoint bp;
    bp.zinv = br.z.inverse();
    for (Phase p : br.phases.list()) {
        bp.from_rows.push_back(m.bus_phase_index(br.from, p));
        bp.to_rows.push_back(m.bus_phase_index(br.to, p));
    }
    return bp;
}

}  // namespace

Eigen::VectorXcd stack_voltages(const FeederModel& m, const NetworkState& st) {
    Eigen::VectorXcd v(m.bus_phase_count());
    for (int b = 0; b < static_cast<int>(m.buses.size()); ++b)
        for (int k = 0; k < st.V[b].size(); ++k) v(m.bus_phase_offset(b) + k) = st.V[b](k);
    return v;
}

Linearization::Linearization(const FeederModel& m, const NetworkState& st) : model_(m) {
    const int n = m.bus_phase_count();
    Eigen::MatrixXcd Y = assemble_ybus(m);
    Eigen::VectorXcd v = stack_voltages(m, st);
    for (int k = 0; k < n; ++k)
        if (m.bus_phase_at(k).first != m.slack_bus) u_rows_.push_back(k);
    const int nu = static_cast<int>(u_rows_.size());
    Eigen::VectorXcd i_inj = Y * v;

    // d(diag(v) conj(Yv)) = A dv + B conj(dv)
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(nu, nu);
    Eigen::MatrixXcd B(nu, nu);
    for (int r = 0; r < nu; ++r) {
        A(r, r) = std::conj(i_inj(u_rows_[r]));
        for (int c = 0; c < nu; ++c) B(r, c) = v(u_rows_[r]) * std::conj(Y(u_rows_[r], u_rows_[c]));
    }
    Eigen::MatrixXd J(2 * nu, 2 * nu);
    J.topLeftCorner(nu, nu) = (A + B).real();
    J.topRightCorner(nu, nu) = -(A - B).imag();
    J.bottomLeftCorner(nu, nu) = (A + B).imag();
    J.bottomRightCorner(nu, nu) = (A - B).real();
    lu_.compute(J);
    global_to_u_.assign(n, -1);
    for (int r = 0; r < nu; ++r) global_to_u_[u_rows_[r]] = r;
}

Eigen::VectorXcd Linearization::voltage_response(int bus_phase, cplx direction) const {
    const int nu = static_cast<int>(u_rows_.size());
    Eigen::VectorXcd dv = Eigen::VectorXcd::Zero(model_.bus_phase_count());
    const int r = global_to_u_[bus_phase];
    if (r < 0) return dv;  // slack voltage is held fixed
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * nu);
    rhs(r) = direction.real();
    rhs(nu + r) = direction.imag();
    Eigen::VectorXd d = lu_.solve(rhs);
    for (int k = 0; k < nu; ++k) dv(u_rows_[k]) = cplx(d(k), d(nu + k));
    return dv;
}

QuantityRegistry QuantityRegistry::standard(const FeederModel& model, bool voltage, bool flow, bool solar) {
    QuantityRegistry reg;
    if (voltage)
        for (int b = 0; b < static_cast<int>(model.buses.size()); ++b)
            for (int k = 0; k < model.buses[b].phases.size(); ++k)
                reg.rows.push_back({QuantityFamily::voltage_sq, b, k});
    if (flow)
        for (int l = 0; l < static_cast<int>(model.branches.size()); ++l)
            for (int k = 0; k < model.branches[l].phases.size(); ++k)
                reg.rows.push_back({QuantityFamily::branch_flow, l, k});
    if (solar)
        for (int d = 0; d < static_cast<int>(model.ders.size()); ++d)
            if (model.ders[d].solar) reg.rows.push_back({QuantityFamily::solar_output, d, 0});
    return reg;
}

Eigen::VectorXd evaluate_quantities(const FeederModel& model, const NetworkState& state,
                                    const QuantityRegistry& reg, const Eigen::VectorXcd& solar_output) {
    Eigen::VectorXd out(reg.size());
    for (int r = 0; r < reg.size(); ++r) {
        const auto& row = reg.rows[r];
        switch (row.family) {
            case QuantityFamily::voltage_sq:
                out(r) = std::norm(state.V[row.element](row.phase_local));
                break;
            case QuantityFamily::branch_flow:
                out(r) = std::abs(state.S[row.element](row.phase_local, row.phase_local));
                break;
            case QuantityFamily::solar_output:
                out(r) = std::abs(solar_output(row.element));
                break;
        }
    }
    return out;
}

Eigen::MatrixXd compute_sensitivities(const FeederModel& model, const NetworkState& state,
                                      const InjectionSet& inj, const QuantityRegistry& reg,
                                      const std::vector<InjectionChannel>& channels,
                                      const Eigen::VectorXcd& solar_output) {
    const int nr = reg.size();
    const int nc = static_cast<int>(channels.size());
    Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(nr, nc);

    Linearization lin(model, state);
    const bool analytic = lin.invertible();

    std::vector<BranchPoint> bps;
    bps.reserve(model.branches.size());
    for (int l = 0; l < static_cast<int>(model.branches.size()); ++l) bps.push_back(branch_point(model, l));
    const Eigen::VectorXcd v0 = stack_voltages(model, state);

    for (int c = 0; c < nc; ++c) {
        const auto& ch = channels[c];
        Eigen::VectorXcd dv;
        if (analytic) {
            dv = ch.chain * lin.voltage_response(ch.bus_phase);
        } else {
            // Finite-difference fallback around the plant load flow.
            const double step = 1e-5;
            InjectionSet up = inj, dn = inj;
            up.s_net(ch.bus_phase) += step;
            dn.s_net(ch.bus_phase) -= step;
            NetworkState su = solve_loadflow(model, up, model.slack_voltage);
            NetworkState sd = solve_loadflow(model, dn, model.slack_voltage);
            dv = ch.chain * (stack_voltages(model, su) - stack_voltages(model, sd)) / (2.0 * step);
        }

        for (int r = 0; r < nr; ++r) {
            const auto& row = reg.rows[r];
            switch (row.family) {
                case QuantityFamily::voltage_sq: {
                    const int g = model.bus_phase_offset(row.element) + row.phase_local;
                    gamma(r, c) = 2.0 * (v0(g).real() * dv(g).real() + v0(g).imag() * dv(g).imag());
                    break;
                }
                case QuantityFamily::branch_flow: {
                    const auto& bp = bps[row.element];
                    const int d = static_cast<int>(bp.from_rows.size());
                    Eigen::VectorXcd dvf(d), dvt(d);
                    for (int k = 0; k < d; ++k) {
                        dvf(k) = dv(bp.from_rows[k]);
                        dvt(k) = dv(bp.to_rows[k]);
                    }
                    const Eigen::VectorXcd di = bp.zinv * (dvf - dvt);
                    const int k = row.phase_local;
                    const cplx s0 = state.S[row.element](k, k);
                    const cplx ds =
                        dvf(k) * std::conj(state.i[row.element](k)) + v0(bp.from_rows[k]) * std::conj(di(k));
                    const double mag = std::abs(s0);
                    gamma(r, c) = mag > kMagnitudeFloor
                                      ? (s0.real() * ds.real() + s0.imag() * ds.imag()) / mag
                                      : std::abs(ds);
                    break;
                }
                case QuantityFamily::solar_output: {
                    if (ch.solar_der != row.element) break;
                    const cplx s0 = solar_output(row.element);
                    const double mag = std::abs(s0);
                    gamma(r, c) = mag > kMagnitudeFloor ? s0.real() * ch.chain / mag : std::abs(ch.chain);
                    break;
                }
            }
        }
    }
    return gamma;
}

}  // namespace ufd
