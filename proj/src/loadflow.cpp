#include "ufd/loadflow.hpp"

#include <cmath>

namespace ufd {

namespace {

// Positions of the branch's phases inside the parent bus's phase list.
std::vector<int> positions_in(const PhaseSet& super, const PhaseSet& sub) {
    std::vector<int> pos;
    pos.reserve(sub.size());
    for (Phase p : sub.list()) pos.push_back(super.index_of(p));
    return pos;
}

Eigen::VectorXcd restrict_slack(const Eigen::Vector3cd& slack, const PhaseSet& phases) {
    Eigen::VectorXcd v(phases.size());
    int k = 0;
    for (Phase p : phases.list()) v(k++) = slack(static_cast<int>(p));
    return v;
}

// Net current drawn from the network at each bus (per bus-phase), for
// constant-PQ behavior: conj(-s_net / V).
Eigen::VectorXcd bus_draw_current(const FeederModel& model, const InjectionSet& inj,
                                  const std::vector<Eigen::VectorXcd>& V, int bus) {
    const int d = model.buses[bus].phases.size();
    Eigen::VectorXcd out(d);
    for (int k = 0; k < d; ++k) {
        const cplx s = inj.s_net(model.bus_phase_offset(bus) + k);
        out(k) = std::conj(-s / V[bus](k));
    }
    return out;
}

}  // namespace

NetworkState solve_loadflow(const FeederModel& model, const InjectionSet& inj,
                            const Eigen::Vector3cd& slack_voltage, const LoadflowOptions& opts) {
    const int nb = static_cast<int>(model.buses.size());
    const int nl = static_cast<int>(model.branches.size());
    if (inj.s_net.size() != model.bus_phase_count()) throw PlantError("injection vector size mismatch");

    NetworkState st;
    st.V.resize(nb);
    st.W.resize(nb);
    st.i.assign(nl, {});
    st.I.resize(nl);
    st.S.resize(nl);

    for (int b = 0; b < nb; ++b) st.V[b] = restrict_slack(slack_voltage, model.buses[b].phases);

    // Buses ordered deepest first for the current aggregation sweep.
    std::vector<int> by_depth(nb);
    for (int b = 0; b < nb; ++b) by_depth[b] = b;
    std::sort(by_depth.begin(), by_depth.end(),
              [&](int a, int b) { return model.depth[a] > model.depth[b]; });

    double delta = std::numeric_limits<double>::infinity();
    int sweep = 0;
    for (; sweep < opts.max_sweeps && delta > opts.tol; ++sweep) {
        // Backward: aggregate branch currents from the leaves toward the root.
        for (int bus : by_depth) {
            if (bus == model.slack_bus) continue;
            const int l = model.parent_branch[bus];
            Eigen::VectorXcd cur = bus_draw_current(model, inj, st.V, bus);
            for (int c : model.children[bus]) {
                const auto pos = positions_in(model.buses[bus].phases, model.branches[c].phases);
                for (std::size_t k = 0; k < pos.size(); ++k) cur(pos[k]) += st.i[c](k);
            }
            st.i[l] = cur;
        }

        // Forward: propagate voltage drops from the root toward the leaves.
        delta = 0.0;
        for (int idx = nb - 1; idx >= 0; --idx) {
            const int bus = by_depth[idx];
            if (bus == model.slack_bus) continue;
            const int l = model.parent_branch[bus];
            const auto& br = model.branches[l];
            const auto pos = positions_in(model.buses[br.from].phases, br.phases);
            Eigen::VectorXcd v_from(pos.size());
            for (std::size_t k = 0; k < pos.size(); ++k) v_from(k) = st.V[br.from](pos[k]);
            Eigen::VectorXcd v_new = v_from - br.z * st.i[l];
            delta = std::max(delta, (v_new - st.V[bus]).cwiseAbs().maxCoeff());
            st.V[bus] = v_new;
            if (st.V[bus].cwiseAbs().minCoeff() < opts.collapse_v)
                throw PlantError("voltage collapse at bus " + model.buses[bus].id + " (|V| < " +
                                 std::to_string(opts.collapse_v) + ")");
        }
    }
    st.sweeps = sweep;
    if (delta > opts.tol)
        throw PlantError("load flow did not converge in " + std::to_string(opts.max_sweeps) +
                         " sweeps; last voltage update " + std::to_string(delta));

    for (int b = 0; b < nb; ++b) st.W[b] = st.V[b] * st.V[b].adjoint();
    for (int l = 0; l < nl; ++l) {
        const auto& br = model.branches[l];
        if (st.i[l].size() == 0) st.i[l] = Eigen::VectorXcd::Zero(br.phases.size());
        const auto pos = positions_in(model.buses[br.from].phases, br.phases);
        Eigen::VectorXcd v_from(pos.size());
        for (std::size_t k = 0; k < pos.size(); ++k) v_from(k) = st.V[br.from](pos[k]);
        st.I[l] = st.i[l] * st.i[l].adjoint();
        st.S[l] = v_from * st.i[l].adjoint();
    }

    st.mismatch = mismatch_norm(model, inj, st);
    if (st.mismatch >= opts.mismatch_tol)
        throw PlantError("load flow converged with power mismatch " + std::to_string(st.mismatch) +
                         " above tolerance");
    return st;
}

double mismatch_norm(const FeederModel& model, const InjectionSet& inj, const NetworkState& state) {
    double worst = 0.0;
    for (int bus = 0; bus < static_cast<int>(model.buses.size()); ++bus) {
        if (bus == model.slack_bus) continue;
        const int d = model.buses[bus].phases.size();
        Eigen::VectorXcd net_in = state.i[model.parent_branch[bus]];
        for (int c : model.children[bus]) {
            const auto pos = positions_in(model.buses[bus].phases, model.branches[c].phases);
            for (std::size_t k = 0; k < pos.size(); ++k) net_in(pos[k]) -= state.i[c](k);
        }
        for (int k = 0; k < d; ++k) {
            const cplx delivered = state.V[bus](k) * std::conj(net_in(k));
            const cplx s = inj.s_net(model.bus_phase_offset(bus) + k);
            worst = std::max(worst, std::abs(delivered + s));
        }
    }
    return worst;
}

double compute_losses(const FeederModel& model, const NetworkState& state) {
    double loss = 0.0;
    for (std::size_t l = 0; l < model.branches.size(); ++l) {
        const Eigen::MatrixXd r = model.branches[l].r();
        for (int k = 0; k < r.rows(); ++k) loss += r(k, k) * state.I[l](k, k).real();
    }
    return loss;
}

double energy_balance_loss(const FeederModel& model, const InjectionSet& inj, const NetworkState& state) {
    double slack_import = 0.0;
    for (int c : model.children[model.slack_bus]) slack_import += state.S[c].trace().real();
    return slack_import + inj.s_net.real().sum();
}

double rank1_block_gap(const Eigen::MatrixXcd& M) {
    double gap = 0.0;
    for (int i = 0; i < M.rows(); ++i)
        for (int j = i + 1; j < M.cols(); ++j) {
            const double a = M(i, i).real();
            const double d = M(j, j).real();
            const double det = a * d - std::norm(M(i, j));
            const double tr = a + d;
            if (tr * tr > 1e-30) gap = std::max(gap, std::abs(det) / (tr * tr));
        }
    return gap;
}

double rank1_gap(const FeederModel& model, const NetworkState& state) {
    double gap = 0.0;
    for (std::size_t l = 0; l < model.branches.size(); ++l) {
        const auto& br = model.branches[l];
        const int d = br.phases.size();
        std::vector<int> pos;
        for (Phase p : br.phases.list()) pos.push_back(model.buses[br.from].phases.index_of(p));
        Eigen::MatrixXcd M(2 * d, 2 * d);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                M(a, b) = state.W[br.from](pos[a], pos[b]);
                M(a, d + b) = state.S[l](a, b);
                M(d + a, b) = std::conj(state.S[l](b, a));
                M(d + a, d + b) = state.I[l](a, b);
            }
        gap = std::max(gap, rank1_block_gap(M));
    }
    return gap;
}

}  // namespace ufd
