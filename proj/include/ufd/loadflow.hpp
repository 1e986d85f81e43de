#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ufd/feeder.hpp"

namespace ufd {

// Net apparent power injected at each bus-phase for one step, in p.u.
// Positive real part = generation, negative = consumption. Indexed by
// FeederModel::bus_phase_index.
struct InjectionSet {
    Eigen::VectorXcd s_net;

    static InjectionSet zeros(const FeederModel& model) {
        InjectionSet inj;
        inj.s_net = Eigen::VectorXcd::Zero(model.bus_phase_count());
        return inj;
    }
};

// Converged operating point of the feeder at one step. Voltages are per
// bus on that bus's phases; currents/flows per branch on the branch's
// phases, oriented parent -> child.
struct NetworkState {
    std::vector<Eigen::VectorXcd> V;  // nodal phasors
    std::vector<Eigen::MatrixXcd> W;  // V V^H
    std::vector<Eigen::VectorXcd> i;  // branch currents
    std::vector<Eigen::MatrixXcd> I;  // i i^H
    std::vector<Eigen::MatrixXcd> S;  // V_from i^H on branch phases
    double mismatch = 0.0;            // final power-balance infinity norm
    int sweeps = 0;
};

struct LoadflowOptions {
    double tol = 1e-10;         // voltage-update convergence threshold
    int max_sweeps = 100;
    double collapse_v = 0.5;    // abort below this magnitude
    double mismatch_tol = 1e-8; // acceptance threshold on power balance
};

// Fixed-point forward/backward sweep on the radial tree with constant-PQ
// injections. Throws PlantError on divergence or voltage collapse.
NetworkState solve_loadflow(const FeederModel& model, const InjectionSet& inj,
                            const Eigen::Vector3cd& slack_voltage, const LoadflowOptions& opts = {});

// Infinity norm of nodal power-balance residual at non-slack buses.
double mismatch_norm(const FeederModel& model, const InjectionSet& inj, const NetworkState& state);

// Ohmic series losses: sum over branches of diag(R) . diag(I).
double compute_losses(const FeederModel& model, const NetworkState& state);

// Losses evaluated as slack import plus total net nodal injection. Equals
// compute_losses when mutual resistances are zero; used as a cross-check.
double energy_balance_loss(const FeederModel& model, const InjectionSet& inj, const NetworkState& state);

// Largest relative rank-1 defect over all 2x2 principal minors of one
// Hermitian PSD matrix: |M_ii M_jj - |M_ij|^2| / (M_ii + M_jj)^2.
double rank1_block_gap(const Eigen::MatrixXcd& M);

// Worst rank-1 defect over all branch lifted blocks [[W_from, S],[S^H, I]].
// Zero (to rounding) iff the state is consistent with some AC phasor point.
double rank1_gap(const FeederModel& model, const NetworkState& state);

}  // namespace ufd
