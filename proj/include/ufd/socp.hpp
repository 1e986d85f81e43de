#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "ufd/bounds.hpp"
#include "ufd/conic.hpp"
#include "ufd/feeder.hpp"
#include "ufd/loadflow.hpp"

namespace ufd {

// Battery and solar-inverter set-points over the horizon. All vectors are
// per step, indexed by FeederModel::ders; entries for DERs without the
// corresponding device stay zero.
struct DispatchSchedule {
    int steps = 0;
    std::vector<Eigen::VectorXd> p_discharge;  // >= 0, p.u.
    std::vector<Eigen::VectorXd> p_charge;     // >= 0, p.u.
    std::vector<Eigen::VectorXd> q_battery;    // p.u.
    std::vector<Eigen::VectorXcd> solar;       // inverter apparent output
    std::vector<Eigen::VectorXd> soc;          // stored energy AFTER the step, p.u.-h

    static DispatchSchedule sized(int n_der, int steps);
};

// Lifted network variables of one horizon step as returned by the conic
// dispatch stage, plus its share of the objective.
struct LiftedStep {
    std::vector<Eigen::MatrixXcd> W;  // per bus, on the bus's phases
    std::vector<Eigen::MatrixXcd> I;  // per branch
    std::vector<Eigen::MatrixXcd> S;  // per branch, sending end
    Eigen::VectorXd slack_lo;         // active lower-voltage slack per bus-phase
    Eigen::VectorXd slack_hi;         // active upper-voltage slack per bus-phase
    double loss = 0.0;                // sum over branches of diag(R) . diag(I)
    double relaxation_gap = 0.0;      // worst rank-1 defect of the step
};

struct SocpSolution {
    DispatchSchedule schedule;
    std::vector<LiftedStep> lifted;       // per step
    std::vector<InjectionSet> injections; // net bus-phase injections implied by the schedule
    TimeSeries series;                    // horizon window the plan was computed against
    double objective = 0.0;               // losses + slack and charge/discharge penalties
    double loss_total = 0.0;              // loss term alone, summed over steps
    double slack_total = 0.0;
    ConicStatus status = ConicStatus::numerical_failure;
    double gap = 0.0, pres = 0.0, dres = 0.0;
    int iterations = 0;
};

// Knobs shared by the dispatch stage and the per-step feasibility recovery.
struct SolverConfig {
    double scd_penalty = 1e-3;    // weight discouraging simultaneous charge/discharge
    double slack_penalty = 1e3;   // weight on voltage-bound slack activation
    bool enforce_soc_sustainability = false;  // pin end-of-horizon charge to the start
    bool enable_slacks = true;    // without slacks the voltage bounds are hard
    ConicOptions conic;           // tolerance / iteration / time budget

    // recovery-stage line search
    double trust_region = 0.05;   // initial reactive-update radius, p.u.
    double recovery_step_tol = 1e-7;
    int recovery_max_iter = 50;

    void validate() const;  // throws ConfigError on out-of-domain penalties
};

// Assembled multi-period dispatch program in solver standard form, plus the
// index tables needed to read a solution back out. Variables per step:
//   sum over buses of k^2 (Hermitian voltage block, k phases)
// + sum over branches of 3 k^2 (Hermitian current block + full complex flow)
// + 4 per battery (charge, discharge, reactive, stored energy)
// + 2 per solar inverter (real, reactive output)
// + 2 per non-slack bus-phase when slacks are enabled (lower, upper).
class DispatchProgram {
public:
    // Hermitian k x k block packed as k real diagonal entries followed by
    // (re, im) pairs for i < j in lexicographic order; k^2 reals total.
    struct HermBlock {
        int off = 0, k = 0;
    };
    // Full complex k x k block: row-major (re, im) pairs; 2 k^2 reals.
    struct FullBlock {
        int off = 0, k = 0;
    };
    struct StepLayout {
        std::vector<HermBlock> w;    // per bus
        std::vector<HermBlock> i;    // per branch
        std::vector<FullBlock> s;    // per branch
        std::vector<int> batt;       // per DER: first of [P^d, P^c, q^b], -1 if none
        std::vector<int> soc;        // per DER: stored-energy variable, -1 if none
        std::vector<int> solar;      // per DER: first of [p, q], -1 if none
        int slack = -1;              // 2 * n per-bus-phase rows (lo, hi), -1 when disabled
    };

    const FeederModel* model = nullptr;
    TimeSeries series;        // the horizon window the program was built from
    SolverConfig cfg;
    int horizon = 0;
    int vars_per_step = 0;
    std::vector<StepLayout> steps;
    ConeProgramBuilder builder;
};

// Assembles the multi-period conic dispatch program: second-order relaxation
// of the branch-flow physics, nodal balance, device envelopes, stored-energy
// recursion, and the supplied (possibly tightened) operating bounds.
// Throws ValidationError when series/bounds dimensions disagree with the model.
DispatchProgram build_program(const FeederModel& model, const TimeSeries& series,
                              const TightenedBounds& bounds, const SolverConfig& cfg);

// Solves the program with the interior-point method and unpacks the result.
// Throws SolverError when the solver certifies infeasibility or fails
// numerically; iteration/time exhaustion returns the best iterate with its
// status recorded.
SocpSolution solve_program(const DispatchProgram& program);

// Convenience wrapper: build_program + solve_program.
SocpSolution solve_dispatch(const FeederModel& model, const TimeSeries& series,
                            const TightenedBounds& bounds, const SolverConfig& cfg);

// Stored-energy recursion over one step: charging adds eta_c * P^c * dt,
// discharging removes P^d / eta_d * dt.
double soc_update(double b, double p_charge, double p_discharge, const BatterySpec& spec,
                  double dt_hours);

}  // namespace ufd
