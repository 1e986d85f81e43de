#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ufd/bounds.hpp"
#include "ufd/operating_point.hpp"
#include "ufd/socp.hpp"

namespace ufd {

// AC-exact operating point for one horizon step, produced by the recovery
// stage: battery active powers are frozen at the dispatch-stage values while
// reactive set-points and solar output are re-optimized against the plant
// physics. Slack entries report by how much a voltage bound had to yield.
struct FeasibleOperatingPoint {
    int t = -1;
    OperatingPoint point;
    Eigen::VectorXd slack_lo, slack_hi;  // voltage-bound violations per bus-phase
    double loss = 0.0;                   // ohmic losses at the recovered state
    double slack_total = 0.0;            // sum of voltage slack entries
    double flow_excess = 0.0;            // flow-cap overshoot absorbed, normally 0
    double objective = 0.0;              // loss + slack penalty terms
    int iterations = 0;                  // accepted set-point updates
    double final_step = 0.0;             // infinity norm of the last accepted update
    bool converged = false;
};

// Recovers step t of the dispatch plan: trust-region sequence of plant load
// flows and linearized corrections over the reactive/solar set-points. The
// returned state is a converged plant load flow, so it is AC-exact by
// construction. Voltage (and flow) bounds are penalty-slacked, so the stage
// reports violations instead of hard-failing when bounds are unreachable.
FeasibleOperatingPoint recover(const FeederModel& model, const SocpSolution& socp, int t,
                               const TightenedBounds& bounds, const SolverConfig& cfg);

// Recovers every step of the plan. Steps are independent; with parallel set
// they run concurrently and the result is identical to the sequential order.
std::vector<FeasibleOperatingPoint> recover_all(const FeederModel& model, const SocpSolution& socp,
                                                const TightenedBounds& bounds, const SolverConfig& cfg,
                                                bool parallel = true);

}  // namespace ufd
