#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ufd/feeder.hpp"

namespace ufd {

// Constraint bounds for one horizon step. Voltage bounds act on squared
// magnitudes per bus-phase; flow and solar bounds on apparent power.
struct StepBounds {
    Eigen::VectorXd v_lower, v_upper;         // per bus-phase, squared p.u.
    std::vector<Eigen::VectorXd> flow_upper;  // per branch, per branch phase
    Eigen::VectorXd solar_upper;              // per DER (zero rows for non-solar)

    // margins that produced the bounds, same shapes; kept for reporting
    Eigen::VectorXd margin_v;
    std::vector<Eigen::VectorXd> margin_flow;
    Eigen::VectorXd margin_solar;
};

struct TightenedBounds {
    std::vector<StepBounds> steps;
    bool over_tight = false;  // some lower bound crossed its upper bound

    // Untightened bounds straight from the model limits.
    static TightenedBounds nominal(const FeederModel& model, int horizon);
};

}  // namespace ufd
