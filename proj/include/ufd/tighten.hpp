#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ufd/bounds.hpp"
#include "ufd/operating_point.hpp"
#include "ufd/uncertainty.hpp"

namespace ufd {

enum class SafetyDistribution { gaussian, chebyshev, unimodal };

SafetyDistribution parse_distribution(const std::string& name);
const char* to_string(SafetyDistribution d);

// Quantile-style safety factor f^{-1}(1-alpha) for the chosen distribution
// assumption: exact normal quantile, the one-sided concentration bound
// sqrt((1-a)/a), or the closed-form unimodal approximation
// ((1-a)/(e a))^{1/1.95}. alpha must lie in (0, 0.5).
double safety_factor(SafetyDistribution d, double alpha);

struct RobustConfig {
    double alpha_v = 0.10;
    double alpha_flow = 0.10;
    double alpha_solar = 0.10;
    SafetyDistribution distribution = SafetyDistribution::unimodal;
    // Which constraint families get tightened; voltage-only by default.
    bool tighten_voltage = true;
    bool tighten_flow = false;
    bool tighten_solar = false;
};

// lambda = factor * || gamma_row * sigma_sqrt ||_2
double uncertainty_margin(const Eigen::RowVectorXd& gamma_row, const Eigen::MatrixXd& sigma_sqrt, double factor);

// Shrinks the nominal limits by the uncertainty margins evaluated around the
// given anchor trajectory: per step, V' in [Vmin^2 + l, Vmax^2 - l], flows
// below Smax - l, solar below Gmax - l. forecast is the horizon window whose
// first step sits at absolute step t0_abs (anchors the refresh saw-tooth).
TightenedBounds tighten(const FeederModel& model, const std::vector<OperatingPoint>& trajectory,
                        const UncertaintyModel& u, const TimeSeries& forecast, int t0_abs,
                        const RobustConfig& cfg);

}  // namespace ufd
