#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ufd/feeder.hpp"
#include "ufd/sensitivity.hpp"

namespace ufd {

enum class ErrorFamily { uniform, gaussian, triangular };

// Piecewise-linear relative half-width as a function of forecast lead time
// (in steps); clamped at both ends.
struct ErrorCurve {
    std::vector<std::pair<double, double>> points;  // (lead, relative half-width), sorted

    double at(double lead) const;
    bool is_zero() const;
    static ErrorCurve linear(double w0, double w1, double lead1) { return {{{0.0, w0}, {lead1, w1}}}; }
    static ErrorCurve zero() { return {{{0.0, 0.0}}}; }
};

// One scalar forecast-error process: either the availability error of a
// solar DER or the real-power demand error at a bus-phase.
struct UncertainSource {
    enum class Kind { solar, demand };
    Kind kind;
    int der = -1;        // solar kind
    int bus_phase = -1;  // demand kind
    ErrorFamily family = ErrorFamily::uniform;
    ErrorCurve curve;
};

struct UncertaintyModel {
    std::vector<UncertainSource> sources;
    int refresh_period = 30;        // steps between forecast issues
    Eigen::MatrixXd correlation;    // optional; empty means independent

    int size() const { return static_cast<int>(sources.size()); }

    // Default layout: one solar source per inverter-equipped DER and one
    // demand source per non-slack bus-phase. Solar relative half-width grows
    // linearly from 2% at lead 0 to 30% at lead 30; demand uses the same
    // shape scaled by demand_scale.
    static UncertaintyModel standard(const FeederModel& model, ErrorFamily family = ErrorFamily::uniform,
                                     double demand_scale = 0.2);
    // Same source layout with identically zero error curves.
    static UncertaintyModel none(const FeederModel& model);
};

// Lead time of the forecast in hand at absolute step t: forecasts are
// reissued every refresh_period steps, so staleness saw-tooths.
int lead_at(const UncertaintyModel& u, int t_abs);

// Absolute half-widths per source for the injection forecast at series
// index t_series, seen at the given lead.
Eigen::VectorXd half_widths(const UncertaintyModel& u, const FeederModel& model, const TimeSeries& series,
                            int t_series, int lead);

Eigen::MatrixXd covariance_from_half_widths(const UncertaintyModel& u, const Eigen::VectorXd& e);

Eigen::MatrixXd covariance_at(const UncertaintyModel& u, const FeederModel& model, const TimeSeries& series,
                              int t_series, int lead);

// Symmetric PSD square root (eigendecomposition with clipped negatives).
Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& sigma);

struct Realization {
    TimeSeries realized;                 // forecast with sampled errors applied
    std::vector<Eigen::VectorXd> errors; // per step, per source
};

// Draws one trajectory of forecast errors over the whole series. t0_abs
// anchors the refresh saw-tooth; identical seeds give identical output.
Realization sample_realization(const UncertaintyModel& u, const FeederModel& model, const TimeSeries& forecast,
                               std::uint64_t seed, int t0_abs);

// Sensitivity channels matching the source order: demand errors enter the
// net injection with chain -1; solar availability errors pass through the
// inverter with the commanded curtailment fraction p_cmd / availability.
std::vector<InjectionChannel> build_channels(const UncertaintyModel& u, const FeederModel& model,
                                             const TimeSeries& forecast, int t_series,
                                             const Eigen::VectorXd& solar_p_cmd);

}  // namespace ufd
