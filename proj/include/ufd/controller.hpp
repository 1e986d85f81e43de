#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ufd/recovery.hpp"
#include "ufd/socp.hpp"
#include "ufd/tighten.hpp"
#include "ufd/uncertainty.hpp"

namespace ufd {

enum class RunMode { deterministic, stochastic };

RunMode parse_mode(const std::string& name);
const char* to_string(RunMode m);

struct RunConfig {
    RunMode mode = RunMode::deterministic;
    int horizon = 12;       // planning window length T, steps
    int steps = 1;          // closed-loop steps executed
    int scenarios = 1;      // Monte-Carlo plant realizations
    std::uint64_t seed = 1;
    RobustConfig robust;
    SolverConfig solver;
    bool parallel_scenarios = true;
    bool parallel_recovery = true;

    void validate() const;  // throws ConfigError on out-of-domain values
};

// Scenario-independent planning trace for one closed-loop step. Set-points
// depend only on forecasts, so a single plan serves every realization.
struct PlanStep {
    int t = -1;                        // absolute closed-loop step index
    OperatingPoint applied;            // first-horizon-step dispatch sent to the plant
    double loss_plan = 0.0;            // recovered loss of the applied step
    double slack_plan = 0.0;           // recovered bound violation of the applied step
    double socp_objective = 0.0;       // final conic objective for the window
    ConicStatus status_first = ConicStatus::numerical_failure;  // forecast-bound pass
    ConicStatus status_final = ConicStatus::numerical_failure;  // applied (possibly robust) pass
    Eigen::VectorXd soc_after;         // stored energy carried to the next window
    std::vector<double> margin_by_lead;  // max voltage margin per horizon position
    TightenedBounds bounds;            // limits the applied pass solved against
    DispatchSchedule plan;             // full-horizon schedule of the applied pass
};

// Plant response of one closed-loop step under one realization.
struct StepLog {
    int t = -1;
    InjectionSet realized;            // net injections the plant actually saw
    NetworkState plant;               // converged plant solution
    Eigen::VectorXcd solar_delivered; // inverter output after availability pass-through
    double loss_plant = 0.0;
};

struct ScenarioLog {
    int scenario = -1;
    std::uint64_t seed = 0;   // derived stream seed for this scenario
    TimeSeries realized;      // forecast with sampled errors, length = executed steps
    std::vector<StepLog> steps;
};

struct RunLog {
    RunConfig cfg;
    std::vector<PlanStep> plan;        // length = executed steps
    std::vector<ScenarioLog> scenarios;
};

// Aggregate quality measures of a run. Totals are averaged over scenarios so
// they are comparable across different scenario counts; the violation rate
// is the fraction of non-slack bus-phase-step voltage samples outside the
// model's original magnitude limits.
struct ViolationStats {
    long samples = 0;
    long violations = 0;
    double violation_rate = 0.0;
    double loss_total = 0.0;        // plant ohmic losses per scenario, summed over steps
    double demand_served = 0.0;     // realized real-power demand per scenario
    double net_demand = 0.0;        // demand served + losses
    double imbalance_avg = 0.0;     // mean max-deviation-from-phase-mean over phase-mean
};

struct RunComparison {
    ViolationStats a, b;
    double net_demand_rmse = 0.0;   // paired over (scenario, step) net-demand samples
};

// Receding-horizon control loop: plan a T-step dispatch from the forecast,
// apply the first step to the plant under each sampled realization, carry
// the battery state forward, and repeat. Stochastic mode inserts the
// two-pass robustification: a forecast-bound plan anchors the sensitivities,
// the bounds are tightened by the uncertainty margins, and the applied plan
// is re-solved against the tightened bounds. The forecast series must cover
// steps + horizon - 1 entries.
RunLog run_closed_loop(const FeederModel& model, const TimeSeries& series, const UncertaintyModel& u,
                       const RunConfig& cfg);

// Per-(scenario, step) counting unit shared by metrics() and the artifact
// writer so aggregate and columnar numbers can never drift apart.
struct StepStats {
    long violations = 0;
    long samples = 0;           // non-slack bus-phase voltage readings
    double imbalance_sum = 0.0; // summed per-bus max deviation / mean ratio
    long imbalance_count = 0;   // buses with at least two phases
    double demand_served = 0.0; // realized real-power demand
    double loss = 0.0;          // plant ohmic loss
    double net = 0.0;           // demand + loss
};

StepStats step_stats(const FeederModel& model, const ScenarioLog& sc, int k);

ViolationStats metrics(const FeederModel& model, const RunLog& log);

// Paired comparison; refuses logs with different step counts, scenario
// counts, or scenario seeds.
RunComparison compare_runs(const FeederModel& model, const RunLog& a, const RunLog& b);

}  // namespace ufd
