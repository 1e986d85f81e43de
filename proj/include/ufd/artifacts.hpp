#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ufd/controller.hpp"

namespace ufd {

// Parameters of the forecast-error model as they appear in run-config files;
// build_uncertainty turns them into an UncertaintyModel for a given feeder.
struct UncertaintySettings {
    ErrorFamily family = ErrorFamily::uniform;
    double demand_scale = 0.2;                          // demand curve = solar curve scaled by this
    int refresh_period = 30;                            // steps between forecast issues
    std::vector<std::pair<double, double>> solar_curve; // (lead, relative half-width); empty = default
    bool zero = false;                                  // identically zero errors
};

ErrorFamily parse_family(const std::string& name);
const char* to_string(ErrorFamily f);

UncertaintyModel build_uncertainty(const FeederModel& model, const UncertaintySettings& s);

// Everything a `run` invocation needs beyond the feeder and series paths.
struct RunSettings {
    RunConfig run;
    UncertaintySettings uncertainty;
};

// JSON run-config file; every field is optional and falls back to the
// defaults above. Unknown keys are rejected to catch typos.
RunSettings load_run_settings(const std::string& path);

// Columnar artifacts of one closed-loop run, reproducible byte-for-byte for
// a fixed seed and config: summary.json, steps.csv, plan.csv, bounds.csv,
// scenarios.csv, voltages_hist.csv, netdemand.csv.
struct ArtifactOptions {
    int format_version = 1;
};

void write_run_artifacts(const std::string& dir, const FeederModel& model, const RunLog& log,
                         const ArtifactOptions& opts = {});

// Just the bound-trajectory file, for the tighten-only command.
void write_bounds_artifact(const std::string& path, const FeederModel& model,
                           const std::vector<PlanStep>& plan, const ArtifactOptions& opts = {});

// Minimal reload of a run directory: enough to recompute aggregate stats and
// pair two runs row-by-row.
struct StoredScenarioStep {
    int scenario = 0;
    std::uint64_t seed = 0;
    int step = 0;
    double loss = 0.0;
    double demand = 0.0;
    double net = 0.0;
    long violations = 0;
    long samples = 0;
    double imbalance_sum = 0.0;
    long imbalance_count = 0;
};

struct StoredRun {
    int format_version = 0;
    std::string feeder;
    std::string mode;
    int horizon = 0;
    int steps = 0;
    int scenarios = 0;
    std::uint64_t seed = 0;
    std::vector<StoredScenarioStep> rows;
};

StoredRun load_run_dir(const std::string& dir);

ViolationStats stats_of(const StoredRun& run);

// Paired comparison of two stored runs; throws ValidationError when they do
// not share feeder, shape, and scenario seeds.
RunComparison compare_stored(const StoredRun& a, const StoredRun& b);

// JSON comparison report (deterministic key order).
std::string comparison_json(const StoredRun& a, const StoredRun& b, const RunComparison& cmp);

}  // namespace ufd
