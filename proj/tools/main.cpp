// Command-line front end: closed-loop dispatch runs, stored-run comparison,
// input validation, and standalone constraint tightening.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>

#include "ufd/artifacts.hpp"
#include "ufd/errors.hpp"
#include "ufd/feeder.hpp"
#include "ufd/recovery.hpp"

namespace {

struct RunArgs {
    std::string feeder, series, out, config;
    std::string mode, distribution;
    int horizon = 0, steps = 0, scenarios = 0, refresh = 0, format_version = 1;
    std::uint64_t seed = 0;
    double alpha_v = 0.0;
    bool no_parallel = false;
};

// True when the subcommand both defines the option and saw it on the
// command line; tighten-only shares RunArgs but omits some run-only flags.
bool given(const CLI::App& cmd, const std::string& name) {
    const CLI::Option* opt = cmd.get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
}

// Folds --config and per-flag overrides into one settings object.
ufd::RunSettings assemble_settings(const CLI::App& cmd, const RunArgs& a) {
    ufd::RunSettings s;
    if (!a.config.empty()) s = ufd::load_run_settings(a.config);
    if (given(cmd, "--mode")) s.run.mode = ufd::parse_mode(a.mode);
    if (given(cmd, "--horizon")) s.run.horizon = a.horizon;
    if (given(cmd, "--steps")) s.run.steps = a.steps;
    if (given(cmd, "--scenarios")) s.run.scenarios = a.scenarios;
    if (given(cmd, "--seed")) s.run.seed = a.seed;
    if (given(cmd, "--alpha-v")) s.run.robust.alpha_v = a.alpha_v;
    if (given(cmd, "--distribution")) s.run.robust.distribution = ufd::parse_distribution(a.distribution);
    if (given(cmd, "--refresh")) s.uncertainty.refresh_period = a.refresh;
    if (a.no_parallel) {
        s.run.parallel_scenarios = false;
        s.run.parallel_recovery = false;
    }
    if (a.format_version != 1)
        throw ufd::ConfigError("unsupported artifact format version " + std::to_string(a.format_version));
    return s;
}

int cmd_run(const CLI::App& cmd, const RunArgs& a) {
    const ufd::RunSettings s = assemble_settings(cmd, a);
    const ufd::FeederModel model = ufd::load_feeder(a.feeder);
    const ufd::TimeSeries series = ufd::load_series(model, a.series);
    const ufd::UncertaintyModel u = ufd::build_uncertainty(model, s.uncertainty);

    const ufd::RunLog log = ufd::run_closed_loop(model, series, u, s.run);
    ufd::write_run_artifacts(a.out, model, log, {a.format_version});

    const ufd::ViolationStats st = ufd::metrics(model, log);
    std::cout << "run complete: feeder=" << model.name << " mode=" << ufd::to_string(s.run.mode)
              << " steps=" << s.run.steps << " scenarios=" << s.run.scenarios << "\n"
              << "violation_rate=" << st.violation_rate << " net_demand=" << st.net_demand
              << " loss_total=" << st.loss_total << "\n"
              << "artifacts written to " << a.out << "\n";
    return static_cast<int>(ufd::ExitCode::ok);
}

int cmd_compare(const std::string& dir_a, const std::string& dir_b, const std::string& out) {
    const ufd::StoredRun a = ufd::load_run_dir(dir_a);
    const ufd::StoredRun b = ufd::load_run_dir(dir_b);
    const ufd::RunComparison cmp = ufd::compare_stored(a, b);
    const std::string report = ufd::comparison_json(a, b, cmp);
    std::cout << report << "\n";
    if (!out.empty()) {
        std::ofstream f(out);
        if (!f) throw ufd::ParseError("cannot write file: " + out);
        f << report << "\n";
    }
    return static_cast<int>(ufd::ExitCode::ok);
}

int cmd_validate(const std::string& feeder_path, const std::string& series_path) {
    const ufd::FeederModel model = ufd::load_feeder(feeder_path);
    const ufd::TopologyReport topo = ufd::validate_radial(model);
    int depth = 0;
    for (int d : topo.depth) depth = std::max(depth, d);
    std::cout << "feeder " << model.name << ": " << model.buses.size() << " buses, "
              << model.branches.size() << " branches, " << model.ders.size() << " DERs, "
              << model.bus_phase_count() << " bus-phases, feeder depth " << depth << "\n";
    if (!series_path.empty()) {
        const ufd::TimeSeries series = ufd::load_series(model, series_path);
        std::cout << "series: " << series.steps << " steps of " << series.dt_hours << " h\n";
    }
    std::cout << "OK\n";
    return static_cast<int>(ufd::ExitCode::ok);
}

int cmd_tighten_only(const CLI::App& cmd, const RunArgs& a) {
    const ufd::RunSettings s = assemble_settings(cmd, a);
    const ufd::FeederModel model = ufd::load_feeder(a.feeder);
    const ufd::TimeSeries series = ufd::load_series(model, a.series);
    if (series.steps < s.run.horizon)
        throw ufd::ValidationError("series provides " + std::to_string(series.steps) +
                                   " steps but the horizon needs " + std::to_string(s.run.horizon));
    const ufd::TimeSeries window = series.window(0, s.run.horizon);
    const ufd::UncertaintyModel u = ufd::build_uncertainty(model, s.uncertainty);

    const ufd::TightenedBounds nominal = ufd::TightenedBounds::nominal(model, s.run.horizon);
    const ufd::SocpSolution sol = ufd::solve_dispatch(model, window, nominal, s.run.solver);
    const auto anchor = ufd::recover_all(model, sol, nominal, s.run.solver, s.run.parallel_recovery);
    std::vector<ufd::OperatingPoint> trajectory;
    trajectory.reserve(anchor.size());
    for (const auto& fop : anchor) trajectory.push_back(fop.point);

    ufd::PlanStep ps;
    ps.t = 0;
    ps.bounds = ufd::tighten(model, trajectory, u, window, 0, s.run.robust);
    ufd::write_bounds_artifact(a.out, model, {ps}, {a.format_version});
    if (ps.bounds.over_tight)
        std::cerr << "warning: some tightened lower bound crossed its upper bound\n";
    std::cout << "bounds written to " << a.out << "\n";
    return static_cast<int>(ufd::ExitCode::ok);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust dispatch of batteries and inverters on unbalanced radial feeders"};
    app.require_subcommand(1);

    RunArgs ra;
    std::string cmp_a, cmp_b, cmp_out;
    std::string val_feeder, val_series;

    CLI::App* run = app.add_subcommand("run", "Closed-loop dispatch run with artifact output");
    run->add_option("--feeder", ra.feeder, "Feeder model JSON")->required();
    run->add_option("--series", ra.series, "Demand/solar series CSV")->required();
    run->add_option("--out", ra.out, "Output artifact directory")->required();
    run->add_option("--config", ra.config, "Run-settings JSON; flags below override it");
    run->add_option("--mode", ra.mode, "deterministic | stochastic");
    run->add_option("--horizon", ra.horizon, "Planning horizon, steps");
    run->add_option("--steps", ra.steps, "Closed-loop steps to execute");
    run->add_option("--scenarios", ra.scenarios, "Realization count");
    run->add_option("--seed", ra.seed, "Base RNG seed");
    run->add_option("--alpha-v", ra.alpha_v, "Voltage chance-constraint level");
    run->add_option("--distribution", ra.distribution, "gaussian | unimodal | distribution_free");
    run->add_option("--refresh", ra.refresh, "Forecast refresh period, steps");
    run->add_flag("--no-parallel", ra.no_parallel, "Disable scenario/recovery concurrency");
    run->add_option("--format-version", ra.format_version, "Artifact format version (1)");

    CLI::App* compare = app.add_subcommand("compare", "Pairwise comparison of two stored runs");
    compare->add_option("a_dir", cmp_a, "First run directory")->required();
    compare->add_option("b_dir", cmp_b, "Second run directory")->required();
    compare->add_option("--out", cmp_out, "Also write the JSON report here");

    CLI::App* validate = app.add_subcommand("validate", "Check a feeder (and optional series) file");
    validate->add_option("--feeder", val_feeder, "Feeder model JSON")->required();
    validate->add_option("--series", val_series, "Demand/solar series CSV");

    CLI::App* tighten = app.add_subcommand("tighten-only", "Emit tightened bounds for one horizon");
    tighten->add_option("--feeder", ra.feeder, "Feeder model JSON")->required();
    tighten->add_option("--series", ra.series, "Demand/solar series CSV")->required();
    tighten->add_option("--out", ra.out, "Output bounds CSV path")->required();
    tighten->add_option("--config", ra.config, "Run-settings JSON; flags below override it");
    tighten->add_option("--horizon", ra.horizon, "Planning horizon, steps");
    tighten->add_option("--alpha-v", ra.alpha_v, "Voltage chance-constraint level");
    tighten->add_option("--distribution", ra.distribution, "gaussian | unimodal | distribution_free");
    tighten->add_option("--refresh", ra.refresh, "Forecast refresh period, steps");
    tighten->add_option("--format-version", ra.format_version, "Artifact format version (1)");

    try {
        app.parse(argc, argv);
        if (run->parsed()) return cmd_run(*run, ra);
        if (compare->parsed()) return cmd_compare(cmp_a, cmp_b, cmp_out);
        if (validate->parsed()) return cmd_validate(val_feeder, val_series);
        if (tighten->parsed()) return cmd_tighten_only(*tighten, ra);
        return static_cast<int>(ufd::ExitCode::config_error);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ufd::ExitCode::config_error);
    } catch (const ufd::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return static_cast<int>(ufd::ExitCode::config_error);
    } catch (const ufd::ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return static_cast<int>(ufd::ExitCode::data_error);
    } catch (const ufd::ValidationError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return static_cast<int>(ufd::ExitCode::data_error);
    } catch (const ufd::SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return static_cast<int>(ufd::ExitCode::solver_error);
    } catch (const ufd::PlantError& e) {
        std::cerr << "plant error: " << e.what() << "\n";
        return static_cast<int>(ufd::ExitCode::plant_error);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
