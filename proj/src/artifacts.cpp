#include "ufd/artifacts.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ufd {

namespace {

using nlohmann::json;

std::string g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::string& path, int format_version) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write file: " + path);
    out << "# format_version " << format_version << "\n";
    return out;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

// Reads a headered CSV written by this module; returns data rows.
std::vector<std::vector<std::string>> read_csv(const std::string& path, int& format_version) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);
    format_version = -1;
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream meta(line.substr(1));
            std::string key;
            meta >> key;
            if (key == "format_version") meta >> format_version;
            continue;
        }
        rows.push_back(split_csv(line));
    }
    return rows;
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

}  // namespace

ErrorFamily parse_family(const std::string& name) {
    if (name == "uniform") return ErrorFamily::uniform;
    if (name == "gaussian") return ErrorFamily::gaussian;
    if (name == "triangular") return ErrorFamily::triangular;
    throw ConfigError("unknown error family '" + name + "'");
}

const char* to_string(ErrorFamily f) {
    switch (f) {
        case ErrorFamily::uniform: return "uniform";
        case ErrorFamily::gaussian: return "gaussian";
        case ErrorFamily::triangular: return "triangular";
    }
    return "unknown";
}

UncertaintyModel build_uncertainty(const FeederModel& model, const UncertaintySettings& s) {
    if (s.zero) {
        UncertaintyModel u = UncertaintyModel::none(model);
        u.refresh_period = s.refresh_period;
        return u;
    }
    UncertaintyModel u = UncertaintyModel::standard(model, s.family, s.demand_scale);
    u.refresh_period = s.refresh_period;
    if (!s.solar_curve.empty()) {
        ErrorCurve solar{s.solar_curve};
        ErrorCurve demand = solar;
        for (auto& [lead, w] : demand.points) w *= s.demand_scale;
        for (auto& src : u.sources)
            src.curve = src.kind == UncertainSource::Kind::solar ? solar : demand;
    }
    return u;
}

RunSettings load_run_settings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }

    RunSettings s;
    try {
        check_keys(j, path,
                   {"mode", "horizon", "steps", "scenarios", "seed", "robust", "solver", "uncertainty",
                    "parallel_scenarios", "parallel_recovery"});
        if (j.contains("mode")) s.run.mode = parse_mode(j["mode"].get<std::string>());
        if (j.contains("horizon")) s.run.horizon = j["horizon"].get<int>();
        if (j.contains("steps")) s.run.steps = j["steps"].get<int>();
        if (j.contains("scenarios")) s.run.scenarios = j["scenarios"].get<int>();
        if (j.contains("seed")) s.run.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("parallel_scenarios")) s.run.parallel_scenarios = j["parallel_scenarios"].get<bool>();
        if (j.contains("parallel_recovery")) s.run.parallel_recovery = j["parallel_recovery"].get<bool>();

        if (j.contains("robust")) {
            const json& r = j["robust"];
            check_keys(r, path + ":robust",
                       {"alpha_v", "alpha_flow", "alpha_solar", "distribution", "tighten_voltage",
                        "tighten_flow", "tighten_solar"});
            if (r.contains("alpha_v")) s.run.robust.alpha_v = r["alpha_v"].get<double>();
            if (r.contains("alpha_flow")) s.run.robust.alpha_flow = r["alpha_flow"].get<double>();
            if (r.contains("alpha_solar")) s.run.robust.alpha_solar = r["alpha_solar"].get<double>();
            if (r.contains("distribution"))
                s.run.robust.distribution = parse_distribution(r["distribution"].get<std::string>());
            if (r.contains("tighten_voltage")) s.run.robust.tighten_voltage = r["tighten_voltage"].get<bool>();
            if (r.contains("tighten_flow")) s.run.robust.tighten_flow = r["tighten_flow"].get<bool>();
            if (r.contains("tighten_solar")) s.run.robust.tighten_solar = r["tighten_solar"].get<bool>();
        }
        if (j.contains("solver")) {
            const json& v = j["solver"];
            check_keys(v, path + ":solver",
                       {"scd_penalty", "slack_penalty", "sustainability", "enable_slacks", "conic_tol",
                        "max_iterations", "time_limit_s", "trust_region", "recovery_step_tol",
                        "recovery_max_iter"});
            if (v.contains("scd_penalty")) s.run.solver.scd_penalty = v["scd_penalty"].get<double>();
            if (v.contains("slack_penalty")) s.run.solver.slack_penalty = v["slack_penalty"].get<double>();
            if (v.contains("sustainability"))
                s.run.solver.enforce_soc_sustainability = v["sustainability"].get<bool>();
            if (v.contains("enable_slacks")) s.run.solver.enable_slacks = v["enable_slacks"].get<bool>();
            if (v.contains("conic_tol")) s.run.solver.conic.tol = v["conic_tol"].get<double>();
            if (v.contains("max_iterations")) s.run.solver.conic.max_iter = v["max_iterations"].get<int>();
            if (v.contains("time_limit_s")) s.run.solver.conic.time_limit_s = v["time_limit_s"].get<double>();
            if (v.contains("trust_region")) s.run.solver.trust_region = v["trust_region"].get<double>();
            if (v.contains("recovery_step_tol"))
                s.run.solver.recovery_step_tol = v["recovery_step_tol"].get<double>();
            if (v.contains("recovery_max_iter"))
                s.run.solver.recovery_max_iter = v["recovery_max_iter"].get<int>();
        }
        if (j.contains("uncertainty")) {
            const json& u = j["uncertainty"];
            check_keys(u, path + ":uncertainty",
                       {"family", "demand_scale", "refresh_period", "zero", "solar_curve"});
            if (u.contains("family")) s.uncertainty.family = parse_family(u["family"].get<std::string>());
            if (u.contains("demand_scale")) s.uncertainty.demand_scale = u["demand_scale"].get<double>();
            if (u.contains("refresh_period")) s.uncertainty.refresh_period = u["refresh_period"].get<int>();
            if (u.contains("zero")) s.uncertainty.zero = u["zero"].get<bool>();
            if (u.contains("solar_curve")) {
                s.uncertainty.solar_curve.clear();
                for (const auto& pt : u["solar_curve"]) {
                    if (!pt.is_array() || pt.size() != 2)
                        throw ConfigError(path + ": solar_curve entries must be [lead, half_width] pairs");
                    s.uncertainty.solar_curve.emplace_back(pt[0].get<double>(), pt[1].get<double>());
                }
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return s;
}

void write_bounds_artifact(const std::string& path, const FeederModel& model,
                           const std::vector<PlanStep>& plan, const ArtifactOptions& opts) {
    std::ofstream out = open_out(path, opts.format_version);
    out << "step,lead,family,element,phase,lower,upper,margin\n";
    for (const auto& ps : plan) {
        for (std::size_t lead = 0; lead < ps.bounds.steps.size(); ++lead) {
            const StepBounds& sb = ps.bounds.steps[lead];
            for (int bp = 0; bp < model.bus_phase_count(); ++bp) {
                const auto [bus, ph] = model.bus_phase_at(bp);
                out << ps.t << "," << lead << ",voltage," << model.buses[bus].id << "," << phase_char(ph)
                    << "," << g17(sb.v_lower(bp)) << "," << g17(sb.v_upper(bp)) << ","
                    << g17(sb.margin_v(bp)) << "\n";
            }
            for (std::size_t l = 0; l < model.branches.size(); ++l) {
                const auto plist = model.branches[l].phases.list();
                for (std::size_t k = 0; k < plist.size(); ++k)
                    out << ps.t << "," << lead << ",flow," << model.branches[l].id << ","
                        << phase_char(plist[k]) << ",0," << g17(sb.flow_upper[l](k)) << ","
                        << g17(sb.margin_flow[l](k)) << "\n";
            }
            for (std::size_t d = 0; d < model.ders.size(); ++d) {
                if (!model.ders[d].solar) continue;
                out << ps.t << "," << lead << ",solar," << model.ders[d].id << ","
                    << phase_char(model.ders[d].phase) << ",0," << g17(sb.solar_upper(d)) << ","
                    << g17(sb.margin_solar(d)) << "\n";
            }
        }
    }
}

void write_run_artifacts(const std::string& dir, const FeederModel& model, const RunLog& log,
                         const ArtifactOptions& opts) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const ViolationStats stats = metrics(model, log);

    bool all_optimal = true;
    bool any_over_tight = false;
    for (const auto& ps : log.plan) {
        if (ps.status_first != ConicStatus::optimal || ps.status_final != ConicStatus::optimal)
            all_optimal = false;
        if (ps.bounds.over_tight) any_over_tight = true;
    }

    {
        json j;
        j["format_version"] = opts.format_version;
        j["feeder"] = model.name;
        j["mode"] = to_string(log.cfg.mode);
        j["horizon"] = log.cfg.horizon;
        j["steps"] = log.cfg.steps;
        j["scenarios"] = log.cfg.scenarios;
        j["seed"] = log.cfg.seed;
        j["alpha_v"] = log.cfg.robust.alpha_v;
        j["distribution"] = to_string(log.cfg.robust.distribution);
        j["all_optimal"] = all_optimal;
        j["any_over_tight"] = any_over_tight;
        j["metrics"] = {{"violation_rate", stats.violation_rate},
                        {"violations", stats.violations},
                        {"samples", stats.samples},
                        {"loss_total", stats.loss_total},
                        {"demand_served", stats.demand_served},
                        {"net_demand", stats.net_demand},
                        {"imbalance_avg", stats.imbalance_avg}};
        std::ofstream out(dir + "/summary.json");
        if (!out) throw ParseError("cannot write file: " + dir + "/summary.json");
        out << j.dump(2) << "\n";
    }

    {
        std::ofstream out = open_out(dir + "/steps.csv", opts.format_version);
        out << "step,loss_plan,slack_plan,objective,status_first,status_final,margin_max\n";
        for (const auto& ps : log.plan) {
            double mmax = 0.0;
            for (double lam : ps.margin_by_lead) mmax = std::max(mmax, lam);
            out << ps.t << "," << g17(ps.loss_plan) << "," << g17(ps.slack_plan) << ","
                << g17(ps.socp_objective) << "," << to_string(ps.status_first) << ","
                << to_string(ps.status_final) << "," << g17(mmax) << "\n";
        }
    }

    {
        std::ofstream out = open_out(dir + "/plan.csv", opts.format_version);
        out << "step,der,p_charge,p_discharge,q_battery,solar_p,solar_q,soc\n";
        for (const auto& ps : log.plan)
            for (std::size_t d = 0; d < model.ders.size(); ++d)
                out << ps.t << "," << model.ders[d].id << "," << g17(ps.applied.p_charge(d)) << ","
                    << g17(ps.applied.p_discharge(d)) << "," << g17(ps.applied.q_battery(d)) << ","
                    << g17(ps.applied.solar(d).real()) << "," << g17(ps.applied.solar(d).imag()) << ","
                    << g17(ps.applied.soc(d)) << "\n";
    }

    write_bounds_artifact(dir + "/bounds.csv", model, log.plan, opts);

    {
        std::ofstream out = open_out(dir + "/scenarios.csv", opts.format_version);
        out << "scenario,seed,step,loss,demand,net,violations,samples,imbalance_sum,imbalance_count\n";
        for (const auto& sc : log.scenarios)
            for (std::size_t k = 0; k < sc.steps.size(); ++k) {
                const StepStats st = step_stats(model, sc, static_cast<int>(k));
                out << sc.scenario << "," << sc.seed << "," << k << "," << g17(st.loss) << ","
                    << g17(st.demand_served) << "," << g17(st.net) << "," << st.violations << ","
                    << st.samples << "," << g17(st.imbalance_sum) << "," << st.imbalance_count << "\n";
            }
    }

    {
        // voltage-magnitude histogram over non-slack bus-phases; samples
        // beyond the range land in the edge bins so the total is preserved
        constexpr double lo = 0.85, hi = 1.15, width = 0.005;
        constexpr int nbins = static_cast<int>((hi - lo) / width + 0.5);
        std::vector<long> counts(nbins, 0);
        for (const auto& sc : log.scenarios)
            for (const auto& st : sc.steps)
                for (int b = 0; b < static_cast<int>(model.buses.size()); ++b) {
                    if (b == model.slack_bus) continue;
                    const Eigen::VectorXd mags = st.plant.V[b].cwiseAbs();
                    for (int p = 0; p < mags.size(); ++p) {
                        int bin = static_cast<int>(std::floor((mags(p) - lo) / width));
                        bin = std::min(std::max(bin, 0), nbins - 1);
                        ++counts[bin];
                    }
                }
        std::ofstream out = open_out(dir + "/voltages_hist.csv", opts.format_version);
        out << "bin_lo,bin_hi,count\n";
        for (int i = 0; i < nbins; ++i)
            out << g17(lo + i * width) << "," << g17(lo + (i + 1) * width) << "," << counts[i] << "\n";
    }

    {
        std::ofstream out = open_out(dir + "/netdemand.csv", opts.format_version);
        out << "step,demand_mean,loss_mean,net_mean\n";
        const double n_sc = std::max<std::size_t>(log.scenarios.size(), 1);
        for (int k = 0; k < log.cfg.steps; ++k) {
            double demand = 0.0, loss = 0.0;
            for (const auto& sc : log.scenarios) {
                const StepStats st = step_stats(model, sc, k);
                demand += st.demand_served;
                loss += st.loss;
            }
            out << k << "," << g17(demand / n_sc) << "," << g17(loss / n_sc) << ","
                << g17((demand + loss) / n_sc) << "\n";
        }
    }
}

StoredRun load_run_dir(const std::string& dir) {
    StoredRun run;
    {
        std::ifstream in(dir + "/summary.json");
        if (!in) throw ParseError("cannot open file: " + dir + "/summary.json");
        json j;
        try {
            in >> j;
            run.format_version = j.at("format_version").get<int>();
            run.feeder = j.at("feeder").get<std::string>();
            run.mode = j.at("mode").get<std::string>();
            run.horizon = j.at("horizon").get<int>();
            run.steps = j.at("steps").get<int>();
            run.scenarios = j.at("scenarios").get<int>();
            run.seed = j.at("seed").get<std::uint64_t>();
        } catch (const json::exception& e) {
            throw ParseError(dir + "/summary.json: " + e.what());
        }
    }
    int fv = -1;
    const auto rows = read_csv(dir + "/scenarios.csv", fv);
    if (fv != run.format_version)
        throw ParseError(dir + "/scenarios.csv: format_version differs from summary.json");
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != 10) throw ParseError(dir + "/scenarios.csv: row " + std::to_string(r) + " malformed");
        StoredScenarioStep st;
        try {
            st.scenario = std::stoi(row[0]);
            st.seed = std::stoull(row[1]);
            st.step = std::stoi(row[2]);
            st.loss = std::stod(row[3]);
            st.demand = std::stod(row[4]);
            st.net = std::stod(row[5]);
            st.violations = std::stol(row[6]);
            st.samples = std::stol(row[7]);
            st.imbalance_sum = std::stod(row[8]);
            st.imbalance_count = std::stol(row[9]);
        } catch (const std::exception&) {
            throw ParseError(dir + "/scenarios.csv: row " + std::to_string(r) + " malformed");
        }
        run.rows.push_back(st);
    }
    if (static_cast<int>(run.rows.size()) != run.scenarios * run.steps)
        throw ParseError(dir + ": scenarios.csv row count does not match summary.json shape");
    return run;
}

ViolationStats stats_of(const StoredRun& run) {
    ViolationStats out;
    double imb_sum = 0.0;
    long imb_count = 0;
    for (const auto& st : run.rows) {
        out.samples += st.samples;
        out.violations += st.violations;
        out.loss_total += st.loss;
        out.demand_served += st.demand;
        imb_sum += st.imbalance_sum;
        imb_count += st.imbalance_count;
    }
    const double n_sc = std::max(run.scenarios, 1);
    out.loss_total /= n_sc;
    out.demand_served /= n_sc;
    out.net_demand = out.demand_served + out.loss_total;
    out.violation_rate = out.samples ? static_cast<double>(out.violations) / out.samples : 0.0;
    out.imbalance_avg = imb_count ? imb_sum / imb_count : 0.0;
    return out;
}

RunComparison compare_stored(const StoredRun& a, const StoredRun& b) {
    if (a.feeder != b.feeder) throw ValidationError("runs use different feeders and cannot be paired");
    if (a.steps != b.steps || a.scenarios != b.scenarios)
        throw ValidationError("runs have different shapes and cannot be paired");
    if (a.rows.size() != b.rows.size()) throw ValidationError("runs have different row counts");
    for (std::size_t r = 0; r < a.rows.size(); ++r) {
        if (a.rows[r].scenario != b.rows[r].scenario || a.rows[r].step != b.rows[r].step)
            throw ValidationError("runs list scenario steps in different orders");
        if (a.rows[r].seed != b.rows[r].seed)
            throw ValidationError("runs use different scenario seeds and cannot be paired");
    }
    RunComparison cmp;
    cmp.a = stats_of(a);
    cmp.b = stats_of(b);
    double sq = 0.0;
    for (std::size_t r = 0; r < a.rows.size(); ++r) {
        const double d = a.rows[r].net - b.rows[r].net;
        sq += d * d;
    }
    cmp.net_demand_rmse = a.rows.empty() ? 0.0 : std::sqrt(sq / a.rows.size());
    return cmp;
}

std::string comparison_json(const StoredRun& a, const StoredRun& b, const RunComparison& cmp) {
    auto stats_json = [](const StoredRun& run, const ViolationStats& st) {
        return json{{"mode", run.mode},
                    {"violation_rate", st.violation_rate},
                    {"violations", st.violations},
                    {"samples", st.samples},
                    {"loss_total", st.loss_total},
                    {"demand_served", st.demand_served},
                    {"net_demand", st.net_demand},
                    {"imbalance_avg", st.imbalance_avg}};
    };
    json j;
    j["a"] = stats_json(a, cmp.a);
    j["b"] = stats_json(b, cmp.b);
    j["delta"] = {{"violation_rate", cmp.b.violation_rate - cmp.a.violation_rate},
                  {"loss_total", cmp.b.loss_total - cmp.a.loss_total},
                  {"net_demand", cmp.b.net_demand - cmp.a.net_demand},
                  {"imbalance_avg", cmp.b.imbalance_avg - cmp.a.imbalance_avg},
                  {"net_demand_rmse", cmp.net_demand_rmse}};
    return j.dump(2);
}

}  // namespace ufd
