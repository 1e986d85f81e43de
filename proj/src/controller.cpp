#include "ufd/controller.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <utility>

namespace ufd {

namespace {

constexpr double kAvailFloor = 1e-9;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t scenario_seed(std::uint64_t base, int index) {
    return splitmix64(base ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(index + 1)));
}

// Rethrows stage exceptions with a location prefix while keeping their type,
// so the CLI's exit-code mapping still sees the original class.
template <typename F>
auto with_context(const std::string& where, F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(where + ": " + e.what());
    } catch (const SolverError& e) {
        throw SolverError(where + ": " + e.what());
    } catch (const PlantError& e) {
        throw PlantError(where + ": " + e.what());
    }
}

// The planned solar command rides through the realized availability with the
// commanded curtailment fraction; the result is kept inside both the
// availability and the inverter's apparent-power envelope.
Eigen::VectorXcd deliver_solar(const FeederModel& m, const OperatingPoint& applied,
                               const TimeSeries& forecast, const TimeSeries& realized, int k) {
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(m.ders.size());
    for (int d = 0; d < static_cast<int>(m.ders.size()); ++d) {
        if (!m.ders[d].solar) continue;
        const int bp = m.bus_phase_index(m.ders[d].bus, m.ders[d].phase);
        const double fc = forecast.solar_avail[bp][k];
        const double re = realized.solar_avail[bp][k];
        const double p_cmd = applied.solar(d).real();
        const double q = applied.solar(d).imag();
        const double c = fc > kAvailFloor ? std::clamp(p_cmd / fc, 0.0, 1.0) : 0.0;
        double p = std::clamp(p_cmd + c * (re - fc), 0.0, std::max(0.0, re));
        const double g = m.ders[d].solar->g_max;
        p = std::min(p, std::sqrt(std::max(0.0, g * g - q * q)));
        out(d) = cplx(p, q);
    }
    return out;
}

InjectionSet realized_injections(const FeederModel& m, const OperatingPoint& applied,
                                 const TimeSeries& realized, const Eigen::VectorXcd& solar, int k) {
    InjectionSet inj = InjectionSet::zeros(m);
    for (int bp = 0; bp < m.bus_phase_count(); ++bp) inj.s_net(bp) = -realized.demand[bp][k];
    for (int d = 0; d < static_cast<int>(m.ders.size()); ++d) {
        const int bp = m.bus_phase_index(m.ders[d].bus, m.ders[d].phase);
        if (m.ders[d].battery)
            inj.s_net(bp) += cplx(applied.p_discharge(d) - applied.p_charge(d), applied.q_battery(d));
        if (m.ders[d].solar) inj.s_net(bp) += solar(d);
    }
    return inj;
}

std::vector<PlanStep> build_plan(const FeederModel& model, const TimeSeries& series,
                                 const UncertaintyModel& u, const RunConfig& cfg) {
    std::vector<PlanStep> plan;
    plan.reserve(cfg.steps);
    FeederModel mk = model;  // working copy whose initial charge tracks the loop state

    for (int k = 0; k < cfg.steps; ++k) {
        const std::string where = "closed-loop step " + std::to_string(k);
        const TimeSeries window = series.window(k, cfg.horizon);
        const TightenedBounds nominal = TightenedBounds::nominal(mk, cfg.horizon);

        PlanStep ps;
        ps.t = k;

        SocpSolution first =
            with_context(where + ", forecast pass", [&] { return solve_dispatch(mk, window, nominal, cfg.solver); });
        ps.status_first = first.status;

        SocpSolution applied_sol;
        if (cfg.mode == RunMode::stochastic) {
            const auto anchor = with_context(where + ", anchor recovery", [&] {
                return recover_all(mk, first, nominal, cfg.solver, cfg.parallel_recovery);
            });
            std::vector<OperatingPoint> traj;
            traj.reserve(anchor.size());
            for (const auto& f : anchor) traj.push_back(f.point);
            ps.bounds = with_context(where + ", tightening",
                                     [&] { return tighten(mk, traj, u, window, k, cfg.robust); });
            applied_sol = with_context(where + ", robust pass",
                                       [&] { return solve_dispatch(mk, window, ps.bounds, cfg.solver); });
        } else {
            ps.bounds = nominal;
            applied_sol = std::move(first);
            ps.status_first = applied_sol.status;
        }
        ps.status_final = applied_sol.status;
        ps.socp_objective = applied_sol.objective;
        ps.plan = applied_sol.schedule;
        ps.margin_by_lead.reserve(cfg.horizon);
        for (const auto& sb : ps.bounds.steps) ps.margin_by_lead.push_back(sb.margin_v.maxCoeff());

        const FeasibleOperatingPoint fop = with_context(
            where + ", recovery", [&] { return recover(mk, applied_sol, 0, ps.bounds, cfg.solver); });
        ps.applied = fop.point;
        ps.loss_plan = fop.loss;
        ps.slack_plan = fop.slack_total;

        // carry the stored energy into the next window's model
        ps.soc_after = fop.point.soc;
        for (int d = 0; d < static_cast<int>(mk.ders.size()); ++d) {
            if (!mk.ders[d].battery) continue;
            auto& bat = *mk.ders[d].battery;
            ps.soc_after(d) = std::clamp(ps.soc_after(d), bat.b_min, bat.b_max);
            bat.b_init = ps.soc_after(d);
        }
        plan.push_back(std::move(ps));
    }
    return plan;
}

ScenarioLog run_scenario(const FeederModel& model, const TimeSeries& forecast, const UncertaintyModel& u,
                         const RunConfig& cfg, const std::vector<PlanStep>& plan, int s) {
    ScenarioLog log;
    log.scenario = s;
    log.seed = scenario_seed(cfg.seed, s);
    Realization real = sample_realization(u, model, forecast, log.seed, 0);
    log.realized = std::move(real.realized);
    log.steps.reserve(cfg.steps);
    for (int k = 0; k < cfg.steps; ++k) {
        StepLog st;
        st.t = k;
        st.solar_delivered = deliver_solar(model, plan[k].applied, forecast, log.realized, k);
        st.realized = realized_injections(model, plan[k].applied, log.realized, st.solar_delivered, k);
        st.plant = with_context("scenario " + std::to_string(s) + ", step " + std::to_string(k),
                                [&] { return solve_loadflow(model, st.realized, model.slack_voltage); });
        st.loss_plant = compute_losses(model, st.plant);
        log.steps.push_back(std::move(st));
    }
    return log;
}

}  // namespace

RunMode parse_mode(const std::string& name) {
    if (name == "deterministic") return RunMode::deterministic;
    if (name == "stochastic") return RunMode::stochastic;
    throw ConfigError("unknown run mode '" + name + "'");
}

const char* to_string(RunMode m) {
    return m == RunMode::deterministic ? "deterministic" : "stochastic";
}

void RunConfig::validate() const {
    if (horizon < 1) throw ConfigError("planning horizon must be at least 1 step");
    if (steps < 1) throw ConfigError("closed-loop step count must be at least 1");
    if (scenarios < 1) throw ConfigError("scenario count must be at least 1");
    solver.validate();
    // robust alphas are range-checked where the safety factor is evaluated
}

RunLog run_closed_loop(const FeederModel& model, const TimeSeries& series, const UncertaintyModel& u,
                       const RunConfig& cfg) {
    cfg.validate();
    if (series.steps < cfg.steps + cfg.horizon - 1)
        throw ValidationError("forecast series has " + std::to_string(series.steps) + " steps; " +
                              std::to_string(cfg.steps + cfg.horizon - 1) +
                              " are needed for the requested loop");

    RunLog log;
    log.cfg = cfg;
    log.plan = build_plan(model, series, u, cfg);

    const TimeSeries executed = series.window(0, cfg.steps);
    log.scenarios.resize(cfg.scenarios);
    if (cfg.parallel_scenarios && cfg.scenarios > 1) {
        std::vector<std::future<ScenarioLog>> futs;
        futs.reserve(cfg.scenarios);
        for (int s = 0; s < cfg.scenarios; ++s)
            futs.push_back(std::async(std::launch::async, [&, s] {
                return run_scenario(model, executed, u, cfg, log.plan, s);
            }));
        for (int s = 0; s < cfg.scenarios; ++s) log.scenarios[s] = futs[s].get();
    } else {
        for (int s = 0; s < cfg.scenarios; ++s)
            log.scenarios[s] = run_scenario(model, executed, u, cfg, log.plan, s);
    }
    return log;
}

StepStats step_stats(const FeederModel& model, const ScenarioLog& sc, int k) {
    StepStats out;
    const StepLog& st = sc.steps[k];
    for (int b = 0; b < static_cast<int>(model.buses.size()); ++b) {
        const Eigen::VectorXd mags = st.plant.V[b].cwiseAbs();
        if (b != model.slack_bus) {
            for (int p = 0; p < mags.size(); ++p) {
                ++out.samples;
                if (mags(p) < model.buses[b].v_min || mags(p) > model.buses[b].v_max) ++out.violations;
            }
        }
        if (mags.size() >= 2) {
            const double mean = mags.mean();
            if (mean > 0.0) {
                out.imbalance_sum += (mags.array() - mean).abs().maxCoeff() / mean;
                ++out.imbalance_count;
            }
        }
    }
    out.loss = st.loss_plant;
    for (int bp = 0; bp < model.bus_phase_count(); ++bp)
        out.demand_served += sc.realized.demand[bp][st.t].real();
    out.net = out.demand_served + out.loss;
    return out;
}

ViolationStats metrics(const FeederModel& model, const RunLog& log) {
    ViolationStats out;
    long imb_samples = 0;
    double imb_sum = 0.0;
    for (const auto& sc : log.scenarios) {
        for (std::size_t k = 0; k < sc.steps.size(); ++k) {
            const StepStats st = step_stats(model, sc, static_cast<int>(k));
            out.samples += st.samples;
            out.violations += st.violations;
            imb_sum += st.imbalance_sum;
            imb_samples += st.imbalance_count;
            out.loss_total += st.loss;
            out.demand_served += st.demand_served;
        }
    }
    const double n_sc = std::max<std::size_t>(log.scenarios.size(), 1);
    out.loss_total /= n_sc;
    out.demand_served /= n_sc;
    out.net_demand = out.demand_served + out.loss_total;
    out.violation_rate = out.samples ? static_cast<double>(out.violations) / out.samples : 0.0;
    out.imbalance_avg = imb_samples ? imb_sum / imb_samples : 0.0;
    return out;
}

RunComparison compare_runs(const FeederModel& model, const RunLog& a, const RunLog& b) {
    if (a.scenarios.size() != b.scenarios.size())
        throw ValidationError("runs have different scenario counts");
    if (a.plan.size() != b.plan.size()) throw ValidationError("runs have different step counts");
    for (std::size_t s = 0; s < a.scenarios.size(); ++s)
        if (a.scenarios[s].seed != b.scenarios[s].seed)
            throw ValidationError("runs use different scenario seeds and cannot be paired");

    RunComparison cmp;
    cmp.a = metrics(model, a);
    cmp.b = metrics(model, b);

    double sq = 0.0;
    long n = 0;
    for (std::size_t s = 0; s < a.scenarios.size(); ++s) {
        for (std::size_t k = 0; k < a.scenarios[s].steps.size(); ++k) {
            const double da = step_stats(model, a.scenarios[s], static_cast<int>(k)).net;
            const double db = step_stats(model, b.scenarios[s], static_cast<int>(k)).net;
            sq += (da - db) * (da - db);
            ++n;
        }
    }
    cmp.net_demand_rmse = n ? std::sqrt(sq / n) : 0.0;
    return cmp;
}

}  // namespace ufd
