#include "ufd/tighten.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "ufd/sensitivity.hpp"

namespace ufd {

TightenedBounds TightenedBounds::nominal(const FeederModel& model, int horizon) {
    StepBounds sb;
    const int nbp = model.bus_phase_count();
    sb.v_lower.resize(nbp);
    sb.v_upper.resize(nbp);
    for (int k = 0; k < nbp; ++k) {
        auto [bus, ph] = model.bus_phase_at(k);
        sb.v_lower(k) = model.buses[bus].v_min * model.buses[bus].v_min;
        sb.v_upper(k) = model.buses[bus].v_max * model.buses[bus].v_max;
    }
    for (const auto& br : model.branches) sb.flow_upper.push_back(br.s_max);
    sb.solar_upper = Eigen::VectorXd::Zero(model.ders.size());
    for (std::size_t d = 0; d < model.ders.size(); ++d)
        if (model.ders[d].solar) sb.solar_upper(d) = model.ders[d].solar->g_max;

    sb.margin_v = Eigen::VectorXd::Zero(nbp);
    for (const auto& br : model.branches) sb.margin_flow.push_back(Eigen::VectorXd::Zero(br.phases.size()));
    sb.margin_solar = Eigen::VectorXd::Zero(model.ders.size());

    TightenedBounds tb;
    tb.steps.assign(horizon, sb);
    return tb;
}

SafetyDistribution parse_distribution(const std::string& name) {
    if (name == "gaussian") return SafetyDistribution::gaussian;
    if (name == "chebyshev") return SafetyDistribution::chebyshev;
    if (name == "unimodal") return SafetyDistribution::unimodal;
    throw ConfigError("unknown distribution assumption '" + name + "'");
}

const char* to_string(SafetyDistribution d) {
    switch (d) {
        case SafetyDistribution::gaussian: return "gaussian";
        case SafetyDistribution::chebyshev: return "chebyshev";
        case SafetyDistribution::unimodal: return "unimodal";
    }
    return "unknown";
}

double safety_factor(SafetyDistribution d, double alpha) {
    if (!(alpha > 0.0 && alpha < 0.5))
        throw ConfigError("violation probability must lie in (0, 0.5), got " + std::to_string(alpha));
    switch (d) {
        case SafetyDistribution::gaussian:
            return boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - alpha);
        case SafetyDistribution::chebyshev:
            return std::sqrt((1.0 - alpha) / alpha);
        case SafetyDistribution::unimodal:
            return std::pow((1.0 - alpha) / (M_E * alpha), 1.0 / 1.95);
    }
    throw ConfigError("unknown distribution assumption");
}

double uncertainty_margin(const Eigen::RowVectorXd& gamma_row, const Eigen::MatrixXd& sigma_sqrt, double factor) {
    return factor * (gamma_row * sigma_sqrt).norm();
}

TightenedBounds tighten(const FeederModel& model, const std::vector<OperatingPoint>& trajectory,
                        const UncertaintyModel& u, const TimeSeries& forecast, int t0_abs,
                        const RobustConfig& cfg) {
    const int T = static_cast<int>(trajectory.size());
    if (forecast.steps < T) throw ValidationError("forecast window shorter than anchor trajectory");

    TightenedBounds tb = TightenedBounds::nominal(model, T);
    const QuantityRegistry reg =
        QuantityRegistry::standard(model, cfg.tighten_voltage, cfg.tighten_flow, cfg.tighten_solar);
    if (reg.size() == 0 || u.size() == 0) return tb;

    const double f_v = safety_factor(cfg.distribution, cfg.alpha_v);
    const double f_flow = safety_factor(cfg.distribution, cfg.alpha_flow);
    const double f_solar = safety_factor(cfg.distribution, cfg.alpha_solar);

    for (int t = 0; t < T; ++t) {
        const int lead = lead_at(u, t0_abs + t);
        const Eigen::MatrixXd sigma = covariance_at(u, model, forecast, t, lead);
        if (sigma.cwiseAbs().maxCoeff() == 0.0) continue;  // margins identically zero
        const Eigen::MatrixXd root = sqrt_psd(sigma);

        const auto& pt = trajectory[t];
        const auto channels = build_channels(u, model, forecast, t, pt.solar.real());
        const Eigen::MatrixXd gamma = compute_sensitivities(model, pt.state, pt.inj, reg, channels, pt.solar);

        StepBounds& sb = tb.steps[t];
        for (int r = 0; r < reg.size(); ++r) {
            const auto& row = reg.rows[r];
            switch (row.family) {
                case QuantityFamily::voltage_sq: {
                    const double lam = uncertainty_margin(gamma.row(r), root, f_v);
                    const int g = model.bus_phase_offset(row.element) + row.phase_local;
                    sb.margin_v(g) = lam;
                    sb.v_upper(g) -= lam;
                    sb.v_lower(g) += lam;
                    if (sb.v_lower(g) > sb.v_upper(g)) tb.over_tight = true;
                    break;
                }
                case QuantityFamily::branch_flow: {
                    const double lam = uncertainty_margin(gamma.row(r), root, f_flow);
                    sb.margin_flow[row.element](row.phase_local) = lam;
                    sb.flow_upper[row.element](row.phase_local) -= lam;
                    if (sb.flow_upper[row.element](row.phase_local) < 0.0) tb.over_tight = true;
                    break;
                }
                case QuantityFamily::solar_output: {
                    const double lam = uncertainty_margin(gamma.row(r), root, f_solar);
                    sb.margin_solar(row.element) = lam;
                    sb.solar_upper(row.element) -= lam;
                    if (sb.solar_upper(row.element) < 0.0) tb.over_tight = true;
                    break;
                }
            }
        }
    }
    return tb;
}

}  // namespace ufd
