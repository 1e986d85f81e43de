#include "ufd/uncertainty.hpp"

#include <cmath>
#include <random>

namespace ufd {

namespace {

constexpr double kAvailFloor = 1e-9;

double variance_factor(ErrorFamily f) {
    switch (f) {
        case ErrorFamily::uniform: return 1.0 / 3.0;
        case ErrorFamily::gaussian: return 1.0;  // half-width read as one sigma
        case ErrorFamily::triangular: return 1.0 / 6.0;
    }
    return 0.0;
}

// Deterministic uniform in [0,1) independent of library distributions.
double next01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double draw_unit_error(ErrorFamily f, std::mt19937_64& rng) {
    switch (f) {
        case ErrorFamily::uniform:
            return 2.0 * next01(rng) - 1.0;
        case ErrorFamily::gaussian: {
            const double u1 = 1.0 - next01(rng);  // keep away from zero
            const double u2 = next01(rng);
            return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        }
        case ErrorFamily::triangular:
            return next01(rng) + next01(rng) - 1.0;
    }
    return 0.0;
}

}  // namespace

double ErrorCurve::at(double lead) const {
    if (points.empty()) return 0.0;
    if (lead <= points.front().first) return points.front().second;
    if (lead >= points.back().first) return points.back().second;
    for (std::size_t k = 1; k < points.size(); ++k) {
        if (lead <= points[k].first) {
            const auto& [l0, w0] = points[k - 1];
            const auto& [l1, w1] = points[k];
            const double f = (lead - l0) / (l1 - l0);
            return w0 + f * (w1 - w0);
        }
    }
    return points.back().second;
}

bool ErrorCurve::is_zero() const {
    for (const auto& [l, w] : points)
        if (w != 0.0) return false;
    return true;
}

UncertaintyModel UncertaintyModel::standard(const FeederModel& model, ErrorFamily family, double demand_scale) {
    UncertaintyModel u;
    const ErrorCurve solar_curve = ErrorCurve::linear(0.02, 0.30, 30.0);
    ErrorCurve demand_curve = solar_curve;
    for (auto& [l, w] : demand_curve.points) w *= demand_scale;

    for (int d = 0; d < static_cast<int>(model.ders.size()); ++d)
        if (model.ders[d].solar) {
            UncertainSource s;
            s.kind = UncertainSource::Kind::solar;
            s.der = d;
            s.family = family;
            s.curve = solar_curve;
            u.sources.push_back(s);
        }
    for (int k = 0; k < model.bus_phase_count(); ++k) {
        auto [bus, ph] = model.bus_phase_at(k);
        if (bus == model.slack_bus) continue;
        UncertainSource s;
        s.kind = UncertainSource::Kind::demand;
        s.bus_phase = k;
        s.family = family;
        s.curve = demand_curve;
        u.sources.push_back(s);
    }
    return u;
}

UncertaintyModel UncertaintyModel::none(const FeederModel& model) {
    UncertaintyModel u = standard(model);
    for (auto& s : u.sources) s.curve = ErrorCurve::zero();
    return u;
}

int lead_at(const UncertaintyModel& u, int t_abs) {
    if (u.refresh_period <= 0) throw ValidationError("refresh period must be positive");
    return t_abs % u.refresh_period;
}

Eigen::VectorXd half_widths(const UncertaintyModel& u, const FeederModel& model, const TimeSeries& series,
                            int t_series, int lead) {
    Eigen::VectorXd e(u.size());
    for (int k = 0; k < u.size(); ++k) {
        const auto& src = u.sources[k];
        const double rel = src.curve.at(static_cast<double>(lead));
        double mag = 0.0;
        if (src.kind == UncertainSource::Kind::solar) {
            const auto& der = model.ders[src.der];
            mag = series.solar_at(model, der.bus, der.phase, t_series);
        } else {
            mag = std::abs(series.demand[src.bus_phase][t_series].real());
        }
        e(k) = rel * mag;
    }
    return e;
}

Eigen::MatrixXd covariance_from_half_widths(const UncertaintyModel& u, const Eigen::VectorXd& e) {
    Eigen::VectorXd sd(u.size());
    for (int k = 0; k < u.size(); ++k) sd(k) = e(k) * std::sqrt(variance_factor(u.sources[k].family));
    if (u.correlation.size() == 0) return sd.array().square().matrix().asDiagonal();
    return sd.asDiagonal() * u.correlation * sd.asDiagonal();
}

Eigen::MatrixXd covariance_at(const UncertaintyModel& u, const FeederModel& model, const TimeSeries& series,
                              int t_series, int lead) {
    return covariance_from_half_widths(u, half_widths(u, model, series, t_series, lead));
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& sigma) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Realization sample_realization(const UncertaintyModel& u, const FeederModel& model, const TimeSeries& forecast,
                               std::uint64_t seed, int t0_abs) {
    Realization out;
    out.realized = forecast;
    out.errors.assign(forecast.steps, Eigen::VectorXd::Zero(u.size()));
    std::mt19937_64 rng(seed);
    for (int t = 0; t < forecast.steps; ++t) {
        const int lead = lead_at(u, t0_abs + t);
        const Eigen::VectorXd e = half_widths(u, model, forecast, t, lead);
        for (int k = 0; k < u.size(); ++k) {
            const auto& src = u.sources[k];
            const double w = e(k) * draw_unit_error(src.family, rng);
            out.errors[t](k) = w;
            if (src.kind == UncertainSource::Kind::solar) {
                const auto& der = model.ders[src.der];
                const int bp = model.bus_phase_index(der.bus, der.phase);
                double& avail = out.realized.solar_avail[bp][t];
                avail = std::max(0.0, avail + w);
            } else {
                cplx& s = out.realized.demand[src.bus_phase][t];
                s = cplx(s.real() + w, s.imag());
            }
        }
    }
    return out;
}

std::vector<InjectionChannel> build_channels(const UncertaintyModel& u, const FeederModel& model,
                                             const TimeSeries& forecast, int t_series,
                                             const Eigen::VectorXd& solar_p_cmd) {
    std::vector<InjectionChannel> channels;
    channels.reserve(u.size());
    for (const auto& src : u.sources) {
        InjectionChannel ch;
        if (src.kind == UncertainSource::Kind::solar) {
            const auto& der = model.ders[src.der];
            ch.bus_phase = model.bus_phase_index(der.bus, der.phase);
            const double avail = forecast.solar_at(model, der.bus, der.phase, t_series);
            ch.chain = avail > kAvailFloor ? solar_p_cmd(src.der) / avail : 0.0;
            ch.solar_der = src.der;
        } else {
            ch.bus_phase = src.bus_phase;
            ch.chain = -1.0;
        }
        channels.push_back(ch);
    }
    return channels;
}

}  // namespace ufd
