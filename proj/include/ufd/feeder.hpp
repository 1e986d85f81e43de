#pragma once

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "ufd/phase.hpp"

namespace ufd {

using cplx = std::complex<double>;

struct BusSpec {
    std::string id;
    PhaseSet phases;
    double v_min = 0.95;  // p.u. magnitude
    double v_max = 1.05;
};

struct BranchSpec {
    std::string id;
    int from = -1;  // parent bus index after orientation
    int to = -1;    // child bus index
    PhaseSet phases;
    Eigen::MatrixXcd z;      // |phases| x |phases|, p.u., symmetric
    Eigen::VectorXd s_max;   // per present phase, p.u. apparent

    Eigen::MatrixXd r() const { return z.real(); }
};

struct BatterySpec {
    double p_max = 0;   // charge/discharge real power limit, p.u.
    double h_max = 0;   // inverter apparent limit, p.u.
    double b_min = 0;   // SoC bounds, p.u.-hours
    double b_max = 0;
    double b_init = 0;
    double eta_c = 1.0;
    double eta_d = 1.0;
};

struct SolarSpec {
    double g_max = 0;  // inverter apparent limit, p.u.
};

struct DerSpec {
    std::string id;
    int bus = -1;
    Phase phase = Phase::a;
    std::optional<BatterySpec> battery;
    std::optional<SolarSpec> solar;
};

/// Validated per-unit model of a radial three-phase feeder. Immutable
/// after load; safe to share across concurrent solver tasks.
struct FeederModel {
    std::string name;
    double base_voltage = 1.0;  // volts (line-to-neutral)
    double base_power = 1.0;    // volt-amperes (per phase)
    int slack_bus = 0;
    Eigen::Vector3cd slack_voltage;  // per phase a,b,c; balanced 1 pu default

    std::vector<BusSpec> buses;
    std::vector<BranchSpec> branches;  // oriented parent -> child
    std::vector<DerSpec> ders;

    // Tree orientation, filled by validation.
    std::vector<int> parent_branch;          // per bus, -1 at slack
    std::vector<std::vector<int>> children;  // per bus, child branch indices
    std::vector<int> depth;                  // per bus

    int bus_index(const std::string& id) const;

    // Dense enumeration of (bus, phase) pairs, ordered by bus then phase.
    int bus_phase_count() const { return static_cast<int>(bus_phase_offsets_.back()); }
    int bus_phase_offset(int bus) const { return static_cast<int>(bus_phase_offsets_[bus]); }
    int bus_phase_index(int bus, Phase p) const {
        return bus_phase_offset(bus) + buses[bus].phases.index_of(p);
    }
    std::pair<int, Phase> bus_phase_at(int k) const;

    cplx slack_voltage_at(Phase p) const { return slack_voltage(static_cast<int>(p)); }

    double z_base() const { return base_voltage * base_voltage / base_power; }

    void finalize();  // builds index tables; called by load_feeder

  private:
    std::vector<std::size_t> bus_phase_offsets_;
};

/// Forecast series over the horizon: complex demand and available solar
/// real power per bus-phase per step, on the model's bus-phase index.
struct TimeSeries {
    double dt_hours = 1.0 / 60.0;
    int steps = 0;
    // [bus_phase][t]
    std::vector<std::vector<cplx>> demand;
    std::vector<std::vector<double>> solar_avail;

    static TimeSeries zeros(const FeederModel& model, int steps, double dt_hours = 1.0 / 60.0);

    cplx demand_at(const FeederModel& m, int bus, Phase p, int t) const {
        return demand[m.bus_phase_index(bus, p)][t];
    }
    double solar_at(const FeederModel& m, int bus, Phase p, int t) const {
        return solar_avail[m.bus_phase_index(bus, p)][t];
    }

    /// Window [t0, t0+len) as a new series.
    TimeSeries window(int t0, int len) const;
};

struct TopologyReport {
    std::vector<int> depth;                  // per bus
    std::vector<int> parent_branch;          // per bus, -1 at slack
    std::vector<std::vector<int>> children;  // per bus, child branch indices
    std::vector<int> order;                  // buses in breadth-first order from slack
};

FeederModel load_feeder(const std::string& path);
void save_feeder(const FeederModel& model, const std::string& path);

/// Orients the branch set as a tree rooted at the slack bus. Throws
/// ValidationError when the graph is not a spanning tree (cycle, wrong
/// branch count, or unreachable buses, which are listed by id).
TopologyReport validate_radial(const FeederModel& model);

/// Full model validation: radiality, phase consistency, impedance shape,
/// bound sanity. load_feeder runs this; callers building models in code
/// should run it too.
void validate_model(FeederModel& model);

TimeSeries load_series(const FeederModel& model, const std::string& path);
void save_series(const FeederModel& model, const TimeSeries& series, const std::string& path);

}  // namespace ufd
