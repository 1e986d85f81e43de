#pragma once

#include <Eigen/Dense>

#include "ufd/loadflow.hpp"

namespace ufd {

// One step of an AC-feasible trajectory: the network state, the injections
// that produced it, and the DER dispatch behind those injections. DER
// vectors are indexed by FeederModel::ders.
struct OperatingPoint {
    NetworkState state;
    InjectionSet inj;
    Eigen::VectorXd p_charge;     // battery charging power, >= 0
    Eigen::VectorXd p_discharge;  // battery discharging power, >= 0
    Eigen::VectorXd q_battery;    // battery reactive power
    Eigen::VectorXcd solar;       // inverter apparent output
    Eigen::VectorXd soc;          // state of charge after this step, p.u.-hours

    static OperatingPoint sized(int n_der) {
        OperatingPoint p;
        p.p_charge = Eigen::VectorXd::Zero(n_der);
        p.p_discharge = Eigen::VectorXd::Zero(n_der);
        p.q_battery = Eigen::VectorXd::Zero(n_der);
        p.solar = Eigen::VectorXcd::Zero(n_der);
        p.soc = Eigen::VectorXd::Zero(n_der);
        return p;
    }
};

}  // namespace ufd
