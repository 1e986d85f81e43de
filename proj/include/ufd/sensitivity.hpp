#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ufd/feeder.hpp"
#include "ufd/loadflow.hpp"

namespace ufd {

enum class QuantityFamily { voltage_sq, branch_flow, solar_output };

// One constrained quantity tracked for bound tightening.
struct QuantityRow {
    QuantityFamily family;
    int element;      // bus index, branch index, or DER index
    int phase_local;  // position within the element's phase block (0 for DERs)
};

struct QuantityRegistry {
    std::vector<QuantityRow> rows;

    int size() const { return static_cast<int>(rows.size()); }

    // Deterministic row order: squared voltages for every bus/phase, then
    // per-phase branch flows, then solar inverter outputs.
    static QuantityRegistry standard(const FeederModel& model, bool voltage, bool flow, bool solar);
};

// A scalar forecast-error channel and how it enters the network: a unit
// error changes the net real injection at `bus_phase` by `chain`. Channels
// tied to a solar DER also move that inverter's own apparent output.
struct InjectionChannel {
    int bus_phase = -1;
    double chain = 1.0;
    int solar_der = -1;
};

// Flattened nodal voltage phasors on the model's bus-phase index.
Eigen::VectorXcd stack_voltages(const FeederModel& model, const NetworkState& state);

// Analytic linearization of the nodal power-flow equations at an operating
// point: maps a complex injection perturbation at one bus-phase to the
// complex voltage response of every bus-phase (slack rows stay zero).
class Linearization {
public:
    Linearization(const FeederModel& model, const NetworkState& state);

    bool invertible() const { return lu_.isInvertible(); }

    Eigen::VectorXcd voltage_response(int bus_phase, cplx direction = cplx(1.0, 0.0)) const;

private:
    const FeederModel& model_;
    std::vector<int> u_rows_;
    std::vector<int> global_to_u_;
    Eigen::FullPivLU<Eigen::MatrixXd> lu_;
};

// First-order response of every registered quantity to every channel,
// evaluated around an AC operating point. Rows follow the registry, columns
// the channel list. Uses the analytic power-flow Jacobian; falls back to
// central finite differences of the plant load flow if the linearization is
// singular at the point.
Eigen::MatrixXd compute_sensitivities(const FeederModel& model, const NetworkState& state,
                                      const InjectionSet& inj, const QuantityRegistry& reg,
                                      const std::vector<InjectionChannel>& channels,
                                      const Eigen::VectorXcd& solar_output);

// Values of the registered quantities at an operating point (same order as
// the registry): |V|^2, per-phase |diag S|, |S^S| per solar DER.
Eigen::VectorXd evaluate_quantities(const FeederModel& model, const NetworkState& state,
                                    const QuantityRegistry& reg, const Eigen::VectorXcd& solar_output);

}  // namespace ufd
