#pragma once

#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "dhnet/network.hpp"
#include "dhnet/thermal_fv.hpp"

namespace dhnet {

/// Time-local closure data for the hydraulic system: consumer powers,
/// depot pressure controls and the boundary energy densities needed for
/// nodal mixing.
struct HydraulicClosure {
    std::vector<double> consumer_power;  // P_a [W], ordered like net.consumers()
    double u_p = 1e5;    // depot stagnation pressure [Pa]
    double u_dp = 0.0;   // depot pressure increase [Pa]
    double u_e = 0.0;    // injected energy density [J/m^3]
    double e_bf = 0.0;   // consumer return energy density [J/m^3]
};

struct HydraulicState {
    std::vector<double> qhat;    // per arc [m^3/s]
    std::vector<double> p;       // per node [Pa]
    std::vector<double> lambda;  // per arc (pipes only, else 0)
    std::vector<double> e_node;  // mixed node energies used by the closure
    int newton_iterations = 0;
    int outer_iterations = 0;
    double max_scaled_residual = 0.0;   // against the unregularized equations
    double max_volume_residual = 0.0;   // relative nodal conservation
    std::vector<double> residual_history;

    double velocity(const Network& net, int arc) const;
};

struct HydraulicOptions {
    double tol = 1e-10;      // scaled residual infinity norm
    int max_newton = 60;
    int max_outer = 50;
    double eps_reg = 1e-8;   // |v|v regularization velocity scale [m/s]
    FrictionMode friction_mode = FrictionMode::colebrook_white;
    double friction_fixed_value = 0.0;  // lambda or Re for the fixed modes
    std::string debug_csv_path;         // residual/iteration log when non-empty
};

/// Solve the stationary hydraulic system: per-pipe momentum balance, nodal
/// volume conservation, consumer power closures and the depot pressure
/// controls, at the given thermal state. Warm start with `guess` if given.
HydraulicState solve_hydraulics(const Network& net, const Mesh& mesh,
                                const ThermalState& thermal, const HydraulicClosure& closure,
                                const HydraulicOptions& options = {},
                                const HydraulicState* guess = nullptr);

struct BoundViolation {
    std::string constraint;  // e.g. "T_net", "p_ff_hi", "v_consumer"
    std::string location;    // node or arc id
    double time = 0.0;
    double value = 0.0;
    double bound = 0.0;
    double margin = 0.0;  // how far beyond the bound
};

struct BoundReport {
    std::vector<BoundViolation> violations;
    bool ok() const { return violations.empty(); }
};

/// Reporting only; never mutates the state. Bounds are non-strict: a value
/// exactly on its bound does not violate it.
BoundReport check_operational_bounds(const Network& net, const HydraulicState& state,
                                     const std::vector<double>& e_node,
                                     const OperationalBounds& bounds,
                                     const MaterialModel& material, double time);

namespace detail {

/// Raw-unit residual and Jacobian of the hydraulic system at a given state
/// (consumer flows eliminated). Row order: momentum per pipe, volume balance
/// per node except the depot tail, then the depot pressure rows. Column
/// order: pipe flows, depot flow, node pressures. Exposed for structural
/// tests (gauge rank checks).
///
/// depot_pressure_rows: 2 = stagnation gauge + pressure increase (the full
/// system), 1 = pressure increase only (removes the gauge pin), 0 = none.
struct HydraulicSystem {
    Eigen::SparseMatrix<double> jacobian;
    Eigen::VectorXd residual;
    int n_flow_unknowns = 0;
    int depot_pressure_rows = 2;
};

HydraulicSystem assemble_hydraulic_system(const Network& net, const HydraulicClosure& closure,
                                          const std::vector<double>& qhat,
                                          const std::vector<double>& p,
                                          const std::vector<double>& lambda,
                                          const std::vector<double>& rho,
                                          double eps_reg, int depot_pressure_rows = 2);

}  // namespace detail

}  // namespace dhnet
