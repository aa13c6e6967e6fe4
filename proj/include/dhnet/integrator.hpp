#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dhnet/hydraulics.hpp"
#include "dhnet/ph_core.hpp"
#include "dhnet/thermal_fv.hpp"

namespace dhnet {

struct TimeGrid {
    double t0 = 0.0;
    double t_end = 0.0;
    double dt = 0.0;
    int steps = 0;

    /// Rounds t_end so that (t_end - t0)/dt is integral (no padded final
    /// step).
    static TimeGrid make(double t0, double t_end, double dt);
    double midpoint(int k) const { return t0 + (k + 0.5) * dt; }
    double time(int k) const { return t0 + k * dt; }
};

/// One implicit midpoint step:
/// (I - dt/2 A) e_next = (I + dt/2 A) e + dt Btilde utilde [+ dt source].
Eigen::VectorXd step_midpoint(const Eigen::VectorXd& e, const SpMat& A,
                              const Eigen::MatrixXd& Btilde, const Eigen::VectorXd& utilde,
                              double dt, const Eigen::VectorXd* source = nullptr);

struct StepRecord {
    double t = 0.0;            // end-of-step time
    double H_before = 0.0;
    double H_after = 0.0;
    double supply = 0.0;       // 2 dt ytilde_mid . utilde
    double margin_rel = 0.0;   // dissipation margin, relative
    double P_in = 0.0;         // feed-in power [W]
    double u_e = 0.0;          // injected energy density used this step
    double depot_qhat = 0.0;   // [m^3/s]
    double consumer_qhat_total = 0.0;
    double e_depot_tail = 0.0;
    double P_delivered = 0.0;  // sum over consumers of qhat (e_node - e_bf)
    int violations = 0;
    bool flow_reversal = false;
    Eigen::VectorXd y_outputs;  // C e at end of step (consumer-supplying cells)
};

struct TrajectoryRecord {
    TimeGrid grid;
    std::vector<Eigen::VectorXd> e;          // states, size steps+1
    std::vector<StepRecord> steps;           // size steps
    std::vector<BoundReport> bound_reports;  // size steps
    std::vector<HydraulicState> hydraulics;  // size steps
    std::vector<int> output_arcs;

    double total_storage(const Eigen::VectorXd& Q, int k) const;
    std::string to_csv(const Network& net, const MaterialModel& material) const;
};

class Scenario;  // scenario.hpp

/// Per-step injection override: receives the step index, midpoint time, the
/// total consumer volumetric flow of a provisional hydraulic solve and the
/// depot-tail energy density; returns the u_e to use for the step.
using InjectionController =
    std::function<double(int step, double t_mid, double q_c_total, double e_depot_tail)>;

struct SimOptions {
    double mesh_dx = 25.0;
    bool enable_cooling = false;
    int coupling_sweeps = 1;  // hydraulic/thermal fixed-point sweeps per step
    HydraulicOptions hydraulics;
    bool record_states = true;
    std::string matrix_dump_path;  // coordinate-format A dump per partition change
    InjectionController injection_controller;  // optional
};

TrajectoryRecord simulate(const Network& net, const Mesh& mesh, const Scenario& scenario,
                          const TimeGrid& grid, const SimOptions& options = {});

}  // namespace dhnet
