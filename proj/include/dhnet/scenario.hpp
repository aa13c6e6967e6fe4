#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dhnet/hydraulics.hpp"
#include "dhnet/integrator.hpp"
#include "dhnet/network.hpp"

namespace dhnet {

/// Time table with linear interpolation, clamped outside the knot range.
struct PiecewiseLinear {
    std::vector<double> t;
    std::vector<double> v;

    double eval(double time) const;
    static PiecewiseLinear constant(double value);
};

/// Injection and demand profiles plus depot controls over a horizon.
/// Temperatures in input files are converted to energy densities via the
/// material model at load time.
class Scenario {
public:
    double t0 = 0.0;
    double t_end = 0.0;
    double T_bf = 60.0;   // [degC]
    double e_bf = 0.0;    // e(T_bf) [J/m^3]
    PiecewiseLinear u_e;  // injected energy density [J/m^3]
    std::optional<std::vector<double>> u_e_steps;  // per-step override
    PiecewiseLinear u_p = PiecewiseLinear::constant(5e5);
    PiecewiseLinear u_dp = PiecewiseLinear::constant(2e5);
    std::vector<PiecewiseLinear> demand;  // [W], ordered like net.consumers()
    OperationalBounds bounds;
    bool enable_cooling = false;
    // initial foreflow fill level; defaults to the first injected value
    std::optional<double> init_e_ff;

    double u_e_at(const TimeGrid& grid, int step) const;
    double total_demand(double time) const;
    HydraulicClosure closure_at(double time) const;

    static Scenario load(const std::string& path, const Network& net);
    void validate(const Network& net) const;
};

/// Two-peak diurnal demand shape (morning and evening), repeated daily and
/// affinely scaled so the total over all consumers has the requested mean
/// and maximum. Sampled every sample_dt seconds, split equally.
std::vector<PiecewiseLinear> synthetic_demand(double mean_total, double max_total,
                                              int consumers, double t0, double t_end,
                                              double sample_dt = 900.0);

struct FeedInSeries {
    std::vector<double> t;     // end-of-step times
    std::vector<double> P_in;  // [W]
    double mean = 0.0;
    double max = 0.0;
    double threshold = 0.0;           // cap used when produced by the optimizer
    double max_tail_deviation = 0.0;  // max |e_depot_tail - e_bf| over last half
};

FeedInSeries feed_in_power(const TrajectoryRecord& traj, const Scenario& scenario);

struct EnergyAccounting {
    double injected = 0.0;            // integral of P_in [J]
    double consumed_scheduled = 0.0;  // integral of demanded power [J]
    double consumed_delivered = 0.0;  // integral of qhat (e_node - e_bf) [J]
    double storage_change = 0.0;      // [J]
    double closure_rel = 0.0;  // |injected - delivered - storage| / injected-scale
};

EnergyAccounting energy_accounting(const TrajectoryRecord& traj, const Mesh& mesh,
                                   const Network& net, const Scenario& scenario);

struct CaseStudyReport {
    FeedInSeries constant_series;
    FeedInSeries improved_series;
    EnergyAccounting constant_accounting;
    EnergyAccounting improved_accounting;
    double threshold = 0.0;  // peak bound achieved by the improved profile
    std::vector<double> T_injected_constant;  // [degC] per step
    std::vector<double> T_injected_improved;

    /// Plot-ready CSV: time, injected temperatures, both feed-in powers,
    /// threshold and mean reference lines.
    std::string to_csv() const;
    static std::string gnuplot_script(const std::string& csv_path);
};

CaseStudyReport run_case_study(const Network& net, const Mesh& mesh,
                               const Scenario& scenario_constant,
                               const Scenario& scenario_improved, const TimeGrid& grid,
                               const SimOptions& options = {});

struct PeakOptimizationOptions {
    int budget = 12;  // candidate-cap simulations
    SimOptions sim;
};

struct PeakOptimizationResult {
    std::vector<double> u_e_steps;
    double peak = 0.0;
    double baseline_peak = 0.0;
    double cap = 0.0;  // best feasible cap found
    bool improved = false;
    int simulations = 0;
    std::string binding_constraint;  // non-empty when infeasible at the bounds
};

/// Peak-minimizing injection search: bisection on a feed-in cap with a
/// greedy store-early feasibility simulation per candidate. Never returns a
/// profile worse than the constant baseline.
PeakOptimizationResult optimize_peak(const Network& net, const Mesh& mesh,
                                     const Scenario& demand_scenario, const TimeGrid& grid,
                                     double u_lo, double u_hi, double u_baseline,
                                     const PeakOptimizationOptions& options = {});

}  // namespace dhnet
