// dhnet: district heating network simulation toolkit CLI.
//
// Exit codes: 0 success, 1 solver failure, 2 operational constraint
// violations present. DHNET_LOG controls verbosity (off|warn|info|debug).

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "dhnet/errors.hpp"
#include "dhnet/generic_pipe.hpp"
#include "dhnet/hydraulics.hpp"
#include "dhnet/integrator.hpp"
#include "dhnet/log.hpp"
#include "dhnet/network.hpp"
#include "dhnet/ph_core.hpp"
#include "dhnet/scenario.hpp"
#include "dhnet/thermal_fv.hpp"

namespace fs = std::filesystem;
using namespace dhnet;

namespace {

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << content;
}

Network generate(const std::string& kind, int consumers) {
    if (kind == "path") return make_path_network(consumers);
    if (kind == "star") return make_star_network(consumers);
    if (kind == "two-loop") return make_two_loop_network(consumers);
    throw CLI::ValidationError("--kind", "unknown network kind '" + kind + "'");
}

int cmd_simulate(const std::string& network_file, const std::string& scenario_file,
                 double dt, double t_end_opt, double mesh_dx, const std::string& out_dir,
                 const std::string& dump_matrices, const std::string& hydraulics_log) {
    const Network net = Network::load(network_file);
    const Scenario scenario = Scenario::load(scenario_file, net);
    const double t_end = t_end_opt > 0.0 ? scenario.t0 + t_end_opt : scenario.t_end;
    const TimeGrid grid = TimeGrid::make(scenario.t0, t_end, dt);
    const Mesh mesh = build_mesh(net, mesh_dx);

    SimOptions options;
    options.mesh_dx = mesh_dx;
    options.matrix_dump_path = dump_matrices;
    options.hydraulics.debug_csv_path = hydraulics_log;
    TrajectoryRecord traj = simulate(net, mesh, scenario, grid, options);

    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "trajectory.csv", traj.to_csv(net, net.material()));
    const FeedInSeries series = feed_in_power(traj, scenario);
    const EnergyAccounting acc = energy_accounting(traj, mesh, net, scenario);

    int violations = 0;
    double worst_margin = 0.0;
    for (const auto& s : traj.steps) {
        violations += s.violations;
        worst_margin = std::min(worst_margin, s.margin_rel);
    }
    std::cout << "steps: " << grid.steps << "\n"
              << "cells: " << mesh.total_cells() << "\n"
              << "feed-in power mean/max [W]: " << series.mean << " / " << series.max << "\n"
              << "energy closure (relative): " << acc.closure_rel << "\n"
              << "worst dissipation margin (relative): " << worst_margin << "\n"
              << "bound violations: " << violations << "\n"
              << "output: " << (fs::path(out_dir) / "trajectory.csv").string() << "\n";
    return violations > 0 ? 2 : 0;
}

int cmd_check_ph(const std::string& network_file, const std::string& kind, int consumers,
                 int samples, unsigned seed, double mesh_dx) {
    const Network net =
        network_file.empty() ? generate(kind, consumers) : Network::load(network_file);
    const Mesh mesh = build_mesh(net, mesh_dx);
    const PHCheckSummary sum = run_ph_checks(net, mesh, samples, seed);

    struct Line {
        std::string name;
        bool pass;
        double value;
    };
    const std::vector<Line> lines{
        {"J skew (max |J+J^T| rel)", sum.worst_skew <= 1e-12, sum.worst_skew},
        {"R PSD (-min eig rel)", sum.worst_psd <= 1e-10, sum.worst_psd},
        {"(J-R)Q = A (max rel)", sum.worst_identity <= 1e-12, sum.worst_identity},
        {"L diag = -2 qhat (max rel)", sum.worst_ldiag <= 1e-12, sum.worst_ldiag},
        {"B~^T Q contains C (max abs)", sum.worst_output <= 1e-12, sum.worst_output},
        {"Lyapunov dominance & eigen agree", sum.lyapunov_all, sum.lyapunov_all ? 0.0 : 1.0},
        {"negative control fails dominance", sum.negative_control_failed_dominance,
         sum.negative_control_failed_dominance ? 0.0 : 1.0},
    };
    std::cout << "check-ph: " << samples << " random volume-preserving flows, seed " << seed
              << "\n";
    for (const auto& l : lines) {
        std::cout << (l.pass ? "[PASS] " : "[FAIL] ") << l.name << " = " << std::scientific
                  << std::setprecision(3) << l.value << "\n";
    }
    return sum.pass() ? 0 : 1;
}

int cmd_check_generic(int cells, int refinements) {
    const IdealGasLaw law{.R_gas = 2.0 / 3.0, .c_p = 1.3, .theta = 1.2};
    const GenericParams params{
        .lambda = 0.03, .d = 0.12, .k_w = 0.4, .g = 9.80665, .slope = 0.01};
    const GenericCheckSummary sum = run_generic_checks(cells, refinements, law, params);

    std::cout << "check-generic: refinement ladder from " << cells << " nodes\n";
    std::cout << std::left << std::setw(8) << "nodes" << std::setw(14) << "skew"
              << std::setw(14) << "symmetry" << std::setw(14) << "min_eig_R" << std::setw(14)
              << "R_dH" << std::setw(14) << "J_dS_L2" << std::setw(14) << "entropy_res"
              << "\n";
    for (const auto& lv : sum.levels) {
        std::cout << std::left << std::setw(8) << lv.cells << std::scientific
                  << std::setprecision(3) << std::setw(14) << lv.skew << std::setw(14)
                  << lv.symmetry << std::setw(14) << lv.min_eig_rel << std::setw(14)
                  << lv.R_dH_rel << std::setw(14) << lv.J_dS_l2 << std::setw(14)
                  << lv.entropy_residual << "\n";
    }
    std::cout << "J dS/dz refinement rate: " << std::fixed << std::setprecision(3)
              << sum.j_rate << "  entropy-balance rate: " << sum.entropy_rate << "\n";
    std::cout << (sum.pass() ? "[PASS]" : "[FAIL]")
              << " structural identities and first-order degeneracy rates\n";
    return sum.pass() ? 0 : 1;
}

int cmd_optimize(const std::string& network_file, const std::string& demand_file, int budget,
                 const std::string& out_dir, double dt, double mesh_dx, double T_lo,
                 double T_hi, double T_baseline) {
    const Network net = Network::load(network_file);
    const Scenario scenario = Scenario::load(demand_file, net);
    const TimeGrid grid = TimeGrid::make(scenario.t0, scenario.t_end, dt);
    const Mesh mesh = build_mesh(net, mesh_dx);

    const double u_lo = net.material().energy_of_temperature(T_lo);
    double T_cap = T_hi;
    if (scenario.bounds.T_net < 1e300) T_cap = std::min(T_cap, scenario.bounds.T_net);
    const double u_hi = net.material().energy_of_temperature(T_cap);
    const double u_base = net.material().energy_of_temperature(T_baseline);

    PeakOptimizationOptions options;
    options.budget = budget;
    const PeakOptimizationResult res =
        optimize_peak(net, mesh, scenario, grid, u_lo, u_hi, u_base, options);

    fs::create_directories(out_dir);
    std::ostringstream os;
    os.precision(12);
    os << "t,u_e,T_injected\n";
    for (int k = 0; k < grid.steps; ++k) {
        os << grid.time(k) << "," << res.u_e_steps[k] << ","
           << net.material().temperature_of_energy(res.u_e_steps[k]) << "\n";
    }
    write_file(fs::path(out_dir) / "injection_profile.csv", os.str());

    // constant-vs-improved comparison, plot-ready
    Scenario constant = scenario;
    constant.u_e = PiecewiseLinear::constant(u_base);
    constant.init_e_ff = u_base;
    Scenario improved = scenario;
    improved.u_e_steps = res.u_e_steps;
    improved.init_e_ff = u_base;
    CaseStudyReport report = run_case_study(net, mesh, constant, improved, grid);
    report.threshold = res.cap;
    write_file(fs::path(out_dir) / "case_study.csv", report.to_csv());
    write_file(fs::path(out_dir) / "case_study.gp",
               CaseStudyReport::gnuplot_script("case_study.csv"));

    std::cout << "baseline peak [W]: " << res.baseline_peak << "\n"
              << "optimized peak [W]: " << res.peak << "\n"
              << "cap [W]: " << res.cap << "\n"
              << "simulations: " << res.simulations << "\n"
              << "energy closure (constant/improved): "
              << report.constant_accounting.closure_rel << " / "
              << report.improved_accounting.closure_rel << "\n";
    if (!res.binding_constraint.empty())
        std::cout << "infeasible: " << res.binding_constraint << "\n";
    std::cout << "profile: " << (fs::path(out_dir) / "injection_profile.csv").string() << "\n"
              << "comparison: " << (fs::path(out_dir) / "case_study.csv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"district heating network simulation toolkit"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "advance a scenario over its horizon");
    std::string sim_net, sim_scenario, sim_out = "out", sim_dump, sim_hydlog;
    double sim_dt = 300.0, sim_tend = -1.0, sim_dx = 25.0;
    sim->add_option("--network", sim_net, "network JSON file")->required();
    sim->add_option("--scenario", sim_scenario, "scenario JSON file")->required();
    sim->add_option("--dt", sim_dt, "time step [s]");
    sim->add_option("--t-end", sim_tend, "horizon length [s] (default: scenario)");
    sim->add_option("--mesh-dx", sim_dx, "target cell size [m]");
    sim->add_option("--out", sim_out, "output directory");
    sim->add_option("--dump-matrices", sim_dump,
                    "debug: write coordinate-format A(w) dumps with this prefix");
    sim->add_option("--hydraulics-log", sim_hydlog,
                    "debug: write the Newton residual iterations to this CSV");

    // check-ph
    auto* chp = app.add_subcommand("check-ph", "port-Hamiltonian structure checks");
    std::string chp_net, chp_kind = "star";
    int chp_consumers = 3, chp_samples = 100;
    unsigned chp_seed = 7;
    double chp_dx = 50.0;
    chp->add_option("--network", chp_net, "network JSON file (default: generated)");
    chp->add_option("--kind", chp_kind, "generated network kind (path|star|two-loop)");
    chp->add_option("--consumers", chp_consumers, "generated network consumers");
    chp->add_option("--samples", chp_samples, "random flow samples");
    chp->add_option("--seed", chp_seed, "RNG seed");
    chp->add_option("--mesh-dx", chp_dx, "target cell size [m]");

    // check-generic
    auto* chg = app.add_subcommand("check-generic", "compressible pipe operator checks");
    int chg_cells = 32, chg_refinements = 4;
    chg->add_option("--cells", chg_cells, "coarsest grid node count");
    chg->add_option("--refinements", chg_refinements, "refinement levels");

    // optimize-peak
    auto* opt = app.add_subcommand("optimize-peak", "peak-minimizing injection search");
    std::string opt_net, opt_demand, opt_out = "out";
    int opt_budget = 12;
    double opt_dt = 300.0, opt_dx = 25.0, opt_tlo = 70.0, opt_thi = 110.0, opt_tbase = 84.0;
    opt->add_option("--network", opt_net, "network JSON file")->required();
    opt->add_option("--demand", opt_demand, "scenario JSON file carrying the demand")
        ->required();
    opt->add_option("--budget", opt_budget, "candidate-cap simulations");
    opt->add_option("--out", opt_out, "output directory");
    opt->add_option("--dt", opt_dt, "time step [s]");
    opt->add_option("--mesh-dx", opt_dx, "target cell size [m]");
    opt->add_option("--t-min", opt_tlo, "minimal injection temperature [degC]");
    opt->add_option("--t-max", opt_thi, "maximal injection temperature [degC]");
    opt->add_option("--t-baseline", opt_tbase, "constant baseline temperature [degC]");

    // gen-network
    auto* gen = app.add_subcommand("gen-network", "write a synthetic network");
    std::string gen_kind = "star", gen_out, gen_summary;
    int gen_consumers = 3;
    gen->add_option("--kind", gen_kind, "path|star|two-loop");
    gen->add_option("--consumers", gen_consumers, "consumer count");
    gen->add_option("--out", gen_out, "output JSON path (default: stdout)");
    gen->add_option("--summary", gen_summary, "also write a topology summary CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed())
            return cmd_simulate(sim_net, sim_scenario, sim_dt, sim_tend, sim_dx, sim_out,
                                sim_dump, sim_hydlog);
        if (chp->parsed())
            return cmd_check_ph(chp_net, chp_kind, chp_consumers, chp_samples, chp_seed,
                                chp_dx);
        if (chg->parsed()) return cmd_check_generic(chg_cells, chg_refinements);
        if (opt->parsed())
            return cmd_optimize(opt_net, opt_demand, opt_budget, opt_out, opt_dt, opt_dx,
                                opt_tlo, opt_thi, opt_tbase);
        if (gen->parsed()) {
            const Network net = generate(gen_kind, gen_consumers);
            if (gen_out.empty())
                std::cout << net.to_json().dump(2) << "\n";
            else
                net.save(gen_out);
            if (!gen_summary.empty()) write_file(gen_summary, net.topology_summary_csv());
            return 0;
        }
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return 1;
    } catch (const SolverError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 1;
    } catch (const InfeasibleClosureError& e) {
        std::cerr << "infeasible closure: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
