// Python bindings for the district heating network toolkit.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dhnet/errors.hpp"
#include "dhnet/generic_pipe.hpp"
#include "dhnet/hydraulics.hpp"
#include "dhnet/integrator.hpp"
#include "dhnet/materials.hpp"
#include "dhnet/network.hpp"
#include "dhnet/ph_core.hpp"
#include "dhnet/scenario.hpp"
#include "dhnet/thermal_fv.hpp"

namespace py = pybind11;
using namespace dhnet;

namespace {

Network make_network(const std::string& kind, int consumers) {
    if (kind == "path") return make_path_network(consumers);
    if (kind == "star") return make_star_network(consumers);
    if (kind == "two-loop" || kind == "two_loop") return make_two_loop_network(consumers);
    throw std::invalid_argument("unknown network kind '" + kind + "'");
}

struct SimResult {
    std::vector<double> t, P_in, H, margin_rel, u_e, depot_qhat;
    std::vector<int> violations;
    double peak_P_in = 0.0;
    double worst_margin = 0.0;
    int total_violations = 0;
    double energy_closure_rel = 0.0;
};

SimResult run_simulation(const Network& net, const Scenario& scenario, double dt,
                         double mesh_dx) {
    const TimeGrid grid = TimeGrid::make(scenario.t0, scenario.t_end, dt);
    const Mesh mesh = build_mesh(net, mesh_dx);
    const TrajectoryRecord traj = simulate(net, mesh, scenario, grid);

    SimResult res;
    res.worst_margin = 1e300;
    for (const auto& s : traj.steps) {
        res.t.push_back(s.t);
        res.P_in.push_back(s.P_in);
        res.H.push_back(s.H_after);
        res.margin_rel.push_back(s.margin_rel);
        res.u_e.push_back(s.u_e);
        res.depot_qhat.push_back(s.depot_qhat);
        res.violations.push_back(s.violations);
        res.peak_P_in = std::max(res.peak_P_in, s.P_in);
        res.worst_margin = std::min(res.worst_margin, s.margin_rel);
        res.total_violations += s.violations;
    }
    res.energy_closure_rel = energy_accounting(traj, mesh, net, scenario).closure_rel;
    return res;
}

}  // namespace

PYBIND11_MODULE(_dhnet, m) {
    m.doc() = "district heating network simulation toolkit";

    py::register_exception<SchemaError>(m, "SchemaError");
    py::register_exception<SolverError>(m, "SolverError");
    py::register_exception<InfeasibleClosureError>(m, "InfeasibleClosureError");
    py::register_exception<StructureViolationError>(m, "StructureViolationError");

    py::class_<MaterialModel>(m, "MaterialModel")
        .def(py::init<>())
        .def("temperature_of_energy", &MaterialModel::temperature_of_energy, py::arg("e"))
        .def("energy_of_temperature", &MaterialModel::energy_of_temperature, py::arg("T"))
        .def("density_of_energy", &MaterialModel::density_of_energy, py::arg("e"))
        .def("viscosity_of_energy", &MaterialModel::viscosity_of_energy, py::arg("e"));

    m.def("colebrook_lambda", &colebrook_lambda, py::arg("reynolds"),
          py::arg("rel_roughness"));
    m.def("rough_limit_lambda", &rough_limit_lambda, py::arg("rel_roughness"));
    m.def("smooth_limit_lambda", &smooth_limit_lambda, py::arg("reynolds"));

    py::class_<Network>(m, "Network")
        .def_static("load", &Network::load, py::arg("path"))
        .def("save", &Network::save, py::arg("path"))
        .def_property_readonly("n_nodes",
                               [](const Network& n) { return n.nodes().size(); })
        .def_property_readonly("n_arcs", [](const Network& n) { return n.arcs().size(); })
        .def_property_readonly("n_pipes", [](const Network& n) { return n.pipes().size(); })
        .def_property_readonly("n_consumers",
                               [](const Network& n) { return n.consumers().size(); })
        .def_property_readonly("loops", &Network::loop_count)
        .def("topology_summary_csv", &Network::topology_summary_csv)
        .def_property_readonly("material", &Network::material);

    m.def("make_network", &make_network, py::arg("kind"), py::arg("consumers"),
          "generate a synthetic network (path|star|two-loop)");

    py::class_<Scenario>(m, "Scenario")
        .def_static("load", &Scenario::load, py::arg("path"), py::arg("network"))
        .def_readwrite("t0", &Scenario::t0)
        .def_readwrite("t_end", &Scenario::t_end)
        .def_readonly("e_bf", &Scenario::e_bf);

    py::class_<SimResult>(m, "SimResult")
        .def_readonly("t", &SimResult::t)
        .def_readonly("P_in", &SimResult::P_in)
        .def_readonly("H", &SimResult::H)
        .def_readonly("margin_rel", &SimResult::margin_rel)
        .def_readonly("u_e", &SimResult::u_e)
        .def_readonly("depot_qhat", &SimResult::depot_qhat)
        .def_readonly("violations", &SimResult::violations)
        .def_readonly("peak_P_in", &SimResult::peak_P_in)
        .def_readonly("worst_margin", &SimResult::worst_margin)
        .def_readonly("total_violations", &SimResult::total_violations)
        .def_readonly("energy_closure_rel", &SimResult::energy_closure_rel);

    m.def("simulate", &run_simulation, py::arg("network"), py::arg("scenario"),
          py::arg("dt") = 300.0, py::arg("mesh_dx") = 25.0,
          "advance a scenario with the implicit midpoint rule");

    py::class_<PHCheckSummary>(m, "PHCheckSummary")
        .def_readonly("samples", &PHCheckSummary::samples)
        .def_readonly("worst_skew", &PHCheckSummary::worst_skew)
        .def_readonly("worst_psd", &PHCheckSummary::worst_psd)
        .def_readonly("worst_identity", &PHCheckSummary::worst_identity)
        .def_readonly("worst_ldiag", &PHCheckSummary::worst_ldiag)
        .def_readonly("worst_output", &PHCheckSummary::worst_output)
        .def_readonly("lyapunov_all", &PHCheckSummary::lyapunov_all)
        .def_readonly("negative_control_failed_dominance",
                      &PHCheckSummary::negative_control_failed_dominance)
        .def("passed", &PHCheckSummary::pass);

    m.def(
        "check_ph",
        [](const Network& net, int samples, unsigned seed, double mesh_dx) {
            const Mesh mesh = build_mesh(net, mesh_dx);
            return run_ph_checks(net, mesh, samples, seed);
        },
        py::arg("network"), py::arg("samples") = 100, py::arg("seed") = 7,
        py::arg("mesh_dx") = 50.0, "port-Hamiltonian structure checks on random flows");

    py::class_<GenericCheckLevel>(m, "GenericCheckLevel")
        .def_readonly("cells", &GenericCheckLevel::cells)
        .def_readonly("skew", &GenericCheckLevel::skew)
        .def_readonly("symmetry", &GenericCheckLevel::symmetry)
        .def_readonly("min_eig_rel", &GenericCheckLevel::min_eig_rel)
        .def_readonly("R_dH_rel", &GenericCheckLevel::R_dH_rel)
        .def_readonly("J_dS_l2", &GenericCheckLevel::J_dS_l2)
        .def_readonly("entropy_residual", &GenericCheckLevel::entropy_residual);

    py::class_<GenericCheckSummary>(m, "GenericCheckSummary")
        .def_readonly("levels", &GenericCheckSummary::levels)
        .def_readonly("j_rate", &GenericCheckSummary::j_rate)
        .def_readonly("entropy_rate", &GenericCheckSummary::entropy_rate)
        .def_readonly("structural_ok", &GenericCheckSummary::structural_ok)
        .def("passed", &GenericCheckSummary::pass);

    m.def(
        "check_generic",
        [](int cells, int refinements) {
            const IdealGasLaw law{2.0 / 3.0, 1.3, 1.2};
            const GenericParams params{0.03, 0.12, 0.4, 9.80665, 0.01};
            return run_generic_checks(cells, refinements, law, params);
        },
        py::arg("cells") = 32, py::arg("refinements") = 4,
        "compressible pipe operator checks across a refinement ladder");

    py::class_<PeakOptimizationResult>(m, "PeakOptimizationResult")
        .def_readonly("u_e_steps", &PeakOptimizationResult::u_e_steps)
        .def_readonly("peak", &PeakOptimizationResult::peak)
        .def_readonly("baseline_peak", &PeakOptimizationResult::baseline_peak)
        .def_readonly("cap", &PeakOptimizationResult::cap)
        .def_readonly("improved", &PeakOptimizationResult::improved)
        .def_readonly("simulations", &PeakOptimizationResult::simulations)
        .def_readonly("binding_constraint", &PeakOptimizationResult::binding_constraint);

    m.def(
        "optimize_peak",
        [](const Network& net, const Scenario& scenario, double dt, double mesh_dx,
           double T_min, double T_max, double T_baseline, int budget) {
            const TimeGrid grid = TimeGrid::make(scenario.t0, scenario.t_end, dt);
            const Mesh mesh = build_mesh(net, mesh_dx);
            const MaterialModel& mat = net.material();
            PeakOptimizationOptions options;
            options.budget = budget;
            return optimize_peak(net, mesh, scenario, grid,
                                 mat.energy_of_temperature(T_min),
                                 mat.energy_of_temperature(T_max),
                                 mat.energy_of_temperature(T_baseline), options);
        },
        py::arg("network"), py::arg("scenario"), py::arg("dt") = 300.0,
        py::arg("mesh_dx") = 25.0, py::arg("T_min") = 70.0, py::arg("T_max") = 110.0,
        py::arg("T_baseline") = 84.0, py::arg("budget") = 12,
        "peak-minimizing injection search (bisection on a feed-in cap)");
}
