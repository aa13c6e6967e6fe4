#include "dhnet/integrator.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <Eigen/SparseLU>

#include "dhnet/errors.hpp"
#include "dhnet/log.hpp"
#include "dhnet/scenario.hpp"

namespace dhnet {

TimeGrid TimeGrid::make(double t0, double t_end, double dt) {
    if (dt <= 0.0) throw std::invalid_argument("TimeGrid: dt must be > 0");
    if (t_end <= t0) throw std::invalid_argument("TimeGrid: t_end must exceed t0");
    TimeGrid g;
    g.t0 = t0;
    g.dt = dt;
    g.steps = std::max(1, static_cast<int>(std::lround((t_end - t0) / dt)));
    g.t_end = t0 + g.steps * dt;
    if (std::abs(g.t_end - t_end) > 1e-9 * dt) {
        log::info("TimeGrid: t_end adjusted to " + std::to_string(g.t_end) +
                  " for an integral step count");
    }
    return g;
}

namespace {

struct MidpointStepper {
    Eigen::SparseLU<SpMat> lu;
    SpMat M_minus, M_plus;
    double dt = 0.0;
    bool analyzed = false;

    void prepare(const SpMat& A, double step_dt, bool pattern_changed) {
        dt = step_dt;
        SpMat I(A.rows(), A.cols());
        I.setIdentity();
        M_minus = I - (dt / 2.0) * A;
        M_plus = I + (dt / 2.0) * A;
        if (!analyzed || pattern_changed) {
            lu.analyzePattern(M_minus);
            analyzed = true;
        }
        lu.factorize(M_minus);
        if (lu.info() != Eigen::Success)
            throw SolverError("step_midpoint: factorization failed");
    }

    Eigen::VectorXd step(const Eigen::VectorXd& e, const Eigen::MatrixXd& B,
                         const Eigen::VectorXd& u, const Eigen::VectorXd* source) const {
        Eigen::VectorXd rhs = M_plus * e + dt * (B * u);
        if (source) rhs += dt * (*source);
        Eigen::VectorXd next = lu.solve(rhs);
        const double denom = std::max(rhs.norm(), 1e-300);
        const double res = (M_minus * next - rhs).norm() / denom;
        if (res > 1e-12)
            throw SolverError("step_midpoint: linear solve residual " + std::to_string(res));
        return next;
    }
};

std::vector<int> flow_signs(const std::vector<double>& qhat) {
    double scale = 0.0;
    for (double q : qhat) scale = std::max(scale, std::abs(q));
    const double tiny = 1e-14 * std::max(scale, 1e-300);
    std::vector<int> s(qhat.size());
    for (std::size_t i = 0; i < qhat.size(); ++i)
        s[i] = qhat[i] > tiny ? 1 : (qhat[i] < -tiny ? -1 : 0);
    return s;
}

}  // namespace

Eigen::VectorXd step_midpoint(const Eigen::VectorXd& e, const SpMat& A,
                              const Eigen::MatrixXd& Btilde, const Eigen::VectorXd& utilde,
                              double dt, const Eigen::VectorXd* source) {
    MidpointStepper stepper;
    stepper.prepare(A, dt, true);
    return stepper.step(e, Btilde, utilde, source);
}

double TrajectoryRecord::total_storage(const Eigen::VectorXd& Q, int k) const {
    return Q.dot(e.at(k));
}

std::string TrajectoryRecord::to_csv(const Network& net, const MaterialModel& material) const {
    std::ostringstream os;
    os << "t";
    for (int arc : output_arcs) os << ",e_" << net.arc(arc).id << ",T_" << net.arc(arc).id;
    os << ",P_in,depot_qhat,violations\n";
    os.setf(std::ios::fmtflags(0), std::ios::floatfield);
    os.precision(12);
    for (std::size_t k = 0; k < steps.size(); ++k) {
        const auto& s = steps[k];
        os << s.t;
        for (int i = 0; i < s.y_outputs.size(); ++i) {
            os << "," << s.y_outputs[i] << ","
               << material.temperature_of_energy(std::max(0.0, s.y_outputs[i]));
        }
        os << "," << s.P_in << "," << s.depot_qhat << "," << s.violations << "\n";
    }
    return os.str();
}

TrajectoryRecord simulate(const Network& net, const Mesh& mesh, const Scenario& scenario,
                          const TimeGrid& grid, const SimOptions& options) {
    scenario.validate(net);

    TrajectoryRecord traj;
    traj.grid = grid;
    traj.output_arcs = net.consumers();

    // cell volumes (the pH energy matrix diagonal)
    Eigen::VectorXd Q(mesh.total_cells());
    for (const auto& mp : mesh.pipes()) {
        const double vol = net.arc(mp.arc).pipe->cross_section() * mp.dx;
        for (int c = 0; c < mp.cells; ++c) Q[mp.offset + c] = vol;
    }

    const double e_ff0 =
        scenario.init_e_ff ? *scenario.init_e_ff : scenario.u_e_at(grid, 0);
    ThermalState state = make_uniform_state(net, mesh, e_ff0, scenario.e_bf);
    traj.e.push_back(state.e);

    const int depot_tail = net.arc(net.depot()).tail;
    HydraulicState warm;
    bool have_warm = false;
    std::vector<int> prev_signs;
    MidpointStepper stepper;
    std::vector<int> last_pattern;
    int dumps = 0;

    for (int k = 0; k < grid.steps; ++k) {
        const double t_mid = grid.midpoint(k);
        HydraulicClosure closure = scenario.closure_at(t_mid);
        closure.u_e = scenario.u_e_at(grid, k);

        try {
            HydraulicState hyd = solve_hydraulics(net, mesh, state, closure,
                                                  options.hydraulics,
                                                  have_warm ? &warm : nullptr);

            if (options.injection_controller) {
                double q_c_total = 0.0;
                for (int arc : net.consumers()) q_c_total += hyd.qhat[arc];
                const double chosen = options.injection_controller(
                    k, t_mid, q_c_total, hyd.e_node[depot_tail]);
                if (chosen != closure.u_e) {
                    closure.u_e = chosen;
                    hyd = solve_hydraulics(net, mesh, state, closure, options.hydraulics,
                                           &hyd);
                }
            }

            Eigen::VectorXd e_next;
            SystemMatrices sys;
            const int sweeps = std::clamp(options.coupling_sweeps, 1, 3);
            for (int sweep = 0; sweep < sweeps; ++sweep) {
                if (sweep > 0) {
                    ThermalState mid_state;
                    mid_state.e = 0.5 * (state.e + e_next);
                    mid_state.e_node = state.e_node;
                    hyd = solve_hydraulics(net, mesh, mid_state, closure,
                                           options.hydraulics, &hyd);
                }
                const FlowPartition part = flow_partition(net, hyd.qhat);
                sys = assemble_system(net, mesh, hyd.qhat, part);

                const auto signs = flow_signs(hyd.qhat);
                const bool pattern_changed = signs != last_pattern;
                if (!options.matrix_dump_path.empty() && (pattern_changed || dumps == 0)) {
                    const std::filesystem::path path(options.matrix_dump_path + "_step" +
                                                     std::to_string(k) + ".txt");
                    if (!path.parent_path().empty())
                        std::filesystem::create_directories(path.parent_path());
                    std::ofstream dump(path);
                    dump << sparse_to_coord(sys.A);
                    ++dumps;
                }
                last_pattern = signs;

                Eigen::VectorXd source;
                const Eigen::VectorXd* src = nullptr;
                if (options.enable_cooling || scenario.enable_cooling) {
                    source = cooling_rhs(state.e, mesh, net, net.material());
                    src = &source;
                }
                stepper.prepare(sys.A, grid.dt, pattern_changed);
                Eigen::Vector2d u(closure.u_e, closure.e_bf);
                e_next = stepper.step(state.e, Eigen::MatrixXd(sys.B), u, src);
            }

            StepRecord rec;
            rec.t = grid.time(k + 1);
            rec.u_e = closure.u_e;
            rec.H_before = state.e.dot(Q.asDiagonal() * state.e);
            rec.H_after = e_next.dot(Q.asDiagonal() * e_next);

            const Eigen::VectorXd e_mid = 0.5 * (state.e + e_next);
            const Eigen::VectorXd BtQe = sys.B.transpose() * (Q.asDiagonal() * e_mid);
            rec.supply =
                2.0 * grid.dt * (closure.u_e * BtQe[0] + closure.e_bf * BtQe[1]);
            const double h_scale =
                std::max({std::abs(rec.H_before), std::abs(rec.H_after), 1e-300});
            rec.margin_rel = (rec.supply - (rec.H_after - rec.H_before)) / h_scale;

            rec.depot_qhat = hyd.qhat[net.depot()];
            rec.e_depot_tail = hyd.e_node[depot_tail];
            double q_c_total = 0.0, delivered = 0.0;
            for (std::size_t c = 0; c < net.consumers().size(); ++c) {
                const int arc = net.consumers()[c];
                q_c_total += hyd.qhat[arc];
                delivered +=
                    hyd.qhat[arc] * (hyd.e_node[net.arc(arc).tail] - closure.e_bf);
            }
            rec.consumer_qhat_total = q_c_total;
            rec.P_in = (closure.u_e - rec.e_depot_tail) * q_c_total;
            rec.P_delivered = delivered;
            rec.y_outputs = sys.C * e_next;

            const auto signs = flow_signs(hyd.qhat);
            rec.flow_reversal = !prev_signs.empty() && signs != prev_signs;
            if (rec.flow_reversal)
                log::info("simulate: flow reversal at step " + std::to_string(k) +
                          " (t = " + std::to_string(t_mid) + " s)");
            prev_signs = signs;

            BoundReport bounds = check_operational_bounds(net, hyd, hyd.e_node,
                                                          scenario.bounds, net.material(),
                                                          t_mid);
            rec.violations = static_cast<int>(bounds.violations.size());

            state.e = e_next;
            state.e_node = hyd.e_node;
            warm = hyd;
            have_warm = true;

            if (options.record_states) traj.e.push_back(state.e);
            traj.steps.push_back(std::move(rec));
            traj.bound_reports.push_back(std::move(bounds));
            traj.hydraulics.push_back(std::move(hyd));
        } catch (const SolverError& err) {
            throw SolverError("simulate: step " + std::to_string(k) + " (t = " +
                                  std::to_string(t_mid) + " s): " + err.what(),
                              err.residual_history);
        } catch (const InfeasibleClosureError& err) {
            throw InfeasibleClosureError("simulate: step " + std::to_string(k) + " (t = " +
                                         std::to_string(t_mid) + " s): " + err.what());
        }
    }
    if (!options.record_states) traj.e.push_back(state.e);
    return traj;
}

}  // namespace dhnet
