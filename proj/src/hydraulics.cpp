#include "dhnet/hydraulics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <queue>
#include <sstream>

#include <Eigen/SparseLU>

#include "dhnet/errors.hpp"
#include "dhnet/log.hpp"

namespace dhnet {

double HydraulicState::velocity(const Network& net, int arc) const {
    const Arc& a = net.arc(arc);
    if (!a.pipe) throw std::invalid_argument("velocity: arc has no pipe geometry");
    return qhat[arc] / a.pipe->cross_section();
}

namespace {

// regularized |v| v and its derivative
double vv_reg(double v, double eps) { return v * std::sqrt(v * v + eps * eps); }
double vv_reg_deriv(double v, double eps) {
    const double s = std::sqrt(v * v + eps * eps);
    return s + v * v / std::max(s, 1e-300);
}

}  // namespace

namespace detail {

HydraulicSystem assemble_hydraulic_system(const Network& net, const HydraulicClosure& closure,
                                          const std::vector<double>& qhat,
                                          const std::vector<double>& p,
                                          const std::vector<double>& lambda,
                                          const std::vector<double>& rho,
                                          double eps_reg, int depot_pressure_rows) {
    const int n_nodes = static_cast<int>(net.nodes().size());
    const int n_pipes = static_cast<int>(net.pipes().size());
    const int nq = n_pipes + 1;  // pipe flows + depot flow
    const int depot_tail = net.arc(net.depot()).tail;
    const int depot_head = net.arc(net.depot()).head;

    // free-flow unknown index per arc (-1 for consumers)
    std::vector<int> flow_col(net.arcs().size(), -1);
    for (int i = 0; i < n_pipes; ++i) flow_col[net.pipes()[i]] = i;
    flow_col[net.depot()] = n_pipes;

    const int n_rows = n_pipes + (n_nodes - 1) + depot_pressure_rows;
    HydraulicSystem sys;
    sys.n_flow_unknowns = nq;
    sys.depot_pressure_rows = depot_pressure_rows;
    sys.residual.resize(n_rows);
    std::vector<Eigen::Triplet<double>> tj;
    int row = 0;

    // momentum balance per pipe: p_n - p_m + l ((lambda/2d) rho |v|v + rho g dh) = 0
    for (int i = 0; i < n_pipes; ++i) {
        const int arc = net.pipes()[i];
        const Arc& a = net.arc(arc);
        const auto& pa = *a.pipe;
        const double sigma = pa.cross_section();
        const double v = qhat[arc] / sigma;
        const double fric = pa.length * lambda[arc] / (2.0 * pa.diameter) * rho[arc];
        const double grav = pa.length * rho[arc] * net.constants().g * pa.slope;
        sys.residual[row] = p[a.head] - p[a.tail] + fric * vv_reg(v, eps_reg) + grav;
        tj.emplace_back(row, nq + a.head, 1.0);
        tj.emplace_back(row, nq + a.tail, -1.0);
        tj.emplace_back(row, i, fric * vv_reg_deriv(v, eps_reg) / sigma);
        ++row;
    }

    // volume conservation per node (depot tail row dropped: it is the
    // linearly dependent one)
    for (int n = 0; n < n_nodes; ++n) {
        if (n == depot_tail) continue;
        double r = 0.0;
        for (int ai : net.in_arcs()[n]) {
            r += qhat[ai];
            if (flow_col[ai] >= 0) tj.emplace_back(row, flow_col[ai], 1.0);
        }
        for (int ai : net.out_arcs()[n]) {
            r -= qhat[ai];
            if (flow_col[ai] >= 0) tj.emplace_back(row, flow_col[ai], -1.0);
        }
        sys.residual[row] = r;
        ++row;
    }

    if (depot_pressure_rows >= 2) {
        sys.residual[row] = p[depot_tail] - closure.u_p;
        tj.emplace_back(row, nq + depot_tail, 1.0);
        ++row;
    }
    if (depot_pressure_rows >= 1) {
        sys.residual[row] = p[depot_head] - p[depot_tail] - closure.u_dp;
        tj.emplace_back(row, nq + depot_head, 1.0);
        tj.emplace_back(row, nq + depot_tail, -1.0);
        ++row;
    }

    sys.jacobian.resize(n_rows, nq + n_nodes);
    sys.jacobian.setFromTriplets(tj.begin(), tj.end());
    return sys;
}

}  // namespace detail

namespace {

// zero-flow pressure field propagated from the depot controls through the
// pipe graph (hydrostatic slope drops only)
std::vector<double> hydrostatic_pressures(const Network& net, const HydraulicClosure& closure,
                                          const std::vector<double>& rho) {
    const int n_nodes = static_cast<int>(net.nodes().size());
    std::vector<double> p(n_nodes, closure.u_p);
    std::vector<char> known(n_nodes, 0);
    const int depot_tail = net.arc(net.depot()).tail;
    const int depot_head = net.arc(net.depot()).head;
    p[depot_tail] = closure.u_p;
    p[depot_head] = closure.u_p + closure.u_dp;
    known[depot_tail] = known[depot_head] = 1;
    std::queue<int> q;
    q.push(depot_tail);
    q.push(depot_head);
    while (!q.empty()) {
        const int n = q.front();
        q.pop();
        auto relax = [&](int arc) {
            const Arc& a = net.arc(arc);
            if (!a.is_pipe()) return;
            const double drop = a.pipe->length * rho[arc] * net.constants().g * a.pipe->slope;
            if (a.tail == n && !known[a.head]) {
                p[a.head] = p[a.tail] - drop;
                known[a.head] = 1;
                q.push(a.head);
            } else if (a.head == n && !known[a.tail]) {
                p[a.tail] = p[a.head] + drop;
                known[a.tail] = 1;
                q.push(a.tail);
            }
        };
        for (int ai : net.out_arcs()[n]) relax(ai);
        for (int ai : net.in_arcs()[n]) relax(ai);
    }
    return p;
}

struct ClosureEval {
    std::vector<double> consumer_flow;  // per consumer order
    std::vector<double> lambda;         // per arc
    std::vector<double> rho;            // per arc
    std::vector<double> e_node;         // per node
};

ClosureEval evaluate_closure(const Network& net, const Mesh& mesh, const ThermalState& thermal,
                             const HydraulicClosure& closure, const HydraulicOptions& options,
                             const std::vector<double>& qhat,
                             const std::vector<double>& prior_e_node) {
    ClosureEval ev;
    const auto part = flow_partition(net, qhat);
    ev.e_node = node_mixing(net, mesh, thermal.e, qhat, part, closure.u_e, closure.e_bf,
                            prior_e_node);

    // consumer power closure: qhat = P / (e_node[m] - e_bf)
    ev.consumer_flow.resize(net.consumers().size());
    for (std::size_t c = 0; c < net.consumers().size(); ++c) {
        const int arc = net.consumers()[c];
        const double power = closure.consumer_power.at(c);
        const double de = ev.e_node[net.arc(arc).tail] - closure.e_bf;
        if (power == 0.0) {
            ev.consumer_flow[c] = 0.0;
            continue;
        }
        if (power < 0.0)
            throw InfeasibleClosureError("consumer '" + net.arc(arc).id +
                                         "' has negative power demand");
        if (de <= 0.0)
            throw InfeasibleClosureError(
                "consumer '" + net.arc(arc).id +
                "': power demanded but no energy-density drop available (delta e = " +
                std::to_string(de) + " J/m^3)");
        ev.consumer_flow[c] = power / de;
    }

    // lagged friction factor and upwind density per pipe
    ev.lambda.assign(net.arcs().size(), 0.0);
    ev.rho.assign(net.arcs().size(), 0.0);
    for (int arc : net.pipes()) {
        const Arc& a = net.arc(arc);
        const int slot = mesh.slot_of_arc(arc);
        const double v = qhat[arc] / a.pipe->cross_section();
        const int up_cell = v >= 0.0 ? mesh.first_cell(slot) : mesh.last_cell(slot);
        const double e_up = thermal.e[up_cell];
        ev.rho[arc] = net.material().density_of_energy(e_up);
        FrictionModel fm;
        fm.mode = options.friction_mode;
        fm.k_r = a.pipe->roughness;
        fm.d = a.pipe->diameter;
        fm.fixed_value = options.friction_fixed_value;
        ev.lambda[arc] = friction_factor(v, e_up, fm, net.material());
    }
    return ev;
}

}  // namespace

HydraulicState solve_hydraulics(const Network& net, const Mesh& mesh,
                                const ThermalState& thermal, const HydraulicClosure& closure,
                                const HydraulicOptions& options, const HydraulicState* guess) {
    if (closure.consumer_power.size() != net.consumers().size())
        throw std::invalid_argument("solve_hydraulics: consumer power count mismatch");

    const int n_nodes = static_cast<int>(net.nodes().size());
    const int n_pipes = static_cast<int>(net.pipes().size());
    const int nq = n_pipes + 1;

    HydraulicState st;
    st.qhat.assign(net.arcs().size(), 0.0);
    st.lambda.assign(net.arcs().size(), 0.0);
    if (guess) {
        st.qhat = guess->qhat;
        st.p = guess->p;
    }

    std::ofstream debug;
    if (!options.debug_csv_path.empty()) {
        const std::filesystem::path path(options.debug_csv_path);
        if (!path.parent_path().empty())
            std::filesystem::create_directories(path.parent_path());
        const bool fresh = !std::filesystem::exists(path) ||
                           std::filesystem::file_size(path) == 0;
        debug.open(path, std::ios::app);
        if (fresh) debug << "outer,newton,scaled_residual\n";
    }

    const double p_scale =
        std::max({1e5, std::abs(closure.u_p), std::abs(closure.u_p + closure.u_dp)});

    std::vector<double> prior_e_node =
        guess && !guess->e_node.empty() ? guess->e_node : thermal.e_node;

    ClosureEval ev =
        evaluate_closure(net, mesh, thermal, closure, options, st.qhat, prior_e_node);
    if (st.p.empty()) st.p = hydrostatic_pressures(net, closure, ev.rho);

    auto apply_consumer_flows = [&](const ClosureEval& c) {
        for (std::size_t i = 0; i < net.consumers().size(); ++i)
            st.qhat[net.consumers()[i]] = c.consumer_flow[i];
    };
    apply_consumer_flows(ev);

    auto flow_scale = [&]() {
        double s = 1e-6;
        for (double q : st.qhat) s = std::max(s, std::abs(q));
        return s;
    };

    for (int outer = 0; outer < options.max_outer; ++outer) {
        st.outer_iterations = outer + 1;
        const double q_scale = flow_scale();

        // Newton iteration with frozen lambda, rho, consumer flows
        Eigen::VectorXd x(nq + n_nodes);
        for (int i = 0; i < n_pipes; ++i) x[i] = st.qhat[net.pipes()[i]];
        x[n_pipes] = st.qhat[net.depot()];
        for (int n = 0; n < n_nodes; ++n) x[nq + n] = st.p[n];

        auto unpack = [&](const Eigen::VectorXd& xv) {
            for (int i = 0; i < n_pipes; ++i) st.qhat[net.pipes()[i]] = xv[i];
            st.qhat[net.depot()] = xv[n_pipes];
            for (int n = 0; n < n_nodes; ++n) st.p[n] = xv[nq + n];
        };

        auto scaled_norm = [&](const Eigen::VectorXd& r) {
            double m = 0.0;
            for (int i = 0; i < n_pipes; ++i) m = std::max(m, std::abs(r[i]) / p_scale);
            for (int i = n_pipes; i < n_pipes + n_nodes - 1; ++i)
                m = std::max(m, std::abs(r[i]) / q_scale);
            for (int i = n_pipes + n_nodes - 1; i < r.size(); ++i)
                m = std::max(m, std::abs(r[i]) / p_scale);
            return m;
        };

        bool newton_done = false;
        for (int it = 0; it < options.max_newton; ++it) {
            unpack(x);
            auto sys = detail::assemble_hydraulic_system(net, closure, st.qhat, st.p,
                                                         ev.lambda, ev.rho, options.eps_reg);
            const double rn = scaled_norm(sys.residual);
            st.residual_history.push_back(rn);
            if (debug.is_open())
                debug << outer << "," << it << "," << rn << "\n";
            if (rn < options.tol) {
                newton_done = true;
                st.newton_iterations += it;
                break;
            }

            // column scaling: flows by q_scale, pressures by p_scale
            Eigen::VectorXd col(nq + n_nodes);
            for (int j = 0; j < nq; ++j) col[j] = q_scale;
            for (int j = nq; j < col.size(); ++j) col[j] = p_scale;
            SpMat js = sys.jacobian;
            for (int k = 0; k < js.outerSize(); ++k)
                for (SpMat::InnerIterator itj(js, k); itj; ++itj)
                    itj.valueRef() *= col[itj.col()];

            Eigen::SparseLU<SpMat> lu;
            lu.compute(js);
            if (lu.info() != Eigen::Success)
                throw SolverError("solve_hydraulics: singular Newton system",
                                  st.residual_history);
            Eigen::VectorXd dxs = lu.solve(-sys.residual);
            Eigen::VectorXd dx = dxs.cwiseProduct(col);

            // simple backtracking on the scaled residual norm
            double step = 1.0;
            Eigen::VectorXd x_old = x;
            for (int ls = 0; ls < 10; ++ls) {
                x = x_old + step * dx;
                unpack(x);
                auto trial = detail::assemble_hydraulic_system(
                    net, closure, st.qhat, st.p, ev.lambda, ev.rho, options.eps_reg);
                if (scaled_norm(trial.residual) <= rn || step < 1e-3) break;
                step *= 0.5;
            }
        }
        if (!newton_done) {
            throw SolverError("solve_hydraulics: Newton did not converge (outer " +
                                  std::to_string(outer) + ")",
                              st.residual_history);
        }

        // refresh lambda, density, mixing, consumer flows; check the fixed
        // point BEFORE applying so the returned flows stay consistent with
        // the converged Newton system
        ClosureEval next =
            evaluate_closure(net, mesh, thermal, closure, options, st.qhat, prior_e_node);
        double change = 0.0;
        for (std::size_t c = 0; c < next.consumer_flow.size(); ++c)
            change = std::max(change,
                              std::abs(next.consumer_flow[c] - ev.consumer_flow[c]));
        for (std::size_t a = 0; a < next.lambda.size(); ++a)
            change = std::max(change, std::abs(next.lambda[a] - ev.lambda[a]) * q_scale);
        if (change <= 1e-11 * std::max(q_scale, 1e-9)) {
            st.e_node = next.e_node;  // freshest mixing for the final flows
            break;
        }
        ev = next;
        apply_consumer_flows(ev);
        if (outer == options.max_outer - 1) {
            st.e_node = next.e_node;
            log::warn("solve_hydraulics: outer fixed point not fully converged");
        }
    }

    st.lambda = ev.lambda;
    if (st.e_node.empty()) st.e_node = ev.e_node;

    // report converged residuals against the unregularized equations
    auto final_sys = detail::assemble_hydraulic_system(net, closure, st.qhat, st.p, ev.lambda,
                                                       ev.rho, 0.0);
    double m = 0.0;
    const double q_scale = flow_scale();
    for (int i = 0; i < n_pipes; ++i)
        m = std::max(m, std::abs(final_sys.residual[i]) / p_scale);
    for (int i = n_pipes; i < n_pipes + n_nodes - 1; ++i)
        m = std::max(m, std::abs(final_sys.residual[i]) / q_scale);
    for (int i = n_pipes + n_nodes - 1; i < final_sys.residual.size(); ++i)
        m = std::max(m, std::abs(final_sys.residual[i]) / p_scale);
    // consumer power closures against the final nodal mixing
    for (std::size_t c = 0; c < net.consumers().size(); ++c) {
        const int arc = net.consumers()[c];
        const double de = st.e_node[net.arc(arc).tail] - closure.e_bf;
        const double resid = st.qhat[arc] * de - closure.consumer_power[c];
        const double scale =
            std::max({std::abs(closure.consumer_power[c]), q_scale * std::abs(de), 1.0});
        m = std::max(m, std::abs(resid) / scale);
    }
    st.max_scaled_residual = m;

    const auto vres = volume_residuals(net, st.qhat);
    st.max_volume_residual = *std::max_element(vres.begin(), vres.end());
    return st;
}

namespace {

void push_violation(BoundReport& rep, const std::string& constraint,
                    const std::string& location, double time, double value, double bound,
                    bool upper) {
    const double margin = upper ? value - bound : bound - value;
    // non-strict bounds, evaluated to round-off
    const double tol = 1e-12 * std::max({1.0, std::abs(bound), std::abs(value)});
    if (margin > tol)
        rep.violations.push_back({constraint, location, time, value, bound, margin});
}

}  // namespace

BoundReport check_operational_bounds(const Network& net, const HydraulicState& state,
                                     const std::vector<double>& e_node,
                                     const OperationalBounds& bounds,
                                     const MaterialModel& material, double time) {
    BoundReport rep;

    for (std::size_t c = 0; c < net.consumers().size(); ++c) {
        const Arc& a = net.arc(net.consumers()[c]);
        const double T_m = material.temperature_of_energy(e_node[a.tail]);
        const double T_n = material.temperature_of_energy(e_node[a.head]);
        push_violation(rep, "T_ff_hi", a.id, time, T_m, bounds.T_ff_hi, true);
        push_violation(rep, "T_ff_lo", a.id, time, T_m, bounds.T_ff_lo, false);
        push_violation(rep, "dT_consumer_max", a.id, time, T_m - T_n,
                       bounds.dT_consumer_max, true);
        push_violation(rep, "p_ff_hi", a.id, time, state.p[a.tail], bounds.p_ff_hi, true);
        push_violation(rep, "p_ff_lo", a.id, time, state.p[a.tail], bounds.p_ff_lo, false);
        push_violation(rep, "p_bf_hi", a.id, time, state.p[a.head], bounds.p_bf_hi, true);
        push_violation(rep, "p_bf_lo", a.id, time, state.p[a.head], bounds.p_bf_lo, false);
        const double dp = state.p[a.tail] - state.p[a.head];
        push_violation(rep, "dp_consumer_hi", a.id, time, dp, bounds.dp_consumer_hi, true);
        push_violation(rep, "dp_consumer_lo", a.id, time, dp, bounds.dp_consumer_lo, false);
        push_violation(rep, "v_consumer", a.id, time, state.qhat[net.consumers()[c]], 0.0,
                       false);
    }

    push_violation(rep, "v_depot", net.arc(net.depot()).id, time, state.qhat[net.depot()],
                   0.0, false);

    for (std::size_t n = 0; n < net.nodes().size(); ++n) {
        const Node& nd = net.node(static_cast<int>(n));
        push_violation(rep, "T_net", nd.id, time,
                       material.temperature_of_energy(e_node[n]), bounds.T_net, true);
        push_violation(rep, "p_net", nd.id, time, state.p[n], bounds.p_net, true);
    }
    return rep;
}

}  // namespace dhnet
