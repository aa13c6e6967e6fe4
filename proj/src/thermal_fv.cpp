#include "dhnet/thermal_fv.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dhnet/errors.hpp"
#include "dhnet/log.hpp"

namespace dhnet {

Mesh Mesh::build(const Network& net, double target_dx) {
    if (target_dx <= 0.0) throw std::invalid_argument("build_mesh: target_dx must be > 0");
    Mesh mesh;
    mesh.arc_to_slot_.assign(net.arcs().size(), -1);
    int offset = 0;
    for (int arc : net.pipes()) {
        const auto& pa = *net.arc(arc).pipe;
        const int cells = std::max(1, static_cast<int>(std::lround(pa.length / target_dx)));
        Pipe p;
        p.arc = arc;
        p.cells = cells;
        p.dx = pa.length / cells;
        p.offset = offset;
        mesh.arc_to_slot_[arc] = static_cast<int>(mesh.pipes_.size());
        mesh.pipes_.push_back(p);
        offset += cells;
    }
    mesh.total_ = offset;
    return mesh;
}

ThermalState make_uniform_state(const Network& net, const Mesh& mesh, double e_ff,
                                double e_bf) {
    ThermalState st;
    st.e.resize(mesh.total_cells());
    for (const auto& mp : mesh.pipes()) {
        const double val =
            net.arc(mp.arc).kind == ArcKind::pipe_ff ? e_ff : e_bf;
        for (int c = 0; c < mp.cells; ++c) st.e[mp.offset + c] = val;
    }
    st.e_node.resize(net.nodes().size());
    for (std::size_t i = 0; i < net.nodes().size(); ++i)
        st.e_node[i] = net.node(static_cast<int>(i)).part == NodePart::foreflow ? e_ff : e_bf;
    return st;
}

namespace {

// Cell of pipe `slot` adjacent to node `n` on its in-flowing side.
int adjacent_cell(const Mesh& mesh, const Network& net, int arc, int n) {
    const int slot = mesh.slot_of_arc(arc);
    const Arc& a = net.arc(arc);
    if (a.head == n) return mesh.last_cell(slot);
    if (a.tail == n) return mesh.first_cell(slot);
    throw std::logic_error("adjacent_cell: arc not incident to node");
}

}  // namespace

std::vector<double> node_mixing(const Network& net, const Mesh& mesh,
                                const Eigen::VectorXd& e, const std::vector<double>& qhat,
                                const FlowPartition& part, double u_e, double e_bf,
                                const std::vector<double>& prior) {
    const int n_nodes = static_cast<int>(net.nodes().size());
    std::vector<double> e_node(n_nodes, 0.0);
    for (int n = 0; n < n_nodes; ++n) {
        double denom = 0.0;
        for (int ai : part.outflow[n]) denom += std::abs(qhat[ai]);
        if (denom <= 0.0) {
            e_node[n] = prior[n];  // stagnant node: hold previous value
            log::debug("node_mixing: stagnant node '" + net.node(n).id + "'");
            continue;
        }
        double acc = 0.0;
        for (int ai : part.inflow[n]) {
            const double wgt = std::abs(qhat[ai]);
            if (wgt == 0.0) continue;
            const Arc& a = net.arc(ai);
            double carried = 0.0;
            switch (a.kind) {
                case ArcKind::pipe_ff:
                case ArcKind::pipe_bf:
                    carried = e[adjacent_cell(mesh, net, ai, n)];
                    break;
                case ArcKind::consumer:
                    carried = e_bf;  // consumer outflow pinned to the backflow energy
                    break;
                case ArcKind::depot:
                    carried = u_e;  // depot injects the controlled energy density
                    break;
            }
            acc += wgt * carried;
        }
        e_node[n] = acc / denom;
    }
    return e_node;
}

SystemMatrices assemble_system(const Network& net, const Mesh& mesh,
                               const std::vector<double>& qhat,
                               const FlowPartition& part, bool enforce_conservation) {
    if (enforce_conservation) {
        const auto res = volume_residuals(net, qhat);
        for (std::size_t n = 0; n < res.size(); ++n) {
            if (res[n] > 1e-10) {
                throw StructureViolationError("assemble_system: flow violates volume "
                                              "conservation at node '" +
                                              net.node(static_cast<int>(n)).id +
                                              "' (residual " + std::to_string(res[n]) + ")");
            }
        }
    }

    SystemMatrices sys;
    sys.kappa = mesh.total_cells();
    sys.qhat = qhat;
    sys.w.resize(mesh.pipes().size());

    std::vector<Eigen::Triplet<double>> ta, tb;

    // Outflow volume per node, shared denominator of the mixing weights.
    std::vector<double> denom(net.nodes().size(), 0.0);
    for (std::size_t n = 0; n < denom.size(); ++n)
        for (int ai : part.outflow[n]) denom[n] += std::abs(qhat[ai]);

    for (std::size_t slot = 0; slot < mesh.pipes().size(); ++slot) {
        const auto& mp = mesh.pipes()[slot];
        const double sigma = net.arc(mp.arc).pipe->cross_section();
        const double v = qhat[mp.arc] / sigma;
        sys.w[slot] = v;
        if (v == 0.0) continue;

        const double rate = std::abs(v) / mp.dx;
        const bool forward = v > 0.0;
        // interior upwind stencil
        for (int c = 0; c < mp.cells; ++c) {
            const int row = mesh.global_index(static_cast<int>(slot), c);
            ta.emplace_back(row, row, -rate);
            const int upstream = forward ? c - 1 : c + 1;
            if (upstream >= 0 && upstream < mp.cells) {
                ta.emplace_back(row, mesh.global_index(static_cast<int>(slot), upstream),
                                rate);
            }
        }
        // boundary-fed cell takes the mixed node value of its inlet node
        const int inlet_node = forward ? net.arc(mp.arc).tail : net.arc(mp.arc).head;
        const int row = forward ? mesh.first_cell(static_cast<int>(slot))
                                : mesh.last_cell(static_cast<int>(slot));
        const double dn = denom[inlet_node];
        if (dn <= 0.0)
            throw std::logic_error("assemble_system: out-flowing pipe at a stagnant node");
        for (int ai : part.inflow[inlet_node]) {
            const double share = std::abs(qhat[ai]) / dn;
            if (share == 0.0) continue;
            const Arc& a = net.arc(ai);
            switch (a.kind) {
                case ArcKind::pipe_ff:
                case ArcKind::pipe_bf:
                    ta.emplace_back(row, adjacent_cell(mesh, net, ai, inlet_node),
                                    rate * share);
                    break;
                case ArcKind::consumer:
                    tb.emplace_back(row, 1, rate * share);
                    break;
                case ArcKind::depot:
                    tb.emplace_back(row, 0, rate * share);
                    break;
            }
        }
    }

    sys.A.resize(sys.kappa, sys.kappa);
    sys.A.setFromTriplets(ta.begin(), ta.end());
    sys.B.resize(sys.kappa, 2);
    sys.B.setFromTriplets(tb.begin(), tb.end());

    // Output selector: the topologically supplying cell of each consumer.
    std::vector<Eigen::Triplet<double>> tc;
    sys.output_arcs = net.consumers();
    for (std::size_t r = 0; r < sys.output_arcs.size(); ++r) {
        const int tail = net.arc(sys.output_arcs[r]).tail;
        int feed = -1;
        for (int ai : net.in_arcs()[tail]) {
            if (net.arc(ai).is_pipe()) {
                feed = ai;
                break;
            }
        }
        if (feed < 0) throw std::logic_error("assemble_system: consumer without feed pipe");
        tc.emplace_back(static_cast<int>(r), mesh.last_cell(mesh.slot_of_arc(feed)), 1.0);
    }
    sys.C.resize(static_cast<int>(sys.output_arcs.size()), sys.kappa);
    sys.C.setFromTriplets(tc.begin(), tc.end());
    return sys;
}

Eigen::VectorXd cooling_rhs(const Eigen::VectorXd& e, const Mesh& mesh, const Network& net,
                            const MaterialModel& material) {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(mesh.total_cells());
    const double theta = net.constants().theta;
    for (const auto& mp : mesh.pipes()) {
        const auto& pa = *net.arc(mp.arc).pipe;
        if (pa.heat_transmission == 0.0) continue;
        const double coeff = 4.0 * pa.heat_transmission / pa.diameter;
        for (int c = 0; c < mp.cells; ++c) {
            const int i = mp.offset + c;
            rhs[i] = -coeff * (material.temperature_of_energy(e[i]) - theta);
        }
    }
    return rhs;
}

std::string sparse_to_coord(const SpMat& m) {
    std::ostringstream os;
    os << m.rows() << " " << m.cols() << " " << m.nonZeros() << "\n";
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMat::InnerIterator it(m, k); it; ++it)
            os << it.row() << " " << it.col() << " " << it.value() << "\n";
    return os.str();
}

}  // namespace dhnet
