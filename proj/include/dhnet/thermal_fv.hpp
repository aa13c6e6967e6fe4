#pragma once

#include <vector>

#include <Eigen/Sparse>

#include "dhnet/network.hpp"

namespace dhnet {

using SpMat = Eigen::SparseMatrix<double>;

/// Equidistant per-pipe finite-volume mesh. Cells are indexed 0-based along
/// the pipe's topological direction; global indices are pipe- then cell-wise.
class Mesh {
public:
    struct Pipe {
        int arc = -1;     // arc index in the network
        int cells = 0;    // |V_alpha|
        double dx = 0.0;  // [m]
        int offset = 0;   // global index of cell 0
    };

    const std::vector<Pipe>& pipes() const { return pipes_; }
    int total_cells() const { return total_; }

    /// Mesh-pipe slot for a network arc index (-1 for non-pipe arcs).
    int slot_of_arc(int arc) const { return arc_to_slot_[arc]; }

    /// Global cell index for (pipe slot, cell).
    int global_index(int slot, int cell) const { return pipes_[slot].offset + cell; }

    int first_cell(int slot) const { return pipes_[slot].offset; }
    int last_cell(int slot) const { return pipes_[slot].offset + pipes_[slot].cells - 1; }

    static Mesh build(const Network& net, double target_dx);

private:
    std::vector<Pipe> pipes_;
    std::vector<int> arc_to_slot_;
    int total_ = 0;
};

inline Mesh build_mesh(const Network& net, double target_dx) {
    return Mesh::build(net, target_dx);
}

/// Cell energy densities plus the per-node mixed values. Node values at
/// stagnant nodes hold their previous content.
struct ThermalState {
    Eigen::VectorXd e;           // [J/m^3], size = mesh.total_cells()
    std::vector<double> e_node;  // [J/m^3], size = |N|
};

/// Uniform initial state: foreflow cells/nodes at e_ff, backflow at e_bf.
ThermalState make_uniform_state(const Network& net, const Mesh& mesh, double e_ff,
                                double e_bf);

/// Flow-weighted instant mixing at every node. In-flowing pipe arcs carry
/// their node-adjacent cell value, consumer arcs carry e_bf, the depot arc
/// carries u_e. Stagnant nodes (no outflow volume) keep prior[n].
std::vector<double> node_mixing(const Network& net, const Mesh& mesh,
                                const Eigen::VectorXd& e, const std::vector<double>& qhat,
                                const FlowPartition& part, double u_e, double e_bf,
                                const std::vector<double>& prior);

struct SystemMatrices {
    SpMat A;            // kappa x kappa
    SpMat B;            // kappa x 2, input order (u_e, e_bf)
    SpMat C;            // c x kappa, one row per consumer
    std::vector<double> w;      // per mesh-pipe velocity [m/s]
    std::vector<double> qhat;   // per arc volumetric flow snapshot [m^3/s]
    std::vector<int> output_arcs;  // consumer arc index per C row
    int kappa = 0;
};

/// Upwind advection matrices of the semi-discrete network model. The flow
/// must satisfy nodal volume conservation (relative residual < 1e-10);
/// enforce_conservation = false skips the rejection so structure checks can
/// probe deliberately corrupted flows.
SystemMatrices assemble_system(const Network& net, const Mesh& mesh,
                               const std::vector<double>& qhat,
                               const FlowPartition& part,
                               bool enforce_conservation = true);

/// Per-cell wall-cooling contribution to de/dt: -(4 k_w / d) (T(e) - theta)
/// [W/m^3]. Outside the port-Hamiltonian embedding; disabled by default in
/// the integrator.
Eigen::VectorXd cooling_rhs(const Eigen::VectorXd& e, const Mesh& mesh, const Network& net,
                            const MaterialModel& material);

/// Coordinate-format dump (row col value per line) for external inspection.
std::string sparse_to_coord(const SpMat& m);

}  // namespace dhnet
