#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dhnet/materials.hpp"

namespace dhnet {

enum class NodePart { foreflow, backflow };
enum class ArcKind { pipe_ff, pipe_bf, consumer, depot };

struct Node {
    std::string id;
    NodePart part = NodePart::foreflow;
};

struct PipeAttributes {
    double length = 0.0;             // l [m]
    double diameter = 0.0;           // d [m]
    double slope = 0.0;              // dh/dx, dimensionless
    double roughness = 0.0;          // k_r [m]
    double heat_transmission = 0.0;  // k_w [W/(m^2 K)]

    double cross_section() const;  // d^2 pi / 4 [m^2]
};

struct Arc {
    std::string id;
    int tail = -1;  // node index m
    int head = -1;  // node index n
    ArcKind kind = ArcKind::pipe_ff;
    std::optional<PipeAttributes> pipe;  // set iff kind is pipe_ff/pipe_bf

    bool is_pipe() const { return kind == ArcKind::pipe_ff || kind == ArcKind::pipe_bf; }
};

struct NetworkConstants {
    double g = 9.80665;  // [m/s^2]
    double theta = 10.0; // ground temperature [degC]
};

// Inequality limits checked by check_operational_bounds. Infinities disable
// a limit.
struct OperationalBounds {
    double T_bf = 60.0;                 // contractual backflow temperature [degC]
    double T_ff_lo = -1e300, T_ff_hi = 1e300;
    double dT_consumer_max = 1e300;
    double p_bf_lo = -1e300, p_bf_hi = 1e300;
    double p_ff_lo = -1e300, p_ff_hi = 1e300;
    double dp_consumer_lo = -1e300, dp_consumer_hi = 1e300;
    double T_net = 1e300;  // cap for all node temperatures [degC]
    double p_net = 1e300;  // cap for all node pressures [Pa]
};

class Network {
public:
    static Network load(const std::string& path);
    static Network from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    void save(const std::string& path) const;

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Arc>& arcs() const { return arcs_; }
    const Node& node(int i) const { return nodes_[i]; }
    const Arc& arc(int i) const { return arcs_[i]; }

    int node_index(const std::string& id) const;
    int arc_index(const std::string& id) const;

    int depot() const { return depot_; }
    const std::vector<int>& consumers() const { return consumers_; }
    const std::vector<int>& pipes() const { return pipes_; }

    // topological incidence
    const std::vector<std::vector<int>>& in_arcs() const { return in_arcs_; }
    const std::vector<std::vector<int>>& out_arcs() const { return out_arcs_; }

    const NetworkConstants& constants() const { return constants_; }
    const MaterialModel& material() const { return material_; }
    const OperationalBounds& bounds() const { return bounds_; }

    /// Cycle-space dimension of the pipe-only subgraph:
    /// |A_p| - |N| + (#components of (N, A_p)).
    int loop_count() const;

    /// One-row CSV with header: pipes, consumers, depot, arcs, nodes, loops.
    std::string topology_summary_csv() const;

    // Construction is via the builder below or from_json.
    struct Builder;

private:
    friend struct Builder;
    void finalize();  // index maps, incidence, validation

    std::vector<Node> nodes_;
    std::vector<Arc> arcs_;
    std::vector<std::vector<int>> in_arcs_, out_arcs_;
    std::vector<int> pipes_, consumers_;
    int depot_ = -1;
    NetworkConstants constants_;
    MaterialModel material_;
    OperationalBounds bounds_;
};

struct Network::Builder {
    std::vector<Node> nodes;
    std::vector<Arc> arcs;
    NetworkConstants constants;
    MaterialModel material;
    OperationalBounds bounds;

    int add_node(const std::string& id, NodePart part);
    int add_pipe(const std::string& id, int tail, int head, const PipeAttributes& attrs);
    int add_consumer(const std::string& id, int tail, int head);
    int add_depot(const std::string& id, int tail, int head);
    Network build();
};

/// Flow-specific arc classification per node: arcs currently delivering
/// volume into (I_n) or drawing it out of (O_n) each node, by flow sign
/// rather than topological orientation. Zero flow ties break into the
/// inflow set.
struct FlowPartition {
    std::vector<std::vector<int>> inflow;   // I_n
    std::vector<std::vector<int>> outflow;  // O_n
    std::vector<bool> reversed;             // per arc: qhat < 0
};

FlowPartition flow_partition(const Network& net, const std::vector<double>& qhat);

/// Nodal volume-conservation residuals, relative to the local flow scale.
std::vector<double> volume_residuals(const Network& net, const std::vector<double>& qhat);

/// Per-arc flow carrying `magnitude` around the directed cycle
/// depot -> (foreflow pipes) -> consumer -> (backflow pipes) -> depot.
/// Exactly volume-preserving by construction.
std::vector<double> consumer_cycle_flow(const Network& net, int consumer_arc,
                                        double magnitude);

/// Random nonnegative solenoidal flow field: random consumer-cycle flows plus
/// bounded circulations on the pipe graph's fundamental cycles.
std::vector<double> random_solenoidal_flow(const Network& net, std::mt19937& rng,
                                           double scale);

// Synthetic network generators.
// path: a chain of foreflow segments, consumers spread along it, a backflow
//       chain returning to the depot. Segment counts default to `consumers`.
Network make_path_network(int consumers, int ff_segments = -1, int bf_segments = -1);
// star: two trunk segments per side plus one arm per consumer (4 + 2N pipes).
Network make_star_network(int consumers);
// two_loop: trunk - diamond (two parallel 4-segment paths) - trunk on each
// side (20 pipes), all consumers bridging the far end.
Network make_two_loop_network(int consumers);

}  // namespace dhnet
