#include "dhnet/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <queue>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "dhnet/errors.hpp"

namespace dhnet {

using nlohmann::json;

double PipeAttributes::cross_section() const {
    return diameter * diameter * std::numbers::pi / 4.0;
}

namespace {

const char* part_name(NodePart p) {
    return p == NodePart::foreflow ? "foreflow" : "backflow";
}

NodePart part_of(const std::string& s) {
    if (s == "foreflow" || s == "ff") return NodePart::foreflow;
    if (s == "backflow" || s == "bf") return NodePart::backflow;
    throw SchemaError("unknown node part '" + s + "'");
}

const char* kind_name(ArcKind k) {
    switch (k) {
        case ArcKind::pipe_ff: return "pipe_ff";
        case ArcKind::pipe_bf: return "pipe_bf";
        case ArcKind::consumer: return "consumer";
        case ArcKind::depot: return "depot";
    }
    return "?";
}

ArcKind kind_of(const std::string& s) {
    if (s == "pipe_ff") return ArcKind::pipe_ff;
    if (s == "pipe_bf") return ArcKind::pipe_bf;
    if (s == "consumer") return ArcKind::consumer;
    if (s == "depot") return ArcKind::depot;
    throw SchemaError("unknown arc kind '" + s + "'");
}

}  // namespace

int Network::node_index(const std::string& id) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].id == id) return static_cast<int>(i);
    throw SchemaError("unknown node id '" + id + "'");
}

int Network::arc_index(const std::string& id) const {
    for (std::size_t i = 0; i < arcs_.size(); ++i)
        if (arcs_[i].id == id) return static_cast<int>(i);
    throw SchemaError("unknown arc id '" + id + "'");
}

void Network::finalize() {
    const int n = static_cast<int>(nodes_.size());
    in_arcs_.assign(n, {});
    out_arcs_.assign(n, {});
    pipes_.clear();
    consumers_.clear();
    depot_ = -1;

    std::unordered_set<std::string> node_ids, arc_ids;
    for (const auto& nd : nodes_) {
        if (!node_ids.insert(nd.id).second)
            throw SchemaError("duplicate node id '" + nd.id + "'");
    }

    for (std::size_t i = 0; i < arcs_.size(); ++i) {
        const Arc& a = arcs_[i];
        if (!arc_ids.insert(a.id).second)
            throw SchemaError("duplicate arc id '" + a.id + "'");
        if (a.tail < 0 || a.tail >= n || a.head < 0 || a.head >= n)
            throw SchemaError("arc '" + a.id + "' references unknown node");
        out_arcs_[a.tail].push_back(static_cast<int>(i));
        in_arcs_[a.head].push_back(static_cast<int>(i));

        const NodePart tp = nodes_[a.tail].part;
        const NodePart hp = nodes_[a.head].part;
        switch (a.kind) {
            case ArcKind::pipe_ff:
            case ArcKind::pipe_bf: {
                if (!a.pipe) throw SchemaError("pipe arc '" + a.id + "' missing attributes");
                const auto& pa = *a.pipe;
                if (pa.length <= 0.0 || pa.diameter <= 0.0)
                    throw SchemaError("pipe arc '" + a.id + "' needs positive length and diameter");
                if (pa.roughness < 0.0 || pa.heat_transmission < 0.0)
                    throw SchemaError("pipe arc '" + a.id + "' needs k_r, k_w >= 0");
                const NodePart want =
                    a.kind == ArcKind::pipe_ff ? NodePart::foreflow : NodePart::backflow;
                if (tp != want || hp != want)
                    throw SchemaError("pipe arc '" + a.id + "' must connect " +
                                      std::string(part_name(want)) + " nodes");
                pipes_.push_back(static_cast<int>(i));
                break;
            }
            case ArcKind::consumer:
                if (tp != NodePart::foreflow || hp != NodePart::backflow)
                    throw SchemaError("consumer arc '" + a.id +
                                      "' must run foreflow -> backflow");
                consumers_.push_back(static_cast<int>(i));
                break;
            case ArcKind::depot:
                if (depot_ >= 0) throw SchemaError("multiple depot arcs");
                if (tp != NodePart::backflow || hp != NodePart::foreflow)
                    throw SchemaError("depot arc '" + a.id + "' must run backflow -> foreflow");
                depot_ = static_cast<int>(i);
                break;
        }
    }
    if (depot_ < 0) throw SchemaError("network has no depot arc");

    // connectivity (as an undirected graph over all arcs)
    if (n > 0) {
        std::vector<char> seen(n, 0);
        std::queue<int> q;
        q.push(0);
        seen[0] = 1;
        int count = 1;
        while (!q.empty()) {
            const int v = q.front();
            q.pop();
            auto visit = [&](int arc_idx) {
                const Arc& a = arcs_[arc_idx];
                for (int w : {a.tail, a.head}) {
                    if (!seen[w]) {
                        seen[w] = 1;
                        ++count;
                        q.push(w);
                    }
                }
            };
            for (int ai : out_arcs_[v]) visit(ai);
            for (int ai : in_arcs_[v]) visit(ai);
        }
        if (count != n) throw SchemaError("network graph is not connected");
    }

    // pressures are only related along pipes and the depot arc, so every
    // node must touch at least one of them
    for (int v = 0; v < n; ++v) {
        bool anchored = false;
        for (const auto& arcs : {in_arcs_[v], out_arcs_[v]})
            for (int ai : arcs)
                anchored = anchored || arcs_[ai].is_pipe() || arcs_[ai].kind == ArcKind::depot;
        if (!anchored)
            throw SchemaError("node '" + nodes_[v].id +
                              "' is not incident to any pipe or depot arc");
    }

    // every consumer tail must be supplied by at least one foreflow pipe
    for (int ci : consumers_) {
        const int m = arcs_[ci].tail;
        const bool fed = std::any_of(in_arcs_[m].begin(), in_arcs_[m].end(),
                                     [&](int ai) { return arcs_[ai].is_pipe(); });
        if (!fed)
            throw SchemaError("consumer '" + arcs_[ci].id +
                              "' has no in-flowing pipe at its foreflow node");
    }
}

int Network::loop_count() const {
    const int n = static_cast<int>(nodes_.size());
    // union-find over pipe arcs only
    std::vector<int> parent(n);
    for (int i = 0; i < n; ++i) parent[i] = i;
    std::function<int(int)> find = [&](int v) {
        while (parent[v] != v) v = parent[v] = parent[parent[v]];
        return v;
    };
    int components = n;
    for (int pi : pipes_) {
        const int a = find(arcs_[pi].tail), b = find(arcs_[pi].head);
        if (a != b) {
            parent[a] = b;
            --components;
        }
    }
    return static_cast<int>(pipes_.size()) - n + components;
}

std::string Network::topology_summary_csv() const {
    std::ostringstream os;
    os << "pipes,consumers,depot,arcs,nodes,loops\n";
    os << pipes_.size() << "," << consumers_.size() << ",1," << arcs_.size() << ","
       << nodes_.size() << "," << loop_count() << "\n";
    return os.str();
}

Network Network::from_json(const json& j) {
    Builder b;
    if (j.contains("constants")) {
        const auto& c = j.at("constants");
        b.constants.g = c.value("g", b.constants.g);
        b.constants.theta = c.value("theta", b.constants.theta);
        if (c.contains("material")) {
            const auto& m = c.at("material");
            auto read_coeffs = [&](const char* key, auto& arr) {
                if (!m.contains(key)) return;
                const auto& v = m.at(key);
                if (v.size() != arr.size())
                    throw SchemaError("material coefficient array '" + std::string(key) +
                                      "' has wrong length");
                for (std::size_t i = 0; i < arr.size(); ++i) arr[i] = v[i].get<double>();
            };
            read_coeffs("T_coeffs", b.material.T_coeffs);
            read_coeffs("rho_coeffs", b.material.rho_coeffs);
            read_coeffs("nu_coeffs", b.material.nu_coeffs);
            b.material.e0 = m.value("e0", b.material.e0);
        }
    }
    if (j.contains("bounds")) {
        const auto& bd = j.at("bounds");
        auto& ob = b.bounds;
        ob.T_bf = bd.value("T_bf", ob.T_bf);
        ob.T_ff_lo = bd.value("T_ff_lo", ob.T_ff_lo);
        ob.T_ff_hi = bd.value("T_ff_hi", ob.T_ff_hi);
        ob.dT_consumer_max = bd.value("dT_consumer_max", ob.dT_consumer_max);
        ob.p_bf_lo = bd.value("p_bf_lo", ob.p_bf_lo);
        ob.p_bf_hi = bd.value("p_bf_hi", ob.p_bf_hi);
        ob.p_ff_lo = bd.value("p_ff_lo", ob.p_ff_lo);
        ob.p_ff_hi = bd.value("p_ff_hi", ob.p_ff_hi);
        ob.dp_consumer_lo = bd.value("dp_consumer_lo", ob.dp_consumer_lo);
        ob.dp_consumer_hi = bd.value("dp_consumer_hi", ob.dp_consumer_hi);
        ob.T_net = bd.value("T_net", ob.T_net);
        ob.p_net = bd.value("p_net", ob.p_net);
    }

    if (!j.contains("nodes") || !j.contains("arcs"))
        throw SchemaError("network file needs 'nodes' and 'arcs' arrays");

    std::unordered_map<std::string, int> node_idx;
    for (const auto& nj : j.at("nodes")) {
        const std::string id = nj.at("id").get<std::string>();
        const NodePart part = part_of(nj.at("part").get<std::string>());
        node_idx[id] = b.add_node(id, part);
    }
    auto idx = [&](const std::string& id) {
        auto it = node_idx.find(id);
        if (it == node_idx.end()) throw SchemaError("unknown node id '" + id + "'");
        return it->second;
    };
    for (const auto& aj : j.at("arcs")) {
        const std::string id = aj.at("id").get<std::string>();
        const ArcKind kind = kind_of(aj.at("kind").get<std::string>());
        const int tail = idx(aj.at("tail").get<std::string>());
        const int head = idx(aj.at("head").get<std::string>());
        switch (kind) {
            case ArcKind::pipe_ff:
            case ArcKind::pipe_bf: {
                const auto& pj = aj.at("pipe");
                PipeAttributes pa;
                pa.length = pj.at("length").get<double>();
                pa.diameter = pj.at("diameter").get<double>();
                pa.slope = pj.value("slope", 0.0);
                pa.roughness = pj.value("roughness", 0.0);
                pa.heat_transmission = pj.value("heat_transmission", 0.0);
                Arc a{id, tail, head, kind, pa};
                b.arcs.push_back(std::move(a));
                break;
            }
            case ArcKind::consumer:
                b.add_consumer(id, tail, head);
                break;
            case ArcKind::depot:
                b.add_depot(id, tail, head);
                break;
        }
    }
    return b.build();
}

json Network::to_json() const {
    json j;
    j["constants"] = {{"g", constants_.g}, {"theta", constants_.theta}};
    j["nodes"] = json::array();
    for (const auto& nd : nodes_)
        j["nodes"].push_back({{"id", nd.id}, {"part", part_name(nd.part)}});
    j["arcs"] = json::array();
    for (const auto& a : arcs_) {
        json aj{{"id", a.id},
                {"kind", kind_name(a.kind)},
                {"tail", nodes_[a.tail].id},
                {"head", nodes_[a.head].id}};
        if (a.pipe) {
            aj["pipe"] = {{"length", a.pipe->length},
                          {"diameter", a.pipe->diameter},
                          {"slope", a.pipe->slope},
                          {"roughness", a.pipe->roughness},
                          {"heat_transmission", a.pipe->heat_transmission}};
        }
        j["arcs"].push_back(std::move(aj));
    }
    return j;
}

Network Network::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open network file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw SchemaError("network file '" + path + "': " + e.what());
    }
    return from_json(j);
}

void Network::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write network file '" + path + "'");
    out << to_json().dump(2) << "\n";
}

int Network::Builder::add_node(const std::string& id, NodePart part) {
    nodes.push_back({id, part});
    return static_cast<int>(nodes.size()) - 1;
}

int Network::Builder::add_pipe(const std::string& id, int tail, int head,
                               const PipeAttributes& attrs) {
    const NodePart part = nodes.at(tail).part;
    const ArcKind kind = part == NodePart::foreflow ? ArcKind::pipe_ff : ArcKind::pipe_bf;
    arcs.push_back({id, tail, head, kind, attrs});
    return static_cast<int>(arcs.size()) - 1;
}

int Network::Builder::add_consumer(const std::string& id, int tail, int head) {
    arcs.push_back({id, tail, head, ArcKind::consumer, std::nullopt});
    return static_cast<int>(arcs.size()) - 1;
}

int Network::Builder::add_depot(const std::string& id, int tail, int head) {
    arcs.push_back({id, tail, head, ArcKind::depot, std::nullopt});
    return static_cast<int>(arcs.size()) - 1;
}

Network Network::Builder::build() {
    Network net;
    net.nodes_ = std::move(nodes);
    net.arcs_ = std::move(arcs);
    net.constants_ = constants;
    net.material_ = material;
    net.bounds_ = bounds;
    net.finalize();
    return net;
}

FlowPartition flow_partition(const Network& net, const std::vector<double>& qhat) {
    if (qhat.size() != net.arcs().size())
        throw std::invalid_argument("flow_partition: qhat size mismatch");
    const int n = static_cast<int>(net.nodes().size());
    FlowPartition part;
    part.inflow.assign(n, {});
    part.outflow.assign(n, {});
    part.reversed.assign(net.arcs().size(), false);
    for (std::size_t ai = 0; ai < net.arcs().size(); ++ai) {
        const Arc& a = net.arc(static_cast<int>(ai));
        const double q = qhat[ai];
        part.reversed[ai] = q < 0.0;
        // head: topologically ingoing; q >= 0 -> I_n, q < 0 -> O_n
        (q >= 0.0 ? part.inflow : part.outflow)[a.head].push_back(static_cast<int>(ai));
        // tail: topologically outgoing; q <= 0 -> I_n, q > 0 -> O_n
        (q <= 0.0 ? part.inflow : part.outflow)[a.tail].push_back(static_cast<int>(ai));
    }
    return part;
}

std::vector<double> volume_residuals(const Network& net, const std::vector<double>& qhat) {
    const int n = static_cast<int>(net.nodes().size());
    std::vector<double> res(n, 0.0);
    for (int v = 0; v < n; ++v) {
        double balance = 0.0, scale = 0.0;
        for (int ai : net.in_arcs()[v]) {
            balance += qhat[ai];
            scale += std::abs(qhat[ai]);
        }
        for (int ai : net.out_arcs()[v]) {
            balance -= qhat[ai];
            scale += std::abs(qhat[ai]);
        }
        res[v] = std::abs(balance) / std::max(scale, 1e-300);
    }
    return res;
}

namespace {

// Directed BFS over pipe arcs of one network part; returns the arc sequence
// from `from` to `to`, or empty when unreachable.
std::vector<int> directed_pipe_path(const Network& net, int from, int to) {
    std::vector<int> pred_arc(net.nodes().size(), -1);
    std::vector<char> seen(net.nodes().size(), 0);
    std::queue<int> q;
    q.push(from);
    seen[from] = 1;
    while (!q.empty() && !seen[to]) {
        const int v = q.front();
        q.pop();
        for (int ai : net.out_arcs()[v]) {
            const Arc& a = net.arc(ai);
            if (!a.is_pipe() || seen[a.head]) continue;
            seen[a.head] = 1;
            pred_arc[a.head] = ai;
            q.push(a.head);
        }
    }
    std::vector<int> path;
    if (!seen[to]) return path;
    for (int v = to; v != from;) {
        const int ai = pred_arc[v];
        path.push_back(ai);
        v = net.arc(ai).tail;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

}  // namespace

std::vector<double> consumer_cycle_flow(const Network& net, int consumer_arc,
                                        double magnitude) {
    const Arc& c = net.arc(consumer_arc);
    if (c.kind != ArcKind::consumer)
        throw std::invalid_argument("consumer_cycle_flow: arc is not a consumer");
    const Arc& d = net.arc(net.depot());
    std::vector<double> qhat(net.arcs().size(), 0.0);
    const auto ff_path = directed_pipe_path(net, d.head, c.tail);
    const auto bf_path = directed_pipe_path(net, c.head, d.tail);
    if ((ff_path.empty() && d.head != c.tail) || (bf_path.empty() && c.head != d.tail))
        throw SchemaError("consumer_cycle_flow: no directed pipe route for consumer '" +
                          c.id + "'");
    for (int ai : ff_path) qhat[ai] += magnitude;
    for (int ai : bf_path) qhat[ai] += magnitude;
    qhat[consumer_arc] += magnitude;
    qhat[net.depot()] += magnitude;
    return qhat;
}

std::vector<double> random_solenoidal_flow(const Network& net, std::mt19937& rng,
                                           double scale) {
    std::uniform_real_distribution<double> mag(0.3, 1.0);
    std::vector<double> qhat(net.arcs().size(), 0.0);
    for (int c : net.consumers()) {
        const auto cycle = consumer_cycle_flow(net, c, mag(rng) * scale);
        for (std::size_t i = 0; i < qhat.size(); ++i) qhat[i] += cycle[i];
    }

    // bounded circulations on the pipe graph's fundamental cycles
    const int n = static_cast<int>(net.nodes().size());
    std::vector<int> parent(n);
    for (int i = 0; i < n; ++i) parent[i] = i;
    std::function<int(int)> find = [&](int v) {
        while (parent[v] != v) v = parent[v] = parent[parent[v]];
        return v;
    };
    std::vector<std::vector<std::pair<int, int>>> tree_adj(n);  // (neighbor, arc)
    std::vector<int> non_tree;
    for (int pi : net.pipes()) {
        const Arc& a = net.arc(pi);
        const int ra = find(a.tail), rb = find(a.head);
        if (ra != rb) {
            parent[ra] = rb;
            tree_adj[a.tail].push_back({a.head, pi});
            tree_adj[a.head].push_back({a.tail, pi});
        } else {
            non_tree.push_back(pi);
        }
    }
    std::uniform_real_distribution<double> frac(0.0, 0.5);
    for (int pi : non_tree) {
        const Arc& a = net.arc(pi);
        // tree path head -> tail closes the cycle through the non-tree arc
        std::vector<int> pred_node(n, -1), pred_arc(n, -1);
        std::vector<char> seen(n, 0);
        std::queue<int> q;
        q.push(a.head);
        seen[a.head] = 1;
        while (!q.empty() && !seen[a.tail]) {
            const int v = q.front();
            q.pop();
            for (const auto& [w, ai] : tree_adj[v]) {
                if (seen[w]) continue;
                seen[w] = 1;
                pred_node[w] = v;
                pred_arc[w] = ai;
                q.push(w);
            }
        }
        if (!seen[a.tail]) continue;
        // circulation: +c along the non-tree arc, +/-c along the tree path
        std::vector<std::pair<int, double>> signs{{pi, 1.0}};
        double c_max = 1e300;
        for (int v = a.tail; v != a.head; v = pred_node[v]) {
            const int ai = pred_arc[v];
            const Arc& ta = net.arc(ai);
            const double sgn = ta.head == v ? 1.0 : -1.0;  // traversed with or against
            signs.push_back({ai, sgn});
            if (sgn < 0.0) c_max = std::min(c_max, qhat[ai]);
        }
        if (c_max == 1e300) c_max = scale;
        if (c_max <= 0.0) continue;  // keep the sample flow-aligned
        const double c = frac(rng) * std::min(c_max, scale);
        for (const auto& [ai, sgn] : signs) qhat[ai] += sgn * c;
    }
    return qhat;
}

namespace {

PipeAttributes trunk_pipe() {
    PipeAttributes p;
    p.length = 300.0;
    p.diameter = 0.06;
    p.roughness = 1e-4;
    p.heat_transmission = 0.5;
    return p;
}

PipeAttributes arm_pipe() {
    PipeAttributes p;
    p.length = 150.0;
    p.diameter = 0.04;
    p.roughness = 1e-4;
    p.heat_transmission = 0.5;
    return p;
}

}  // namespace

Network make_path_network(int consumers, int ff_segments, int bf_segments) {
    if (consumers < 1) throw std::invalid_argument("make_path_network: consumers >= 1");
    if (ff_segments < 0) ff_segments = consumers;
    if (bf_segments < 0) bf_segments = consumers;
    if (ff_segments < 1 || bf_segments < 1)
        throw std::invalid_argument("make_path_network: segments >= 1");

    Network::Builder b;
    std::vector<int> ff(ff_segments + 1), bf(bf_segments + 1);
    for (int i = 0; i <= ff_segments; ++i)
        ff[i] = b.add_node("f" + std::to_string(i), NodePart::foreflow);
    for (int i = 0; i <= bf_segments; ++i)
        bf[i] = b.add_node("b" + std::to_string(i), NodePart::backflow);

    for (int i = 0; i < ff_segments; ++i)
        b.add_pipe("pf" + std::to_string(i), ff[i], ff[i + 1], trunk_pipe());
    // backflow chain oriented toward the depot tail b0
    for (int i = 0; i < bf_segments; ++i)
        b.add_pipe("pb" + std::to_string(i), bf[i + 1], bf[i], trunk_pipe());

    // consumers attached at foreflow junctions, last one at the chain end
    for (int c = 0; c < consumers; ++c) {
        const int fi = std::min(ff_segments, (c + 1) * ff_segments / consumers);
        const int bi = std::min(bf_segments, (c + 1) * bf_segments / consumers);
        b.add_consumer("c" + std::to_string(c), ff[fi], bf[bi]);
    }
    b.add_depot("depot", bf[0], ff[0]);
    return b.build();
}

Network make_star_network(int consumers) {
    if (consumers < 1) throw std::invalid_argument("make_star_network: consumers >= 1");
    Network::Builder b;
    const int f0 = b.add_node("f0", NodePart::foreflow);
    const int f1 = b.add_node("f1", NodePart::foreflow);
    const int fhub = b.add_node("fhub", NodePart::foreflow);
    const int b0 = b.add_node("b0", NodePart::backflow);
    const int b1 = b.add_node("b1", NodePart::backflow);
    const int bhub = b.add_node("bhub", NodePart::backflow);

    b.add_pipe("pf0", f0, f1, trunk_pipe());
    b.add_pipe("pf1", f1, fhub, trunk_pipe());
    b.add_pipe("pb1", bhub, b1, trunk_pipe());
    b.add_pipe("pb0", b1, b0, trunk_pipe());

    for (int c = 0; c < consumers; ++c) {
        const int fa = b.add_node("fa" + std::to_string(c), NodePart::foreflow);
        const int ba = b.add_node("ba" + std::to_string(c), NodePart::backflow);
        b.add_pipe("paf" + std::to_string(c), fhub, fa, arm_pipe());
        b.add_pipe("pab" + std::to_string(c), ba, bhub, arm_pipe());
        b.add_consumer("c" + std::to_string(c), fa, ba);
    }
    b.add_depot("depot", b0, f0);
    return b.build();
}

Network make_two_loop_network(int consumers) {
    if (consumers < 1) throw std::invalid_argument("make_two_loop_network: consumers >= 1");
    Network::Builder b;

    auto side = [&](NodePart part, const std::string& prefix) {
        // entry -> j0, diamond j0 -> (4 segments each path) -> j1, j1 -> exit
        std::vector<int> nodes;
        const auto np = [&](const std::string& id) { return b.add_node(prefix + id, part); };
        const int entry = np("entry");
        const int j0 = np("j0");
        const int j1 = np("j1");
        const int exit = np("exit");
        PipeAttributes seg = trunk_pipe();
        seg.length = 150.0;
        b.add_pipe(prefix + "trunk0", entry, j0, seg);
        for (const char* path : {"a", "b"}) {
            int prev = j0;
            for (int i = 0; i < 3; ++i) {
                const int mid = np(std::string(path) + std::to_string(i));
                b.add_pipe(prefix + path + "seg" + std::to_string(i), prev, mid, seg);
                prev = mid;
            }
            b.add_pipe(prefix + std::string(path) + "seg3", prev, j1, seg);
        }
        b.add_pipe(prefix + "trunk1", j1, exit, seg);
        return std::pair<int, int>{entry, exit};
    };

    auto [f_entry, f_exit] = side(NodePart::foreflow, "f_");
    // backflow side mirrors the foreflow, oriented toward the depot tail
    auto [b_exit, b_entry] = side(NodePart::backflow, "b_");

    for (int c = 0; c < consumers; ++c)
        b.add_consumer("c" + std::to_string(c), f_exit, b_exit);
    b.add_depot("depot", b_entry, f_entry);
    return b.build();
}

}  // namespace dhnet
