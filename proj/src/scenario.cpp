#include "dhnet/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dhnet/errors.hpp"
#include "dhnet/log.hpp"

namespace dhnet {

using nlohmann::json;

double PiecewiseLinear::eval(double time) const {
    if (t.empty()) throw std::logic_error("PiecewiseLinear: empty table");
    if (time <= t.front()) return v.front();
    if (time >= t.back()) return v.back();
    const auto it = std::upper_bound(t.begin(), t.end(), time);
    const std::size_t i = static_cast<std::size_t>(it - t.begin());
    const double w = (time - t[i - 1]) / (t[i] - t[i - 1]);
    return (1.0 - w) * v[i - 1] + w * v[i];
}

PiecewiseLinear PiecewiseLinear::constant(double value) {
    return PiecewiseLinear{{0.0}, {value}};
}

namespace {

std::vector<std::pair<double, double>> read_time_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open time table '" + path + "'");
    std::vector<std::pair<double, double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double t, v;
        if (ls >> t >> v) rows.emplace_back(t, v);
        // non-numeric rows (headers) are skipped
    }
    if (rows.empty()) throw SchemaError("time table '" + path + "' has no rows");
    return rows;
}

// profile node: {"constant": v} | {"table": [[t,v],...]} | {"csv": "path"}
PiecewiseLinear read_profile(const json& j, const std::string& base_dir) {
    PiecewiseLinear p;
    if (j.contains("constant")) {
        return PiecewiseLinear::constant(j.at("constant").get<double>());
    }
    if (j.contains("table")) {
        for (const auto& row : j.at("table")) {
            p.t.push_back(row.at(0).get<double>());
            p.v.push_back(row.at(1).get<double>());
        }
    } else if (j.contains("csv")) {
        std::string path = j.at("csv").get<std::string>();
        if (!path.empty() && path[0] != '/' && !base_dir.empty())
            path = base_dir + "/" + path;
        for (const auto& [t, v] : read_time_csv(path)) {
            p.t.push_back(t);
            p.v.push_back(v);
        }
    } else {
        throw SchemaError("profile needs 'constant', 'table' or 'csv'");
    }
    if (p.t.empty()) throw SchemaError("profile table is empty");
    if (!std::is_sorted(p.t.begin(), p.t.end()))
        throw SchemaError("profile times must be non-decreasing");
    return p;
}

PiecewiseLinear to_energy(const PiecewiseLinear& p, const std::string& unit,
                          const MaterialModel& material) {
    if (unit == "energy") return p;
    if (unit != "temperature") throw SchemaError("injection unit must be temperature|energy");
    PiecewiseLinear out = p;
    for (double& val : out.v) val = material.energy_of_temperature(val);
    return out;
}

}  // namespace

double Scenario::u_e_at(const TimeGrid& grid, int step) const {
    if (u_e_steps) return u_e_steps->at(static_cast<std::size_t>(step));
    return u_e.eval(grid.midpoint(step));
}

double Scenario::total_demand(double time) const {
    double sum = 0.0;
    for (const auto& d : demand) sum += d.eval(time);
    return sum;
}

HydraulicClosure Scenario::closure_at(double time) const {
    HydraulicClosure c;
    c.consumer_power.reserve(demand.size());
    for (const auto& d : demand) c.consumer_power.push_back(d.eval(time));
    c.u_p = u_p.eval(time);
    c.u_dp = u_dp.eval(time);
    c.u_e = u_e.eval(time);
    c.e_bf = e_bf;
    return c;
}

void Scenario::validate(const Network& net) const {
    if (demand.size() != net.consumers().size())
        throw SchemaError("scenario demand count (" + std::to_string(demand.size()) +
                          ") does not match the network's consumers (" +
                          std::to_string(net.consumers().size()) + ")");
    if (t_end <= t0) throw SchemaError("scenario horizon is empty");
    // injected temperature must respect the network cap
    if (bounds.T_net < 1e300) {
        for (double val : u_e.v) {
            const double T = net.material().temperature_of_energy(val);
            if (T > bounds.T_net)
                throw SchemaError("scenario injection T(u_e) = " + std::to_string(T) +
                                  " degC exceeds T_net = " + std::to_string(bounds.T_net));
        }
    }
}

Scenario Scenario::load(const std::string& path, const Network& net) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open scenario file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw SchemaError("scenario file '" + path + "': " + e.what());
    }
    std::string base_dir;
    if (const auto slash = path.find_last_of('/'); slash != std::string::npos)
        base_dir = path.substr(0, slash);

    Scenario sc;
    sc.t0 = j.value("t0", 0.0);
    if (!j.contains("t_end")) throw SchemaError("scenario needs 't_end'");
    sc.t_end = j.at("t_end").get<double>();
    sc.T_bf = j.value("T_bf", 60.0);
    sc.e_bf = net.material().energy_of_temperature(sc.T_bf);
    sc.enable_cooling = j.value("enable_cooling", false);

    if (!j.contains("injection")) throw SchemaError("scenario needs 'injection'");
    {
        const auto& inj = j.at("injection");
        const std::string unit = inj.value("unit", "temperature");
        sc.u_e = to_energy(read_profile(inj, base_dir), unit, net.material());
    }
    if (j.contains("stagnation_pressure"))
        sc.u_p = read_profile(j.at("stagnation_pressure"), base_dir);
    if (j.contains("pressure_increase"))
        sc.u_dp = read_profile(j.at("pressure_increase"), base_dir);
    if (j.contains("initial")) {
        const auto& ij = j.at("initial");
        if (ij.contains("T_ff"))
            sc.init_e_ff = net.material().energy_of_temperature(ij.at("T_ff").get<double>());
        else if (ij.contains("e_ff"))
            sc.init_e_ff = ij.at("e_ff").get<double>();
    }

    sc.bounds = net.bounds();
    sc.bounds.T_bf = sc.T_bf;
    if (j.contains("bounds")) {
        const auto& bd = j.at("bounds");
        auto& ob = sc.bounds;
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

    if (!j.contains("demand")) throw SchemaError("scenario needs 'demand'");
    const auto& dj = j.at("demand");
    const int n_cons = static_cast<int>(net.consumers().size());
    if (dj.contains("synthetic")) {
        const auto& sj = dj.at("synthetic");
        sc.demand = synthetic_demand(sj.at("mean_total").get<double>(),
                                     sj.at("max_total").get<double>(), n_cons, sc.t0,
                                     sc.t_end, sj.value("sample_dt", 900.0));
    } else if (dj.contains("per_consumer")) {
        sc.demand.resize(n_cons);
        const auto& pc = dj.at("per_consumer");
        for (int c = 0; c < n_cons; ++c) {
            const std::string& id = net.arc(net.consumers()[c]).id;
            if (!pc.contains(id))
                throw SchemaError("demand missing for consumer '" + id + "'");
            sc.demand[c] = read_profile(pc.at(id), base_dir);
        }
    } else if (dj.contains("total")) {
        const PiecewiseLinear total = read_profile(dj.at("total"), base_dir);
        PiecewiseLinear split = total;
        for (double& val : split.v) val /= n_cons;
        sc.demand.assign(n_cons, split);
    } else {
        throw SchemaError("demand needs 'synthetic', 'per_consumer' or 'total'");
    }

    sc.validate(net);
    return sc;
}

std::vector<PiecewiseLinear> synthetic_demand(double mean_total, double max_total,
                                              int consumers, double t0, double t_end,
                                              double sample_dt) {
    if (consumers < 1) throw std::invalid_argument("synthetic_demand: consumers >= 1");
    if (max_total < mean_total)
        throw std::invalid_argument("synthetic_demand: max must be >= mean");

    auto shape = [](double t) {
        const double h = std::fmod(t / 3600.0, 24.0);
        const double morning = std::exp(-std::pow((h - 7.0) / 2.0, 2));
        const double evening = 0.9 * std::exp(-std::pow((h - 19.0) / 2.5, 2));
        return morning + evening;
    };

    PiecewiseLinear total;
    for (double t = t0; t <= t_end + 0.5 * sample_dt; t += sample_dt) {
        total.t.push_back(t);
        total.v.push_back(shape(t));
    }
    double mean_s = 0.0, max_s = -1e300;
    for (double s : total.v) {
        mean_s += s;
        max_s = std::max(max_s, s);
    }
    mean_s /= static_cast<double>(total.v.size());

    double alpha, beta;
    if (max_s - mean_s < 1e-12) {
        alpha = mean_total;
        beta = 0.0;
    } else {
        beta = (max_total - mean_total) / (max_s - mean_s);
        alpha = mean_total - beta * mean_s;
    }
    for (double& s : total.v) {
        s = alpha + beta * s;
        if (s < 0.0) s = 0.0;
    }

    PiecewiseLinear per = total;
    for (double& s : per.v) s /= consumers;
    return std::vector<PiecewiseLinear>(static_cast<std::size_t>(consumers), per);
}

FeedInSeries feed_in_power(const TrajectoryRecord& traj, const Scenario& scenario) {
    FeedInSeries series;
    series.t.reserve(traj.steps.size());
    series.P_in.reserve(traj.steps.size());
    double sum = 0.0;
    series.max = -1e300;
    for (const auto& s : traj.steps) {
        series.t.push_back(s.t);
        series.P_in.push_back(s.P_in);
        sum += s.P_in;
        series.max = std::max(series.max, s.P_in);
    }
    series.mean = traj.steps.empty() ? 0.0 : sum / static_cast<double>(traj.steps.size());

    // under the uncooled model the depot-tail energy relaxes to e_bf
    const std::size_t half = traj.steps.size() / 2;
    for (std::size_t k = half; k < traj.steps.size(); ++k) {
        series.max_tail_deviation =
            std::max(series.max_tail_deviation,
                     std::abs(traj.steps[k].e_depot_tail - scenario.e_bf));
    }
    if (!scenario.enable_cooling && !traj.steps.empty() &&
        series.max_tail_deviation > 1e-9 * std::max(scenario.e_bf, 1.0)) {
        log::warn("feed_in_power: depot-tail energy deviates from e_bf by " +
                  std::to_string(series.max_tail_deviation) + " J/m^3 after flushing");
    }
    return series;
}

EnergyAccounting energy_accounting(const TrajectoryRecord& traj, const Mesh& mesh,
                                   const Network& net, const Scenario& scenario) {
    EnergyAccounting acc;
    Eigen::VectorXd Q(mesh.total_cells());
    for (const auto& mp : mesh.pipes()) {
        const double vol = net.arc(mp.arc).pipe->cross_section() * mp.dx;
        for (int c = 0; c < mp.cells; ++c) Q[mp.offset + c] = vol;
    }
    const double dt = traj.grid.dt;
    for (std::size_t k = 0; k < traj.steps.size(); ++k) {
        acc.injected += traj.steps[k].P_in * dt;
        acc.consumed_delivered += traj.steps[k].P_delivered * dt;
        acc.consumed_scheduled += scenario.total_demand(traj.grid.midpoint(static_cast<int>(k))) * dt;
    }
    acc.storage_change = Q.dot(traj.e.back()) - Q.dot(traj.e.front());
    const double scale = std::max({std::abs(acc.injected), std::abs(acc.consumed_scheduled), 1.0});
    acc.closure_rel =
        std::abs(acc.injected - acc.consumed_scheduled - acc.storage_change) / scale;
    return acc;
}

std::string CaseStudyReport::to_csv() const {
    std::ostringstream os;
    os.precision(12);
    os << "t,T_injected_constant,T_injected_improved,P_in_constant,P_in_improved,"
          "threshold,mean_constant\n";
    for (std::size_t k = 0; k < constant_series.t.size(); ++k) {
        os << constant_series.t[k] << "," << T_injected_constant[k] << ","
           << T_injected_improved[k] << "," << constant_series.P_in[k] << ","
           << improved_series.P_in[k] << "," << threshold << "," << constant_series.mean
           << "\n";
    }
    return os.str();
}

std::string CaseStudyReport::gnuplot_script(const std::string& csv_path) {
    std::ostringstream os;
    os << "set datafile separator ','\n"
       << "set key autotitle columnhead\n"
       << "set multiplot layout 2,1\n"
       << "set ylabel 'T injected [degC]'\n"
       << "plot '" << csv_path << "' using 1:2 with lines, '' using 1:3 with lines\n"
       << "set ylabel 'feed-in power [W]'\n"
       << "set xlabel 't [s]'\n"
       << "plot '" << csv_path << "' using 1:4 with lines, '' using 1:5 with lines, "
       << "'' using 1:6 with lines, '' using 1:7 with lines\n"
       << "unset multiplot\n";
    return os.str();
}

CaseStudyReport run_case_study(const Network& net, const Mesh& mesh,
                               const Scenario& scenario_constant,
                               const Scenario& scenario_improved, const TimeGrid& grid,
                               const SimOptions& options) {
    CaseStudyReport rep;
    const TrajectoryRecord traj_const = simulate(net, mesh, scenario_constant, grid, options);
    const TrajectoryRecord traj_impr = simulate(net, mesh, scenario_improved, grid, options);
    rep.constant_series = feed_in_power(traj_const, scenario_constant);
    rep.improved_series = feed_in_power(traj_impr, scenario_improved);
    rep.constant_accounting = energy_accounting(traj_const, mesh, net, scenario_constant);
    rep.improved_accounting = energy_accounting(traj_impr, mesh, net, scenario_improved);
    rep.threshold = rep.improved_series.max;
    for (const auto& s : traj_const.steps)
        rep.T_injected_constant.push_back(net.material().temperature_of_energy(s.u_e));
    for (const auto& s : traj_impr.steps)
        rep.T_injected_improved.push_back(net.material().temperature_of_energy(s.u_e));
    return rep;
}

namespace {

struct GreedyOutcome {
    bool feasible = false;
    double peak = 0.0;
    std::vector<double> profile;
    std::string blocker;
};

GreedyOutcome greedy_cap_run(const Network& net, const Mesh& mesh, const Scenario& base,
                             const TimeGrid& grid, double cap, double u_lo, double u_hi,
                             double u_baseline, const SimOptions& sim_options) {
    GreedyOutcome out;
    Scenario sc = base;
    sc.u_e = PiecewiseLinear::constant(u_baseline);
    sc.u_e_steps.reset();
    sc.init_e_ff = u_baseline;  // start from the baseline fill level

    // store-early policy: inject as hot as the cap allows
    SimOptions opts = sim_options;
    std::vector<double> profile(static_cast<std::size_t>(grid.steps), u_hi);
    opts.injection_controller = [&profile, cap, u_lo, u_hi](int k, double, double q_c,
                                                            double e_tail) {
        double u = u_hi;
        if (q_c > 0.0) u = std::clamp(e_tail + cap / q_c, u_lo, u_hi);
        profile[static_cast<std::size_t>(k)] = u;
        return u;
    };

    TrajectoryRecord traj;
    try {
        traj = simulate(net, mesh, sc, grid, opts);
    } catch (const InfeasibleClosureError& err) {
        out.blocker = err.what();
        return out;
    } catch (const SolverError& err) {
        out.blocker = err.what();
        return out;
    }

    out.profile = profile;
    out.peak = -1e300;
    for (const auto& s : traj.steps) out.peak = std::max(out.peak, s.P_in);

    const double slack = 1e-9 * std::max(cap, 1.0);
    for (const auto& s : traj.steps) {
        if (s.P_in > cap + slack) {
            out.blocker = "feed-in cap exceeded at t = " + std::to_string(s.t) +
                          " (u_e at its lower bound)";
            return out;
        }
    }
    for (const auto& rep : traj.bound_reports) {
        if (!rep.violations.empty()) {
            out.blocker = "operational bound '" + rep.violations.front().constraint +
                          "' violated at " + rep.violations.front().location;
            return out;
        }
    }

    // the peak must not be bought by draining the initial pipe inventory:
    // the horizon has to end at least as charged as it started
    Eigen::VectorXd Q(mesh.total_cells());
    for (const auto& mp : mesh.pipes()) {
        const double vol = net.arc(mp.arc).pipe->cross_section() * mp.dx;
        for (int c = 0; c < mp.cells; ++c) Q[mp.offset + c] = vol;
    }
    const double e_start = Q.dot(traj.e.front());
    const double e_end = Q.dot(traj.e.back());
    if (e_end < e_start - 1e-9 * std::abs(e_start)) {
        out.blocker = "final storage below the initial fill (" +
                      std::to_string(e_start - e_end) + " J drained)";
        return out;
    }
    out.feasible = true;
    return out;
}

}  // namespace

PeakOptimizationResult optimize_peak(const Network& net, const Mesh& mesh,
                                     const Scenario& demand_scenario, const TimeGrid& grid,
                                     double u_lo, double u_hi, double u_baseline,
                                     const PeakOptimizationOptions& options) {
    if (!(u_lo < u_hi)) throw std::invalid_argument("optimize_peak: u_lo must be < u_hi");

    PeakOptimizationResult res;

    Scenario baseline = demand_scenario;
    baseline.u_e = PiecewiseLinear::constant(u_baseline);
    baseline.u_e_steps.reset();
    baseline.init_e_ff = u_baseline;
    const TrajectoryRecord traj_base = simulate(net, mesh, baseline, grid, options.sim);
    res.baseline_peak = -1e300;
    for (const auto& s : traj_base.steps) res.baseline_peak = std::max(res.baseline_peak, s.P_in);
    ++res.simulations;

    res.u_e_steps.assign(static_cast<std::size_t>(grid.steps), u_baseline);
    res.peak = res.baseline_peak;
    res.cap = res.baseline_peak;

    if (options.budget <= 0) return res;

    double lo = 0.0, hi = res.baseline_peak;
    bool found = false;
    for (int it = 0; it < options.budget; ++it) {
        const double cap = found || it > 0 ? 0.5 * (lo + hi) : hi;
        GreedyOutcome out = greedy_cap_run(net, mesh, demand_scenario, grid, cap, u_lo,
                                           u_hi, u_baseline, options.sim);
        ++res.simulations;
        if (out.feasible) {
            found = true;
            hi = cap;
            if (out.peak <= res.peak) {
                res.peak = out.peak;
                res.cap = cap;
                res.u_e_steps = out.profile;
                res.improved = true;
            }
        } else {
            lo = cap;
            res.binding_constraint = out.blocker;
        }
    }
    if (!found) {
        // infeasible even at the baseline peak cap: report and fall back
        log::warn("optimize_peak: no feasible cap found; returning the constant baseline (" +
                  res.binding_constraint + ")");
        res.u_e_steps.assign(static_cast<std::size_t>(grid.steps), u_baseline);
        res.peak = res.baseline_peak;
        res.cap = res.baseline_peak;
        res.improved = false;
    } else {
        res.binding_constraint.clear();
    }
    return res;
}

}  // namespace dhnet
