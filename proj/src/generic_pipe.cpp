#include "dhnet/generic_pipe.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace dhnet {

Eigen::VectorXd PipeGrid::weights() const {
    Eigen::VectorXd w = Eigen::VectorXd::Constant(n, dx());
    w[0] *= 0.5;
    w[n - 1] *= 0.5;
    return w;
}

SpMat PipeGrid::derivative() const {
    const double inv = 1.0 / dx();
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < n - 1; ++i) {
        t.emplace_back(i, i, -inv);
        t.emplace_back(i, i + 1, inv);
    }
    t.emplace_back(n - 1, n - 2, -inv);
    t.emplace_back(n - 1, n - 1, inv);
    SpMat D(n, n);
    D.setFromTriplets(t.begin(), t.end());
    return D;
}

PipeGrid PipeGrid::make(int nodes, double length) {
    if (nodes < 2) throw std::invalid_argument("PipeGrid: need at least 2 nodes");
    if (length <= 0.0) throw std::invalid_argument("PipeGrid: length must be > 0");
    return PipeGrid{nodes, length};
}

void PipeStateZ::check() const {
    if (rho.size() != grid.n || M.size() != grid.n || e.size() != grid.n)
        throw std::invalid_argument("PipeStateZ: field sizes do not match the grid");
    for (int i = 0; i < grid.n; ++i) {
        if (!std::isfinite(rho[i]) || !std::isfinite(M[i]) || !std::isfinite(e[i]))
            throw std::domain_error("PipeStateZ: non-finite entry");
        if (rho[i] < delta)
            throw std::domain_error("PipeStateZ: rho below the positivity floor");
    }
}

double IdealGasLaw::entropy(double rho, double e) const {
    return 0.5 * R_gas * rho * std::log(c_p * e * e * e / std::pow(rho, 5));
}

double IdealGasLaw::temperature(double rho, double e) const {
    return 2.0 / (3.0 * R_gas) * e / rho;
}

double IdealGasLaw::pressure(double /*rho*/, double e) const { return 2.0 / 3.0 * e; }

double IdealGasLaw::ds_drho(double rho, double e) const {
    return entropy(rho, e) / rho - 2.5 * R_gas;
}

double IdealGasLaw::ds_de(double rho, double e) const {
    return 1.5 * R_gas * rho / e;  // equals 1/T
}

Eigen::VectorXd EnergyFunctionals::stack_dE() const {
    Eigen::VectorXd v(dE_rho.size() * 3);
    v << dE_rho, dE_M, dE_e;
    return v;
}

Eigen::VectorXd EnergyFunctionals::stack_dH() const {
    Eigen::VectorXd v(dH_rho.size() * 3);
    v << dH_rho, dH_M, dH_e;
    return v;
}

Eigen::VectorXd EnergyFunctionals::stack_dS() const {
    Eigen::VectorXd v(dS_rho.size() * 3);
    v << dS_rho, dS_M, dS_e;
    return v;
}

EnergyFunctionals energy_and_gradient(const PipeStateZ& z, const IdealGasLaw& law,
                                      const GenericParams& params) {
    z.check();
    const int n = z.grid.n;
    const Eigen::VectorXd w = z.grid.weights();

    EnergyFunctionals f;
    f.dE_rho.resize(n);
    f.dE_M.resize(n);
    f.dE_e.resize(n);
    f.dH_rho.resize(n);
    f.dH_M.resize(n);
    f.dH_e.resize(n);
    f.dS_rho.resize(n);
    f.dS_M = Eigen::VectorXd::Zero(n);
    f.dS_e.resize(n);

    for (int i = 0; i < n; ++i) {
        const double rho = z.rho[i], M = z.M[i], e = z.e[i];
        const double v = M / rho;
        const double h = params.slope * z.grid.x(i);
        const double s = law.entropy(rho, e);
        const double kin = 0.5 * M * M / rho;

        f.hamiltonian += w[i] * (kin + e + rho * params.g * h);
        f.entropy += w[i] * s;

        f.dH_rho[i] = -0.5 * v * v + params.g * h;
        f.dH_M[i] = v;
        f.dH_e[i] = 1.0;
        f.dS_rho[i] = law.ds_drho(rho, e);
        f.dS_e[i] = law.ds_de(rho, e);
        f.dE_rho[i] = f.dH_rho[i] - law.theta * f.dS_rho[i];
        f.dE_M[i] = v;
        f.dE_e[i] = 1.0 - law.theta * f.dS_e[i];
    }
    f.exergy = f.hamiltonian - law.theta * f.entropy;
    return f;
}

namespace {

inline int idx_rho(int i, int /*n*/) { return i; }
inline int idx_M(int i, int n) { return n + i; }
inline int idx_e(int i, int n) { return 2 * n + i; }

void add_block(std::vector<Eigen::Triplet<double>>& t, const Eigen::MatrixXd& blk,
               int row0, int col0) {
    for (int i = 0; i < blk.rows(); ++i)
        for (int j = 0; j < blk.cols(); ++j)
            if (blk(i, j) != 0.0) t.emplace_back(row0 + i, col0 + j, blk(i, j));
}

}  // namespace

SpMat assemble_J(const PipeStateZ& z, const IdealGasLaw& law) {
    z.check();
    const int n = z.grid.n;
    const Eigen::VectorXd w = z.grid.weights();
    const Eigen::MatrixXd D = Eigen::MatrixXd(z.grid.derivative());

    Eigen::VectorXd p(n);
    for (int i = 0; i < n; ++i) p[i] = law.pressure(z.rho[i], z.e[i]);

    // <phi_rho, J_rhoM psi_M> = int rho (psi_M d/dx) phi_rho
    const Eigen::MatrixXd J_rhoM = D.transpose() * (w.cwiseProduct(z.rho)).asDiagonal();
    // <phi_M, J_MM psi_M> = int M ((psi d/dx) phi - (phi d/dx) psi)
    const Eigen::MatrixXd WM = (w.cwiseProduct(z.M)).asDiagonal();
    const Eigen::MatrixXd J_MM = D.transpose() * WM - WM * D;
    // <phi_e, J_eM psi_M> = int e (psi d/dx) phi_e + (psi d/dx)(phi_e p)
    const Eigen::MatrixXd J_eM = D.transpose() * (w.cwiseProduct(z.e)).asDiagonal() +
                                 Eigen::MatrixXd(p.asDiagonal()) * D.transpose() *
                                     Eigen::MatrixXd(w.asDiagonal());

    std::vector<Eigen::Triplet<double>> t;
    add_block(t, J_rhoM, idx_rho(0, n), idx_M(0, n));
    add_block(t, -J_rhoM.transpose(), idx_M(0, n), idx_rho(0, n));
    add_block(t, J_MM, idx_M(0, n), idx_M(0, n));
    add_block(t, J_eM, idx_e(0, n), idx_M(0, n));
    add_block(t, -J_eM.transpose(), idx_M(0, n), idx_e(0, n));

    SpMat J(3 * n, 3 * n);
    J.setFromTriplets(t.begin(), t.end());
    return J;
}

SpMat assemble_R_friction(const PipeStateZ& z, const IdealGasLaw& law,
                          const GenericParams& params) {
    z.check();
    const int n = z.grid.n;
    const Eigen::VectorXd w = z.grid.weights();

    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < n; ++i) {
        const double T = law.temperature(z.rho[i], z.e[i]);
        if (T <= 0.0) throw std::domain_error("assemble_R: non-positive temperature");
        const double v = z.M[i] / z.rho[i];
        const double a =
            params.lambda / (2.0 * params.d) * (T / law.theta) * z.rho[i] * std::abs(v);
        if (a == 0.0) continue;
        t.emplace_back(idx_M(i, n), idx_M(i, n), w[i] * a);
        t.emplace_back(idx_M(i, n), idx_e(i, n), -w[i] * a * v);
        t.emplace_back(idx_e(i, n), idx_M(i, n), -w[i] * a * v);
        t.emplace_back(idx_e(i, n), idx_e(i, n), w[i] * a * v * v);
    }
    SpMat R(3 * n, 3 * n);
    R.setFromTriplets(t.begin(), t.end());
    return R;
}

SpMat assemble_R(const PipeStateZ& z, const IdealGasLaw& law, const GenericParams& params) {
    SpMat R = assemble_R_friction(z, law, params);
    if (params.k_w == 0.0) return R;
    const int n = z.grid.n;
    const Eigen::VectorXd w = z.grid.weights();
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < n; ++i) {
        const double T = law.temperature(z.rho[i], z.e[i]);
        if (T <= 0.0) throw std::domain_error("assemble_R: non-positive temperature");
        t.emplace_back(idx_e(i, n), idx_e(i, n), w[i] * 4.0 * params.k_w / params.d * T);
    }
    SpMat Rkw(3 * n, 3 * n);
    Rkw.setFromTriplets(t.begin(), t.end());
    return R + Rkw;
}

SpMat assemble_B(const PipeStateZ& z, const IdealGasLaw& law) {
    z.check();
    const int n = z.grid.n;
    std::vector<Eigen::Triplet<double>> t;
    const double p0 = law.pressure(z.rho[0], z.e[0]);
    const double pl = law.pressure(z.rho[n - 1], z.e[n - 1]);
    // <phi, B u> = -[(phi_rho rho + phi_M M + phi_e (e + p)) u] from 0 to l
    t.emplace_back(idx_rho(0, n), 0, z.rho[0]);
    t.emplace_back(idx_M(0, n), 0, z.M[0]);
    t.emplace_back(idx_e(0, n), 0, z.e[0] + p0);
    t.emplace_back(idx_rho(n - 1, n), 1, -z.rho[n - 1]);
    t.emplace_back(idx_M(n - 1, n), 1, -z.M[n - 1]);
    t.emplace_back(idx_e(n - 1, n), 1, -(z.e[n - 1] + pl));
    SpMat B(3 * n, 2);
    B.setFromTriplets(t.begin(), t.end());
    return B;
}

PortPair port_pairing(const PipeStateZ& z, const IdealGasLaw& law,
                      const GenericParams& params) {
    z.check();
    const int n = z.grid.n;
    PortPair pp;
    pp.u[0] = z.M[0] / z.rho[0];
    pp.u[1] = z.M[n - 1] / z.rho[n - 1];

    auto val = [&](int i) {
        const double rho = z.rho[i], M = z.M[i], e = z.e[i];
        const double h = params.slope * z.grid.x(i);
        const double hball = e - law.theta * law.entropy(rho, e);
        return 0.5 * M * M / rho + law.pressure(rho, e) + hball + rho * params.g * h;
    };
    pp.y[0] = val(0);
    pp.y[1] = -val(n - 1);
    return pp;
}

double dual_l2_norm(const Eigen::VectorXd& r, const PipeGrid& grid) {
    const Eigen::VectorXd w = grid.weights();
    const int n = grid.n;
    if (r.size() % n != 0) throw std::invalid_argument("dual_l2_norm: size mismatch");
    double acc = 0.0;
    for (int b = 0; b < r.size() / n; ++b) {
        for (int i = 0; i < n; ++i) {
            const double field = r[b * n + i] / w[i];
            acc += w[i] * field * field;
        }
    }
    return std::sqrt(acc);
}

DegeneracyReport check_degeneracy(const PipeStateZ& z, const IdealGasLaw& law,
                                  const GenericParams& params) {
    DegeneracyReport rep;
    const EnergyFunctionals f = energy_and_gradient(z, law, params);

    const SpMat J = assemble_J(z, law);
    const Eigen::VectorXd r_j = J * f.stack_dS();
    rep.J_dS_l2 = dual_l2_norm(r_j, z.grid);
    double grad_scale = 0.0;
    for (int i = 0; i < z.grid.n; ++i)
        grad_scale = std::max({grad_scale, std::abs(f.dS_rho[i]), std::abs(f.dS_e[i])});
    rep.J_dS_rel = rep.J_dS_l2 / std::max(grad_scale, 1e-300);

    const SpMat Rl = assemble_R_friction(z, law, params);
    const Eigen::VectorXd r_r = Rl * f.stack_dH();
    rep.R_dH_max = r_r.cwiseAbs().maxCoeff();
    double r_scale = 0.0;
    for (int k = 0; k < Rl.outerSize(); ++k)
        for (SpMat::InnerIterator it(Rl, k); it; ++it)
            r_scale = std::max(r_scale, std::abs(it.value()));
    double h_scale = 0.0;
    for (int i = 0; i < z.grid.n; ++i)
        h_scale = std::max({h_scale, std::abs(f.dH_rho[i]), std::abs(f.dH_M[i]), 1.0});
    rep.R_dH_rel = rep.R_dH_max / std::max(r_scale * h_scale, 1e-300);
    return rep;
}

void strong_form_rhs(const PipeStateZ& z, const IdealGasLaw& law, const GenericParams& params,
                     Eigen::VectorXd& drho_dt, Eigen::VectorXd& dM_dt,
                     Eigen::VectorXd& de_dt) {
    z.check();
    const int n = z.grid.n;
    const Eigen::MatrixXd D = Eigen::MatrixXd(z.grid.derivative());
    const Eigen::VectorXd v = z.velocity();

    Eigen::VectorXd p(n), T(n);
    for (int i = 0; i < n; ++i) {
        p[i] = law.pressure(z.rho[i], z.e[i]);
        T[i] = law.temperature(z.rho[i], z.e[i]);
    }

    const Eigen::VectorXd rho_v = z.rho.cwiseProduct(v);
    const Eigen::VectorXd rho_v2 = rho_v.cwiseProduct(v);
    const Eigen::VectorXd e_v = z.e.cwiseProduct(v);

    drho_dt = -(D * rho_v);
    dM_dt = -(D * rho_v2) - (D * p);
    de_dt = -(D * e_v) - p.cwiseProduct(D * v);
    for (int i = 0; i < n; ++i) {
        const double fric = params.lambda / (2.0 * params.d) * z.rho[i] * std::abs(v[i]) * v[i];
        dM_dt[i] -= fric + z.rho[i] * params.g * params.slope;
        de_dt[i] += fric * v[i] - 4.0 * params.k_w / params.d * (T[i] - law.theta);
    }
}

double entropy_balance_residual(const PipeStateZ& z, const Eigen::VectorXd& drho_dt,
                                const Eigen::VectorXd& dM_dt, const Eigen::VectorXd& de_dt,
                                const IdealGasLaw& law, const GenericParams& params) {
    z.check();
    const int n = z.grid.n;
    const Eigen::MatrixXd D = Eigen::MatrixXd(z.grid.derivative());
    const Eigen::VectorXd v = z.velocity();
    (void)dM_dt;  // the balance involves only the scalar fields' rates

    Eigen::VectorXd s(n);
    for (int i = 0; i < n; ++i) s[i] = law.entropy(z.rho[i], z.e[i]);
    const Eigen::VectorXd Dsv = D * s.cwiseProduct(v);

    Eigen::VectorXd r(n);
    for (int i = 0; i < n; ++i) {
        const double T = law.temperature(z.rho[i], z.e[i]);
        const double ds_dt = law.ds_drho(z.rho[i], z.e[i]) * drho_dt[i] +
                             law.ds_de(z.rho[i], z.e[i]) * de_dt[i];
        r[i] = ds_dt + Dsv[i] -
               params.lambda / (2.0 * params.d) / T * z.rho[i] * std::abs(v[i]) * v[i] * v[i] +
               4.0 * params.k_w / params.d / T * (T - law.theta);
    }
    const Eigen::VectorXd w = z.grid.weights();
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += w[i] * r[i] * r[i];
    return std::sqrt(acc);
}

PipeStateZ manufactured_state(int nodes, double length) {
    PipeStateZ z;
    z.grid = PipeGrid::make(nodes, length);
    z.rho.resize(nodes);
    z.M.resize(nodes);
    z.e.resize(nodes);
    for (int i = 0; i < nodes; ++i) {
        const double x = z.grid.x(i) / length;
        z.rho[i] = 1.0 + 0.3 * std::sin(2.0 * std::numbers::pi * x + 0.4);
        z.M[i] = 0.5 + 0.2 * std::cos(2.0 * std::numbers::pi * x);
        z.e[i] = 1.0 + 0.25 * std::cos(2.0 * std::numbers::pi * x + 1.1);
    }
    return z;
}

GenericCheckSummary run_generic_checks(int cells, int refinements, const IdealGasLaw& law,
                                       const GenericParams& params) {
    GenericCheckSummary sum;
    sum.structural_ok = true;
    int m = cells;
    for (int level = 0; level < refinements; ++level, m *= 2) {
        const PipeStateZ z = manufactured_state(m);
        const SpMat J = assemble_J(z, law);
        const SpMat R = assemble_R(z, law, params);
        const Eigen::MatrixXd Jd(J), Rd(R);

        GenericCheckLevel lv;
        lv.cells = m;
        lv.skew = (Jd + Jd.transpose()).cwiseAbs().maxCoeff() /
                  std::max(Jd.cwiseAbs().maxCoeff(), 1e-300);
        lv.symmetry = (Rd - Rd.transpose()).cwiseAbs().maxCoeff() /
                      std::max(Rd.cwiseAbs().maxCoeff(), 1e-300);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Rd, Eigen::EigenvaluesOnly);
        lv.min_eig_rel = es.eigenvalues().minCoeff() /
                         std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);

        const DegeneracyReport deg = check_degeneracy(z, law, params);
        lv.R_dH_rel = deg.R_dH_rel;
        lv.J_dS_l2 = deg.J_dS_l2;

        Eigen::VectorXd dr, dm, de;
        strong_form_rhs(z, law, params, dr, dm, de);
        lv.entropy_residual = entropy_balance_residual(z, dr, dm, de, law, params);

        sum.structural_ok = sum.structural_ok && lv.skew <= 1e-12 && lv.symmetry <= 1e-12 &&
                            lv.min_eig_rel >= -1e-12 && deg.r_pass(1e-12);
        sum.levels.push_back(lv);
    }

    auto rate = [](const std::vector<GenericCheckLevel>& levels, auto getter) {
        double acc = 0.0;
        for (std::size_t i = 1; i < levels.size(); ++i)
            acc += std::log2(getter(levels[i - 1]) / getter(levels[i]));
        return acc / static_cast<double>(levels.size() - 1);
    };
    if (sum.levels.size() >= 2) {
        sum.j_rate = rate(sum.levels, [](const GenericCheckLevel& l) { return l.J_dS_l2; });
        sum.entropy_rate =
            rate(sum.levels, [](const GenericCheckLevel& l) { return l.entropy_residual; });
    }
    return sum;
}

}  // namespace dhnet
