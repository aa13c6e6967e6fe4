#include "dhnet/ph_core.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "dhnet/errors.hpp"

namespace dhnet {

Eigen::VectorXd PHSystem::pad_input(const Eigen::Vector2d& u) const {
    Eigen::VectorXd ut = Eigen::VectorXd::Zero(2 + n_outputs);
    ut[0] = u[0];
    ut[1] = u[1];
    return ut;
}

Eigen::VectorXd PHSystem::output(const Eigen::VectorXd& e) const {
    return Btilde.transpose() * (Q.asDiagonal() * e);
}

double PHSystem::hamiltonian(const Eigen::VectorXd& e) const {
    return e.dot(Q.asDiagonal() * e);
}

PHSystem build_ph(const SystemMatrices& sys, const Mesh& mesh, const Network& net,
                  const PHBuildOptions& options) {
    PHSystem ph;
    ph.n_outputs = static_cast<int>(sys.C.rows());

    // Q: cell volumes sigma_alpha dx_alpha
    ph.Q.resize(sys.kappa);
    for (const auto& mp : mesh.pipes()) {
        const double vol = net.arc(mp.arc).pipe->cross_section() * mp.dx;
        for (int c = 0; c < mp.cells; ++c) ph.Q[mp.offset + c] = vol;
    }

    // J = 1/2 (A Q^-1 - (A Q^-1)^T), R = -1/2 (A Q^-1 + (A Q^-1)^T)
    SpMat AQinv = sys.A * ph.Q.cwiseInverse().asDiagonal();
    SpMat AQinvT = SpMat(AQinv.transpose());
    ph.J = 0.5 * (AQinv - AQinvT);
    ph.R = -0.5 * (AQinv + AQinvT);

    // Btilde = [B, (C Q^-1)^T]
    ph.Btilde.resize(sys.kappa, 2 + ph.n_outputs);
    ph.Btilde.setZero();
    ph.Btilde.leftCols(2) = Eigen::MatrixXd(sys.B);
    Eigen::MatrixXd CQinv = Eigen::MatrixXd(sys.C) * ph.Q.cwiseInverse().asDiagonal();
    ph.Btilde.rightCols(ph.n_outputs) = CQinv.transpose();

    if (options.verify_psd) {
        Eigen::MatrixXd Rd(ph.R);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Rd, Eigen::EigenvaluesOnly);
        const double lam_min = es.eigenvalues().minCoeff();
        const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
        if (lam_min < -1e-10 * std::max(norm, 1e-300)) {
            // locate the worst volume-conservation offender for the message
            const auto vres = volume_residuals(net, sys.qhat);
            int worst = 0;
            for (std::size_t n = 1; n < vres.size(); ++n)
                if (vres[n] > vres[worst]) worst = static_cast<int>(n);
            throw StructureViolationError(
                "build_ph: R is not positive semi-definite (min eig " +
                std::to_string(lam_min) + "); worst volume residual at node '" +
                net.node(worst).id + "' (" + std::to_string(vres[worst]) + ")");
        }
    }
    return ph;
}

Eigen::MatrixXd lyapunov_matrix(const SystemMatrices& sys, const Eigen::VectorXd& Q) {
    Eigen::MatrixXd A(sys.A);
    Eigen::MatrixXd QA = Q.asDiagonal() * A;
    return QA + QA.transpose();
}

LyapunovReport check_lyapunov(const SystemMatrices& sys, const PHSystem& ph) {
    LyapunovReport rep;
    const Eigen::MatrixXd L = lyapunov_matrix(sys, ph.Q);
    const int n = static_cast<int>(L.rows());

    // weak diagonal dominance with non-positive diagonal
    double worst = 1e300;
    bool dominant = true;
    for (int i = 0; i < n; ++i) {
        double off = 0.0;
        for (int j = 0; j < n; ++j)
            if (j != i) off += std::abs(L(i, j));
        const double slack = -L(i, i) - off;
        worst = std::min(worst, slack);
        const double row_scale = std::max(std::abs(L(i, i)) + off, 1e-300);
        if (L(i, i) > 1e-12 * row_scale || slack < -1e-12 * row_scale) dominant = false;
    }
    rep.diag_dominance_ok = dominant;
    rep.worst_dominance_slack = n > 0 ? worst : 0.0;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L, Eigen::EigenvaluesOnly);
    rep.max_eigenvalue = n > 0 ? es.eigenvalues().maxCoeff() : 0.0;
    rep.norm = n > 0 ? es.eigenvalues().cwiseAbs().maxCoeff() : 0.0;
    rep.eigen_ok = rep.max_eigenvalue <= 1e-10 * std::max(rep.norm, 1e-300);
    return rep;
}

PHCheckSummary run_ph_checks(const Network& net, const Mesh& mesh, int samples,
                             unsigned seed, double flow_scale) {
    PHCheckSummary sum;
    sum.samples = samples;
    std::mt19937 rng(seed);

    for (int s = 0; s < samples; ++s) {
        const auto qhat = random_solenoidal_flow(net, rng, flow_scale);
        const auto part = flow_partition(net, qhat);
        const SystemMatrices sys = assemble_system(net, mesh, qhat, part);
        const PHSystem ph = build_ph(sys, mesh, net);

        const Eigen::MatrixXd J(ph.J);
        sum.worst_skew =
            std::max(sum.worst_skew, (J + J.transpose()).cwiseAbs().maxCoeff() /
                                         std::max(J.cwiseAbs().maxCoeff(), 1e-300));

        const Eigen::MatrixXd R(ph.R);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(R, Eigen::EigenvaluesOnly);
        const double norm = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
        sum.worst_psd = std::max(sum.worst_psd, -es.eigenvalues().minCoeff() / norm);

        const Eigen::MatrixXd A(sys.A);
        const Eigen::MatrixXd lhs = (J - R) * ph.Q.asDiagonal() - A;
        sum.worst_identity =
            std::max(sum.worst_identity, lhs.cwiseAbs().maxCoeff() /
                                             std::max(A.cwiseAbs().maxCoeff(), 1e-300));

        const Eigen::MatrixXd L = lyapunov_matrix(sys, ph.Q);
        for (const auto& mp : mesh.pipes()) {
            const double q = std::abs(qhat[mp.arc]);
            for (int c = 0; c < mp.cells; ++c) {
                const int i = mp.offset + c;
                sum.worst_ldiag = std::max(sum.worst_ldiag, std::abs(L(i, i) + 2.0 * q) /
                                                                std::max(2.0 * q, 1e-300));
            }
        }

        const Eigen::MatrixXd BtQ = ph.Btilde.transpose() * ph.Q.asDiagonal();
        const Eigen::MatrixXd diffC = BtQ.bottomRows(ph.n_outputs) - Eigen::MatrixXd(sys.C);
        sum.worst_output = std::max(sum.worst_output, diffC.cwiseAbs().maxCoeff());

        const LyapunovReport lrep = check_lyapunov(sys, ph);
        sum.lyapunov_all = sum.lyapunov_all && lrep.pass() && lrep.agree();
    }

    // negative control: inflate one pipe flow, breaking volume conservation
    {
        auto qhat = random_solenoidal_flow(net, rng, flow_scale);
        // pick a pipe feeding a node that passes flow on through another pipe
        int victim = net.pipes().front();
        for (int pi : net.pipes()) {
            if (qhat[pi] <= 0.0) continue;
            const int head = net.arc(pi).head;
            for (int ai : net.out_arcs()[head]) {
                if (net.arc(ai).is_pipe() && qhat[ai] > 0.0) {
                    victim = pi;
                    break;
                }
            }
            if (victim == pi) break;
        }
        qhat[victim] *= 1.25;
        const auto part = flow_partition(net, qhat);
        const SystemMatrices sys = assemble_system(net, mesh, qhat, part, false);
        const PHSystem ph = build_ph(sys, mesh, net, {.verify_psd = false});
        sum.negative_control_failed_dominance =
            !check_lyapunov(sys, ph).diag_dominance_ok;
    }
    return sum;
}

DissipationReport dissipation_audit(const std::vector<DissipationStep>& steps) {
    DissipationReport rep;
    rep.steps = static_cast<int>(steps.size());
    rep.worst_margin_rel = 1e300;
    for (std::size_t k = 0; k < steps.size(); ++k) {
        const auto& s = steps[k];
        const double scale = std::max({std::abs(s.H_before), std::abs(s.H_after), 1e-300});
        const double margin = (s.supply - (s.H_after - s.H_before)) / scale;
        if (margin < rep.worst_margin_rel) {
            rep.worst_margin_rel = margin;
            rep.worst_step = static_cast<int>(k);
        }
    }
    if (steps.empty()) rep.worst_margin_rel = 0.0;
    return rep;
}

}  // namespace dhnet
