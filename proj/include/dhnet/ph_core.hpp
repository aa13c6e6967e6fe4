#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "dhnet/thermal_fv.hpp"

namespace dhnet {

/// Parameter-dependent port-Hamiltonian embedding of the semi-discrete
/// advection system: d/dt e = (J - R) Q e + Btilde utilde, with diagonal
/// positive Q holding the cell volumes.
struct PHSystem {
    Eigen::VectorXd Q;        // diagonal entries, cell volumes [m^3]
    SpMat J;                  // skew
    SpMat R;                  // symmetric PSD
    Eigen::MatrixXd Btilde;   // kappa x (2 + c)
    int n_outputs = 0;        // c

    /// utilde = (u^T, 0, ..., 0)^T in R^(2+c)
    Eigen::VectorXd pad_input(const Eigen::Vector2d& u) const;
    /// ytilde = Btilde^T Q e
    Eigen::VectorXd output(const Eigen::VectorXd& e) const;
    /// H(e) = e^T Q e
    double hamiltonian(const Eigen::VectorXd& e) const;
};

struct PHBuildOptions {
    bool verify_psd = true;  // dense eigenvalue check of R at assembly
};

PHSystem build_ph(const SystemMatrices& sys, const Mesh& mesh, const Network& net,
                  const PHBuildOptions& options = {});

/// L(w) = Q A + A^T Q, negative semi-definite for volume-preserving flows.
Eigen::MatrixXd lyapunov_matrix(const SystemMatrices& sys, const Eigen::VectorXd& Q);

struct LyapunovReport {
    bool diag_dominance_ok = false;
    bool eigen_ok = false;
    double max_eigenvalue = 0.0;
    double norm = 0.0;                 // ||L||_2 estimate (max |eig|)
    double worst_dominance_slack = 0.0;  // min over rows of |L_ii| - sum off-diag
    bool agree() const { return diag_dominance_ok == eigen_ok; }
    bool pass() const { return diag_dominance_ok && eigen_ok; }
};

/// Verifies L(w) <= 0 both via the weak diagonal dominance argument and via
/// the smallest-eigenvalue route; the two must agree.
LyapunovReport check_lyapunov(const SystemMatrices& sys, const PHSystem& ph);

struct DissipationStep {
    double H_before = 0.0;
    double H_after = 0.0;
    double supply = 0.0;  // 2 dt ytilde_mid . utilde
    double dt = 0.0;
};

struct DissipationReport {
    int steps = 0;
    double worst_margin_rel = 0.0;  // min over steps of (supply - dH)/max(H)
    int worst_step = -1;
    bool pass(double tol = 1e-9) const { return steps == 0 || worst_margin_rel >= -tol; }
};

/// Per-step check of H(e_{k+1}) - H(e_k) <= 2 dt ytilde_mid . utilde.
/// H = e^T Q e, hence the factor 2 on the supply rate.
DissipationReport dissipation_audit(const std::vector<DissipationStep>& steps);

/// Aggregated structure-check results over random volume-preserving flows.
struct PHCheckSummary {
    int samples = 0;
    double worst_skew = 0.0;      // max |J + J^T| relative
    double worst_psd = 0.0;       // -min eig(R) relative to ||R||
    double worst_identity = 0.0;  // max |(J-R)Q - A| relative
    double worst_ldiag = 0.0;     // max |L_ii + 2 qhat| relative
    double worst_output = 0.0;    // max |Btilde^T Q rows - C| absolute
    bool lyapunov_all = true;     // dominance and eigen checks pass and agree
    bool negative_control_failed_dominance = false;

    // structural identities at 1e-12 absolute on the scaled matrices (C has
    // unit entries), spectral checks at 1e-10 relative
    bool pass() const {
        return worst_skew <= 1e-12 && worst_psd <= 1e-10 && worst_identity <= 1e-12 &&
               worst_ldiag <= 1e-12 && worst_output <= 1e-12 && lyapunov_all &&
               negative_control_failed_dominance;
    }
};

PHCheckSummary run_ph_checks(const Network& net, const Mesh& mesh, int samples,
                             unsigned seed, double flow_scale = 1e-3);

}  // namespace dhnet
