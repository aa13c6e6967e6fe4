#include <cmath>
#include <random>

#include "doctest.h"
#include <Eigen/Dense>

#include "dhnet/errors.hpp"
#include "dhnet/network.hpp"
#include "dhnet/ph_core.hpp"
#include "dhnet/thermal_fv.hpp"

using namespace dhnet;

namespace {

SystemMatrices assemble_for(const Network& net, const Mesh& mesh,
                            const std::vector<double>& qhat, bool enforce = true) {
    return assemble_system(net, mesh, qhat, flow_partition(net, qhat), enforce);
}

}  // namespace

TEST_CASE("Q holds the cell volumes") {
    Network::Builder b;
    const int f0 = b.add_node("f0", NodePart::foreflow);
    const int f1 = b.add_node("f1", NodePart::foreflow);
    const int b0 = b.add_node("b0", NodePart::backflow);
    PipeAttributes p;
    p.length = 100.0;
    p.diameter = 0.1;
    b.add_pipe("p0", f0, f1, p);
    b.add_consumer("c", f1, b0);
    b.add_depot("d", b0, f0);
    const Network net = b.build();
    const Mesh mesh = build_mesh(net, 10.0);

    std::vector<double> q(net.arcs().size(), 1e-3);
    const auto sys = assemble_for(net, mesh, q);
    const PHSystem ph = build_ph(sys, mesh, net);
    // sigma dx = (0.1^2 pi / 4) * 10
    for (int i = 0; i < ph.Q.size(); ++i)
        CHECK(ph.Q[i] == doctest::Approx(0.0785398).epsilon(1e-6));
}

TEST_CASE("structure identities on random solenoidal flows") {
    std::mt19937 rng(17);
    for (const auto& net : {make_path_network(1, 3, 2), make_star_network(3),
                            make_two_loop_network(2)}) {
        const Mesh mesh = build_mesh(net, 60.0);
        for (int trial = 0; trial < 10; ++trial) {
            const auto qhat = random_solenoidal_flow(net, rng, 1e-3);
            const auto sys = assemble_for(net, mesh, qhat);
            const PHSystem ph = build_ph(sys, mesh, net);

            const Eigen::MatrixXd J(ph.J), R(ph.R), A(sys.A);
            const double scale = std::max(A.cwiseAbs().maxCoeff(), 1e-300);
            CHECK((J + J.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale);
            CHECK((R - R.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale);
            CHECK(((J - R) * ph.Q.asDiagonal() - A).cwiseAbs().maxCoeff() <= 1e-12 * scale);

            // proof identity: L diagonal entries are -2 qhat per cell
            const Eigen::MatrixXd L = lyapunov_matrix(sys, ph.Q);
            for (const auto& mp : mesh.pipes()) {
                for (int c = 0; c < mp.cells; ++c) {
                    const int i = mp.offset + c;
                    CHECK(L(i, i) ==
                          doctest::Approx(-2.0 * std::abs(qhat[mp.arc])).epsilon(1e-12));
                }
            }

            // output containment: bottom rows of B~^T Q equal C (unit
            // entries, 1e-12 absolute per the structural tolerance policy)
            const Eigen::MatrixXd BtQ = ph.Btilde.transpose() * ph.Q.asDiagonal();
            CHECK((BtQ.bottomRows(ph.n_outputs) - Eigen::MatrixXd(sys.C))
                      .cwiseAbs()
                      .maxCoeff() <= 1e-12);

            const auto rep = check_lyapunov(sys, ph);
            CHECK(rep.pass());
            CHECK(rep.agree());
        }
    }
}

TEST_CASE("reversed flow keeps the embedding, with |qhat| on the L diagonal") {
    const Network net = make_two_loop_network(2);
    const Mesh mesh = build_mesh(net, 60.0);
    std::mt19937 rng(3);
    auto qhat = random_solenoidal_flow(net, rng, 1e-3);

    // push all branch-a flow onto branch b plus a little extra, so branch a
    // carries a reverse circulation; node balances stay exact
    const int a0 = net.arc_index("f_aseg0");
    const int b0 = net.arc_index("f_bseg0");
    const double shift = qhat[a0] + 2e-4;
    for (const char* seg : {"f_aseg0", "f_aseg1", "f_aseg2", "f_aseg3"})
        qhat[net.arc_index(seg)] -= shift;
    for (const char* seg : {"f_bseg0", "f_bseg1", "f_bseg2", "f_bseg3"})
        qhat[net.arc_index(seg)] += shift;
    REQUIRE(qhat[a0] < 0.0);
    REQUIRE(qhat[b0] > 0.0);
    for (double r : volume_residuals(net, qhat)) REQUIRE(r < 1e-10);

    const auto sys = assemble_for(net, mesh, qhat);
    const PHSystem ph = build_ph(sys, mesh, net);
    const Eigen::MatrixXd J(ph.J);
    CHECK((J + J.transpose()).cwiseAbs().maxCoeff() <=
          1e-12 * J.cwiseAbs().maxCoeff());
    const Eigen::MatrixXd L = lyapunov_matrix(sys, ph.Q);
    for (const auto& mp : mesh.pipes())
        for (int c = 0; c < mp.cells; ++c)
            CHECK(L(mp.offset + c, mp.offset + c) ==
                  doctest::Approx(-2.0 * std::abs(qhat[mp.arc])).epsilon(1e-12));
    CHECK(check_lyapunov(sys, ph).pass());
}

TEST_CASE("lyapunov check edge cases") {
    const Network net = make_star_network(3);
    const Mesh mesh = build_mesh(net, 60.0);

    SUBCASE("zero flow: L = 0 is trivially negative semi-definite") {
        std::vector<double> q(net.arcs().size(), 0.0);
        const auto sys = assemble_for(net, mesh, q);
        const PHSystem ph = build_ph(sys, mesh, net);
        const auto rep = check_lyapunov(sys, ph);
        CHECK(rep.pass());
        CHECK(rep.max_eigenvalue == doctest::Approx(0.0));
    }
    SUBCASE("corrupted flow fails the dominance check") {
        std::mt19937 rng(5);
        auto q = random_solenoidal_flow(net, rng, 1e-3);
        q[net.arc_index("pf0")] *= 1.25;
        const auto sys = assemble_for(net, mesh, q, false);
        const PHSystem ph = build_ph(sys, mesh, net, {.verify_psd = false});
        CHECK_FALSE(check_lyapunov(sys, ph).diag_dominance_ok);
    }
    SUBCASE("strongly starved flow breaks PSD and build_ph reports it") {
        std::mt19937 rng(5);
        auto q = random_solenoidal_flow(net, rng, 1e-3);
        q[net.arc_index("pf1")] *= 0.2;  // downstream trunk starves the hub
        const auto sys = assemble_for(net, mesh, q, false);
        CHECK_THROWS_AS((void)build_ph(sys, mesh, net), StructureViolationError);
    }
}

TEST_CASE("operator entries are Lipschitz in the flow parameter") {
    const Network net = make_star_network(3);
    const Mesh mesh = build_mesh(net, 60.0);
    std::mt19937 rng(23);
    const auto q0 = random_solenoidal_flow(net, rng, 1e-3);

    auto j_of = [&](const std::vector<double>& q) {
        return Eigen::MatrixXd(build_ph(assemble_for(net, mesh, q), mesh, net).J);
    };
    auto perturb = [&](double eps) {
        auto q = q0;
        for (double& x : q) x *= 1.0 + eps;  // uniform scaling keeps conservation exact
        return q;
    };
    const Eigen::MatrixXd J0 = j_of(q0);
    const double d1 = (j_of(perturb(1e-4)) - J0).cwiseAbs().maxCoeff();
    const double d2 = (j_of(perturb(5e-5)) - J0).cwiseAbs().maxCoeff();
    CHECK(d2 / d1 == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("utilde padding and output containment in ytilde") {
    const Network net = make_star_network(2);
    const Mesh mesh = build_mesh(net, 60.0);
    std::mt19937 rng(2);
    const auto q = random_solenoidal_flow(net, rng, 1e-3);
    const auto sys = assemble_for(net, mesh, q);
    const PHSystem ph = build_ph(sys, mesh, net);

    const Eigen::VectorXd ut = ph.pad_input({3.3e8, 2.5e8});
    REQUIRE(ut.size() == 2 + ph.n_outputs);
    CHECK(ut[0] == 3.3e8);
    CHECK(ut[1] == 2.5e8);
    for (int i = 2; i < ut.size(); ++i) CHECK(ut[i] == 0.0);

    Eigen::VectorXd e = Eigen::VectorXd::Random(mesh.total_cells()).cwiseAbs() * 1e8;
    const Eigen::VectorXd yt = ph.output(e);
    const Eigen::VectorXd y = sys.C * e;
    for (int i = 0; i < ph.n_outputs; ++i)
        CHECK(yt[2 + i] == doctest::Approx(y[i]).epsilon(1e-12));
}

TEST_CASE("dissipation audit bookkeeping") {
    SUBCASE("no supply, decaying storage passes") {
        std::vector<DissipationStep> steps{{10.0, 9.0, 0.0, 60.0}, {9.0, 8.5, 0.0, 60.0}};
        const auto rep = dissipation_audit(steps);
        CHECK(rep.pass());
        CHECK(rep.worst_margin_rel >= 0.0);
    }
    SUBCASE("steady state has zero margin") {
        std::vector<DissipationStep> steps{{10.0, 10.0, 0.0, 60.0}};
        const auto rep = dissipation_audit(steps);
        CHECK(rep.worst_margin_rel == doctest::Approx(0.0));
        CHECK(rep.pass());
    }
    SUBCASE("storage rising above the supply is flagged with the step index") {
        std::vector<DissipationStep> steps{{10.0, 10.5, 1.0, 60.0}, {10.5, 12.0, 0.5, 60.0}};
        const auto rep = dissipation_audit(steps);
        CHECK_FALSE(rep.pass());
        CHECK(rep.worst_step == 1);
    }
}

TEST_CASE("aggregate checker passes on a tree network") {
    const Network net = make_path_network(2);
    const Mesh mesh = build_mesh(net, 60.0);
    const auto sum = run_ph_checks(net, mesh, 20, 99);
    CHECK(sum.pass());
    CHECK(sum.negative_control_failed_dominance);
}
