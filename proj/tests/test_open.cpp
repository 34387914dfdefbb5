#include <cmath>

#include "doctest.h"
#include "jcdimer/errors.hpp"
#include "jcdimer/open.hpp"

using namespace jcd;

namespace {

DimerParams oracle_params() { return {6340, 6340, 1.0, 0.5, 1.0, 0.5}; }

}  // namespace

TEST_CASE("jump channels follow the fixed order and skip zero rates") {
    auto ch = jump_channels(oracle_params());
    REQUIRE(ch.size() == 4);
    CHECK(ch[0].op == JumpOperator::a_left);
    CHECK(ch[3].op == JumpOperator::sm_right);
    DimerParams p = oracle_params();
    p.gamma = 0.0;
    ch = jump_channels(p);
    REQUIRE(ch.size() == 2);
    CHECK(ch[1].op == JumpOperator::a_right);
    CHECK(std::string(jump_name(JumpOperator::sm_left)) == "sm_L");
}

TEST_CASE("dense oracle keeps rho a density matrix") {
    const auto sp = HilbertSpace::build(2, 4);
    const auto psi = dimer_initial_state(cplx(0.6, 0.0), std::polar(0.5, 0.5), sp, 0.05);
    const auto r = master_equation_dense(psi, oracle_params(), sp, 1.0, 0.125);
    CHECK(r.max_trace_error < 1e-8);
    CHECK(r.min_eigenvalue > -1e-9);
    CHECK(r.max_hermiticity_error < 1e-10);
    for (std::size_t k = 1; k < r.series.size(); ++k) CHECK(r.series.NT[k] <= r.series.NT[k - 1] + 1e-12);
    const auto big = HilbertSpace::build(5);
    const StateVector zero = StateVector::Zero(big.dim());
    CHECK_THROWS_AS(master_equation_dense(zero, oracle_params(), big, 1.0, 0.1), DimensionGuard);
}

TEST_CASE("damped cavity: coherent amplitude decays at pi kappa") {
    DimerParams p{6340, 6340, 0.0, 0.0, 0.3, 0.0};
    const cplx alpha(2.0, 0.5);
    const auto sp = space_for_coherent(std::norm(alpha), 0.0);
    const auto psi = dimer_initial_state(alpha, 0.0, sp);
    const TrajectoryModel model(p, sp);
    // A coherent state is an eigenstate of a: up to truncation every
    // trajectory is the mean.
    const auto ens = run_ensemble(psi, model, 2.0, 0.25, 8, 11);
    for (std::size_t k = 0; k < ens.t.size(); ++k) {
        const double t = ens.t[k];
        CHECK(ens.N[0][k] == doctest::Approx(std::norm(alpha) * std::exp(-p.photon_decay_rate() * t)).epsilon(1e-6));
        CHECK(ens.I[0][k] == doctest::Approx(alpha.real() * std::exp(-0.5 * p.photon_decay_rate() * t)).epsilon(1e-6));
        CHECK(ens.se_N[0][k] < 1e-6);
    }
}

TEST_CASE("qubit decay: excited population falls at 2 pi gamma") {
    DimerParams p{6340, 6340, 0.0, 0.0, 0.0, 0.2};
    const auto sp = HilbertSpace::build(1, 2);
    StateVector psi = StateVector::Zero(sp.dim());
    psi[sp.flatten({0, 1, 0, 0})] = 1.0;
    const auto dense = master_equation_dense(psi, p, sp, 2.0, 0.5);
    for (std::size_t k = 0; k < dense.series.size(); ++k)
        CHECK(dense.series.Nq[0][k] == doctest::Approx(std::exp(-kTwoPi * p.gamma * dense.series.t[k])).epsilon(1e-8));
}

TEST_CASE("MCWF ensemble matches the dense Lindblad oracle") {
    const auto p = oracle_params();
    const auto sp = HilbertSpace::build(2, 4);
    const auto psi = dimer_initial_state(cplx(0.6, 0.0), std::polar(0.5, 0.5), sp, 0.05);
    const auto dense = master_equation_dense(psi, p, sp, 1.0, 0.125);
    const TrajectoryModel model(p, sp);
    const auto ens = run_ensemble(psi, model, 1.0, 0.125, 600, 1);
    REQUIRE(ens.t.size() == dense.series.size());
    int outside = 0, total = 0;
    for (std::size_t k = 0; k < ens.t.size(); ++k)
        for (int s = 0; s < 2; ++s) {
            const std::pair<double, double> pairs[3] = {{ens.N[s][k] - dense.series.N[s][k], ens.se_N[s][k]},
                                                        {ens.I[s][k] - dense.series.I[s][k], ens.se_I[s][k]},
                                                        {ens.Q[s][k] - dense.series.Q[s][k], ens.se_Q[s][k]}};
            for (auto [diff, se] : pairs) {
                ++total;
                outside += std::abs(diff) > 3.0 * std::max(se, 1e-9);
            }
        }
    // About 0.3% of Gaussian deviations exceed 3 se; allow a handful.
    CHECK(outside <= 3);
    CHECK(total == 6 * 9);
}

TEST_CASE("krylov no-jump backend reproduces the sector backend") {
    const auto p = oracle_params();
    const auto sp = HilbertSpace::build(2, 4);
    const auto psi = dimer_initial_state(cplx(0.6, 0.0), std::polar(0.5, 0.5), sp, 0.05);
    McwfConfig kc;
    kc.method = NoJumpMethod::krylov;
    kc.jump_tol = 1e-10;
    McwfConfig sc;
    sc.jump_tol = 1e-10;
    const auto a = mcwf_trajectory(psi, TrajectoryModel(p, sp, sc), 1.0, 0.125, 7);
    const auto b = mcwf_trajectory(psi, TrajectoryModel(p, sp, kc), 1.0, 0.125, 7);
    REQUIRE(a.jumps.size() == b.jumps.size());
    for (std::size_t j = 0; j < a.jumps.size(); ++j) {
        CHECK(a.jumps[j].channel == b.jumps[j].channel);
        CHECK(a.jumps[j].t == doctest::Approx(b.jumps[j].t).epsilon(1e-6));
    }
    for (std::size_t k = 0; k < a.series.size(); ++k)
        CHECK(a.series.N[0][k] == doctest::Approx(b.series.N[0][k]).epsilon(1e-6));
}

TEST_CASE("ensembles are bit-identical across worker counts") {
    const auto p = oracle_params();
    const auto sp = HilbertSpace::build(2, 4);
    const auto psi = dimer_initial_state(cplx(0.6, 0.0), std::polar(0.5, 0.5), sp, 0.05);
    McwfConfig one, three;
    three.threads = 3;
    const auto a = run_ensemble(psi, TrajectoryModel(p, sp, one), 1.0, 0.125, 50, 5);
    const auto b = run_ensemble(psi, TrajectoryModel(p, sp, three), 1.0, 0.125, 50, 5);
    for (const auto& name : EnsembleResult::column_names()) CHECK(a.column(name) == b.column(name));
    CHECK(a.mean_jumps == b.mean_jumps);
    const auto c = run_ensemble(psi, TrajectoryModel(p, sp, one), 1.0, 0.125, 50, 6);
    CHECK(c.column("N_L") != a.column("N_L"));
}

TEST_CASE("seed ranges report overlaps") {
    const auto o = overlapping_seed_ranges({{1, 100}, {101, 50}, {150, 10}, {400, 1}});
    REQUIRE(o.size() == 1);
    CHECK(o[0] == std::pair<std::size_t, std::size_t>{1, 2});
    CHECK(overlapping_seed_ranges({{1, 10}, {11, 10}}).empty());
}

TEST_CASE("transition helpers") {
    CHECK(quantum_critical_photons(scaled_preset()) == doctest::Approx(25.0));
    const auto p = dissipative_preset();
    const auto w = transition_fit_window(32.0, p, 0.4, 4.0);
    CHECK(w.t0 == 0.0);
    CHECK(w.t1 == doctest::Approx(std::max(0.4 * std::log(8.0) / p.photon_decay_rate(), 2.0)));
    CHECK(transition_fit_window(4.5, p, 0.4, 4.0).t1 == doctest::Approx(2.0));
}

TEST_CASE("dissipative scan rows reuse consecutive seed blocks") {
    const auto p = oracle_params();
    const auto scan = dissipative_phase_scan({0.2, 0.4}, p, 0.5, 0.25, 20, 3, {}, 3.0);
    REQUIRE(scan.rows.size() == 2);
    CHECK(scan.rows[0].base_seed == 3);
    CHECK(scan.rows[1].base_seed == 23);
    CHECK(scan.xi[0].rows() == 2);
    CHECK(scan.IQ2[0](0, 0) == doctest::Approx(0.2 + 0.5).epsilon(1e-6));
}
