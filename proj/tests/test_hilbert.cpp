#include <cmath>

#include <Eigen/Dense>

#include "doctest.h"
#include "jcdimer/errors.hpp"
#include "jcdimer/hilbert.hpp"

using namespace jcd;

namespace {

// Independent dense construction from Kronecker products of site operators.
Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    Eigen::MatrixXcd k(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return k;
}

struct SiteOps {
    Eigen::MatrixXcd a, sm, id;
};

SiteOps site_ops(int eta) {
    const int d = 2 * (eta + 1);
    SiteOps o{Eigen::MatrixXcd::Zero(d, d), Eigen::MatrixXcd::Zero(d, d), Eigen::MatrixXcd::Identity(d, d)};
    for (int n = 1; n <= eta; ++n)
        for (int q = 0; q < 2; ++q) o.a(2 * (n - 1) + q, 2 * n + q) = std::sqrt(double(n));
    for (int n = 0; n <= eta; ++n) o.sm(2 * n, 2 * n + 1) = 1.0;
    return o;
}

Eigen::MatrixXcd kron_hamiltonian(const DimerParams& p, int eta, bool lab) {
    const auto o = site_ops(eta);
    const Eigen::MatrixXcd ad = o.a.adjoint(), sp = o.sm.adjoint();
    const double wc = lab ? p.nu_c : 0.0, wa = lab ? p.nu_a : p.nu_a - p.nu_c;
    const Eigen::MatrixXcd hs = wc * ad * o.a + wa * sp * o.sm + p.g * (sp * o.a + o.sm * ad);
    Eigen::MatrixXcd h = kron(hs, o.id) + kron(o.id, hs) - p.J * (kron(ad, o.a) + kron(o.a, ad));
    return h;
}

}  // namespace

TEST_CASE("basis index map is a bijection with the documented size") {
    for (int eta : {0, 1, 3, 6}) {
        const auto sp = HilbertSpace::build(eta);
        CHECK(sp.dim() == (2 * (eta + 1)) * (2 * (eta + 1)));
        for (std::int64_t i = 0; i < sp.dim(); ++i) {
            const auto& s = sp.unflatten(i);
            REQUIRE(sp.flatten(s) == i);
            CHECK(i == (2 * s.n_left + s.q_left) * sp.site_dim() + 2 * s.n_right + s.q_right);
        }
    }
}

TEST_CASE("excitation cap keeps exactly the states with N_T <= cap") {
    const auto full = HilbertSpace::build(4);
    const auto cap = HilbertSpace::build(4, 3);
    std::int64_t expected = 0;
    for (std::int64_t i = 0; i < full.dim(); ++i) expected += full.unflatten(i).excitations() <= 3;
    CHECK(cap.dim() == expected);
    for (std::int64_t i = 0; i < cap.dim(); ++i) CHECK(cap.unflatten(i).excitations() <= 3);
    CHECK_FALSE(cap.find(BasisState{4, 0, 0, 0}).has_value());
}

TEST_CASE("negative cutoff and memory budget are rejected") {
    CHECK_THROWS_AS(HilbertSpace::build(-1), ConfigError);
    CHECK_THROWS_AS(HilbertSpace::build(200, std::nullopt, 1024), MemoryBudgetExceeded);
}

TEST_CASE("Hamiltonian matches the Kronecker-product construction") {
    DimerParams p{6340.0, 6331.5, 3.7, 1.3, 0.0, 0.0};
    for (bool lab : {false, true}) {
        const int eta = 2;
        const auto sp = HilbertSpace::build(eta);
        const auto h = build_hamiltonian(p, sp, lab ? Frame::lab : Frame::rotating).to_dense();
        const auto ref = kron_hamiltonian(p, eta, lab);
        CHECK((h - ref).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("Hamiltonian is Hermitian and conserves total excitations") {
    const auto sp = HilbertSpace::build(5);
    const auto h = build_hamiltonian(scaled_preset(), sp);
    CHECK(h.hermiticity_error() < 1e-12);
    for (const auto& t : h.triplets())
        CHECK(sp.unflatten(t.row).excitations() == sp.unflatten(t.col).excitations());
}

TEST_CASE("capped Hamiltonian is the restriction of the full one") {
    const DimerParams p = scaled_preset();
    const auto full = HilbertSpace::build(4);
    const auto cap = HilbertSpace::build(4, 4);
    const auto hf = build_hamiltonian(p, full).to_dense();
    const auto hc = build_hamiltonian(p, cap).to_dense();
    for (std::int64_t i = 0; i < cap.dim(); ++i)
        for (std::int64_t j = 0; j < cap.dim(); ++j)
            CHECK(std::abs(hc(i, j) - hf(full.flatten(cap.unflatten(i)), full.flatten(cap.unflatten(j)))) < 1e-12);
}

TEST_CASE("coherent initial state has the requested moments") {
    const cplx al(1.1, -0.4), ar(0.3, 0.8);
    const auto sp = space_for_coherent(std::norm(al), std::norm(ar));
    const auto psi = dimer_initial_state(al, ar, sp);
    CHECK(psi.norm() == doctest::Approx(1.0).epsilon(1e-14));
    const auto m = measure(sp, psi);
    CHECK(std::abs(m.site[0].a - al) < 1e-7);
    CHECK(std::abs(m.site[1].a - ar) < 1e-7);
    CHECK(m.site[0].n == doctest::Approx(std::norm(al)).epsilon(1e-7));
    CHECK(m.site[0].nq == doctest::Approx(0.0));
    CHECK(expect("N_T", sp, psi) == doctest::Approx(std::norm(al) + std::norm(ar)).epsilon(1e-7));
    CHECK(expect("IQ2_L", sp, psi) == doctest::Approx(std::norm(al) + 0.5).epsilon(1e-7));
    CHECK(std::abs(expect_annihilation(Site::right, sp, psi) - ar) < 1e-7);
}

TEST_CASE("cutoff sizing bounds the Poisson tail") {
    for (double n : {0.1, 1.0, 4.0, 25.0, 100.0}) {
        const int eta = sized_cutoff(n);
        CHECK(eta >= cutoff_for(n));
        CHECK(coherent_tail_mass(n, eta) <= kDefaultTailTolerance);
    }
    CHECK(cutoff_for(25.0) == 55);
    CHECK_THROWS_AS(coherent_site_state(cplx(3.0, 0.0), 4), TailMassExceeded);
}

TEST_CASE("tail mass agrees with a direct Poisson sum") {
    const double n = 7.3;
    for (int eta : {3, 10, 20}) {
        double kept = 0.0, term = std::exp(-n);
        for (int k = 0; k <= eta; ++k) {
            kept += term;
            term *= n / (k + 1);
        }
        CHECK(coherent_tail_mass(n, eta) == doctest::Approx(1.0 - kept).epsilon(1e-9));
    }
}

TEST_CASE("observable tags parse or fail with UnknownObservable") {
    CHECK(parse_observable("I_L").kind == ObservableKind::I);
    CHECK(parse_observable("sz_R").site == Site::right);
    CHECK(parse_observable("N_T").kind == ObservableKind::NT);
    CHECK_THROWS_AS(parse_observable("X_L"), UnknownObservable);
    CHECK_THROWS_AS(parse_observable("N_Q"), UnknownObservable);
}

TEST_CASE("lowering operators match the dense site operators") {
    const int eta = 3;
    const auto sp = HilbertSpace::build(eta);
    const auto o = site_ops(eta);
    StateVector psi = StateVector::Random(sp.dim());
    StateVector out(sp.dim());
    apply_lowering_photon(Site::left, sp, psi, out);
    CHECK((out - kron(o.a, o.id) * psi).norm() < 1e-12);
    apply_lowering_qubit(Site::right, sp, psi, out);
    CHECK((out - kron(o.id, o.sm) * psi).norm() < 1e-12);
}

TEST_CASE("parameter validation names the field") {
    DimerParams p;
    p.g = -1.0;
    try {
        p.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "g_mhz");
    }
    CHECK_THROWS_AS(preset_by_name("nonesuch"), ConfigError);
    CHECK(device_preset().g == 190.0);
    CHECK(device_preset().kappa == 0.225);
}
