#include <cmath>
#include <complex>

#include "doctest.h"
#include "jcdimer/errors.hpp"
#include "jcdimer/semiclassical.hpp"

using namespace jcd;

namespace {

// Heisenberg equations with operators replaced by their means, written in
// the field amplitude alpha, the dipole beta = <s->, and w = <s_z>.
struct Complex {
    cplx alpha[2], beta[2];
    double w[2];
};

Complex complex_rhs(const Complex& y, const DimerParams& p) {
    Complex d;
    for (int s = 0; s < 2; ++s) {
        const int o = 1 - s;
        d.alpha[s] = cplx(0, -kTwoPi) * (p.g * y.beta[s] - p.J * y.alpha[o]);
        d.beta[s] = cplx(0, kTwoPi) * (p.g * y.w[s] * y.alpha[s] - (p.nu_a - p.nu_c) * y.beta[s]);
        d.w[s] = 4.0 * kTwoPi * p.g * std::imag(std::conj(y.beta[s]) * y.alpha[s]);
    }
    return d;
}

Complex axpy(const Complex& y, double h, const Complex& k) {
    Complex r;
    for (int s = 0; s < 2; ++s) {
        r.alpha[s] = y.alpha[s] + h * k.alpha[s];
        r.beta[s] = y.beta[s] + h * k.beta[s];
        r.w[s] = y.w[s] + h * k.w[s];
    }
    return r;
}

Complex rk4(Complex y, const DimerParams& p, double t_end, int steps) {
    const double h = t_end / steps;
    for (int i = 0; i < steps; ++i) {
        const auto k1 = complex_rhs(y, p);
        const auto k2 = complex_rhs(axpy(y, h / 2, k1), p);
        const auto k3 = complex_rhs(axpy(y, h / 2, k2), p);
        const auto k4 = complex_rhs(axpy(y, h, k3), p);
        for (int s = 0; s < 2; ++s) {
            y.alpha[s] += h / 6 * (k1.alpha[s] + 2.0 * k2.alpha[s] + 2.0 * k3.alpha[s] + k4.alpha[s]);
            y.beta[s] += h / 6 * (k1.beta[s] + 2.0 * k2.beta[s] + 2.0 * k3.beta[s] + k4.beta[s]);
            y.w[s] += h / 6 * (k1.w[s] + 2 * k2.w[s] + 2 * k3.w[s] + k4.w[s]);
        }
    }
    return y;
}

double excitations(const MeanFieldState& s) {
    return s.total_photons() + 0.5 * (2.0 + s.site[0].n[2] + s.site[1].n[2]);
}

}  // namespace

TEST_CASE("mean-field flow matches an independent amplitude integration") {
    for (const DimerParams p : {DimerParams{6340, 6340, 3.0, 1.0, 0, 0}, DimerParams{6340, 6342.5, 3.0, 1.0, 0, 0}})
    for (double n : {1.0, 5.0, 20.0}) {
        const auto s0 = MeanFieldState::localized_left(n);
        const double t = 0.6;
        IntegrateOptions opt;
        opt.tol = {1e-12, 1e-13};
        const auto lib = integrate(s0, p, t, opt).samples.back().state;
        Complex y{{std::sqrt(n), 0.0}, {0.0, 0.0}, {-1.0, -1.0}};
        y = rk4(y, p, t, 40000);
        CHECK(lib.photons(Site::left) == doctest::Approx(std::norm(y.alpha[0])).epsilon(1e-7));
        CHECK(lib.photons(Site::right) == doctest::Approx(std::norm(y.alpha[1])).epsilon(1e-7).scale(1.0));
        CHECK(lib.site[0].n[2] == doctest::Approx(y.w[0]).epsilon(1e-7));
        CHECK(lib.site[1].n[2] == doctest::Approx(y.w[1]).epsilon(1e-7));
    }
}

TEST_CASE("excitation number and spin length are conserved") {
    const DimerParams p = scaled_preset();
    auto s0 = MeanFieldState::localized_left(30.0);
    s0.site[1].R = 0.5;
    IntegrateOptions opt;
    opt.sample_dt = 0.01;
    const auto tr = integrate(s0, p, 0.5, opt);
    for (const auto& smp : tr.samples) {
        CHECK(excitations(smp.state) == doctest::Approx(excitations(s0)).epsilon(1e-7));
        for (int s = 0; s < 2; ++s) {
            const auto& v = smp.state.site[s].n;
            CHECK(v[0] * v[0] + v[1] * v[1] + v[2] * v[2] == doctest::Approx(1.0).epsilon(1e-8));
        }
    }
}

TEST_CASE("uncoupled mean field: imbalance oscillates as cos(4 pi J t)") {
    DimerParams p = scaled_preset();
    p.g = 0.0;
    IntegrateOptions opt;
    opt.sample_dt = 0.002;
    const auto tr = integrate(MeanFieldState::localized_left(10.0), p, 0.2, opt);
    for (const auto& smp : tr.samples)
        CHECK(smp.state.imbalance() == doctest::Approx(std::cos(2 * kTwoPi * p.J * smp.t)).epsilon(1e-7).scale(1.0));
}

TEST_CASE("backward integration retraces the forward run") {
    const DimerParams p = scaled_preset();
    const auto s0 = MeanFieldState::localized_left(12.0);
    IntegrateOptions opt;
    opt.tol = {1e-12, 1e-13};
    const auto fwd = integrate(s0, p, 0.3, opt).samples.back().state;
    const auto back = integrate(fwd, p, -0.3, opt).samples.back().state;
    CHECK(back.site[0].R == doctest::Approx(s0.site[0].R).epsilon(1e-6));
    CHECK(back.site[1].R == doctest::Approx(s0.site[1].R).epsilon(1e-6).scale(1.0));
    CHECK(back.site[0].n[2] == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("pack and unpack are inverse") {
    auto s = MeanFieldState::localized_left(3.0);
    s.site[1].I = -0.7;
    s.site[0].n = {0.6, 0.0, -0.8};
    const auto r = MeanFieldState::unpack(s.pack());
    CHECK(r.site[1].I == -0.7);
    CHECK(r.site[0].n[0] == 0.6);
    CHECK(r.pack() == s.pack());
}

TEST_CASE("without hopping the field stays localized") {
    DimerParams p = scaled_preset();
    p.J = 0.0;
    CHECK(mean_imbalance(MeanFieldState::localized_left(20.0), p, 1.0) == doctest::Approx(1.0));
    const auto b = find_critical_coupling(20.0, p);
    CHECK(b.upper == 0.0);
}

TEST_CASE("critical coupling scales as sqrt(N) and brackets the switch") {
    DimerParams p{6340, 6340, 1.0, 1.0, 0, 0};
    LocalizationCriterion crit;
    const auto b25 = find_critical_coupling(25.0, p, crit, 1e-3);
    const auto b100 = find_critical_coupling(100.0, p, crit, 1e-3);
    CHECK(b25.upper - b25.lower <= 1e-3 * b25.upper * 1.0001);
    CHECK(b100.estimate() / b25.estimate() == doctest::Approx(2.0).epsilon(0.05));
    p.g = b25.lower * 0.98;
    CHECK(mean_imbalance(MeanFieldState::localized_left(25.0), p, crit.josephson_periods / (2 * p.J)) <
          crit.threshold);
    p.g = b25.upper * 1.02;
    CHECK(mean_imbalance(MeanFieldState::localized_left(25.0), p, crit.josephson_periods / (2 * p.J)) >
          crit.threshold);
}

TEST_CASE("integration rejects a zero span") {
    CHECK_THROWS_AS(integrate(MeanFieldState::localized_left(1.0), scaled_preset(), 0.0), ConfigError);
}
