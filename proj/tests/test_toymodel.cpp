#include <cmath>

#include "doctest.h"
#include "jcdimer/errors.hpp"
#include "jcdimer/toymodel.hpp"

using namespace jcd;

namespace {

ToyConfig small(int n_i, std::int64_t trials) {
    ToyConfig c;
    c.N_i = n_i;
    c.n_trials = trials;
    c.dt_us = 0.05;
    return c;
}

}  // namespace

TEST_CASE("sampled toy agrees with the binomial expectation") {
    const auto c = small(60, 20000);
    const auto s = simulate_toy(c);
    const auto e = exact_toy_series(c);
    REQUIRE(s.t.size() == e.t.size());
    // Late samples where no sampled trial survives have se = 0 while the
    // exact envelope is a small positive tail; the floor covers those.
    int outside = 0;
    for (std::size_t k = 0; k < s.t.size(); ++k) {
        outside += std::abs(s.photons[k] - e.photons[k]) > 4.0 * s.se_photons[k] + 1e-12;
        outside += std::abs(s.envelope[k] - e.envelope[k]) > 4.0 * s.se_envelope[k] + 5e-3;
    }
    CHECK(outside == 0);
    CHECK(s.photons[0] == 60.0);
    CHECK(s.se_photons[0] == 0.0);
}

TEST_CASE("exact photon mean is N_i e^{-kappa t} with kappa carrying no 2 pi") {
    const auto c = small(100, 1);
    const auto e = exact_toy_series(c);
    for (std::size_t k = 0; k < e.t.size(); ++k)
        CHECK(e.photons[k] == doctest::Approx(100.0 * std::exp(-0.225 * e.t[k])).epsilon(1e-12));
}

TEST_CASE("exact envelope equals a direct binomial sum") {
    auto c = small(30, 1);
    c.exponent = 2.0;
    const auto e = exact_toy_series(c);
    const std::size_t k = 40;
    const double q = std::exp(-c.kappa_per_us() * e.t[k]);
    double ref = 0.0, binom = 1.0;
    for (int n = 0; n <= 30; ++n) {
        if (n > 0) binom *= double(30 - n + 1) / n;
        if (n > c.N_c) ref += binom * std::pow(q, n) * std::pow(1 - q, 30 - n) * n * n;
    }
    CHECK(e.envelope[k] == doctest::Approx(ref).epsilon(1e-10));
}

TEST_CASE("simulation is deterministic and independent of thread count") {
    auto c = small(80, 40000);
    const auto a = simulate_toy(c);
    c.threads = 3;
    const auto b = simulate_toy(c);
    CHECK(a.signal == b.signal);
    CHECK(a.se_envelope == b.se_envelope);
    CHECK(a.photons == b.photons);
    c.seed = 2;
    CHECK(simulate_toy(c).photons != a.photons);
}

TEST_CASE("mean first passage is the harmonic tail over kappa") {
    CHECK(mean_first_passage(22, 20, 0.5) == doctest::Approx((1.0 / 21 + 1.0 / 22) / 0.5));
    CHECK(mean_first_passage(20, 20, 0.5) == 0.0);
}

TEST_CASE("extinction is ordered by initial photon number") {
    ToyConfig c;
    c.n_trials = 1;
    c.t_end_us = 20.0;
    ToyLawOptions opt;
    opt.exact = true;
    const auto law = toy_tc_law({37, 136, 500}, c, opt);
    REQUIRE(law.reports.size() == 3);
    CHECK(law.reports[0].t_c < law.reports[1].t_c);
    CHECK(law.reports[1].t_c < law.reports[2].t_c);
    CHECK(law.fit.slope * c.kappa_per_us() == doctest::Approx(1.0).epsilon(0.05));
    CHECK_THROWS_AS(toy_tc_law({37, 136}, c, opt), FitFailed);
    CHECK_THROWS_AS(toy_tc_law({10, 136, 500}, c, opt), ConfigError);
}

TEST_CASE("chirped signal stays bounded by the envelope") {
    auto c = small(60, 5000);
    c.chirp = true;
    const auto s = simulate_toy(c);
    for (std::size_t k = 0; k < s.t.size(); ++k) CHECK(std::abs(s.signal[k]) <= s.envelope[k] + 1e-9);
    CHECK_THROWS_AS(exact_toy_series(c), ConfigError);
}

TEST_CASE("toy configuration errors name the field") {
    auto c = small(60, 10);
    c.kappa_khz = 0.0;
    try {
        c.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "kappa_khz");
    }
    c = small(60, 0);
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small(60, 10);
    c.dt_us = -1.0;
    CHECK_THROWS_AS(simulate_toy(c), ConfigError);
}
