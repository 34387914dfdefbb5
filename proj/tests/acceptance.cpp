#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "jcdimer/analysis.hpp"
#include "jcdimer/errors.hpp"
#include "jcdimer/io.hpp"
#include "jcdimer/open.hpp"
#include "jcdimer/runner.hpp"
#include "jcdimer/semiclassical.hpp"
#include "jcdimer/toymodel.hpp"
#include "jcdimer/unitary.hpp"

using namespace jcd;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string format(const char* fmt, auto... args) {
    char buf[1024];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return buf;
}

void note(const std::string& s) {
    std::printf("    %s\n", s.c_str());
    std::fflush(stdout);
}

Verdict spectrum_levels() {
    const DimerParams p = device_preset();
    const auto lv = spectrum(p, 1);
    std::vector<double> target{p.nu_c - p.g - p.J / 2, p.nu_c - p.g + p.J / 2, p.nu_c + p.g - p.J / 2,
                               p.nu_c + p.g + p.J / 2};
    std::sort(target.begin(), target.end());
    double err = 0.0;
    for (int k = 0; k < 4; ++k) {
        err = std::max(err, std::abs(lv[k] - target[k]));
        note(format("level %d: %.9f MHz, nu_c +- g +- J/2 gives %.9f", k, lv[k], target[k]));
    }
    const auto closed = single_excitation_levels(p);
    double closed_err = 0.0;
    for (int k = 0; k < 4; ++k) closed_err = std::max(closed_err, std::abs(lv[k] - closed[k]));
    note(format("closed form nu_c -+ J/2 +- sqrt(g^2 + J^2/4): max deviation %.2e MHz", closed_err));

    DimerParams p0 = p;
    p0.g = 0.0;
    std::vector<double> modes;
    for (double e : spectrum(p0, 1))
        if (std::abs(e - p0.nu_a) > 1e-9) modes.push_back(e);
    const double mode_err = modes.size() == 2
                                ? std::max(std::abs(modes[0] - (p.nu_c - p.J)), std::abs(modes[1] - (p.nu_c + p.J)))
                                : INFINITY;
    note(format("g = 0 photon modes: %.9f, %.9f MHz (deviation %.2e)", modes[0], modes[1], mode_err));
    return {err <= 1e-6 && mode_err <= 1e-6,
            format("polariton max deviation %.3e MHz, linear modes %.3e MHz, tolerance 1e-6", err, mode_err)};
}

Verdict semiclassical_law() {
    DimerParams p = device_preset();
    p.J = 1.0;
    bool ok = true;
    std::string d;
    for (double n : {25.0, 100.0, 400.0}) {
        const auto b = find_critical_coupling(n, p, {}, 1e-3);
        const double r = b.estimate() / (p.J * std::sqrt(n));
        ok &= std::abs(r - 2.8) <= 0.15;
        d += format("g_c/(J sqrtN)[N=%g] = %.3f; ", n, r);
    }
    const auto nc = find_critical_photon_number(device_preset(), {}, 1e-3);
    ok &= std::abs(nc.estimate() - 62.0) <= 6.0;
    d += format("device N_c = %.2f (target 62 +- 6)", nc.estimate());
    return {ok, d};
}

Verdict josephson_frequency() {
    DimerParams p = scaled_preset();
    p.g = 0.0;
    const double want = 1.0 / (2.0 * p.J);
    const double n = 4.0;
    const auto sp = space_for_coherent(n, 0.0);
    const auto r = evolve(dimer_initial_state(std::sqrt(n), 0.0, sp), build_hamiltonian(p, sp), sp, 20 * want,
                          want / 200);
    const double tq = oscillation_period(r.series.t, r.series.Z).period;
    IntegrateOptions opt;
    opt.sample_dt = want / 200;
    const auto tr = integrate(MeanFieldState::localized_left(n), p, 20 * want, opt);
    const double tc = oscillation_period(tr.times(), tr.imbalance()).period;
    const double eq = std::abs(tq / want - 1), ec = std::abs(tc / want - 1);
    return {eq <= 1e-3 && ec <= 1e-3,
            format("1/(2J) = %.6f us; unitary %.6f (rel %.1e), semiclassical %.6f (rel %.1e)", want, tq, eq, tc, ec)};
}

Verdict revival_scaling() {
    DimerParams p = scaled_preset();
    p.J = 0.0;
    std::vector<double> x, y;
    PropagatorConfig c;
    c.method = PropagatorMethod::sector;
    for (double n : {4.0, 9.0, 16.0, 25.0}) {
        const double expected = std::sqrt(n) / p.g;
        const auto sp = space_for_coherent(n, 0.0);
        const auto r = evolve(dimer_initial_state(std::sqrt(n), 0.0, sp), build_hamiltonian(p, sp), sp, 1.6 * expected,
                              expected / 400, c);
        const auto rev = revival_time(r.series.t, r.series.xi[0], expected);
        note(format("N = %g: t_r = %.6f us, sqrt(N)/g = %.6f us", n, rev.t_r, expected));
        x.push_back(std::sqrt(n));
        y.push_back(rev.t_r);
    }
    const auto f = fit_line(x, y);
    const double ratio = f.slope * p.g;
    return {std::abs(ratio - 1.0) <= 0.05,
            format("slope %.6f us, 1/g = %.6f us, slope*g = %.4f, intercept %.2e us", f.slope, 1 / p.g, ratio,
                   f.intercept)};
}

// Revival lobe of the left homodyne signal against the Josephson transfer
// into the right cavity, per row of the closed phase scan; the crossover is
// where the transfer lobe overtakes the revival lobe.
Verdict quantum_critical_number() {
    const DimerParams p = scaled_preset();
    const std::vector<double> rows{12, 16, 18, 20, 21, 22, 23, 24, 26, 28, 30, 34};
    PropagatorConfig c;
    c.method = PropagatorMethod::sector;
    const auto pd = phase_diagram_scan(rows, p, 0.12, 0.0005, c);
    std::vector<double> margin;
    std::int64_t max_dim = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const double n = rows[r], tr = std::sqrt(n) / p.g;
        double rev = 0.0, jos = 0.0;
        for (std::size_t k = 0; k < pd.t.size(); ++k) {
            if (pd.t[k] > 0.5 * tr && pd.t[k] < 1.5 * tr) rev = std::max(rev, pd.xi[0](r, k) / n);
            jos = std::max(jos, pd.xi[1](r, k) / n);
        }
        margin.push_back(jos - rev);
        max_dim = std::max(max_dim, pd.dim[r]);
        note(format("N = %g (dim %lld): revival lobe %.3f, Josephson lobe %.3f", n, (long long)pd.dim[r], rev, jos));
    }
    double crossover = NAN;
    for (std::size_t r = 1; r < rows.size(); ++r)
        if (margin[r - 1] < 0 && margin[r] >= 0) {
            crossover = rows[r - 1] + (rows[r] - rows[r - 1]) * (-margin[r - 1]) / (margin[r] - margin[r - 1]);
            break;
        }
    const double nq = quantum_critical_photons(p);
    return {std::abs(crossover - 25.0) <= 4.0 && max_dim <= 15000,
            format("crossover N = %.2f (g^2/4J^2 = %.1f, gate 25 +- 4), max dim %lld", crossover, nq,
                   (long long)max_dim)};
}

Verdict oracle_equivalence() {
    const DimerParams p{6340, 6340, 1.0, 0.5, 1.0, 0.5};
    const auto sp = HilbertSpace::build(2, 4);
    const auto psi = dimer_initial_state(cplx(0.6, 0.0), std::polar(0.5, 0.5), sp, 0.05);
    const auto dense = master_equation_dense(psi, p, sp, 1.0, 0.125);
    const auto ens = run_ensemble(psi, TrajectoryModel(p, sp), 1.0, 0.125, 4000, 1);
    double worst = 0.0;
    int outside = 0;
    for (std::size_t k = 0; k < ens.t.size(); ++k)
        for (int s = 0; s < 2; ++s) {
            const double z[3] = {(ens.N[s][k] - dense.series.N[s][k]) / std::max(ens.se_N[s][k], 1e-9),
                                 (ens.I[s][k] - dense.series.I[s][k]) / std::max(ens.se_I[s][k], 1e-9),
                                 (ens.Q[s][k] - dense.series.Q[s][k]) / std::max(ens.se_Q[s][k], 1e-9)};
            for (double v : z) {
                worst = std::max(worst, std::abs(v));
                outside += std::abs(v) > 3.0;
            }
        }
    return {outside == 0 && dense.max_trace_error <= 1e-8,
            format("dim %lld, %zu samples x 6 observables: worst |z| = %.2f, %d beyond 3 se; trace error %.1e",
                   (long long)sp.dim(), ens.t.size(), worst, outside, dense.max_trace_error)};
}

Verdict damped_cavity() {
    DimerParams p = device_preset();
    p.g = 0.0;
    p.J = 0.0;
    const double n = 10.0;
    const auto sp = space_for_coherent(n, 0.0);
    const auto ens = run_ensemble(dimer_initial_state(std::sqrt(n), 0.0, sp), TrajectoryModel(p, sp), 3.0, 0.05, 100, 1);
    const auto f = fit_exponential(ens.t, ens.N[0], {0.0, 3.0});
    const double kappa = f.rate / kTwoPi;
    return {std::abs(kappa / p.kappa - 1.0) <= 0.01,
            format("fitted e-fold rate %.6f /us = 2 pi x %.6f MHz, configured kappa %.6f MHz (rel %.1e), %.1f jumps",
                   f.rate, kappa, p.kappa, std::abs(kappa / p.kappa - 1), ens.mean_jumps)};
}

Verdict toy_model() {
    ToyConfig c;
    const std::vector<int> rows{500, 136, 37};
    ToyLawOptions opt;
    const auto law = toy_tc_law(rows, c, opt);
    std::vector<double> mfp;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        mfp.push_back(mean_first_passage(rows[r], c.N_c, c.kappa_per_us()));
        note(format("N_i = %d: t_c = %.3f us [%.3f, %.3f], N(t_c) = %.1f, first passage %.3f us", rows[r],
                    law.reports[r].t_c, law.reports[r].ci_low, law.reports[r].ci_high, law.reports[r].photons_at_tc,
                    mfp[r]));
    }
    const bool ordered = law.reports[0].t_c > law.reports[1].t_c && law.reports[1].t_c > law.reports[2].t_c;
    const double slope_k = law.fit.slope * c.kappa_per_us();
    const double oracle = fit_line(law.log_ratio, mfp).slope;
    const double vs_oracle = law.fit.slope / oracle;
    return {ordered && std::abs(slope_k - 1.0) <= 0.05 && std::abs(vs_oracle - 1.0) <= 0.05,
            format("ordered %s; slope %.3f us, slope*kappa = %.4f, first-passage slope %.3f us (ratio %.4f)",
                   ordered ? "yes" : "no", law.fit.slope, slope_k, oracle, vs_oracle)};
}

Verdict dissipative_transition_law() {
    const DimerParams p = dissipative_preset();
    const double rate = p.photon_decay_rate();
    const double nc = quantum_critical_photons(p);
    const std::vector<double> rows{8, 16, 32};
    const std::size_t n_traj = 500;
    const double dt = 0.05;
    bool ordering = true, departs = true, photon_clean = true, closed_clean = true;
    std::vector<double> lr, tcs;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const double n = rows[r];
        const double t_end = 1.25 * std::log(n / nc) / rate + 1.0 / rate;
        const auto sp = space_for_coherent(n, 0.0);
        const auto psi = dimer_initial_state(std::sqrt(n), 0.0, sp);
        const auto ens = run_ensemble(psi, TrajectoryModel(p, sp), t_end, dt, n_traj, 1 + r * n_traj);
        for (std::size_t k = 0; k < ens.t.size(); ++k) ordering &= ens.xi[0][k] <= ens.IQ2[0][k];

        const Window w = transition_fit_window(n, p);
        CriticalTimeOptions opt;
        opt.fit_window = w;
        std::string xi_status, photon_status, closed_status;
        try {
            const auto rep = dissipative_transition(ens, n, p);
            lr.push_back(std::log(n / nc));
            tcs.push_back(rep.t_c);
            xi_status = format("t_c = %.3f us [%.3f, %.3f], fit residual %.3f", rep.t_c, rep.ci_low, rep.ci_high,
                               rep.fit.residual_rms);
        } catch (const SolverError& e) {
            departs = false;
            xi_status = e.what();
        }
        try {
            const auto rep = critical_time(ens.t, ens.IQ2[0], ens.se_IQ2[0], opt);
            photon_clean = false;
            photon_status = format("departs at %.3f us", rep.t_c);
        } catch (const NoDeparture&) {
            photon_status = "no departure";
        } catch (const SolverError& e) {
            photon_clean = false;
            photon_status = e.what();
        }
        // Same window without dissipation.
        DimerParams closed = p;
        closed.kappa = 0.0;
        const auto u = evolve(psi, build_hamiltonian(closed, sp), sp, t_end, dt, {PropagatorMethod::krylov});
        try {
            const auto rep = critical_time(u.series.t, u.series.xi[0], {}, opt);
            closed_clean = false;
            closed_status = format("departs at %.3f us", rep.t_c);
        } catch (const NoDeparture&) {
            closed_status = "no departure";
        } catch (const SolverError& e) {
            closed_clean = false;
            closed_status = e.what();
        }
        note(format("N_i = %g (dim %lld, %zu traj, fit window [0, %.2f] us, %.1f jumps)", n, (long long)sp.dim(),
                    n_traj, w.t1, ens.mean_jumps));
        note("  xi_L: " + xi_status);
        note("  photon signal: " + photon_status);
        note("  kappa = 0: " + closed_status);
    }
    bool monotone = tcs.size() == rows.size();
    for (std::size_t i = 1; i < tcs.size(); ++i) monotone &= tcs[i] > tcs[i - 1];
    double slope_ratio = NAN;
    if (tcs.size() >= 2) slope_ratio = fit_line(lr, tcs).slope * rate;
    const bool law = monotone && std::abs(slope_ratio - 1.0) <= 0.15;
    return {ordering && departs && photon_clean && law && closed_clean,
            format("(a) xi <= photon signal %s, xi departs %s, photon signal exponential %s; (b) monotone %s, "
                   "slope*2pi kappa = %.3f; (c) no departure at kappa = 0 %s",
                   ordering ? "yes" : "no", departs ? "yes" : "no", photon_clean ? "yes" : "no",
                   monotone ? "yes" : "no", slope_ratio, closed_clean ? "yes" : "no")};
}

Verdict determinism() {
    const fs::path root = fs::temp_directory_path() / "jcdimer_acceptance_determinism";
    fs::remove_all(root);
    const char* configs[] = {
        "solver = mcwf\ng_mhz = 1\nj_mhz = 0.5\nkappa_mhz = 1\ngamma_mhz = 0.5\nphotons = 0.36\n"
        "t_end_us = 1\noutput_dt_us = 0.125\nn_traj = 200\nseed = 9\nthreads = 2\n",
        "solver = toy\nn_i = 136\nn_trials = 50000\nseed = 4\nthreads = 2\n",
        "solver = unitary\npreset = scaled\nphotons = 9\nt_end_us = 0.05\noutput_dt_us = 0.001\n",
        "solver = semiclassical\npreset = scaled\nphotons = 30\nt_end_us = 0.5\noutput_dt_us = 0.001\n"};
    bool ok = true;
    int files = 0;
    for (int i = 0; i < 4; ++i) {
        const auto cfg = cli::parse_run_config(io::KeyValueConfig::parse(configs[i]));
        const auto a = cli::execute_run(cfg, root / std::to_string(i) / "a");
        const auto b = cli::execute_run(cfg, root / std::to_string(i) / "b");
        ok &= a.outputs == b.outputs;
        std::vector<std::string> names = a.outputs;
        names.push_back("manifest.json");
        for (const auto& n : names) {
            ++files;
            ok &= io::read_file(root / std::to_string(i) / "a" / n) == io::read_file(root / std::to_string(i) / "b" / n);
        }
    }
    fs::remove_all(root);
    return {ok, format("%d output files from mcwf, toy, unitary and semiclassical runs compared byte for byte", files)};
}

struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    int only = 0;
    app.add_option("--criterion", only, "Run a single criterion (1-10)")->check(CLI::Range(1, 10));
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> all{
        {1, "spectrum", 1.0, spectrum_levels},
        {2, "semiclassical critical law", 60.0, semiclassical_law},
        {3, "Josephson frequency", 10.0, josephson_frequency},
        {4, "revival scaling", 60.0, revival_scaling},
        {5, "quantum critical number at desk scale", 1800.0, quantum_critical_number},
        {6, "open-system oracle equivalence", 300.0, oracle_equivalence},
        {7, "damped cavity", 60.0, damped_cavity},
        {8, "toy model", 300.0, toy_model},
        {9, "dissipation-driven transition", 3600.0, dissipative_transition_law},
        {10, "determinism", 60.0, determinism},
    };

    int failed = 0;
    for (const auto& c : all) {
        if (only && c.id != only) continue;
        std::printf("criterion %d (%s)\n", c.id, c.name);
        std::fflush(stdout);
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs <= c.budget_s;
        const bool pass = v.pass && in_time;
        failed += !pass;
        std::printf("criterion %d: %s  %s; %.1f s (budget %.0f s%s)\n", c.id, pass ? "PASS" : "FAIL", v.detail.c_str(),
                    secs, c.budget_s, in_time ? "" : ", exceeded");
        std::fflush(stdout);
    }
    return failed ? 1 : 0;
}
