#include "jcdimer/runner.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "jcdimer/errors.hpp"

#ifndef JCD_VERSION
#define JCD_VERSION "unversioned"
#endif

namespace jcd::cli {

namespace {

using nlohmann::json;

const std::vector<std::string> kCommonKeys = {
    "solver", "task", "description", "preset", "nu_c_mhz", "nu_a_mhz", "g_mhz", "j_mhz", "kappa_mhz", "kappa_khz",
    "gamma_mhz", "photons", "n_total", "z", "phase_rad", "alpha_l_re", "alpha_l_im", "alpha_r_re", "alpha_r_im",
    "t_end_us", "t_end_ns", "output_dt_us", "output_dt_ns", "workers", "cutoff_c"};

const std::vector<std::string> kCriticalKeys = {
    "critical.fit_t0_us", "critical.fit_t1_us", "critical.chi", "critical.max_fit_residual", "critical.bootstrap",
    "critical.bootstrap_seed", "critical.confidence", "critical.fit_fraction", "critical.fit_min_periods"};

std::vector<std::string> known_keys(Solver s) {
    std::vector<std::string> k = kCommonKeys;
    auto add = [&](std::initializer_list<const char*> more) { k.insert(k.end(), more.begin(), more.end()); };
    switch (s) {
        case Solver::semiclassical:
            add({"josephson_periods", "threshold", "rel_tol", "ode_rel_tol", "ode_abs_tol"});
            break;
        case Solver::unitary:
            add({"method", "krylov_dim", "krylov_tol", "max_step_us", "norm_tol", "threads", "manifold", "ode_rel_tol",
                 "ode_abs_tol", "output_stride"});
            break;
        case Solver::mcwf:
            add({"n_traj", "seed", "nojump_method", "krylov_dim", "krylov_tol", "jump_tol", "threads"});
            k.insert(k.end(), kCriticalKeys.begin(), kCriticalKeys.end());
            break;
        case Solver::dense_oracle:
            add({"ode_rel_tol", "ode_abs_tol"});
            break;
        case Solver::toy:
            k = {"solver", "task", "description", "n_i", "n_c", "kappa_khz", "j_mhz", "n_trials", "dt_us", "t_end_us",
                 "seed", "exponent", "chirp", "chirp_power", "threads", "workers"};
            k.insert(k.end(), kCriticalKeys.begin(), kCriticalKeys.end());
            break;
    }
    return k;
}

double time_value(const io::KeyValueConfig& cfg, const std::string& stem, double fallback) {
    const bool us = cfg.has(stem + "_us"), ns = cfg.has(stem + "_ns");
    if (us && ns) throw ConfigError(stem + "_ns", "give either " + stem + "_us or " + stem + "_ns, not both");
    if (us) return cfg.get_double(stem + "_us");
    if (ns) return cfg.get_double(stem + "_ns") * 1e-3;
    return fallback;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_file(const fs::path& dir, const std::string& name, const std::string& bytes, RunOutcome& out) {
    io::atomic_write(dir / name, bytes);
    out.outputs.push_back(name);
}

std::string series_csv(const ObservableSeries& s) {
    const auto names = ObservableSeries::column_names();
    std::vector<const std::vector<double>*> cols;
    for (const auto& n : names) cols.push_back(&s.column(n));
    return io::csv_table(names, cols);
}

std::string ensemble_csv(const EnsembleResult& e) {
    const auto names = EnsembleResult::column_names();
    std::vector<const std::vector<double>*> cols;
    for (const auto& n : names) cols.push_back(&e.column(n));
    return io::csv_table(names, cols);
}

std::pair<cplx, cplx> initial_amplitudes(const RunConfig& c, double photons) {
    if (c.initial.alpha) return *c.initial.alpha;
    return {cplx(std::sqrt(photons), 0.0), cplx(0.0, 0.0)};
}

double single_photons(const RunConfig& c) {
    if (c.initial.alpha) return std::norm(c.initial.alpha->first) + std::norm(c.initial.alpha->second);
    return c.initial.photons.front();
}

CriticalTimeOptions critical_options(const io::KeyValueConfig& cfg) {
    CriticalTimeOptions o;
    o.fit_window.t0 = cfg.get_double("critical.fit_t0_us", 0.0);
    if (cfg.has("critical.fit_t1_us")) o.fit_window.t1 = cfg.get_double("critical.fit_t1_us");
    o.chi = cfg.get_double("critical.chi", o.chi);
    o.max_fit_residual = cfg.get_double("critical.max_fit_residual", o.max_fit_residual);
    o.bootstrap = static_cast<int>(cfg.get_int("critical.bootstrap", o.bootstrap));
    o.bootstrap_seed = static_cast<std::uint64_t>(cfg.get_int("critical.bootstrap_seed", 1));
    o.confidence = cfg.get_double("critical.confidence", o.confidence);
    if (!(o.chi > 0.0)) throw ConfigError("critical.chi", "must be positive");
    if (o.bootstrap < 0) throw ConfigError("critical.bootstrap", "must be >= 0");
    if (!(o.confidence > 0.0 && o.confidence < 1.0)) throw ConfigError("critical.confidence", "must lie in (0, 1)");
    return o;
}

json transition_json(const TransitionReport& r) { return to_json(r); }

// Toy rows share one simulation per N_i; the log-law fit needs three rows.
void run_toy(const RunConfig& c, const fs::path& dir, RunOutcome& out) {
    std::vector<ToySeries> rows;
    std::vector<std::string> names{"t"};
    std::vector<const std::vector<double>*> cols;
    for (int n : c.toy_rows) {
        ToyConfig tc = c.toy;
        tc.N_i = n;
        rows.push_back(simulate_toy(tc));
    }
    // One shared grid: every row uses the longest requested span.
    cols.push_back(&rows.front().t);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].t.size() != rows.front().t.size())
            throw ConfigError("t_end_us", "rows with different spans; set t_end_us explicitly");
        const std::string tag = c.toy_rows.size() == 1 ? "" : "_" + std::to_string(c.toy_rows[r]);
        for (auto [name, v] : {std::pair{"signal", &rows[r].signal}, {"se_signal", &rows[r].se_signal},
                               {"envelope", &rows[r].envelope}, {"se_envelope", &rows[r].se_envelope},
                               {"photons", &rows[r].photons}, {"se_photons", &rows[r].se_photons}}) {
            names.push_back(std::string(name) + tag);
            cols.push_back(v);
        }
    }
    write_file(dir, "series.csv", io::csv_table(names, cols), out);

    json reports = json::array();
    std::vector<double> lr, tcs;
    const CriticalTimeOptions base = c.critical.value_or(CriticalTimeOptions{});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        ToyConfig tc = c.toy;
        tc.N_i = c.toy_rows[r];
        if (tc.N_i <= tc.N_c) continue;
        CriticalTimeOptions opt = base;
        if (!std::isfinite(opt.fit_window.t1)) opt.fit_window = toy_fit_window(tc, c.fit_fraction);
        try {
            TransitionReport rep = critical_time(rows[r].t, rows[r].signal, rows[r].se_signal, opt);
            rep.solver = "toy";
            rep.initial_photons = tc.N_i;
            rep.photons_at_tc = value_at(rows[r].t, rows[r].photons, rep.t_c);
            reports.push_back(transition_json(rep));
            lr.push_back(std::log(static_cast<double>(tc.N_i) / std::max(tc.N_c, 1)));
            tcs.push_back(rep.t_c);
        } catch (const SolverError& e) {
            out.warnings.push_back("N_i=" + std::to_string(tc.N_i) + ": " + e.what());
            reports.push_back({{"initial_photons", tc.N_i}, {"solver", "toy"}, {"error", e.what()}});
        }
    }
    json doc{{"rows", reports}};
    if (lr.size() >= 3) {
        const LinearFit f = fit_line(lr, tcs);
        doc["law"] = {{"slope_us", f.slope},
                      {"intercept_us", f.intercept},
                      {"slope_times_kappa", f.slope * c.toy.kappa_per_us()},
                      {"residual_rms_us", f.residual_rms}};
        out.summary["tc_slope_us"] = f.slope;
        out.summary["tc_slope_times_kappa"] = f.slope * c.toy.kappa_per_us();
    }
    if (tcs.size() == 1) out.summary["t_c_us"] = tcs.front();
    write_file(dir, "transitions.json", doc.dump(2) + "\n", out);
}

void run_semiclassical(const RunConfig& c, const fs::path& dir, RunOutcome& out) {
    const std::string task = c.task.empty() ? "trajectory" : c.task;
    if (task == "trajectory") {
        MeanFieldState s0;
        const double n = single_photons(c);
        if (c.initial.alpha) {
            s0.site[0].R = c.initial.alpha->first.real();
            s0.site[0].I = c.initial.alpha->first.imag();
            s0.site[1].R = c.initial.alpha->second.real();
            s0.site[1].I = c.initial.alpha->second.imag();
        } else {
            s0 = MeanFieldState::localized_left(n);
        }
        IntegrateOptions opt;
        opt.sample_dt = c.output_dt_us;
        opt.tol = {c.source.get_double("ode_rel_tol", 1e-10), c.source.get_double("ode_abs_tol", 1e-12)};
        const auto traj = integrate(s0, c.params, c.t_end_us, opt);
        std::vector<std::vector<double>> v(13);
        for (const auto& smp : traj.samples) {
            const auto& st = smp.state;
            const double row[13] = {smp.t, st.site[0].R, st.site[0].I, st.site[1].R, st.site[1].I,
                                    st.site[0].n[0], st.site[0].n[1], st.site[0].n[2], st.site[1].n[0],
                                    st.site[1].n[1], st.site[1].n[2], st.photons(Site::left), st.imbalance()};
            for (int j = 0; j < 13; ++j) v[j].push_back(row[j]);
        }
        std::vector<double> nr;
        for (const auto& smp : traj.samples) nr.push_back(smp.state.photons(Site::right));
        std::vector<std::string> names{"t", "R_L", "I_L", "R_R", "I_R", "nx_L", "ny_L", "nz_L",
                                       "nx_R", "ny_R", "nz_R", "N_L", "Z", "N_R"};
        std::vector<const std::vector<double>*> cols;
        for (auto& col : v) cols.push_back(&col);
        cols.push_back(&nr);
        write_file(dir, "series.csv", io::csv_table(names, cols), out);
        out.summary["mean_Z"] = traj.imbalance_integral / c.t_end_us;
        out.summary["renormalizations"] = traj.renormalizations;
        try {
            out.summary["Z_period_us"] = oscillation_period(v[0], v[12]).period;
        } catch (const TooFewCrossings&) {
            out.summary["Z_period_us"] = nullptr;
        }
        return;
    }
    if (task == "critical-coupling") {
        json rows = json::array();
        for (double n : c.initial.photons) {
            const auto b = find_critical_coupling(n, c.params, c.localization, c.rel_tol);
            const double scale = c.params.J * std::sqrt(n);
            rows.push_back({{"photons", n},
                            {"g_lower_mhz", b.lower},
                            {"g_upper_mhz", b.upper},
                            {"g_c_mhz", b.estimate()},
                            {"g_c_over_J_sqrtN", scale > 0 ? json(b.estimate() / scale) : json(nullptr)},
                            {"evaluations", b.evaluations}});
        }
        write_file(dir, "critical.json", json{{"rows", rows}}.dump(2) + "\n", out);
        if (rows.size() == 1) {
            out.summary["g_c_mhz"] = rows[0]["g_c_mhz"];
            out.summary["g_c_over_J_sqrtN"] = rows[0]["g_c_over_J_sqrtN"];
        }
        return;
    }
    if (task == "critical-photons") {
        const auto b = find_critical_photon_number(c.params, c.localization, c.rel_tol);
        json doc{{"N_lower", b.lower}, {"N_upper", b.upper}, {"N_c", b.estimate()}, {"evaluations", b.evaluations}};
        write_file(dir, "critical.json", doc.dump(2) + "\n", out);
        out.summary["N_c"] = b.estimate();
        return;
    }
    throw ConfigError("task", "semiclassical tasks are trajectory, critical-coupling, critical-photons");
}

void run_unitary(const RunConfig& c, const fs::path& dir, RunOutcome& out) {
    const std::string task = c.task.empty() ? "evolve" : c.task;
    if (task == "spectrum") {
        const auto levels = spectrum(c.params, c.manifold);
        std::vector<double> index(levels.size());
        for (std::size_t i = 0; i < index.size(); ++i) index[i] = static_cast<double>(i);
        write_file(dir, "spectrum.csv", io::csv_table({"index", "level_mhz"}, {&index, &levels}), out);
        out.summary["levels"] = levels.size();
        return;
    }
    if (task != "evolve") throw ConfigError("task", "unitary tasks are evolve, spectrum");
    if (c.initial.photons.size() > 1) {
        const auto pd = phase_diagram_scan(c.initial.photons, c.params, c.t_end_us, c.output_dt_us, c.propagator,
                                           c.cutoff_c, c.workers);
        write_file(dir, "xi_L.csv", io::csv_matrix("photons", pd.photons, pd.t, pd.xi[0]), out);
        write_file(dir, "xi_R.csv", io::csv_matrix("photons", pd.photons, pd.t, pd.xi[1]), out);
        write_file(dir, "N_L.csv", io::csv_matrix("photons", pd.photons, pd.t, pd.N[0]), out);
        write_file(dir, "N_R.csv", io::csv_matrix("photons", pd.photons, pd.t, pd.N[1]), out);
        write_file(dir, "ZT.csv", io::csv_matrix("photons", pd.photons, pd.t, pd.ZT), out);
        std::vector<double> eta(pd.eta.begin(), pd.eta.end()), dim(pd.dim.begin(), pd.dim.end());
        write_file(dir, "rows.csv", io::csv_table({"photons", "eta", "dim"}, {&pd.photons, &eta, &dim}), out);
        out.summary["rows"] = pd.photons.size();
        out.summary["max_dim"] = *std::max_element(dim.begin(), dim.end());
        return;
    }
    const auto [al, ar] = initial_amplitudes(c, c.initial.photons.empty() ? 0.0 : c.initial.photons.front());
    const auto space = space_for_coherent(std::norm(al), std::norm(ar), c.cutoff_c);
    const auto psi0 = dimer_initial_state(al, ar, space);
    const auto H = build_hamiltonian(c.params, space);
    const auto res = evolve(psi0, H, space, c.t_end_us, c.output_dt_us, c.propagator);
    write_file(dir, "series.csv", series_csv(res.series), out);
    const auto avg = time_averaged_imbalance(res.series, 0.0, c.t_end_us);
    out.summary["mean_ZT"] = avg.mean_ZT;
    out.summary["mean_ZT_var"] = avg.mean_ZT_var;
    out.summary["temporal_var"] = avg.temporal_var;
    out.summary["dim"] = space.dim();
    out.summary["eta"] = space.eta();
    out.summary["steps"] = res.steps;
}

void run_mcwf(const RunConfig& c, const fs::path& dir, RunOutcome& out) {
    if (c.initial.photons.size() > 1) {
        const auto scan = dissipative_phase_scan(c.initial.photons, c.params, c.t_end_us, c.output_dt_us, c.n_traj,
                                                 c.seed, c.mcwf, c.cutoff_c);
        write_file(dir, "xi_L.csv", io::csv_matrix("photons", scan.photons, scan.t, scan.xi[0]), out);
        write_file(dir, "xi_R.csv", io::csv_matrix("photons", scan.photons, scan.t, scan.xi[1]), out);
        write_file(dir, "IQ2_L.csv", io::csv_matrix("photons", scan.photons, scan.t, scan.IQ2[0]), out);
        write_file(dir, "IQ2_R.csv", io::csv_matrix("photons", scan.photons, scan.t, scan.IQ2[1]), out);
        write_file(dir, "se_xi_L.csv", io::csv_matrix("photons", scan.photons, scan.t, scan.se_xi[0]), out);
        std::size_t failed = 0;
        for (const auto& r : scan.rows) failed += r.failed_seeds.size();
        out.summary["failed_trajectories"] = failed;
        if (failed) out.warnings.push_back(std::to_string(failed) + " trajectories failed and were dropped");
        if (!c.critical) return;
        json rows = json::array();
        std::vector<double> lr, tcs;
        for (std::size_t r = 0; r < scan.rows.size(); ++r) {
            const double n = scan.photons[r];
            try {
                const auto rep =
                    dissipative_transition(scan.rows[r], n, c.params, *c.critical, c.fit_fraction, c.fit_min_periods);
                rows.push_back(transition_json(rep));
                lr.push_back(std::log(n / quantum_critical_photons(c.params)));
                tcs.push_back(rep.t_c);
            } catch (const Error& e) {
                out.warnings.push_back("photons=" + fmt(n) + ": " + e.what());
                rows.push_back({{"initial_photons", n}, {"solver", "mcwf"}, {"error", e.what()}});
            }
        }
        json doc{{"rows", rows}};
        if (lr.size() >= 3) {
            const LinearFit f = fit_line(lr, tcs);
            doc["law"] = {{"slope_us", f.slope},
                          {"intercept_us", f.intercept},
                          {"slope_times_decay_rate", f.slope * c.params.photon_decay_rate()}};
            out.summary["tc_slope_us"] = f.slope;
        }
        write_file(dir, "transitions.json", doc.dump(2) + "\n", out);
        return;
    }
    const auto [al, ar] = initial_amplitudes(c, c.initial.photons.empty() ? 0.0 : c.initial.photons.front());
    const auto space = space_for_coherent(std::norm(al), std::norm(ar), c.cutoff_c);
    const auto psi0 = dimer_initial_state(al, ar, space);
    const TrajectoryModel model(c.params, space, c.mcwf);
    const auto ens = run_ensemble(psi0, model, c.t_end_us, c.output_dt_us, c.n_traj, c.seed);
    write_file(dir, "series.csv", ensemble_csv(ens), out);
    out.summary["n_traj"] = ens.n_traj;
    out.summary["mean_jumps"] = ens.mean_jumps;
    out.summary["failed_trajectories"] = ens.failed_seeds.size();
    out.summary["dim"] = space.dim();
    if (!ens.failed_seeds.empty())
        out.warnings.push_back(std::to_string(ens.failed_seeds.size()) + " trajectories failed: " + ens.failures.front());
    if (c.critical) {
        const double n = std::norm(al) + std::norm(ar);
        TransitionReport rep;
        if (std::isfinite(c.critical->fit_window.t1)) {
            rep = critical_time(ens.t, ens.xi[0], ens.se_xi[0], *c.critical);
            rep.solver = "mcwf";
            rep.initial_photons = n;
        } else {
            rep = dissipative_transition(ens, n, c.params, *c.critical, c.fit_fraction, c.fit_min_periods);
        }
        write_file(dir, "transitions.json", json{{"rows", json::array({transition_json(rep)})}}.dump(2) + "\n", out);
        out.summary["t_c_us"] = rep.t_c;
    }
}

void run_dense(const RunConfig& c, const fs::path& dir, RunOutcome& out) {
    const auto [al, ar] = initial_amplitudes(c, c.initial.photons.empty() ? 0.0 : c.initial.photons.front());
    const auto space = space_for_coherent(std::norm(al), std::norm(ar), c.cutoff_c);
    const auto psi0 = dimer_initial_state(al, ar, space);
    const ode::Tolerance tol{c.source.get_double("ode_rel_tol", 1e-10), c.source.get_double("ode_abs_tol", 1e-13)};
    const auto res = master_equation_dense(psi0, c.params, space, c.t_end_us, c.output_dt_us, tol);
    write_file(dir, "series.csv", series_csv(res.series), out);
    out.summary["max_trace_error"] = res.max_trace_error;
    out.summary["min_eigenvalue"] = res.min_eigenvalue;
    out.summary["dim"] = space.dim();
}

json axis_json(const std::vector<Axis>& axes) {
    json a = json::array();
    for (const auto& ax : axes) a.push_back({{"key", ax.key}, {"values", ax.values}});
    return a;
}

}  // namespace

const char* solver_name(Solver s) noexcept {
    switch (s) {
        case Solver::semiclassical: return "semiclassical";
        case Solver::unitary: return "unitary";
        case Solver::mcwf: return "mcwf";
        case Solver::dense_oracle: return "dense-oracle";
        case Solver::toy: return "toy";
    }
    return "?";
}

Solver parse_solver(const std::string& name) {
    for (Solver s : {Solver::semiclassical, Solver::unitary, Solver::mcwf, Solver::dense_oracle, Solver::toy})
        if (name == solver_name(s)) return s;
    throw ConfigError("solver", "'" + name + "' is not one of semiclassical, unitary, mcwf, dense-oracle, toy");
}

std::string RunConfig::hash() const { return io::sha256_hex(source.canonical()); }

RunConfig parse_run_config(const io::KeyValueConfig& cfg) {
    RunConfig c;
    c.source = cfg;
    c.solver = parse_solver(cfg.get_string("solver"));
    cfg.require_known(known_keys(c.solver));
    c.task = cfg.get_string("task", "");
    c.workers = static_cast<int>(cfg.get_int("workers", 1));
    if (c.workers < 1) throw ConfigError("workers", "must be >= 1");

    if (c.solver == Solver::toy) {
        ToyConfig& t = c.toy;
        for (double n : cfg.get_list("n_i")) {
            if (n != std::floor(n)) throw ConfigError("n_i", "photon numbers must be integers");
            c.toy_rows.push_back(static_cast<int>(n));
        }
        t.N_c = static_cast<int>(cfg.get_int("n_c", t.N_c));
        t.kappa_khz = cfg.get_double("kappa_khz", t.kappa_khz);
        t.J_mhz = cfg.get_double("j_mhz", t.J_mhz);
        t.n_trials = cfg.get_int("n_trials", t.n_trials);
        t.dt_us = cfg.get_double("dt_us", t.dt_us);
        t.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
        t.exponent = cfg.get_double("exponent", t.exponent);
        t.chirp = cfg.get_bool("chirp", false);
        t.chirp_power = cfg.get_double("chirp_power", t.chirp_power);
        t.threads = static_cast<int>(cfg.get_int("threads", 1));
        // Rows share a grid, sized for the largest N_i unless given.
        const int nmax = *std::max_element(c.toy_rows.begin(), c.toy_rows.end());
        ToyConfig longest = t;
        longest.N_i = nmax;
        t.t_end_us = cfg.get_double("t_end_us", longest.default_t_end());
        for (int n : c.toy_rows) {
            ToyConfig row = t;
            row.N_i = n;
            row.validate();
        }
        c.fit_fraction = cfg.get_double("critical.fit_fraction", 0.25);
        bool any_critical = false;
        for (const auto& k : kCriticalKeys) any_critical |= cfg.has(k);
        if (any_critical) c.critical = critical_options(cfg);
        return c;
    }

    if (cfg.has("preset")) c.params = preset_by_name(cfg.get_string("preset"));
    DimerParams& p = c.params;
    p.nu_c = cfg.get_double("nu_c_mhz", p.nu_c);
    p.nu_a = cfg.get_double("nu_a_mhz", cfg.has("nu_c_mhz") ? p.nu_c : p.nu_a);
    p.g = cfg.get_double("g_mhz", p.g);
    p.J = cfg.get_double("j_mhz", p.J);
    if (cfg.has("kappa_mhz") && cfg.has("kappa_khz"))
        throw ConfigError("kappa_khz", "give either kappa_mhz or kappa_khz, not both");
    if (cfg.has("kappa_mhz")) p.kappa = cfg.get_double("kappa_mhz");
    if (cfg.has("kappa_khz")) p.kappa = cfg.get_double("kappa_khz") * 1e-3;
    p.gamma = cfg.get_double("gamma_mhz", p.gamma);
    p.validate();

    const bool has_alpha = cfg.has("alpha_l_re") || cfg.has("alpha_l_im") || cfg.has("alpha_r_re") ||
                           cfg.has("alpha_r_im");
    const int forms = int(cfg.has("photons")) + int(cfg.has("n_total")) + int(has_alpha);
    if (forms > 1) throw ConfigError("photons", "give one of photons, n_total + z, or alpha_* amplitudes");
    if (cfg.has("photons")) {
        c.initial.photons = cfg.get_list("photons");
        for (double n : c.initial.photons)
            if (!(n >= 0.0)) throw ConfigError("photons", "must be >= 0");
    } else if (cfg.has("n_total")) {
        const double n = cfg.get_double("n_total");
        const double z = cfg.get_double("z", 1.0);
        const double phase = cfg.get_double("phase_rad", 0.0);
        if (!(n >= 0.0)) throw ConfigError("n_total", "must be >= 0");
        if (!(z >= -1.0 && z <= 1.0)) throw ConfigError("z", "must lie in [-1, 1]");
        c.initial.alpha = std::pair{cplx(std::sqrt(0.5 * n * (1.0 + z)), 0.0),
                                    std::polar(std::sqrt(0.5 * n * (1.0 - z)), phase)};
    } else if (has_alpha) {
        c.initial.alpha = std::pair{cplx(cfg.get_double("alpha_l_re", 0.0), cfg.get_double("alpha_l_im", 0.0)),
                                    cplx(cfg.get_double("alpha_r_re", 0.0), cfg.get_double("alpha_r_im", 0.0))};
    }

    const bool needs_state = !(c.solver == Solver::unitary && c.task == "spectrum") &&
                             !(c.solver == Solver::semiclassical && c.task == "critical-photons");
    if (needs_state && c.initial.photons.empty() && !c.initial.alpha)
        throw ConfigError("photons", "an initial state is required (photons, n_total + z, or alpha_*)");
    const bool needs_time = needs_state && !(c.solver == Solver::semiclassical && c.task == "critical-coupling");
    c.t_end_us = time_value(cfg, "t_end", 0.0);
    c.output_dt_us = time_value(cfg, "output_dt", 0.0);
    if (needs_time) {
        if (!(c.t_end_us > 0.0)) throw ConfigError("t_end_us", "required and must be positive");
        if (!(c.output_dt_us > 0.0)) throw ConfigError("output_dt_us", "required and must be positive");
    }
    c.cutoff_c = cfg.get_double("cutoff_c", 6.0);
    if (!(c.cutoff_c > 0.0)) throw ConfigError("cutoff_c", "must be positive");

    switch (c.solver) {
        case Solver::semiclassical:
            c.localization.josephson_periods = cfg.get_double("josephson_periods", c.localization.josephson_periods);
            c.localization.threshold = cfg.get_double("threshold", c.localization.threshold);
            c.rel_tol = cfg.get_double("rel_tol", c.rel_tol);
            break;
        case Solver::unitary:
            c.propagator.method = parse_method(cfg.get_string("method", "krylov"));
            c.propagator.krylov_dim = static_cast<int>(cfg.get_int("krylov_dim", c.propagator.krylov_dim));
            c.propagator.krylov_tol = cfg.get_double("krylov_tol", c.propagator.krylov_tol);
            c.propagator.max_step = cfg.get_double("max_step_us", 0.0);
            c.propagator.norm_tol = cfg.get_double("norm_tol", c.propagator.norm_tol);
            c.propagator.threads = static_cast<int>(cfg.get_int("threads", 1));
            c.propagator.output_stride = static_cast<int>(cfg.get_int("output_stride", 1));
            c.propagator.rk_tol = {cfg.get_double("ode_rel_tol", c.propagator.rk_tol.rtol),
                                   cfg.get_double("ode_abs_tol", c.propagator.rk_tol.atol)};
            c.manifold = static_cast<int>(cfg.get_int("manifold", 1));
            if (c.propagator.krylov_dim < 2) throw ConfigError("krylov_dim", "must be >= 2");
            break;
        case Solver::mcwf: {
            c.n_traj = static_cast<std::size_t>(cfg.get_int("n_traj"));
            if (c.n_traj < 1) throw ConfigError("n_traj", "must be >= 1");
            c.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
            const std::string m = cfg.get_string("nojump_method", "sector");
            if (m == "sector") c.mcwf.method = NoJumpMethod::sector;
            else if (m == "krylov") c.mcwf.method = NoJumpMethod::krylov;
            else throw ConfigError("nojump_method", "'" + m + "' is not sector or krylov");
            c.mcwf.krylov_dim = static_cast<int>(cfg.get_int("krylov_dim", c.mcwf.krylov_dim));
            c.mcwf.krylov_tol = cfg.get_double("krylov_tol", c.mcwf.krylov_tol);
            c.mcwf.jump_tol = cfg.get_double("jump_tol", c.mcwf.jump_tol);
            c.mcwf.threads = static_cast<int>(cfg.get_int("threads", 1));
            bool any_critical = false;
            for (const auto& k : kCriticalKeys) any_critical |= cfg.has(k);
            if (any_critical) c.critical = critical_options(cfg);
            c.fit_fraction = cfg.get_double("critical.fit_fraction", 0.4);
            c.fit_min_periods = cfg.get_double("critical.fit_min_periods", 4.0);
            break;
        }
        case Solver::dense_oracle:
        case Solver::toy:
            break;
    }
    return c;
}

fs::path default_output_root() {
    if (const char* env = std::getenv("JCDIMER_OUTPUT_ROOT"); env && *env) return env;
    return "runs";
}

RunOutcome execute_run(const RunConfig& c, const fs::path& dir) {
    RunOutcome out;
    out.dir = dir;
    out.summary = json::object();
    fs::create_directories(dir);
    switch (c.solver) {
        case Solver::semiclassical: run_semiclassical(c, dir, out); break;
        case Solver::unitary: run_unitary(c, dir, out); break;
        case Solver::mcwf: run_mcwf(c, dir, out); break;
        case Solver::dense_oracle: run_dense(c, dir, out); break;
        case Solver::toy: run_toy(c, dir, out); break;
    }
    json manifest;
    manifest["format"] = "jcdimer-run-v1";
    manifest["code_version"] = JCD_VERSION;
    manifest["solver"] = solver_name(c.solver);
    manifest["config"] = c.source.values();
    manifest["config_hash"] = c.hash();
    if (c.solver == Solver::mcwf) {
        // Scan rows draw consecutive seed blocks.
        const std::size_t rows = std::max<std::size_t>(1, c.initial.photons.size());
        manifest["seeds"] = {{"base", c.seed}, {"count", c.n_traj * rows}};
    } else if (c.solver == Solver::toy) {
        manifest["seeds"] = {{"base", c.toy.seed}, {"trials_per_row", c.toy.n_trials}};
    } else {
        manifest["seeds"] = nullptr;
    }
    json outputs = json::object();
    for (const auto& name : out.outputs) outputs[name] = io::sha256_file(dir / name);
    manifest["outputs"] = outputs;
    manifest["summary"] = out.summary;
    manifest["warnings"] = out.warnings;
    io::atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");
    return out;
}

Axis parse_axis(const std::string& key, const std::string& spec) {
    const std::string field = "axis." + key;
    const auto colon = spec.find(':');
    if (colon == std::string::npos) throw ConfigError(field, "expected list:, lin: or log: prefix");
    const std::string kind = spec.substr(0, colon);
    io::KeyValueConfig tmp;
    tmp.set(field, spec.substr(colon + 1));
    std::vector<double> v;
    try {
        v = tmp.get_list(field);
    } catch (const ConfigError&) {
        throw ConfigError(field, "empty or malformed axis");
    }
    Axis a{key, {}};
    if (kind == "list") {
        a.values = v;
    } else if (kind == "lin" || kind == "log") {
        if (v.size() != 3 || v[2] != std::floor(v[2]) || v[2] < 1)
            throw ConfigError(field, kind + " axis needs start,stop,count with integer count >= 1");
        const int n = static_cast<int>(v[2]);
        if (kind == "log" && !(v[0] > 0.0 && v[1] > 0.0)) throw ConfigError(field, "log axis needs positive ends");
        for (int i = 0; i < n; ++i) {
            const double f = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
            a.values.push_back(kind == "lin" ? v[0] + f * (v[1] - v[0])
                                             : std::exp(std::log(v[0]) + f * (std::log(v[1]) - std::log(v[0]))));
        }
    } else {
        throw ConfigError(field, "unknown axis kind '" + kind + "'");
    }
    for (double x : a.values)
        if (!std::isfinite(x)) throw ConfigError(field, "axis values must be finite");
    if (a.values.empty()) throw ConfigError(field, "empty axis");
    return a;
}

std::size_t SweepSpec::points() const {
    std::size_t n = 1;
    for (const auto& a : axes) n *= a.values.size();
    return axes.empty() ? 0 : n;
}

std::vector<double> SweepSpec::point_values(std::size_t index) const {
    std::vector<double> v(axes.size());
    for (std::size_t k = axes.size(); k-- > 0;) {
        v[k] = axes[k].values[index % axes[k].values.size()];
        index /= axes[k].values.size();
    }
    return v;
}

io::KeyValueConfig SweepSpec::point_config(std::size_t index) const {
    io::KeyValueConfig cfg = base;
    const auto v = point_values(index);
    for (std::size_t k = 0; k < axes.size(); ++k) {
        // Integer-valued axes are written without an exponent so that list
        // keys like n_i stay valid.
        const double x = v[k];
        cfg.set(axes[k].key, x == std::floor(x) && std::abs(x) < 1e15 ? std::to_string(static_cast<long long>(x))
                                                                        : fmt(x));
    }
    return cfg;
}

SweepSpec parse_sweep(const io::KeyValueConfig& cfg, const fs::path& sweep_dir) {
    SweepSpec s;
    if (cfg.has("base_config")) {
        fs::path p = cfg.get_string("base_config");
        if (p.is_relative()) p = sweep_dir / p;
        s.base = io::KeyValueConfig::load(p);
    }
    for (const auto& [key, value] : cfg.values()) {
        if (key.rfind("axis.", 0) == 0) {
            s.axes.push_back(parse_axis(key.substr(5), value));
        } else if (key.rfind("base.", 0) == 0) {
            s.base.set(key.substr(5), value);
        } else if (key != "base_config") {
            throw ConfigError(key, "sweep files hold axis.*, [base] keys and base_config only");
        }
    }
    if (s.axes.empty()) throw ConfigError("axis", "a sweep needs at least one axis");
    // Validate every point before anything runs.
    for (std::size_t i = 0; i < s.points(); ++i) parse_run_config(s.point_config(i));
    return s;
}

SweepOutcome run_sweep(const SweepSpec& spec, const fs::path& dir, int workers) {
    SweepOutcome res;
    res.dir = dir;
    fs::create_directories(dir);
    const std::size_t n = spec.points();
    const fs::path manifest_path = dir / "sweep_manifest.json";

    json previous;
    if (fs::exists(manifest_path)) {
        try {
            previous = json::parse(io::read_file(manifest_path));
        } catch (const std::exception&) {
            previous = nullptr;
        }
    }

    std::vector<json> points(n);
    std::vector<RunConfig> configs;
    configs.reserve(n);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> seed_ranges;
    std::vector<std::size_t> seeded_points;
    for (std::size_t i = 0; i < n; ++i) {
        configs.push_back(parse_run_config(spec.point_config(i)));
        const auto& c = configs.back();
        points[i] = {{"index", i}, {"values", spec.point_values(i)}, {"status", "pending"}, {"config_hash", c.hash()}};
        if (c.solver == Solver::mcwf) {
            seed_ranges.push_back({c.seed, c.n_traj * std::max<std::size_t>(1, c.initial.photons.size())});
            seeded_points.push_back(i);
        }
    }
    for (auto [a, b] : overlapping_seed_ranges(seed_ranges))
        res.warnings.push_back("SeedReuse: points " + std::to_string(seeded_points[a]) + " and " +
                               std::to_string(seeded_points[b]) + " draw overlapping trajectory seeds");

    auto point_dir = [&](std::size_t i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04zu", i);
        return dir / "points" / buf;
    };

    // A point is reusable when its recorded config hash matches and every
    // recorded output still hashes to the recorded value.
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < n; ++i) {
        bool reuse = false;
        if (previous.is_object() && previous.contains("points") && previous["points"].is_array() &&
            i < previous["points"].size()) {
            const json& old = previous["points"][i];
            if (old.value("status", "") == "done" && old.value("config_hash", "") == points[i]["config_hash"] &&
                old.contains("outputs")) {
                reuse = true;
                for (const auto& [name, hash] : old["outputs"].items()) {
                    const fs::path f = point_dir(i) / name;
                    if (!fs::exists(f) || io::sha256_file(f) != hash.get<std::string>()) {
                        reuse = false;
                        break;
                    }
                }
                if (reuse) points[i] = old;
            }
        }
        if (reuse) ++res.skipped;
        else todo.push_back(i);
    }

    auto write_manifest = [&] {
        json m{{"format", "jcdimer-sweep-v1"},
               {"code_version", JCD_VERSION},
               {"base_config_hash", io::sha256_hex(spec.base.canonical())},
               {"axes", axis_json(spec.axes)},
               {"points", points}};
        io::atomic_write(manifest_path, m.dump(2) + "\n");
    };
    write_manifest();

    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::pair<std::size_t, json>> finished;
    std::size_t next = 0;
    auto work = [&] {
        for (;;) {
            std::size_t idx;
            {
                std::lock_guard lk(mu);
                if (next >= todo.size()) return;
                idx = todo[next++];
            }
            json entry = points[idx];
            try {
                const auto out = execute_run(configs[idx], point_dir(idx));
                json outputs = json::object();
                for (const auto& name : out.outputs) outputs[name] = io::sha256_file(point_dir(idx) / name);
                outputs["manifest.json"] = io::sha256_file(point_dir(idx) / "manifest.json");
                entry["status"] = "done";
                entry["outputs"] = outputs;
                entry["summary"] = out.summary;
                entry.erase("error");
            } catch (const std::exception& e) {
                entry["status"] = "failed";
                entry["error"] = e.what();
                entry.erase("outputs");
            }
            std::lock_guard lk(mu);
            finished.emplace_back(idx, std::move(entry));
            cv.notify_one();
        }
    };

    const int nw = std::max(1, std::min<int>(workers, static_cast<int>(todo.size())));
    std::vector<std::thread> pool;
    if (!todo.empty())
        for (int w = 0; w < nw; ++w) pool.emplace_back(work);
    for (std::size_t received = 0; received < todo.size();) {
        std::unique_lock lk(mu);
        cv.wait(lk, [&] { return !finished.empty(); });
        while (!finished.empty()) {
            auto [idx, entry] = std::move(finished.front());
            finished.pop_front();
            points[idx] = std::move(entry);
            ++received;
        }
        lk.unlock();
        write_manifest();
    }
    for (auto& th : pool) th.join();

    std::set<std::string> keys;
    for (const auto& p : points)
        if (p.contains("summary"))
            for (const auto& [k, v] : p["summary"].items())
                if (v.is_number() || v.is_null()) keys.insert(k);
    std::string csv = "index";
    for (const auto& a : spec.axes) csv += "," + a.key;
    csv += ",status";
    for (const auto& k : keys) csv += "," + k;
    csv += "\n";
    for (std::size_t i = 0; i < n; ++i) {
        const json& p = points[i];
        csv += std::to_string(i);
        for (double v : spec.point_values(i)) csv += "," + fmt(v);
        const std::string status = p.value("status", "pending");
        csv += "," + status;
        for (const auto& k : keys) {
            csv += ",";
            if (p.contains("summary") && p["summary"].contains(k) && p["summary"][k].is_number())
                csv += fmt(p["summary"][k].get<double>());
        }
        csv += "\n";
        if (status == "done") ++res.done;
        if (status == "failed") {
            ++res.failed;
            res.failures.push_back("point " + std::to_string(i) + ": " + p.value("error", "unknown error"));
        }
    }
    res.done -= std::min(res.done, res.skipped);
    io::atomic_write(dir / "summary.csv", csv);
    return res;
}

nlohmann::json analyze_run(const fs::path& dir, const AnalyzeRequest& req) {
    const auto table = io::parse_csv(io::read_file(dir / "series.csv"));
    const auto& t = table.column("t");
    const auto& y = table.column(req.channel);
    json manifest = fs::exists(dir / "manifest.json") ? json::parse(io::read_file(dir / "manifest.json")) : json();
    json result;
    if (req.extractor == "period") {
        result = to_json(oscillation_period(t, y, req.window));
    } else if (req.extractor == "revival") {
        if (!(req.expected_us > 0.0)) throw ConfigError("expected_us", "revival extraction needs --expected-us");
        result = to_json(revival_time(t, y, req.expected_us, req.half_width));
    } else if (req.extractor == "envelope") {
        result = to_json(fit_envelope(t, y, req.window));
    } else if (req.extractor == "critical") {
        std::vector<double> se;
        const std::string se_name = "se_" + req.channel;
        if (std::find(table.names.begin(), table.names.end(), se_name) != table.names.end())
            se = table.column(se_name);
        CriticalTimeOptions opt = req.critical;
        opt.fit_window = req.window;
        TransitionReport rep = critical_time(t, y, se, opt);
        if (manifest.is_object()) {
            rep.solver = manifest.value("solver", "");
            const auto& cfg = manifest["config"];
            for (const char* key : {"photons", "n_i"})
                if (cfg.contains(key)) {
                    const std::string s = cfg[key].get<std::string>();
                    if (s.find(',') == std::string::npos) rep.initial_photons = std::stod(s);
                }
        }
        for (const char* ph : {"NT", "photons"})
            if (std::find(table.names.begin(), table.names.end(), ph) != table.names.end()) {
                rep.photons_at_tc = value_at(t, table.column(ph), rep.t_c);
                break;
            }
        result = to_json(rep);
    } else {
        throw ConfigError("extractor", "'" + req.extractor + "' is not period, revival, envelope or critical");
    }
    result["extractor"] = req.extractor;
    result["channel"] = req.channel;

    json doc = json::object();
    if (fs::exists(dir / "analysis.json")) {
        try {
            doc = json::parse(io::read_file(dir / "analysis.json"));
        } catch (const std::exception&) {
            doc = json::object();
        }
    }
    doc[req.extractor + ":" + req.channel] = result;
    io::atomic_write(dir / "analysis.json", doc.dump(2) + "\n");
    return result;
}

nlohmann::json compare_runs(const std::vector<fs::path>& dirs) {
    std::vector<TransitionReport> reports;
    auto take = [&](const json& j) {
        if (!j.is_object() || !j.contains("t_c_us")) return;
        TransitionReport r;
        r.t_c = j["t_c_us"].get<double>();
        if (j.contains("ci_us") && j["ci_us"].is_array()) {
            r.ci_low = j["ci_us"][0].get<double>();
            r.ci_high = j["ci_us"][1].get<double>();
        }
        r.solver = j.value("solver", "");
        if (j.contains("initial_photons") && j["initial_photons"].is_number())
            r.initial_photons = j["initial_photons"].get<double>();
        if (j.contains("photons_at_tc") && j["photons_at_tc"].is_number())
            r.photons_at_tc = j["photons_at_tc"].get<double>();
        reports.push_back(r);
    };
    for (const auto& d : dirs) {
        if (fs::exists(d / "transitions.json")) {
            const json doc = json::parse(io::read_file(d / "transitions.json"));
            for (const auto& row : doc.value("rows", json::array())) take(row);
        }
        if (fs::exists(d / "analysis.json")) {
            const json doc = json::parse(io::read_file(d / "analysis.json"));
            for (const auto& [k, v] : doc.items())
                if (k.rfind("critical:", 0) == 0) take(v);
        }
    }
    return comparison_table(reports);
}

std::string presets_text() {
    std::ostringstream os;
    char buf[256];
    for (const auto& p : all_presets()) {
        const auto& d = p.params;
        os << p.name << ": " << p.description << "\n";
        std::snprintf(buf, sizeof buf,
                      "  nu_c_mhz = %g\n  nu_a_mhz = %g\n  g_mhz = %g\n  j_mhz = %g\n  kappa_mhz = %g\n  gamma_mhz = %g\n",
                      d.nu_c, d.nu_a, d.g, d.J, d.kappa, d.gamma);
        os << buf;
        std::snprintf(buf, sizeof buf,
                      "  photon e-fold rate 2 pi kappa = %.4g /us\n  g^2/(4 J^2) = %.4g\n  0.13 (g/J)^2 = %.4g\n",
                      d.photon_decay_rate(), d.g * d.g / (4 * d.J * d.J), 0.13 * d.g * d.g / (d.J * d.J));
        os << buf;
    }
    return os.str();
}

}  // namespace jcd::cli
