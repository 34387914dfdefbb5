#include "jcdimer/unitary.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "jcdimer/errors.hpp"
#include "jcdimer/sector.hpp"

namespace jcd {

const char* method_name(PropagatorMethod m) noexcept {
    switch (m) {
        case PropagatorMethod::krylov: return "krylov";
        case PropagatorMethod::adaptive_rk: return "adaptive-rk";
        case PropagatorMethod::sector: return "sector";
    }
    return "?";
}

PropagatorMethod parse_method(const std::string& name) {
    if (name == "krylov") return PropagatorMethod::krylov;
    if (name == "adaptive-rk") return PropagatorMethod::adaptive_rk;
    if (name == "sector") return PropagatorMethod::sector;
    throw ConfigError("method", "unknown propagator '" + name + "' (krylov, adaptive-rk, sector)");
}

void ObservableSeries::push(double time, const Moments& m, double energy_value) {
    t.push_back(time);
    for (int s = 0; s < 2; ++s) {
        const auto& sm = m.site[s];
        I[s].push_back(sm.a.real());
        Q[s].push_back(sm.a.imag());
        xi[s].push_back(std::norm(sm.a));
        N[s].push_back(sm.n);
        IQ2[s].push_back(sm.n + 0.5);
        Nq[s].push_back(sm.nq);
    }
    const double n = m.site[0].n + m.site[1].n;
    const bool valid = n > 1e-300;
    Z.push_back(valid ? (m.site[0].n - m.site[1].n) / n : 0.0);
    Z_valid.push_back(valid ? 1.0 : 0.0);
    ZT.push_back(m.z_total);
    ZT_var.push_back(std::max(0.0, m.z_total_sq - m.z_total * m.z_total));
    NT.push_back(m.n_total);
    norm.push_back(std::sqrt(m.norm_sq));
    energy.push_back(energy_value);
}

std::vector<std::string> ObservableSeries::column_names() {
    return {"t",   "I_L",   "Q_L",   "xi_L", "N_L", "IQ2_L", "Nq_L",   "I_R",  "Q_R",  "xi_R",
            "N_R", "IQ2_R", "Nq_R",  "Z",    "Z_valid", "ZT", "ZT_var", "NT", "norm", "energy"};
}

const std::vector<double>& ObservableSeries::column(const std::string& name) const {
    if (name == "t") return t;
    if (name == "Z") return Z;
    if (name == "Z_valid") return Z_valid;
    if (name == "ZT") return ZT;
    if (name == "ZT_var") return ZT_var;
    if (name == "NT") return NT;
    if (name == "norm") return norm;
    if (name == "energy") return energy;
    if (name.size() > 2 && name[name.size() - 2] == '_') {
        const char sc = name.back();
        if (sc == 'L' || sc == 'R') {
            const int s = sc == 'L' ? 0 : 1;
            const auto base = name.substr(0, name.size() - 2);
            if (base == "I") return I[s];
            if (base == "Q") return Q[s];
            if (base == "xi") return xi[s];
            if (base == "N") return N[s];
            if (base == "IQ2") return IQ2[s];
            if (base == "Nq") return Nq[s];
        }
    }
    throw UnknownObservable("no series column named '" + name + "'");
}

namespace {

std::vector<double> output_grid(double t_end, double dt) {
    if (!(t_end > 0.0)) throw ConfigError("t_end_us", "must be positive");
    if (!(dt > 0.0)) throw ConfigError("output_dt_us", "must be positive");
    const double ratio = t_end / dt;
    auto k = static_cast<long>(std::llround(ratio));
    if (std::abs(ratio - static_cast<double>(k)) > 1e-9 * std::max(1.0, ratio)) k = static_cast<long>(std::ceil(ratio));
    std::vector<double> grid(static_cast<std::size_t>(k) + 1);
    for (long i = 0; i <= k; ++i) grid[static_cast<std::size_t>(i)] = std::min(t_end, static_cast<double>(i) * dt);
    grid.back() = t_end;
    return grid;
}

struct Recorder {
    const HilbertSpace& space;
    const SparseOperator& H;
    int stride;
    std::size_t last;
    bool keep;
    EvolveResult& out;
    StateVector hpsi;

    void operator()(std::size_t k, double t, const StateVector& psi) {
        if (stride > 1 && k % static_cast<std::size_t>(stride) != 0 && k != last) return;
        const auto m = measure(space, psi);
        H.apply(psi, hpsi);
        const double e = psi.dot(hpsi).real() / m.norm_sq;
        out.series.push(t, m, e);
        if (keep) out.snapshots.push_back(psi);
    }
};

void check_norm(double before, double after, double tol, double t, EvolveResult& res) {
    const double d = std::abs(after - before);
    res.max_norm_step = std::max(res.max_norm_step, d);
    if (!(d <= tol))
        throw NormDrift("norm changed by " + std::to_string(d) + " in one step ending at t=" + std::to_string(t) +
                        " us (tolerance " + std::to_string(tol) + ")");
}

}  // namespace

EvolveResult evolve(const StateVector& psi0, const SparseOperator& H, const HilbertSpace& space, double t_end,
                    double output_dt, const PropagatorConfig& config, bool keep_snapshots) {
    if (psi0.size() != space.dim() || H.dim() != space.dim())
        throw DimensionGuard("state, operator and space dimensions differ");
    if (config.output_stride < 1) throw ConfigError("output_stride", "must be >= 1");
    if (config.krylov_dim < 2) throw ConfigError("krylov_dim", "must be >= 2");
    if (std::abs(psi0.norm() - 1.0) > 1e-10) throw ConfigError("state0", "initial state must have unit norm");
    const auto grid = output_grid(t_end, output_dt);
    EvolveResult res;
    Recorder rec{space, H, config.output_stride, grid.size() - 1, keep_snapshots, res, StateVector(space.dim())};
    rec(0, 0.0, psi0);

    switch (config.method) {
        case PropagatorMethod::krylov: {
            EffectiveOperator op(H);
            krylov::Basis basis({config.krylov_dim, config.krylov_tol, true});
            StateVector psi = psi0, tmp(space.dim());
            double t = 0.0;
            const double rho = std::max(op.spectral_bound(), 1e-12);
            double guess = std::min(t_end, config.krylov_dim / (2.0 * kTwoPi * rho));
            std::size_t next = 1;
            while (next < grid.size()) {
                basis.build(op, psi);
                double want = std::min(guess, t_end - t);
                if (config.max_step > 0.0) want = std::min(want, config.max_step);
                const double tau = basis.admissible_step(want, 1e-13 * std::max(1.0, t_end));
                const double t_new = next + 1 == grid.size() && t + tau >= t_end * (1 - 1e-14) ? t_end : t + tau;
                while (next < grid.size() && grid[next] <= t_new) {
                    basis.reconstruct(basis.coefficients(grid[next] - t), tmp);
                    rec(next, grid[next], tmp);
                    ++next;
                }
                basis.reconstruct(basis.coefficients(tau), tmp);
                check_norm(psi.norm(), tmp.norm(), config.norm_tol, t_new, res);
                psi.swap(tmp);
                t = t_new;
                ++res.steps;
                guess = tau >= want ? 1.5 * tau : tau;
            }
            break;
        }
        case PropagatorMethod::sector: {
            SectorPropagator sp(space, H, nullptr, config.threads);
            SectorPropagator::Cursor cur;
            sp.load(psi0, cur);
            StateVector psi(space.dim());
            double prev = psi0.norm();
            for (std::size_t k = 1; k < grid.size(); ++k) {
                sp.state(cur, grid[k], psi);
                const double nn = psi.norm();
                check_norm(prev, nn, config.norm_tol, grid[k], res);
                prev = nn;
                rec(k, grid[k], psi);
                ++res.steps;
            }
            break;
        }
        case PropagatorMethod::adaptive_rk: {
            const SparseOperator* hp = &H;
            ode::Dop853<StateVector> solver(
                [hp](double, const StateVector& y, StateVector& d) {
                    hp->apply(y, d);
                    d *= cplx(0.0, -kTwoPi);
                },
                config.rk_tol);
            StateVector psi = psi0;
            double t = 0.0, h = config.max_step;
            for (std::size_t k = 1; k < grid.size(); ++k) {
                const double before = psi.norm();
                const long steps0 = solver.stats().accepted;
                solver.advance(t, psi, grid[k], h);
                if (config.max_step > 0.0) h = std::min(std::abs(h), config.max_step);
                const long steps = std::max(1L, solver.stats().accepted - steps0);
                res.steps += steps;
                const double drift = std::abs(psi.norm() - before) / static_cast<double>(steps);
                check_norm(0.0, drift, config.norm_tol, grid[k], res);
                rec(k, grid[k], psi);
            }
            break;
        }
    }
    return res;
}

std::vector<double> spectrum(const DimerParams& params, int manifold) {
    if (manifold < 0) throw ConfigError("manifold", "must be non-negative");
    if (manifold > 3)
        throw ManifoldTooLarge("spectrum supports excitation manifolds up to 3, got " + std::to_string(manifold));
    params.validate();
    const auto space = HilbertSpace::build(manifold, manifold);
    const auto H = build_hamiltonian(params, space, Frame::lab);
    std::vector<std::int64_t> idx;
    for (std::int64_t i = 0; i < space.dim(); ++i)
        if (space.unflatten(i).excitations() == manifold) idx.push_back(i);
    const Eigen::MatrixXcd block = H.restricted(idx).to_dense();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(block, Eigen::EigenvaluesOnly);
    std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(ev.begin(), ev.end());
    return ev;
}

std::vector<double> single_excitation_levels(const DimerParams& params) {
    // Symmetric (-J) and antisymmetric (+J) cavity modes each hybridize with
    // the matching qubit combination.
    std::vector<double> ev;
    for (double shift : {-params.J, params.J}) {
        const double wc = params.nu_c + shift;
        const double mean = 0.5 * (wc + params.nu_a);
        const double half = std::sqrt(0.25 * (wc - params.nu_a) * (wc - params.nu_a) + params.g * params.g);
        ev.push_back(mean - half);
        ev.push_back(mean + half);
    }
    std::sort(ev.begin(), ev.end());
    return ev;
}

ImbalanceAverage time_averaged_imbalance(const ObservableSeries& series, double t0, double t1) {
    if (series.size() < 2 || !(t1 > t0)) throw EmptyWindow("empty averaging window");
    const double eps = 1e-9 * std::max(1.0, std::abs(series.t.back()));
    if (t0 < series.t.front() - eps || t1 > series.t.back() + eps)
        throw EmptyWindow("window [" + std::to_string(t0) + ", " + std::to_string(t1) + "] outside simulated span");
    std::vector<std::size_t> sel;
    for (std::size_t k = 0; k < series.size(); ++k)
        if (series.t[k] >= t0 - eps && series.t[k] <= t1 + eps) sel.push_back(k);
    if (sel.size() < 2) throw EmptyWindow("fewer than two samples in window");
    ImbalanceAverage avg;
    avg.samples = sel.size();
    double span = 0.0, m = 0.0, v = 0.0, m2 = 0.0;
    for (std::size_t j = 1; j < sel.size(); ++j) {
        const auto a = sel[j - 1], b = sel[j];
        const double w = series.t[b] - series.t[a];
        span += w;
        m += 0.5 * w * (series.ZT[a] + series.ZT[b]);
        m2 += 0.5 * w * (series.ZT[a] * series.ZT[a] + series.ZT[b] * series.ZT[b]);
        v += 0.5 * w * (series.ZT_var[a] + series.ZT_var[b]);
    }
    avg.mean_ZT = m / span;
    avg.mean_ZT_var = v / span;
    avg.temporal_var = std::max(0.0, m2 / span - avg.mean_ZT * avg.mean_ZT);
    return avg;
}

double xi_one_photon() {
    // |<alpha|a|alpha>|^2 at |alpha| = 1.
    return std::norm(cplx(1.0, 0.0));
}

std::vector<double> log_grid(double lo, double hi, int count) {
    if (!(lo > 0.0) || !(hi >= lo) || count < 1) throw ConfigError("grid", "log grid needs 0 < lo <= hi and count >= 1");
    std::vector<double> g(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        g[i] = count == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
    return g;
}

PhaseDiagram phase_diagram_scan(const std::vector<double>& photons, const DimerParams& params, double t_end,
                                double output_dt, const PropagatorConfig& config, double cutoff_c, int workers) {
    params.validate();
    if (photons.empty()) throw ConfigError("photons", "empty photon-number list");
    PhaseDiagram pd;
    pd.photons = photons;
    pd.t = output_grid(t_end, output_dt);
    if (config.output_stride > 1) {
        std::vector<double> kept;
        for (std::size_t k = 0; k < pd.t.size(); ++k)
            if (k % static_cast<std::size_t>(config.output_stride) == 0 || k + 1 == pd.t.size()) kept.push_back(pd.t[k]);
        pd.t = kept;
    }
    const auto rows = static_cast<Eigen::Index>(photons.size());
    const auto cols = static_cast<Eigen::Index>(pd.t.size());
    for (int s = 0; s < 2; ++s) {
        pd.xi[s].resize(rows, cols);
        pd.N[s].resize(rows, cols);
    }
    pd.ZT.resize(rows, cols);
    pd.eta.assign(photons.size(), 0);
    pd.dim.assign(photons.size(), 0);
    const double xi1 = xi_one_photon();

    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::exception_ptr failure;
    auto work = [&]() {
        for (;;) {
            const std::size_t r = next.fetch_add(1);
            if (r >= photons.size()) return;
            try {
                const double n = photons[r];
                const auto space = space_for_coherent(n, 0.0, cutoff_c);
                const auto psi0 = dimer_initial_state(std::sqrt(n), 0.0, space);
                const auto H = build_hamiltonian(params, space);
                const auto res = evolve(psi0, H, space, t_end, output_dt, config);
                for (Eigen::Index c = 0; c < cols; ++c) {
                    for (int s = 0; s < 2; ++s) {
                        pd.xi[s](static_cast<Eigen::Index>(r), c) = res.series.xi[s][c] / xi1;
                        pd.N[s](static_cast<Eigen::Index>(r), c) = res.series.N[s][c];
                    }
                    pd.ZT(static_cast<Eigen::Index>(r), c) = res.series.ZT[c];
                }
                pd.eta[r] = space.eta();
                pd.dim[r] = space.dim();
            } catch (...) {
                std::lock_guard lk(mu);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };
    const int nt = std::max(1, std::min<int>(workers, static_cast<int>(photons.size())));
    std::vector<std::thread> pool;
    for (int i = 1; i < nt; ++i) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    return pd;
}

}  // namespace jcd
