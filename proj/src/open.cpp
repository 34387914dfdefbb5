#include "jcdimer/open.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <random>
#include <thread>

#include "jcdimer/errors.hpp"
#include "jcdimer/ode.hpp"

namespace jcd {

const char* jump_name(JumpOperator op) noexcept {
    switch (op) {
        case JumpOperator::a_left: return "a_L";
        case JumpOperator::a_right: return "a_R";
        case JumpOperator::sm_left: return "sm_L";
        case JumpOperator::sm_right: return "sm_R";
    }
    return "?";
}

std::vector<JumpChannel> jump_channels(const DimerParams& params) {
    std::vector<JumpChannel> ch;
    if (params.kappa > 0.0) {
        ch.push_back({JumpOperator::a_left, params.kappa});
        ch.push_back({JumpOperator::a_right, params.kappa});
    }
    if (params.gamma > 0.0) {
        ch.push_back({JumpOperator::sm_left, params.gamma});
        ch.push_back({JumpOperator::sm_right, params.gamma});
    }
    return ch;
}

TrajectoryModel::TrajectoryModel(const DimerParams& params, const HilbertSpace& space, const McwfConfig& config)
    : params_(params), space_(space), config_(config), channels_(jump_channels(params)) {
    params_.validate();
    if (!(config.jump_tol > 0.0 && config.jump_tol < 1.0)) throw ConfigError("jump_tol", "must lie in (0, 1)");
    hamiltonian_ = build_hamiltonian(params_, space_);
    damping_ = decay_diagonal(params_, space_);
    if (config_.method == NoJumpMethod::sector)
        sectors_ = std::make_unique<SectorPropagator>(space_, hamiltonian_, &damping_, config_.threads);
}

namespace {

// Bit-stable uniform double in [0, 1).
double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::mt19937_64 make_rng(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      0x6a63646du};
    return std::mt19937_64(seq);
}

// No-jump evolution seen from a movable origin.
class Segment {
public:
    virtual ~Segment() = default;
    virtual void load(const StateVector& psi) = 0;
    // Largest step from the origin, at most `want`, the backend can take.
    virtual double reach(double want) = 0;
    virtual double norm_sq(double tau) = 0;
    virtual void state(double tau, StateVector& out) = 0;
    virtual void shift(double tau) = 0;
};

class SectorSegment final : public Segment {
public:
    explicit SectorSegment(const SectorPropagator& sp) : sp_(sp) {}
    void load(const StateVector& psi) override { sp_.load(psi, cur_); }
    double reach(double want) override { return want; }
    double norm_sq(double tau) override { return sp_.norm_sq(cur_, tau); }
    void state(double tau, StateVector& out) override { sp_.state(cur_, tau, out); }
    void shift(double tau) override { sp_.advance(cur_, tau); }

private:
    const SectorPropagator& sp_;
    SectorPropagator::Cursor cur_;
};

class KrylovSegment final : public Segment {
public:
    KrylovSegment(const TrajectoryModel& m)
        : op_(m.hamiltonian(), &m.damping()),
          basis_({m.config().krylov_dim, m.config().krylov_tol, true}),
          min_step_(1e-14) {}
    void load(const StateVector& psi) override {
        psi_ = psi;
        fresh_ = false;
    }
    double reach(double want) override {
        if (!fresh_) {
            basis_.build(op_, psi_);
            fresh_ = true;
        }
        return basis_.admissible_step(want, min_step_);
    }
    double norm_sq(double tau) override { return basis_.coefficients(tau).squaredNorm(); }
    void state(double tau, StateVector& out) override { basis_.reconstruct(basis_.coefficients(tau), out); }
    void shift(double tau) override {
        StateVector next(psi_.size());
        state(tau, next);
        psi_.swap(next);
        fresh_ = false;
    }

private:
    EffectiveOperator op_;
    krylov::Basis basis_;
    StateVector psi_;
    bool fresh_ = false;
    double min_step_;
};

std::vector<double> grid_for(double t_end, double dt) {
    if (!(t_end > 0.0)) throw ConfigError("t_end_us", "must be positive");
    if (!(dt > 0.0)) throw ConfigError("output_dt_us", "must be positive");
    const double ratio = t_end / dt;
    auto k = static_cast<long>(std::llround(ratio));
    if (std::abs(ratio - static_cast<double>(k)) > 1e-9 * std::max(1.0, ratio)) k = static_cast<long>(std::ceil(ratio));
    std::vector<double> g(static_cast<std::size_t>(k) + 1);
    for (long i = 0; i <= k; ++i) g[static_cast<std::size_t>(i)] = std::min(t_end, static_cast<double>(i) * dt);
    g.back() = t_end;
    return g;
}

void apply_jump(JumpOperator op, const HilbertSpace& space, const StateVector& in, StateVector& out) {
    switch (op) {
        case JumpOperator::a_left: apply_lowering_photon(Site::left, space, in, out); break;
        case JumpOperator::a_right: apply_lowering_photon(Site::right, space, in, out); break;
        case JumpOperator::sm_left: apply_lowering_qubit(Site::left, space, in, out); break;
        case JumpOperator::sm_right: apply_lowering_qubit(Site::right, space, in, out); break;
    }
}

double channel_weight(const JumpChannel& c, const Moments& m) {
    switch (c.op) {
        case JumpOperator::a_left: return c.rate * m.site[0].n;
        case JumpOperator::a_right: return c.rate * m.site[1].n;
        case JumpOperator::sm_left: return c.rate * m.site[0].nq;
        case JumpOperator::sm_right: return c.rate * m.site[1].nq;
    }
    return 0.0;
}

}  // namespace

TrajectoryRecord mcwf_trajectory(const StateVector& psi0, const TrajectoryModel& model, double t_end,
                                 double output_dt, std::uint64_t seed) {
    const auto& space = model.space();
    if (psi0.size() != space.dim()) throw DimensionGuard("initial state does not match the trajectory model");
    if (std::abs(psi0.norm() - 1.0) > 1e-10) throw ConfigError("state0", "initial state must have unit norm");
    const auto grid = grid_for(t_end, output_dt);

    std::unique_ptr<Segment> seg;
    if (model.sectors())
        seg = std::make_unique<SectorSegment>(*model.sectors());
    else
        seg = std::make_unique<KrylovSegment>(model);

    TrajectoryRecord rec;
    rec.seed = seed;
    auto rng = make_rng(seed);
    const auto& channels = model.channels();
    const bool dissipative = !channels.empty();
    const double tol = model.config().jump_tol;

    StateVector psi = psi0, work(space.dim());
    auto record = [&](double t, const StateVector& v) {
        const double nrm = v.norm();
        const auto m = measure(space, v / nrm);
        rec.series.push(t, m, std::numeric_limits<double>::quiet_NaN());
    };
    record(0.0, psi);
    seg->load(psi);
    double t = 0.0;
    double r = dissipative ? uniform(rng) : 0.0;
    std::size_t k = 1;
    while (k < grid.size()) {
        const double want = grid[k] - t;
        const double tau = seg->reach(want);
        if (dissipative && seg->norm_sq(tau) <= r) {
            // Bracketed search on the monotone norm: regula falsi (Illinois)
            // with a bisection step whenever the secant stalls.
            double lo = 0.0, hi = tau;
            double flo = seg->norm_sq(0.0) - r, fhi = seg->norm_sq(tau) - r;
            double mid = hi;
            int side = 0;
            for (int it = 0; it < 200; ++it) {
                const double width = hi - lo;
                mid = flo != fhi ? lo + flo * width / (flo - fhi) : 0.5 * (lo + hi);
                if (!(mid > lo && mid < hi) || it % 4 == 3) mid = 0.5 * (lo + hi);
                const double f = seg->norm_sq(mid) - r;
                if (std::abs(f) <= tol * r || width <= 1e-15 * std::max(1.0, t + hi)) break;
                if (f > 0.0) {
                    lo = mid;
                    flo = f;
                    if (side == 1) fhi *= 0.5;
                    side = 1;
                } else {
                    hi = mid;
                    fhi = f;
                    if (side == -1) flo *= 0.5;
                    side = -1;
                }
            }
            seg->state(mid, psi);
            const double tj = t + mid;
            psi /= psi.norm();
            const auto m = measure(space, psi);
            double total = 0.0;
            for (const auto& c : channels) total += channel_weight(c, m);
            if (total > 0.0) {
                const double pick = uniform(rng) * total;
                double acc = 0.0;
                std::size_t chosen = channels.size() - 1;
                for (std::size_t c = 0; c < channels.size(); ++c) {
                    acc += channel_weight(channels[c], m);
                    if (pick < acc) {
                        chosen = c;
                        break;
                    }
                }
                // Skip channels whose weight is zero even at the boundary.
                while (channel_weight(channels[chosen], m) == 0.0 && chosen > 0) --chosen;
                apply_jump(channels[chosen].op, space, psi, work);
                const double wn = work.norm();
                if (wn > 0.0) {
                    psi = work / wn;
                    if (!rec.jumps.empty() && !(tj > rec.jumps.back().t))
                        throw SolverError("jump times not increasing at t=" + std::to_string(tj));
                    rec.jumps.push_back({tj, channels[chosen].op});
                }
            }
            t = tj;
            seg->load(psi);
            r = uniform(rng);
            continue;
        }
        if (tau >= want) {
            seg->state(want, psi);
            record(grid[k], psi);
            seg->shift(want);
            t = grid[k];
            ++k;
        } else {
            seg->shift(tau);
            t += tau;
        }
    }
    return rec;
}

std::vector<std::string> EnsembleResult::column_names() {
    return {"t",      "I_L",    "Q_L",    "xi_L",     "N_L",     "IQ2_L",    "Nq_L",     "se_I_L", "se_Q_L",
            "se_xi_L", "se_N_L", "se_IQ2_L", "I_R",    "Q_R",     "xi_R",     "N_R",      "IQ2_R",  "Nq_R",
            "se_I_R", "se_Q_R", "se_xi_R", "se_N_R", "se_IQ2_R", "ZT",       "NT"};
}

const std::vector<double>& EnsembleResult::column(const std::string& name) const {
    if (name == "t") return t;
    if (name == "ZT") return ZT;
    if (name == "NT") return NT;
    if (name.size() > 2 && name[name.size() - 2] == '_' && (name.back() == 'L' || name.back() == 'R')) {
        const int s = name.back() == 'L' ? 0 : 1;
        const auto base = name.substr(0, name.size() - 2);
        if (base == "I") return I[s];
        if (base == "Q") return Q[s];
        if (base == "xi") return xi[s];
        if (base == "N") return N[s];
        if (base == "IQ2") return IQ2[s];
        if (base == "Nq") return Nq[s];
        if (base == "se_I") return se_I[s];
        if (base == "se_Q") return se_Q[s];
        if (base == "se_xi") return se_xi[s];
        if (base == "se_N") return se_N[s];
        if (base == "se_IQ2") return se_IQ2[s];
    }
    throw UnknownObservable("no ensemble column named '" + name + "'");
}

EnsembleResult run_ensemble(const StateVector& psi0, const TrajectoryModel& model, double t_end, double output_dt,
                            std::size_t n_traj, std::uint64_t base_seed, std::size_t keep) {
    if (n_traj < 1) throw ConfigError("n_traj", "must be >= 1");
    if (base_seed + (n_traj - 1) < base_seed) throw ConfigError("base_seed", "seed range wraps around");
    const auto grid = grid_for(t_end, output_dt);
    const std::size_t ns = grid.size();

    // Per-trajectory compact samples: I, Q, N, Nq per site, then ZT, NT.
    constexpr int kFields = 10;
    std::vector<std::vector<double>> samples(n_traj);
    std::vector<std::size_t> jumps(n_traj, 0);
    std::vector<std::string> errors(n_traj);
    std::vector<TrajectoryRecord> kept(std::min(keep, n_traj));

    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_traj) return;
            try {
                auto rec = mcwf_trajectory(psi0, model, t_end, output_dt, base_seed + i);
                auto& out = samples[i];
                out.resize(ns * kFields);
                const auto& s = rec.series;
                for (std::size_t k = 0; k < ns; ++k) {
                    double* o = &out[k * kFields];
                    for (int site = 0; site < 2; ++site) {
                        o[4 * site + 0] = s.I[site][k];
                        o[4 * site + 1] = s.Q[site][k];
                        o[4 * site + 2] = s.N[site][k];
                        o[4 * site + 3] = s.Nq[site][k];
                    }
                    o[8] = s.ZT[k];
                    o[9] = s.NT[k];
                }
                jumps[i] = rec.jumps.size();
                if (i < kept.size()) kept[i] = std::move(rec);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    const int workers = std::max(1, std::min<int>(model.config().threads, static_cast<int>(n_traj)));
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();

    EnsembleResult res;
    res.t = grid;
    res.base_seed = base_seed;
    std::vector<double> sum(ns * kFields, 0.0), sq(ns * kFields, 0.0);
    double jump_total = 0.0;
    for (std::size_t i = 0; i < n_traj; ++i) {
        if (!errors[i].empty()) {
            res.failed_seeds.push_back(base_seed + i);
            res.failures.push_back(errors[i]);
            continue;
        }
        ++res.n_traj;
        jump_total += static_cast<double>(jumps[i]);
        for (std::size_t j = 0; j < sum.size(); ++j) {
            sum[j] += samples[i][j];
            sq[j] += samples[i][j] * samples[i][j];
        }
    }
    if (res.n_traj == 0)
        throw SolverError("every trajectory failed; first error: " + res.failures.front());
    const double n = static_cast<double>(res.n_traj);
    res.mean_jumps = jump_total / n;
    auto mean_se = [&](std::size_t j, double& mean, double& se) {
        mean = sum[j] / n;
        const double var = res.n_traj > 1 ? std::max(0.0, (sq[j] - n * mean * mean) / (n - 1.0)) : 0.0;
        se = std::sqrt(var / n);
    };
    for (int s = 0; s < 2; ++s) {
        for (auto* v : {&res.I[s], &res.Q[s], &res.N[s], &res.IQ2[s], &res.Nq[s], &res.xi[s], &res.se_I[s],
                        &res.se_Q[s], &res.se_N[s], &res.se_IQ2[s], &res.se_xi[s]})
            v->resize(ns);
    }
    res.ZT.resize(ns);
    res.NT.resize(ns);
    for (std::size_t k = 0; k < ns; ++k) {
        for (int s = 0; s < 2; ++s) {
            double m, se;
            mean_se(k * kFields + 4 * s + 0, m, se);
            res.I[s][k] = m;
            res.se_I[s][k] = se;
            mean_se(k * kFields + 4 * s + 1, m, se);
            res.Q[s][k] = m;
            res.se_Q[s][k] = se;
            mean_se(k * kFields + 4 * s + 2, m, se);
            res.N[s][k] = m;
            res.se_N[s][k] = se;
            res.IQ2[s][k] = m + 0.5;
            res.se_IQ2[s][k] = se;
            mean_se(k * kFields + 4 * s + 3, m, se);
            res.Nq[s][k] = m;
            const double i = res.I[s][k], q = res.Q[s][k];
            res.xi[s][k] = i * i + q * q;
            res.se_xi[s][k] = 2.0 * std::sqrt(i * i * res.se_I[s][k] * res.se_I[s][k] + q * q * res.se_Q[s][k] * res.se_Q[s][k]);
        }
        res.ZT[k] = sum[k * kFields + 8] / n;
        res.NT[k] = sum[k * kFields + 9] / n;
    }
    res.kept = std::move(kept);
    return res;
}

std::vector<std::pair<std::size_t, std::size_t>> overlapping_seed_ranges(
    const std::vector<std::pair<std::uint64_t, std::uint64_t>>& ranges) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < ranges.size(); ++i)
        for (std::size_t j = i + 1; j < ranges.size(); ++j) {
            const auto [a, na] = ranges[i];
            const auto [b, nb] = ranges[j];
            if (na == 0 || nb == 0) continue;
            if (a < b + nb && b < a + na) out.emplace_back(i, j);
        }
    return out;
}

Moments measure_density(const HilbertSpace& space, const Eigen::MatrixXcd& rho) {
    Moments m{};
    const double tr = rho.diagonal().real().sum();
    m.norm_sq = tr;
    cplx a[2] = {0.0, 0.0};
    double n[2] = {0, 0}, nq[2] = {0, 0}, nt = 0, z = 0, z2 = 0;
    for (std::int64_t i = 0; i < space.dim(); ++i) {
        const double p = rho(i, i).real();
        const int nl = space.photons(Site::left, i), nr = space.photons(Site::right, i);
        const int ql = space.qubit(Site::left, i), qr = space.qubit(Site::right, i);
        for (int s = 0; s < 2; ++s) {
            const auto j = space.lower_photon(static_cast<Site>(s), i);
            if (j >= 0) a[s] += rho(i, j) * std::sqrt(static_cast<double>(s == 0 ? nl : nr));
        }
        n[0] += p * nl;
        n[1] += p * nr;
        nq[0] += p * ql;
        nq[1] += p * qr;
        const int el = nl + ql, er = nr + qr;
        nt += p * (el + er);
        if (el + er > 0) {
            const double zi = static_cast<double>(el - er) / (el + er);
            z += p * zi;
            z2 += p * zi * zi;
        }
    }
    for (int s = 0; s < 2; ++s) m.site[s] = {a[s] / tr, n[s] / tr, nq[s] / tr};
    m.n_total = nt / tr;
    m.z_total = z / tr;
    m.z_total_sq = z2 / tr;
    return m;
}

DenseResult master_equation_dense(const Eigen::MatrixXcd& rho0, const DimerParams& params,
                                  const HilbertSpace& space, double t_end, double output_dt,
                                  const ode::Tolerance& tol, bool keep_rho) {
    const auto d = space.dim();
    if (d > kDenseOracleMaxDim)
        throw DimensionGuard("dense master equation limited to dimension " + std::to_string(kDenseOracleMaxDim) +
                             ", got " + std::to_string(d));
    if (rho0.rows() != d || rho0.cols() != d) throw DimensionGuard("density matrix does not match the space");
    params.validate();
    const auto grid = grid_for(t_end, output_dt);
    const Eigen::MatrixXcd H = build_hamiltonian(params, space).to_dense();

    std::vector<std::pair<double, Eigen::MatrixXcd>> ops;
    auto lowering = [&](bool photon, Site s) {
        Eigen::MatrixXcd L = Eigen::MatrixXcd::Zero(d, d);
        for (std::int64_t i = 0; i < d; ++i) {
            const auto j = photon ? space.lower_photon(s, i) : space.lower_qubit(s, i);
            if (j >= 0) L(j, i) = photon ? std::sqrt(static_cast<double>(space.photons(s, i))) : 1.0;
        }
        return L;
    };
    for (const auto& c : jump_channels(params)) {
        const bool photon = c.op == JumpOperator::a_left || c.op == JumpOperator::a_right;
        const Site s = (c.op == JumpOperator::a_left || c.op == JumpOperator::sm_left) ? Site::left : Site::right;
        ops.emplace_back(c.rate, lowering(photon, s));
    }
    std::vector<Eigen::MatrixXcd> odo;
    for (const auto& [rate, L] : ops) odo.push_back(L.adjoint() * L);

    auto rhs = [&](double, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) {
        Eigen::Map<const Eigen::MatrixXcd> rho(y.data(), d, d);
        dy.resize(d * d);
        Eigen::Map<Eigen::MatrixXcd> out(dy.data(), d, d);
        out.noalias() = cplx(0.0, 1.0) * (rho * H - H * rho);
        for (std::size_t c = 0; c < ops.size(); ++c) {
            const auto& [rate, L] = ops[c];
            out.noalias() += (0.5 * rate) * (2.0 * L * rho * L.adjoint() - odo[c] * rho - rho * odo[c]);
        }
        out *= kTwoPi;
    };
    ode::Dop853<Eigen::VectorXcd> solver(rhs, tol);

    DenseResult res;
    res.min_eigenvalue = std::numeric_limits<double>::infinity();
    Eigen::VectorXcd y = Eigen::Map<const Eigen::VectorXcd>(rho0.data(), d * d);
    auto record = [&](double t) {
        Eigen::Map<const Eigen::MatrixXcd> rho(y.data(), d, d);
        const Eigen::MatrixXcd r = rho;
        const double tr = r.diagonal().real().sum();
        res.max_trace_error = std::max(res.max_trace_error, std::abs(tr - 1.0));
        res.max_hermiticity_error = std::max(res.max_hermiticity_error, (r - r.adjoint()).cwiseAbs().maxCoeff());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (r + r.adjoint()), Eigen::EigenvaluesOnly);
        res.min_eigenvalue = std::min(res.min_eigenvalue, es.eigenvalues().minCoeff());
        const auto m = measure_density(space, r);
        const double e = (r * H).trace().real() / tr;
        res.series.push(t, m, e);
        if (keep_rho) res.rho.push_back(r);
    };
    record(0.0);
    double t = 0.0, h = 0.0;
    for (std::size_t k = 1; k < grid.size(); ++k) {
        solver.advance(t, y, grid[k], h);
        record(grid[k]);
    }
    return res;
}

DenseResult master_equation_dense(const StateVector& psi0, const DimerParams& params, const HilbertSpace& space,
                                  double t_end, double output_dt, const ode::Tolerance& tol, bool keep_rho) {
    if (psi0.size() != space.dim()) throw DimensionGuard("state does not match the space");
    if (space.dim() > kDenseOracleMaxDim)
        throw DimensionGuard("dense master equation limited to dimension " + std::to_string(kDenseOracleMaxDim) +
                             ", got " + std::to_string(space.dim()));
    const Eigen::MatrixXcd rho0 = psi0 * psi0.adjoint();
    return master_equation_dense(rho0, params, space, t_end, output_dt, tol, keep_rho);
}

DissipativeScan dissipative_phase_scan(const std::vector<double>& photons, const DimerParams& params, double t_end,
                                       double output_dt, std::size_t n_traj, std::uint64_t base_seed,
                                       const McwfConfig& config, double cutoff_c) {
    if (photons.empty()) throw ConfigError("photons", "empty photon-number list");
    DissipativeScan scan;
    scan.photons = photons;
    scan.t = grid_for(t_end, output_dt);
    const auto rows = static_cast<Eigen::Index>(photons.size());
    const auto cols = static_cast<Eigen::Index>(scan.t.size());
    for (int s = 0; s < 2; ++s) {
        scan.xi[s].resize(rows, cols);
        scan.IQ2[s].resize(rows, cols);
        scan.se_xi[s].resize(rows, cols);
    }
    for (std::size_t r = 0; r < photons.size(); ++r) {
        const auto space = space_for_coherent(photons[r], 0.0, cutoff_c);
        const auto psi0 = dimer_initial_state(std::sqrt(photons[r]), 0.0, space);
        TrajectoryModel model(params, space, config);
        // Every row draws from its own seed block.
        auto ens = run_ensemble(psi0, model, t_end, output_dt, n_traj, base_seed + r * n_traj);
        for (Eigen::Index c = 0; c < cols; ++c)
            for (int s = 0; s < 2; ++s) {
                scan.xi[s](static_cast<Eigen::Index>(r), c) = ens.xi[s][c];
                scan.IQ2[s](static_cast<Eigen::Index>(r), c) = ens.IQ2[s][c];
                scan.se_xi[s](static_cast<Eigen::Index>(r), c) = ens.se_xi[s][c];
            }
        scan.rows.push_back(std::move(ens));
    }
    return scan;
}

double quantum_critical_photons(const DimerParams& params) {
    if (!(params.J > 0.0)) throw ConfigError("j_mhz", "critical photon number needs J > 0");
    return params.g * params.g / (4.0 * params.J * params.J);
}

Window transition_fit_window(double initial_photons, const DimerParams& params, double fraction,
                             double min_periods) {
    const double nc = quantum_critical_photons(params);
    if (!(initial_photons > nc)) throw ConfigError("photons", "initial photon number must exceed g^2/(4J^2)");
    if (!(params.kappa > 0.0)) throw ConfigError("kappa_mhz", "transition window needs kappa > 0");
    const double span = fraction * std::log(initial_photons / nc) / params.photon_decay_rate();
    return {0.0, std::max(span, min_periods / (2.0 * params.J))};
}

TransitionReport dissipative_transition(const EnsembleResult& ens, double initial_photons, const DimerParams& params,
                                        const CriticalTimeOptions& base, double fraction, double min_periods) {
    CriticalTimeOptions opt = base;
    opt.fit_window = transition_fit_window(initial_photons, params, fraction, min_periods);
    TransitionReport r = critical_time(ens.t, ens.xi[0], ens.se_xi[0], opt);
    r.solver = "mcwf";
    r.initial_photons = initial_photons;
    std::vector<double> photons(ens.t.size());
    for (std::size_t k = 0; k < photons.size(); ++k) photons[k] = ens.N[0][k] + ens.N[1][k];
    r.photons_at_tc = value_at(ens.t, photons, r.t_c);
    return r;
}

}  // namespace jcd
