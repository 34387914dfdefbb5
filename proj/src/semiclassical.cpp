#include "jcdimer/semiclassical.hpp"

#include <cmath>

#include "jcdimer/errors.hpp"

namespace jcd {

namespace {

using Extended = Eigen::Matrix<double, 11, 1>;  // mean-field vector + integral of Z

inline double imbalance_of(double rl, double il, double rr, double ir) {
    const double nl = rl * rl + il * il, nr = rr * rr + ir * ir;
    const double n = nl + nr;
    return n > 0.0 ? (nl - nr) / n : 0.0;
}

template <class In, class Out>
inline void rhs_core(const In& y, const DimerParams& p, Out& d) {
    const double w = kTwoPi;
    const double delta = p.nu_a - p.nu_c;  // frame rotating at nu_c
    for (int s = 0; s < 2; ++s) {
        const int o = 1 - s;
        const double R = y[2 * s], I = y[2 * s + 1];
        const double Ro = y[2 * o], Io = y[2 * o + 1];
        const double nx = y[4 + 3 * s], ny = y[5 + 3 * s], nz = y[6 + 3 * s];
        d[2 * s] = w * (-0.5 * p.g * ny - p.J * Io);
        d[2 * s + 1] = w * (-0.5 * p.g * nx + p.J * Ro);
        d[4 + 3 * s] = w * (-2.0 * p.g * nz * I - delta * ny);
        d[5 + 3 * s] = w * (-2.0 * p.g * nz * R + delta * nx);
        d[6 + 3 * s] = w * (2.0 * p.g * (nx * I + ny * R));
    }
}

template <class V>
int renormalize_spins(V& y, double threshold) {
    int count = 0;
    for (int s = 0; s < 2; ++s) {
        const double len = std::sqrt(y[4 + 3 * s] * y[4 + 3 * s] + y[5 + 3 * s] * y[5 + 3 * s] + y[6 + 3 * s] * y[6 + 3 * s]);
        if (std::abs(len - 1.0) > threshold && len > 0.0) {
            for (int k = 0; k < 3; ++k) y[4 + 3 * s + k] /= len;
            ++count;
        }
    }
    return count;
}

}  // namespace

double MeanFieldState::imbalance() const noexcept {
    return imbalance_of(site[0].R, site[0].I, site[1].R, site[1].I);
}

double MeanFieldState::theta(Site s) const noexcept {
    const auto& n = site[idx(s)].n;
    return std::atan2(std::hypot(n[0], n[1]), n[2]);
}

double MeanFieldState::phi(Site s) const noexcept {
    const auto& n = site[idx(s)].n;
    return std::atan2(n[1], n[0]);
}

MeanFieldVector MeanFieldState::pack() const {
    MeanFieldVector y;
    for (int s = 0; s < 2; ++s) {
        y[2 * s] = site[s].R;
        y[2 * s + 1] = site[s].I;
        for (int k = 0; k < 3; ++k) y[4 + 3 * s + k] = site[s].n[k];
    }
    return y;
}

MeanFieldState MeanFieldState::unpack(const MeanFieldVector& y) {
    MeanFieldState st;
    for (int s = 0; s < 2; ++s) {
        st.site[s].R = y[2 * s];
        st.site[s].I = y[2 * s + 1];
        for (int k = 0; k < 3; ++k) st.site[s].n[k] = y[4 + 3 * s + k];
    }
    return st;
}

MeanFieldState MeanFieldState::localized_left(double mean_photons) {
    if (!(mean_photons >= 0.0)) throw ConfigError("mean_photons", "must be non-negative");
    MeanFieldState st;
    st.site[0].R = std::sqrt(mean_photons);
    return st;
}

void mean_field_rhs(const MeanFieldVector& y, const DimerParams& params, MeanFieldVector& dydt) {
    rhs_core(y, params, dydt);
}

MeanFieldState mean_field_rhs(const MeanFieldState& state, const DimerParams& params) {
    MeanFieldVector d;
    mean_field_rhs(state.pack(), params, d);
    return MeanFieldState::unpack(d);
}

std::vector<double> MeanFieldTrajectory::times() const {
    std::vector<double> t;
    t.reserve(samples.size());
    for (const auto& s : samples) t.push_back(s.t);
    return t;
}

std::vector<double> MeanFieldTrajectory::imbalance() const {
    std::vector<double> z;
    z.reserve(samples.size());
    for (const auto& s : samples) z.push_back(s.state.imbalance());
    return z;
}

MeanFieldTrajectory integrate(const MeanFieldState& state0, const DimerParams& params, double t_end,
                              const IntegrateOptions& options) {
    if (t_end == 0.0) throw ConfigError("t_end_us", "must be non-zero");
    if (options.sample_dt < 0.0) throw ConfigError("sample_dt_us", "must be non-negative");
    const DimerParams p = params;
    ode::Dop853<Extended> solver(
        [&p](double, const Extended& y, Extended& d) {
            rhs_core(y, p, d);
            d[10] = imbalance_of(y[0], y[1], y[2], y[3]);
        },
        options.tol);

    Extended y;
    y.head<10>() = state0.pack();
    y[10] = 0.0;
    MeanFieldTrajectory traj;
    traj.samples.push_back({0.0, state0});

    const double span = std::abs(t_end);
    const double dir = t_end > 0 ? 1.0 : -1.0;
    const long steps = options.sample_dt > 0.0 ? static_cast<long>(std::ceil(span / options.sample_dt - 1e-9)) : 1;
    double t = 0.0, h = 0.0;
    for (long k = 1; k <= steps; ++k) {
        const double target = k == steps ? t_end : dir * static_cast<double>(k) * options.sample_dt;
        try {
            solver.advance(t, y, target, h);
        } catch (const StepSizeUnderflow& e) {
            throw StepSizeUnderflow(std::string(e.what()) + " (last good sample t=" +
                                    std::to_string(traj.samples.back().t) + " us)");
        }
        traj.renormalizations += renormalize_spins(y, options.renormalize_above);
        traj.samples.push_back({t, MeanFieldState::unpack(y.head<10>())});
    }
    traj.stats = solver.stats();
    traj.imbalance_integral = y[10];
    return traj;
}

double mean_imbalance(const MeanFieldState& state0, const DimerParams& params, double t_obs,
                      const ode::Tolerance& tol) {
    if (!(t_obs > 0.0)) throw EmptyWindow("observation window must be positive");
    IntegrateOptions opt;
    opt.tol = tol;
    // Renormalize the spins a few hundred times over the window.
    opt.sample_dt = t_obs / 256.0;
    const auto traj = integrate(state0, params, t_obs, opt);
    return traj.imbalance_integral / t_obs;
}

namespace {

bool localized(double n, double g, const DimerParams& base, const LocalizationCriterion& crit) {
    DimerParams p = base;
    p.g = g;
    const double t_obs = crit.josephson_periods / (2.0 * p.J);
    return mean_imbalance(MeanFieldState::localized_left(n), p, t_obs, crit.tol) > crit.threshold;
}

}  // namespace

CriticalBracket find_critical_coupling(double mean_photons, const DimerParams& params,
                                       const LocalizationCriterion& crit, double rel_tol) {
    if (!(mean_photons > 0.0)) throw ConfigError("mean_photons", "must be positive");
    if (!(rel_tol > 0.0)) throw ConfigError("rel_tol", "must be positive");
    CriticalBracket br;
    if (params.J == 0.0) return br;
    double lo = 0.0, hi = 10.0 * params.J * std::sqrt(mean_photons);
    const bool at_lo = localized(mean_photons, lo, params, crit);
    const bool at_hi = localized(mean_photons, hi, params, crit);
    br.evaluations = 2;
    if (at_lo == at_hi)
        throw NoBracket("localization criterion is " + std::string(at_lo ? "true" : "false") +
                        " at both g=0 and g=" + std::to_string(hi) + " MHz");
    while (hi - lo > rel_tol * hi) {
        const double mid = 0.5 * (lo + hi);
        ++br.evaluations;
        if (localized(mean_photons, mid, params, crit))
            hi = mid;
        else
            lo = mid;
    }
    br.lower = lo;
    br.upper = hi;
    return br;
}

CriticalBracket find_critical_photon_number(const DimerParams& params, const LocalizationCriterion& crit,
                                            double rel_tol) {
    if (!(params.g > 0.0) || !(params.J > 0.0))
        throw ConfigError("g_mhz", "critical photon number needs g > 0 and J > 0");
    const double scale = (params.g / params.J) * (params.g / params.J);
    // Small N localizes; large N tunnels.
    double lo = 0.01 * scale, hi = 4.0 * scale;
    const bool at_lo = localized(lo, params.g, params, crit);
    const bool at_hi = localized(hi, params.g, params, crit);
    CriticalBracket br;
    br.evaluations = 2;
    if (!at_lo || at_hi)
        throw NoBracket("photon-number interval [" + std::to_string(lo) + ", " + std::to_string(hi) +
                        "] does not straddle the localization threshold");
    while (hi - lo > rel_tol * hi) {
        const double mid = 0.5 * (lo + hi);
        ++br.evaluations;
        if (localized(mid, params.g, params, crit))
            lo = mid;
        else
            hi = mid;
    }
    br.lower = lo;
    br.upper = hi;
    return br;
}

}  // namespace jcd
