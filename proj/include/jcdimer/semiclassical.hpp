#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "jcdimer/hilbert.hpp"
#include "jcdimer/ode.hpp"
#include "jcdimer/params.hpp"

namespace jcd {

// Cavity quadratures R = <a> real part, I = imaginary part, and the Bloch
// vector n = (sin th cos ph, sin th sin ph, cos th) of each qubit, with n_z = -1
// for the ground state.
struct MeanFieldState {
    struct SiteField {
        double R = 0.0;
        double I = 0.0;
        std::array<double, 3> n{0.0, 0.0, -1.0};
    };
    SiteField site[2];

    double photons(Site s) const noexcept { return site[idx(s)].R * site[idx(s)].R + site[idx(s)].I * site[idx(s)].I; }
    double total_photons() const noexcept { return photons(Site::left) + photons(Site::right); }
    // (N_L - N_R)/N, 0 when there are no photons.
    double imbalance() const noexcept;
    double theta(Site s) const noexcept;
    double phi(Site s) const noexcept;

    // Packing order: R_L, I_L, R_R, I_R, n_L (3), n_R (3).
    Eigen::Matrix<double, 10, 1> pack() const;
    static MeanFieldState unpack(const Eigen::Matrix<double, 10, 1>& y);

    // R_L = sqrt(N), everything else on the sub-manifold, both qubits down.
    static MeanFieldState localized_left(double mean_photons);
};

using MeanFieldVector = Eigen::Matrix<double, 10, 1>;

// Time derivative including the 2 pi unit factor (1/us). Dissipation is not
// part of the mean-field model; kappa and gamma are ignored.
MeanFieldState mean_field_rhs(const MeanFieldState& state, const DimerParams& params);
void mean_field_rhs(const MeanFieldVector& y, const DimerParams& params, MeanFieldVector& dydt);

struct MeanFieldSample {
    double t;
    MeanFieldState state;
};

struct MeanFieldTrajectory {
    std::vector<MeanFieldSample> samples;
    ode::StepStats stats;
    int renormalizations = 0;
    // Integral of Z over [0, t_end] from the integrator itself.
    double imbalance_integral = 0.0;

    std::vector<double> times() const;
    std::vector<double> imbalance() const;
};

struct IntegrateOptions {
    ode::Tolerance tol{};
    double sample_dt = 0.0;           // 0: only the end points
    double renormalize_above = 1e-10;  // spin-length drift that triggers renormalization
};

// Integrates from t = 0 to t_end (t_end may be negative for backward runs).
MeanFieldTrajectory integrate(const MeanFieldState& state0, const DimerParams& params, double t_end,
                              const IntegrateOptions& options = {});

// Time average of Z over [0, t_obs].
double mean_imbalance(const MeanFieldState& state0, const DimerParams& params, double t_obs,
                      const ode::Tolerance& tol = {});

struct LocalizationCriterion {
    double josephson_periods = 50.0;  // T_obs = periods / (2J)
    double threshold = 0.5;
    ode::Tolerance tol{1e-8, 1e-11};
};

struct CriticalBracket {
    double lower = 0.0;
    double upper = 0.0;
    int evaluations = 0;
    double estimate() const noexcept { return 0.5 * (lower + upper); }
};

// Bisection on g over [0, 10 J sqrt(N)] for the Z = 1 initial condition.
// Returns a bracket of relative width <= rel_tol. J = 0 localizes for every
// g > 0, so the bracket collapses to [0, 0]. Throws NoBracket when the
// criterion has the same value at both ends.
CriticalBracket find_critical_coupling(double mean_photons, const DimerParams& params,
                                       const LocalizationCriterion& crit = {}, double rel_tol = 1e-3);

// Bisection on N at fixed params.g: smallest photon number that no longer
// localizes. Throws NoBracket when the search interval does not straddle it.
CriticalBracket find_critical_photon_number(const DimerParams& params, const LocalizationCriterion& crit = {},
                                            double rel_tol = 1e-3);

}  // namespace jcd
