#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "jcdimer/hilbert.hpp"
#include "jcdimer/krylov.hpp"
#include "jcdimer/ode.hpp"
#include "jcdimer/params.hpp"

namespace jcd {

enum class PropagatorMethod { krylov, adaptive_rk, sector };

const char* method_name(PropagatorMethod m) noexcept;
// Accepts "krylov", "adaptive-rk", "sector". Throws ConfigError.
PropagatorMethod parse_method(const std::string& name);

struct PropagatorConfig {
    PropagatorMethod method = PropagatorMethod::krylov;
    int krylov_dim = 30;
    double krylov_tol = 1e-12;
    double max_step = 0.0;          // us; 0 lets the step control decide
    int output_stride = 1;          // keep every stride-th output sample
    double norm_tol = 1e-10;        // per propagation step
    ode::Tolerance rk_tol{1e-11, 1e-13};
    int threads = 1;                // only used by the sector method
};

// Time series of the observables recorded by every quantum solver.
struct ObservableSeries {
    std::vector<double> t;
    std::vector<double> I[2], Q[2];   // quadratures <I>, <Q>
    std::vector<double> xi[2];        // <I>^2 + <Q>^2
    std::vector<double> N[2];         // <a+a>
    std::vector<double> IQ2[2];       // <I^2 + Q^2> = N + 1/2
    std::vector<double> Nq[2];        // qubit excitation
    std::vector<double> Z;            // (N_L - N_R)/(N_L + N_R) of the means
    std::vector<double> Z_valid;      // 1 where N_L + N_R > 0, else 0 (Z reported as 0)
    std::vector<double> ZT, ZT_var;   // total-excitation imbalance operator
    std::vector<double> NT;
    std::vector<double> norm;
    std::vector<double> energy;       // <H>, MHz; NaN when not recorded

    std::size_t size() const noexcept { return t.size(); }
    void push(double time, const Moments& m, double energy_value);
    // Column by name: t, I_L, Q_L, xi_L, N_L, IQ2_L, Nq_L (and _R), Z, Z_valid,
    // ZT, ZT_var, NT, norm, energy. Throws UnknownObservable.
    const std::vector<double>& column(const std::string& name) const;
    static std::vector<std::string> column_names();
};

struct EvolveResult {
    ObservableSeries series;
    std::vector<StateVector> snapshots;  // one per kept output when requested
    long steps = 0;
    double max_norm_step = 0.0;           // largest per-step norm change seen
};

// Evolves psi0 with exp(-i 2 pi H t) and samples observables every output_dt
// from 0 to t_end. Throws NormDrift when a step changes the norm by more than
// config.norm_tol, KrylovBreakdown when the Krylov step collapses.
EvolveResult evolve(const StateVector& psi0, const SparseOperator& H, const HilbertSpace& space, double t_end,
                    double output_dt, const PropagatorConfig& config = {}, bool keep_snapshots = false);

// Eigenvalues of H restricted to N_T = manifold, lab frame, ascending (MHz).
// Throws ManifoldTooLarge for manifold > 3.
std::vector<double> spectrum(const DimerParams& params, int manifold);

// Exact single-excitation levels of the resonant dimer (nu_a = nu_c).
std::vector<double> single_excitation_levels(const DimerParams& params);

struct ImbalanceAverage {
    double mean_ZT = 0.0;        // window average of <Z_T>
    double mean_ZT_var = 0.0;    // window average of <Z_T^2> - <Z_T>^2
    double temporal_var = 0.0;   // variance of <Z_T>(t) over the window
    std::size_t samples = 0;
};

// Trapezoidal window averages. Throws EmptyWindow if the window holds fewer
// than two samples or lies outside the simulated span.
ImbalanceAverage time_averaged_imbalance(const ObservableSeries& series, double t0, double t1);

// Homodyne signal of a one-photon coherent state, the row normalization.
double xi_one_photon();

std::vector<double> log_grid(double lo, double hi, int count);

struct PhaseDiagram {
    std::vector<double> photons;  // row N values
    std::vector<double> t;        // shared time grid
    Eigen::MatrixXd xi[2];        // rows N, columns t, normalized by xi_one_photon
    Eigen::MatrixXd N[2];
    Eigen::MatrixXd ZT;
    std::vector<int> eta;         // cutoff used per row
    std::vector<std::int64_t> dim;
};

// One evolve per row from the coherent state (sqrt(N), 0); each row is sized
// with space_for_coherent(N, 0, cutoff_c).
PhaseDiagram phase_diagram_scan(const std::vector<double>& photons, const DimerParams& params, double t_end,
                                double output_dt, const PropagatorConfig& config = {}, double cutoff_c = 6.0,
                                int workers = 1);

}  // namespace jcd
