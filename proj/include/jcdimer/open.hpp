#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "jcdimer/analysis.hpp"
#include "jcdimer/hilbert.hpp"
#include "jcdimer/krylov.hpp"
#include "jcdimer/params.hpp"
#include "jcdimer/sector.hpp"
#include "jcdimer/unitary.hpp"

namespace jcd {

enum class JumpOperator : int { a_left = 0, a_right = 1, sm_left = 2, sm_right = 3 };

const char* jump_name(JumpOperator op) noexcept;

struct JumpChannel {
    JumpOperator op;
    double rate;  // MHz
};

// Channels with a non-zero rate, in the fixed order a_L, a_R, sm_L, sm_R.
std::vector<JumpChannel> jump_channels(const DimerParams& params);

struct JumpEvent {
    double t;
    JumpOperator channel;
};

enum class NoJumpMethod { sector, krylov };

struct McwfConfig {
    NoJumpMethod method = NoJumpMethod::sector;
    int krylov_dim = 30;
    double krylov_tol = 1e-11;
    double jump_tol = 1e-6;  // relative tolerance on the norm at the located jump
    int threads = 1;         // sector decomposition and ensemble workers
};

// Everything a trajectory needs that does not depend on the seed. Built once
// and shared read-only by all trajectories of an ensemble.
class TrajectoryModel {
public:
    TrajectoryModel(const DimerParams& params, const HilbertSpace& space, const McwfConfig& config = {});

    const DimerParams& params() const noexcept { return params_; }
    const HilbertSpace& space() const noexcept { return space_; }
    const McwfConfig& config() const noexcept { return config_; }
    const std::vector<JumpChannel>& channels() const noexcept { return channels_; }
    const SparseOperator& hamiltonian() const noexcept { return hamiltonian_; }
    const Eigen::VectorXd& damping() const noexcept { return damping_; }
    const SectorPropagator* sectors() const noexcept { return sectors_.get(); }

private:
    DimerParams params_;
    HilbertSpace space_;
    McwfConfig config_;
    std::vector<JumpChannel> channels_;
    SparseOperator hamiltonian_;
    Eigen::VectorXd damping_;
    std::unique_ptr<SectorPropagator> sectors_;
};

struct TrajectoryRecord {
    std::uint64_t seed = 0;
    std::vector<JumpEvent> jumps;
    ObservableSeries series;  // expectation values of the normalized state
};

// Quantum-jump unravelling with the waiting-time method: the jump time is
// where ||psi||^2 of the no-jump evolution reaches a uniform threshold.
TrajectoryRecord mcwf_trajectory(const StateVector& psi0, const TrajectoryModel& model, double t_end,
                                 double output_dt, std::uint64_t seed);

struct EnsembleResult {
    std::vector<double> t;
    std::size_t n_traj = 0;
    std::uint64_t base_seed = 0;
    // Ensemble means per site.
    std::vector<double> I[2], Q[2], N[2], IQ2[2], Nq[2];
    // Homodyne signal from the averaged quadratures.
    std::vector<double> xi[2];
    // Standard errors of the means; xi uses first-order error propagation.
    std::vector<double> se_I[2], se_Q[2], se_N[2], se_IQ2[2], se_xi[2];
    std::vector<double> ZT, NT;
    double mean_jumps = 0.0;
    std::vector<std::uint64_t> failed_seeds;
    std::vector<std::string> failures;
    std::vector<TrajectoryRecord> kept;  // first `keep` trajectories in seed order

    const std::vector<double>& column(const std::string& name) const;
    static std::vector<std::string> column_names();
};

// Seeds base_seed .. base_seed + n_traj - 1. Reduction runs in seed order, so
// the result does not depend on the number of workers.
EnsembleResult run_ensemble(const StateVector& psi0, const TrajectoryModel& model, double t_end, double output_dt,
                            std::size_t n_traj, std::uint64_t base_seed, std::size_t keep = 0);

// Pairs (i, j) of seed ranges [base, base + n) that overlap.
std::vector<std::pair<std::size_t, std::size_t>> overlapping_seed_ranges(
    const std::vector<std::pair<std::uint64_t, std::uint64_t>>& ranges);

struct DenseResult {
    ObservableSeries series;
    std::vector<Eigen::MatrixXcd> rho;  // one per output sample when requested
    double max_trace_error = 0.0;
    double min_eigenvalue = 0.0;
    double max_hermiticity_error = 0.0;
};

inline constexpr std::int64_t kDenseOracleMaxDim = 64;

// Lindblad equation integrated on the full density matrix. Throws
// DimensionGuard for spaces larger than kDenseOracleMaxDim.
DenseResult master_equation_dense(const Eigen::MatrixXcd& rho0, const DimerParams& params,
                                  const HilbertSpace& space, double t_end, double output_dt,
                                  const ode::Tolerance& tol = {1e-10, 1e-13}, bool keep_rho = false);
DenseResult master_equation_dense(const StateVector& psi0, const DimerParams& params, const HilbertSpace& space,
                                  double t_end, double output_dt, const ode::Tolerance& tol = {1e-10, 1e-13},
                                  bool keep_rho = false);

Moments measure_density(const HilbertSpace& space, const Eigen::MatrixXcd& rho);

struct DissipativeScan {
    std::vector<double> photons;
    std::vector<double> t;
    Eigen::MatrixXd xi[2];      // homodyne signal, rows N_i
    Eigen::MatrixXd IQ2[2];     // photon-number signal <I^2 + Q^2>
    Eigen::MatrixXd se_xi[2];
    std::vector<EnsembleResult> rows;
};

DissipativeScan dissipative_phase_scan(const std::vector<double>& photons, const DimerParams& params, double t_end,
                                       double output_dt, std::size_t n_traj, std::uint64_t base_seed,
                                       const McwfConfig& config = {}, double cutoff_c = 6.0);

// Quantum critical photon number g^2 / (4 J^2) of the resonant dimer.
double quantum_critical_photons(const DimerParams& params);

// Early-window rule for the transition extractor: [0, fraction * ln(N_i/N_c) / (2 pi kappa)],
// widened to at least `min_periods` Josephson periods 1/(2J).
Window transition_fit_window(double initial_photons, const DimerParams& params, double fraction = 0.4,
                             double min_periods = 4.0);

// critical_time on the left-cavity homodyne signal of an ensemble, with the
// fit window from transition_fit_window.
TransitionReport dissipative_transition(const EnsembleResult& ens, double initial_photons, const DimerParams& params,
                                        const CriticalTimeOptions& base = {}, double fraction = 0.4,
                                        double min_periods = 4.0);

}  // namespace jcd
