#pragma once

#include <Eigen/Core>

#include "jcdimer/sparse.hpp"

namespace jcd {

// A = H - (i/2) * damping, all entries in MHz. Every propagator in the
// library evolves with exp(-i 2 pi A t), t in microseconds. With no damping
// (or an all-zero damping diagonal) A is Hermitian.
class EffectiveOperator {
public:
    explicit EffectiveOperator(const SparseOperator& hamiltonian, const Eigen::VectorXd* damping = nullptr);

    std::int64_t dim() const noexcept { return hamiltonian_->dim(); }
    bool hermitian() const noexcept { return hermitian_; }
    const SparseOperator& hamiltonian() const noexcept { return *hamiltonian_; }
    const Eigen::VectorXd* damping() const noexcept { return damping_; }

    void apply(const StateVector& x, StateVector& y) const;

    // Upper bound on the spectral radius of H (Gershgorin), MHz.
    double spectral_bound() const noexcept { return spectral_bound_; }

private:
    const SparseOperator* hamiltonian_;
    const Eigen::VectorXd* damping_;
    bool hermitian_;
    double spectral_bound_;
};

namespace krylov {

struct Settings {
    int subspace_dim = 30;
    double step_tol = 1e-12;       // local error estimate accepted per step
    bool reorthogonalize = true;   // full re-orthogonalization of the basis
};

// Krylov basis around a single vector. Lanczos recurrence for a Hermitian
// operator, Arnoldi with classical Gram-Schmidt (two passes) otherwise.
class Basis {
public:
    explicit Basis(Settings settings = {}) : settings_(settings) {}

    void build(const EffectiveOperator& op, const StateVector& psi);

    int size() const noexcept { return m_; }
    double beta() const noexcept { return beta_; }
    bool exact() const noexcept { return exact_; }

    // Coefficients of exp(-i 2 pi tau A) psi in the basis.
    Eigen::VectorXcd coefficients(double tau) const;

    // Estimate of the local error for a step of length tau.
    double error_estimate(double tau) const;

    // Largest step <= want whose error estimate is below settings.step_tol.
    // Throws KrylovBreakdown if the step falls below min_step.
    double admissible_step(double want, double min_step) const;

    void reconstruct(const Eigen::VectorXcd& coeffs, StateVector& out) const;

private:
    Settings settings_;
    Eigen::MatrixXcd v_;    // dim x (m+1)
    Eigen::MatrixXcd h_;    // projected operator, m x m
    double h_next_ = 0.0;   // |h_{m+1,m}|
    double beta_ = 0.0;
    int m_ = 0;
    bool exact_ = false;
    bool hermitian_ = true;
    // h_ = Q diag(lambda) Q^-1; q_e1_ holds Q^-1 e1. Hermitian projections
    // use real lambda_, general ones mu_.
    Eigen::MatrixXcd q_;
    Eigen::VectorXd lambda_;
    Eigen::VectorXcd mu_;
    Eigen::VectorXcd q_e1_;
    bool eig_ok_ = false;
};

}  // namespace krylov
}  // namespace jcd
