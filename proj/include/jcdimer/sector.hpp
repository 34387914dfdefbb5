#pragma once

#include <Eigen/Core>
#include <vector>

#include "jcdimer/hilbert.hpp"
#include "jcdimer/sparse.hpp"

namespace jcd {

// Exact propagator built from an eigendecomposition of A = H - (i/2) D inside
// every fixed-N_T block. H conserves N_T and D is diagonal, so A is block
// diagonal and exp(-i 2 pi A t) costs one dense matrix-vector product per
// block for any t. Suited to the no-jump evolution of quantum trajectories,
// where one decomposition serves the whole ensemble.
class SectorPropagator {
public:
    SectorPropagator(const HilbertSpace& space, const SparseOperator& hamiltonian,
                     const Eigen::VectorXd* damping = nullptr, int threads = 1);

    std::int64_t dim() const noexcept { return dim_; }
    int sectors() const noexcept { return static_cast<int>(blocks_.size()); }
    int largest_block() const noexcept;
    // Largest |S S^-1 - 1| style residual seen while decomposing.
    double decomposition_residual() const noexcept { return residual_; }

    // Per-trajectory state; the propagator itself is shared read-only.
    struct Cursor {
        std::vector<Eigen::VectorXcd> coeffs;  // eigenbasis coefficients at the origin
    };

    void load(const StateVector& psi, Cursor& cur) const;
    double norm_sq(const Cursor& cur, double tau) const;
    void state(const Cursor& cur, double tau, StateVector& out) const;
    // Moves the origin forward by tau.
    void advance(Cursor& cur, double tau) const;

    // All eigenvalues of A (MHz), block by block.
    Eigen::VectorXcd eigenvalues() const;

private:
    struct Block {
        std::vector<std::int64_t> index;
        Eigen::VectorXcd lambda;
        Eigen::MatrixXcd s;       // eigenvectors (columns)
        Eigen::MatrixXcd s_inv;
        Eigen::MatrixXcd gram;    // S^H S, empty when S is unitary
    };

    std::int64_t dim_;
    std::vector<Block> blocks_;
    double residual_ = 0.0;
};

}  // namespace jcd
