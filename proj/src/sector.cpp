#include "jcdimer/sector.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "jcdimer/errors.hpp"
#include "jcdimer/params.hpp"

namespace jcd {

namespace {

constexpr double kConditionLimit = 1e8;

}  // namespace

SectorPropagator::SectorPropagator(const HilbertSpace& space, const SparseOperator& hamiltonian,
                                   const Eigen::VectorXd* damping, int threads)
    : dim_(space.dim()) {
    if (hamiltonian.dim() != dim_) throw DimensionGuard("Hamiltonian does not match the Hilbert space");
    if (damping && damping->size() != dim_) throw DimensionGuard("damping diagonal does not match the Hilbert space");

    const int nmax = space.max_excitations();
    blocks_.resize(static_cast<std::size_t>(nmax) + 1);
    for (std::int64_t i = 0; i < dim_; ++i) blocks_[space.unflatten(i).excitations()].index.push_back(i);
    blocks_.erase(std::remove_if(blocks_.begin(), blocks_.end(), [](const Block& b) { return b.index.empty(); }),
                  blocks_.end());

    std::vector<std::int64_t> where(static_cast<std::size_t>(dim_));
    for (std::size_t b = 0; b < blocks_.size(); ++b)
        for (std::size_t k = 0; k < blocks_[b].index.size(); ++k) where[blocks_[b].index[k]] = static_cast<std::int64_t>(k);

    std::vector<double> residuals(blocks_.size(), 0.0);
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::string error;

    auto work = [&]() {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= blocks_.size()) return;
            Block& blk = blocks_[b];
            const auto d = static_cast<Eigen::Index>(blk.index.size());
            Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(d, d);
            Eigen::VectorXd dd = Eigen::VectorXd::Zero(d);
            for (Eigen::Index k = 0; k < d; ++k) {
                const auto r = blk.index[k];
                const auto* rp = hamiltonian.row_ptr().data();
                for (auto p = rp[r]; p < rp[r + 1]; ++p) {
                    const auto c = hamiltonian.cols()[p];
                    if (space.unflatten(c).excitations() != space.unflatten(r).excitations()) {
                        std::lock_guard lk(err_mu);
                        error = "Hamiltonian couples different excitation numbers";
                        return;
                    }
                    h(k, where[c]) += hamiltonian.values()[p];
                }
                if (damping) dd[k] = (*damping)[r];
            }
            const double mean = dd.size() ? dd.mean() : 0.0;
            const double spread = dd.size() ? (dd.array() - mean).abs().maxCoeff() : 0.0;
            if (spread == 0.0) {
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (h + h.adjoint()));
                blk.s = es.eigenvectors();
                blk.s_inv = blk.s.adjoint();
                blk.lambda = es.eigenvalues().cast<cplx>().array() - cplx(0.0, 0.5 * mean);
                residuals[b] = (blk.s_inv * blk.s - Eigen::MatrixXcd::Identity(d, d)).cwiseAbs().maxCoeff();
            } else {
                Eigen::MatrixXcd a = h;
                a.diagonal() -= cplx(0.0, 0.5) * dd.cast<cplx>();
                Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(a);
                if (es.info() != Eigen::Success) {
                    std::lock_guard lk(err_mu);
                    error = "eigendecomposition failed in block of size " + std::to_string(d);
                    return;
                }
                blk.s = es.eigenvectors();
                blk.lambda = es.eigenvalues();
                Eigen::PartialPivLU<Eigen::MatrixXcd> lu(blk.s);
                blk.s_inv = lu.inverse();
                const double cond = blk.s.cwiseAbs().rowwise().sum().maxCoeff() *
                                    blk.s_inv.cwiseAbs().rowwise().sum().maxCoeff();
                const double scale = std::max(a.cwiseAbs().maxCoeff(), 1.0);
                const double res = (a * blk.s - blk.s * blk.lambda.asDiagonal()).cwiseAbs().maxCoeff() / scale;
                residuals[b] = res;
                if (!(cond < kConditionLimit) || !(res < 1e-8)) {
                    std::lock_guard lk(err_mu);
                    error = "ill-conditioned eigenbasis in block of size " + std::to_string(d) +
                            " (condition " + std::to_string(cond) + "); use the Krylov propagator";
                    return;
                }
                blk.gram = blk.s.adjoint() * blk.s;
            }
        }
    };

    const int nt = std::max(1, std::min<int>(threads, static_cast<int>(blocks_.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < nt; ++t) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    if (!error.empty()) throw KrylovBreakdown(error);
    for (double r : residuals) residual_ = std::max(residual_, r);
}

int SectorPropagator::largest_block() const noexcept {
    std::size_t m = 0;
    for (const auto& b : blocks_) m = std::max(m, b.index.size());
    return static_cast<int>(m);
}

void SectorPropagator::load(const StateVector& psi, Cursor& cur) const {
    if (psi.size() != dim_) throw DimensionGuard("state does not match the propagator dimension");
    cur.coeffs.resize(blocks_.size());
    Eigen::VectorXcd local;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const auto& blk = blocks_[b];
        local.resize(static_cast<Eigen::Index>(blk.index.size()));
        for (std::size_t k = 0; k < blk.index.size(); ++k) local[k] = psi[blk.index[k]];
        cur.coeffs[b].noalias() = blk.s_inv * local;
    }
}

double SectorPropagator::norm_sq(const Cursor& cur, double tau) const {
    double total = 0.0;
    Eigen::VectorXcd c;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const auto& blk = blocks_[b];
        const auto& c0 = cur.coeffs[b];
        if (blk.gram.size() == 0) {
            for (Eigen::Index k = 0; k < c0.size(); ++k)
                total += std::norm(c0[k]) * std::exp(2.0 * kTwoPi * blk.lambda[k].imag() * tau);
        } else {
            c = c0.array() * (cplx(0.0, -kTwoPi * tau) * blk.lambda.array()).exp();
            total += c.dot(blk.gram * c).real();
        }
    }
    return total;
}

void SectorPropagator::state(const Cursor& cur, double tau, StateVector& out) const {
    out.resize(dim_);
    Eigen::VectorXcd c, local;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const auto& blk = blocks_[b];
        c = cur.coeffs[b].array() * (cplx(0.0, -kTwoPi * tau) * blk.lambda.array()).exp();
        local.noalias() = blk.s * c;
        for (std::size_t k = 0; k < blk.index.size(); ++k) out[blk.index[k]] = local[k];
    }
}

void SectorPropagator::advance(Cursor& cur, double tau) const {
    for (std::size_t b = 0; b < blocks_.size(); ++b)
        cur.coeffs[b].array() *= (cplx(0.0, -kTwoPi * tau) * blocks_[b].lambda.array()).exp();
}

Eigen::VectorXcd SectorPropagator::eigenvalues() const {
    Eigen::VectorXcd all(dim_);
    Eigen::Index p = 0;
    for (const auto& b : blocks_) {
        all.segment(p, b.lambda.size()) = b.lambda;
        p += b.lambda.size();
    }
    return all;
}

}  // namespace jcd
