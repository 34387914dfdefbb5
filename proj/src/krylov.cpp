#include "jcdimer/krylov.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>

#include "jcdimer/errors.hpp"
#include "jcdimer/params.hpp"

namespace jcd {

EffectiveOperator::EffectiveOperator(const SparseOperator& hamiltonian, const Eigen::VectorXd* damping)
    : hamiltonian_(&hamiltonian),
      damping_(damping),
      hermitian_(damping == nullptr || damping->cwiseAbs().maxCoeff() == 0.0),
      spectral_bound_(hamiltonian.gershgorin_bound()) {
    if (damping && damping->size() != hamiltonian.dim())
        throw DimensionGuard("damping diagonal does not match operator dimension");
}

void EffectiveOperator::apply(const StateVector& x, StateVector& y) const {
    hamiltonian_->apply(x, y);
    if (!hermitian_) y.array() -= cplx(0.0, 0.5) * damping_->array().cast<cplx>() * x.array();
}

namespace krylov {

void Basis::build(const EffectiveOperator& op, const StateVector& psi) {
    const auto n = op.dim();
    const int mmax = static_cast<int>(std::min<std::int64_t>(settings_.subspace_dim, n));
    hermitian_ = op.hermitian();
    beta_ = psi.norm();
    if (!(beta_ > 0.0)) throw KrylovBreakdown("Krylov basis requested for a zero vector");

    v_.resize(n, mmax + 1);
    h_ = Eigen::MatrixXcd::Zero(mmax + 1, mmax);
    v_.col(0) = psi / beta_;
    StateVector w(n);
    const double scale = std::max(op.spectral_bound(), 1e-300);
    exact_ = false;
    m_ = mmax;
    h_next_ = 0.0;
    for (int j = 0; j < mmax; ++j) {
        op.apply(v_.col(j), w);
        if (hermitian_ && !settings_.reorthogonalize) {
            const cplx a = v_.col(j).dot(w);
            w -= a * v_.col(j);
            if (j > 0) w -= h_(j - 1, j) * v_.col(j - 1);
            h_(j, j) = a.real();
        } else {
            Eigen::VectorXcd c = v_.leftCols(j + 1).adjoint() * w;
            w.noalias() -= v_.leftCols(j + 1) * c;
            Eigen::VectorXcd c2 = v_.leftCols(j + 1).adjoint() * w;
            w.noalias() -= v_.leftCols(j + 1) * c2;
            c += c2;
            h_.col(j).head(j + 1) = c;
        }
        const double b = w.norm();
        h_(j + 1, j) = b;
        if (b < 1e-13 * scale || b == 0.0) {
            m_ = j + 1;
            exact_ = true;
            break;
        }
        v_.col(j + 1) = w / b;
        if (hermitian_ && j + 1 < mmax) h_(j, j + 1) = b;
    }
    h_next_ = exact_ ? 0.0 : std::abs(h_(m_, m_ - 1));
    Eigen::MatrixXcd hm = h_.topLeftCorner(m_, m_);
    if (hermitian_) {
        // Hermitize to remove round-off before the symmetric eigensolve.
        Eigen::MatrixXcd sym = 0.5 * (hm + hm.adjoint());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(sym);
        q_ = es.eigenvectors();
        lambda_ = es.eigenvalues();
        q_e1_ = q_.row(0).adjoint();
        eig_ok_ = true;
    } else {
        // Diagonalize once when the eigenbasis is well conditioned; fall back
        // to the Pade exponential per call otherwise.
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(hm);
        eig_ok_ = false;
        if (es.info() == Eigen::Success) {
            q_ = es.eigenvectors();
            Eigen::PartialPivLU<Eigen::MatrixXcd> lu(q_);
            const Eigen::MatrixXcd inv = lu.inverse();
            const double cond = q_.cwiseAbs().rowwise().sum().maxCoeff() * inv.cwiseAbs().rowwise().sum().maxCoeff();
            if (std::isfinite(cond) && cond < 1e6) {
                mu_ = es.eigenvalues();
                q_e1_ = inv.col(0);
                eig_ok_ = true;
            }
        }
    }
    h_ = std::move(hm);
}

Eigen::VectorXcd Basis::coefficients(double tau) const {
    if (hermitian_) {
        Eigen::VectorXcd phase(m_);
        for (int k = 0; k < m_; ++k) phase[k] = std::polar(1.0, -kTwoPi * lambda_[k] * tau) * q_e1_[k];
        return beta_ * (q_ * phase);
    }
    if (eig_ok_) {
        Eigen::VectorXcd phase = (cplx(0.0, -kTwoPi * tau) * mu_.array()).exp() * q_e1_.array();
        return beta_ * (q_ * phase);
    }
    Eigen::MatrixXcd arg = cplx(0.0, -kTwoPi * tau) * h_;
    Eigen::MatrixXcd e = arg.exp();
    return beta_ * e.col(0);
}

double Basis::error_estimate(double tau) const {
    if (exact_) return 0.0;
    const auto c = coefficients(tau);
    return h_next_ * std::abs(c[m_ - 1]) * kTwoPi * std::abs(tau);
}

double Basis::admissible_step(double want, double min_step) const {
    double tau = want;
    const double tol = settings_.step_tol * std::max(beta_, 1e-300);
    for (int iter = 0; iter < 200; ++iter) {
        const double err = error_estimate(tau);
        if (err <= tol) return tau;
        const double shrink = std::clamp(0.9 * std::pow(tol / err, 1.0 / std::max(m_, 2)), 0.1, 0.9);
        tau *= shrink;
        if (tau < min_step)
            throw KrylovBreakdown("Krylov step fell below " + std::to_string(min_step) +
                                  " us; enlarge the subspace or relax step_tol");
    }
    throw KrylovBreakdown("Krylov step control did not converge");
}

void Basis::reconstruct(const Eigen::VectorXcd& coeffs, StateVector& out) const {
    out.noalias() = v_.leftCols(m_) * coeffs;
}

}  // namespace krylov
}  // namespace jcd
