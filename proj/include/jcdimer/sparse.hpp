#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace jcd {

using cplx = std::complex<double>;
using StateVector = Eigen::VectorXcd;

struct Triplet {
    std::int64_t row;
    std::int64_t col;
    cplx value;
};

// Compressed-row complex operator. Immutable once built, so it can be shared
// between worker threads.
class SparseOperator {
public:
    SparseOperator() = default;

    // Duplicate (row, col) entries are summed; explicit zeros are dropped.
    static SparseOperator from_triplets(std::int64_t dim, std::vector<Triplet> triplets);

    std::int64_t dim() const noexcept { return dim_; }
    std::int64_t nnz() const noexcept { return static_cast<std::int64_t>(values_.size()); }

    // y = A x
    void apply(const cplx* x, cplx* y) const;
    void apply(const StateVector& x, StateVector& y) const;

    // Max |A_ij - conj(A_ji)|.
    double hermiticity_error() const;

    // Max |A_ij| over stored entries.
    double max_abs() const;

    // Gershgorin bound on the spectral radius.
    double gershgorin_bound() const;

    std::vector<Triplet> triplets() const;

    Eigen::MatrixXcd to_dense() const;

    // Restriction to the listed basis indices (sorted, unique), in that order.
    SparseOperator restricted(const std::vector<std::int64_t>& indices) const;

    const std::vector<std::int64_t>& row_ptr() const noexcept { return row_ptr_; }
    const std::vector<std::int32_t>& cols() const noexcept { return cols_; }
    const std::vector<cplx>& values() const noexcept { return values_; }

private:
    std::int64_t dim_ = 0;
    std::vector<std::int64_t> row_ptr_{0};
    std::vector<std::int32_t> cols_;
    std::vector<cplx> values_;
};

}  // namespace jcd
