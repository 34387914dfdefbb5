#include "jcdimer/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "jcdimer/errors.hpp"

namespace jcd {

SparseOperator SparseOperator::from_triplets(std::int64_t dim, std::vector<Triplet> triplets) {
    if (dim < 0 || dim > std::numeric_limits<std::int32_t>::max())
        throw MemoryBudgetExceeded("operator dimension out of range: " + std::to_string(dim));
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseOperator op;
    op.dim_ = dim;
    op.row_ptr_.assign(static_cast<std::size_t>(dim) + 1, 0);
    op.cols_.reserve(triplets.size());
    op.values_.reserve(triplets.size());
    std::size_t k = 0;
    for (std::int64_t r = 0; r < dim; ++r) {
        while (k < triplets.size() && triplets[k].row == r) {
            const auto c = triplets[k].col;
            if (c < 0 || c >= dim) throw FormatError("triplet column out of range");
            cplx v = 0.0;
            while (k < triplets.size() && triplets[k].row == r && triplets[k].col == c) v += triplets[k++].value;
            if (v != cplx(0.0)) {
                op.cols_.push_back(static_cast<std::int32_t>(c));
                op.values_.push_back(v);
            }
        }
        op.row_ptr_[static_cast<std::size_t>(r) + 1] = static_cast<std::int64_t>(op.values_.size());
    }
    if (k != triplets.size()) throw FormatError("triplet row out of range");
    return op;
}

void SparseOperator::apply(const cplx* x, cplx* y) const {
    const auto* rp = row_ptr_.data();
    const auto* cj = cols_.data();
    const auto* va = values_.data();
    for (std::int64_t r = 0; r < dim_; ++r) {
        double re = 0.0, im = 0.0;
        for (auto k = rp[r]; k < rp[r + 1]; ++k) {
            const cplx a = va[k];
            const cplx b = x[cj[k]];
            re += a.real() * b.real() - a.imag() * b.imag();
            im += a.real() * b.imag() + a.imag() * b.real();
        }
        y[r] = cplx(re, im);
    }
}

void SparseOperator::apply(const StateVector& x, StateVector& y) const {
    y.resize(dim_);
    apply(x.data(), y.data());
}

double SparseOperator::hermiticity_error() const {
    std::unordered_map<std::int64_t, cplx> entries;
    entries.reserve(values_.size());
    for (std::int64_t r = 0; r < dim_; ++r)
        for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) entries[r * dim_ + cols_[k]] = values_[k];
    double err = 0.0;
    for (const auto& [key, v] : entries) {
        const auto r = key / dim_, c = key % dim_;
        auto it = entries.find(c * dim_ + r);
        const cplx t = it == entries.end() ? cplx(0.0) : std::conj(it->second);
        err = std::max(err, std::abs(v - t));
    }
    return err;
}

double SparseOperator::max_abs() const {
    double m = 0.0;
    for (const auto& v : values_) m = std::max(m, std::abs(v));
    return m;
}

double SparseOperator::gershgorin_bound() const {
    double bound = 0.0;
    for (std::int64_t r = 0; r < dim_; ++r) {
        double s = 0.0;
        for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += std::abs(values_[k]);
        bound = std::max(bound, s);
    }
    return bound;
}

std::vector<Triplet> SparseOperator::triplets() const {
    std::vector<Triplet> out;
    out.reserve(values_.size());
    for (std::int64_t r = 0; r < dim_; ++r)
        for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) out.push_back({r, cols_[k], values_[k]});
    return out;
}

Eigen::MatrixXcd SparseOperator::to_dense() const {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim_, dim_);
    for (std::int64_t r = 0; r < dim_; ++r)
        for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) m(r, cols_[k]) = values_[k];
    return m;
}

SparseOperator SparseOperator::restricted(const std::vector<std::int64_t>& indices) const {
    std::vector<std::int64_t> position(static_cast<std::size_t>(dim_), -1);
    for (std::size_t i = 0; i < indices.size(); ++i) position[indices[i]] = static_cast<std::int64_t>(i);
    std::vector<Triplet> trip;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto r = indices[i];
        for (auto k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
            const auto c = position[cols_[k]];
            if (c >= 0) trip.push_back({static_cast<std::int64_t>(i), c, values_[k]});
        }
    }
    return from_triplets(static_cast<std::int64_t>(indices.size()), std::move(trip));
}

}  // namespace jcd
