// SPDX-License-Identifier: MIT
#pragma once

#include "ctrc/rng.hpp"
#include "ctrc/solver_config.hpp"
#include "ctrc/tensor.hpp"

#include <utility>
#include <vector>

// Tensor-ring factor sets: a D-way tensor represented by D cyclically
// contracted 3-way cores, core d of shape R_d x I_d x R_{d+1} with
// R_{D+1} = R_1. Entry (i_1,...,i_D) of the represented tensor is the
// trace of the product of the D core slices U^(d)(:, i_d, :).
//
// Core unfolding convention: the I_d x (R_d*R_{d+1}) matrix A_d has
// A_d(i, c) = U^(d)(r1, i, r2) with c = r1*R_{d+1} + r2 (0-based, r2
// fastest). The subchain matrix B_d is laid out so that
// A_d * B_d == unfold_shift(tr_contract(f), d, 1) holds exactly; the
// identity pins both conventions and is enforced by tests.

namespace ctrc {

struct TrRank {
    std::vector<Index> values; // R_1..R_D; the closing bond R_{D+1} is values[0]

    TrRank() = default;
    explicit TrRank(std::vector<Index> v) : values(std::move(v)) {}
    /// Uniform rank r for a D-mode tensor.
    static TrRank uniform(Index D, Index r) { return TrRank(std::vector<Index>(static_cast<std::size_t>(D), r)); }

    Index order() const { return static_cast<Index>(values.size()); }
    /// Bond d for d in [0, D]; bond(D) == bond(0).
    Index bond(Index d) const { return values[static_cast<std::size_t>(d % order())]; }
    void validate(Index expected_order) const;
};

class TrFactorSet {
public:
    TrFactorSet() = default;

    /// Takes a list of 3-way cores; checks adjacent and cyclic bond closure.
    explicit TrFactorSet(std::vector<DenseTensor> cores);

    Index order() const { return static_cast<Index>(cores_.size()); }
    const DenseTensor& core(Index d) const { return cores_[static_cast<std::size_t>(d)]; }
    DenseTensor& core(Index d) { return cores_[static_cast<std::size_t>(d)]; }
    const std::vector<DenseTensor>& cores() const { return cores_; }

    Shape dims() const;
    TrRank rank() const;
    Index bond(Index d) const { return cores_[static_cast<std::size_t>(d % order())].dim(0); }

    /// Core slice U^(d)(:, i, :) as an R_d x R_{d+1} matrix view.
    Eigen::Map<const Matrix, 0, Eigen::OuterStride<>> slice(Index d, Index i) const;

    static TrFactorSet zeros(const Shape& dims, const TrRank& rank);
    static TrFactorSet random_normal(const Shape& dims, const TrRank& rank, Rng& rng);

private:
    std::vector<DenseTensor> cores_;
};

/// Contracts the ring to the full dense tensor.
DenseTensor tr_contract(const TrFactorSet& f);

/// A_d: the I_d x (R_d*R_{d+1}) unfolding of core d (see layout note above).
Matrix core_unfolding(const TrFactorSet& f, Index d);

/// Writes an I_d x (R_d*R_{d+1}) matrix back into core d.
void set_core_from_unfolding(TrFactorSet& f, Index d, const Matrix& A);

/// Contraction of all cores except core d, shaped (R_d*R_{d+1}) x J_d with
/// J_d the product of the remaining dimensions, satisfying
/// A_d * subchain(f, d) == unfold_shift(tr_contract(f), d, 1).
Matrix subchain(const TrFactorSet& f, Index d);

struct TrSvdResult {
    TrFactorSet factors;
    double rel_error = 0.0; // ||t - reconstruction||_F / ||t||_F (0 for a zero input)
    bool rank_clipped = false;
};

/// Sequential-SVD decomposition of a fully observed tensor, truncating each
/// intermediate SVD so the bonds match the requested rank. Requested bonds
/// larger than the available matrix rank are kept as zero-padded columns and
/// reported via rank_clipped.
TrSvdResult tr_svd(const DenseTensor& t, const TrRank& target);

/// Tolerance-driven variant: bonds are chosen per SVD so the final relative
/// reconstruction error is approximately rel_tol. The ring is closed with a
/// trivial first bond (R_1 = 1).
TrSvdResult tr_svd(const DenseTensor& t, double rel_tol);

/// Completion of a single partially observed tensor by alternating
/// masked row-wise least squares over the cores. The objective
/// 0.5*||P(contract) - P(t)||^2 is non-increasing per sweep; stops when the
/// relative change of the reconstruction drops below cfg.tol or at
/// cfg.max_iters.
std::pair<TrFactorSet, SolveReport> tr_als_complete(const DenseTensor& t, const ObservationMask& m,
                                                    const TrRank& r, const SolverConfig& cfg);

} // namespace ctrc
