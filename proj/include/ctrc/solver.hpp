// SPDX-License-Identifier: MIT
#pragma once

#include "ctrc/solver_config.hpp"
#include "ctrc/tensor.hpp"
#include "ctrc/tr.hpp"

#include <span>
#include <utility>
#include <vector>

// Block coordinate descent for coupled tensor-ring completion: several
// partially observed tensors share the leading subblocks of their first L
// ring cores and are fit jointly. Every block update is the exact minimum-
// norm minimizer of its quadratic sub-problem, so the joint objective is
// non-increasing throughout.

namespace ctrc {

struct CouplingSpec {
    int n_tensors = 1;
    int shared_modes = 0;             // L leading modes shared by all tensors
    std::vector<Index> coupled_dims;  // shared bond-block sizes at bonds 1..L+1
    std::vector<TrRank> ranks;        // per-tensor TR ranks

    /// Coupled block size at bond d (0-based, d in [0, L]).
    Index gamma(Index d) const { return coupled_dims[static_cast<std::size_t>(d)]; }

    void validate(const std::vector<Shape>& shapes) const;
};

struct CoupledProblem {
    std::vector<DenseTensor> tensors; // observed data (zero off-mask)
    std::vector<ObservationMask> masks;
    CouplingSpec spec;

    void validate() const;
};

/// Observed entries of one tensor, re-bucketed per mode: for each mode d and
/// each slice index i along it, the columns of the mode-d unfolding that are
/// observed in row i, with their values. Built once per solve; the row
/// updates gather subchain columns through these lists.
class ModeObservations {
public:
    ModeObservations(const DenseTensor& t, const ObservationMask& m);

    Index rows(Index d) const { return static_cast<Index>(row_begin_[static_cast<std::size_t>(d)].size()) - 1; }
    std::span<const Index> cols(Index d, Index row) const;
    std::span<const double> vals(Index d, Index row) const;
    Index count() const { return count_; }

private:
    Index count_ = 0;
    // CSR-style per mode: row_begin_[d] has I_d+1 offsets into cols_/vals_[d]
    std::vector<std::vector<Index>> row_begin_;
    std::vector<std::vector<Index>> cols_;
    std::vector<std::vector<double>> vals_;
};

/// Minimum-norm solution x of H x = rhs for symmetric PSD H, via
/// eigendecomposition with relative cutoff rel_cutoff * lambda_max.
Eigen::VectorXd psd_pinv_solve(const Matrix& H, const Eigen::VectorXd& rhs,
                               double rel_cutoff = 1e-12);

/// Row update of the masked least-squares problem: the minimum-norm
/// minimizer of ||a * B(:, obs_cols) - c_row(obs_cols)|| over the row
/// vector a. An empty column list yields the zero row.
Eigen::RowVectorXd row_update_uncoupled(const Matrix& B, const Eigen::RowVectorXd& c_row,
                                        std::span<const Index> obs_cols);

/// One uncoupled factor update: rebuilds the subchain for mode d and solves
/// the I_d independent row problems against the observed entries. The
/// objective term of this tensor does not increase.
void update_uncoupled_factor(TrFactorSet& factors, Index d, const ModeObservations& obs,
                             const SolverConfig& cfg, SolveReport* report = nullptr);

struct CoupledLayout {
    Index shared_size = 0;               // leading block of the joint vector
    std::vector<Index> private_offset;   // per tensor, offset of its private block
    std::vector<Index> private_size;
    Index total = 0;
};

/// Assembles the arrow-shaped joint Hessian from per-tensor Hessians.
/// perms[n] lists tensor n's bond-pair columns with the shared_size coupled
/// columns first; blocks between distinct private groups are zero. The
/// result is symmetric PSD whenever the inputs are.
std::pair<Matrix, CoupledLayout> assemble_coupled_hessian(std::span<const Matrix> hessians,
                                                          std::span<const std::vector<Index>> perms,
                                                          Index shared_size);

/// Index order that lists the coupled bond pairs of a (r1 x r2) bond grid
/// first (the leading gamma1 x gamma2 block, second bond fastest), then the
/// remaining pairs in ascending order.
std::vector<Index> coupled_first_permutation(Index r1, Index r2, Index gamma1, Index gamma2);

/// One coupled factor update at shared mode d: per row, builds each
/// tensor's masked Hessian and gradient, assembles the joint system, solves
/// it by pseudo-inverse, and writes the shared block back into every
/// tensor's core identically. The total objective does not increase.
void update_coupled_factor(std::vector<TrFactorSet>& factors, Index d,
                           std::span<const ModeObservations> obs, const CouplingSpec& spec,
                           const SolverConfig& cfg, SolveReport* report = nullptr);

/// Joint objective: sum over tensors of 0.5*||P(contract) - P(data)||^2.
double objective(const CoupledProblem& p, std::span<const TrFactorSet> factors);

struct SolveResult {
    std::vector<TrFactorSet> factors;
    std::vector<DenseTensor> reconstructions;
    SolveReport report;
};

/// Block coordinate descent for the coupled completion problem. Per
/// iteration: uncoupled factors of every tensor, then the shared factors,
/// then reconstructions and the relative-change stopping test. Shared core
/// subblocks are bit-identical across tensors after every iteration.
/// ground_truth, when provided, adds per-tensor RMSE traces to the report.
SolveResult solve_ctrc(const CoupledProblem& p, const SolverConfig& cfg,
                       std::span<const DenseTensor> ground_truth = {});

} // namespace ctrc
