// SPDX-License-Identifier: MIT
#pragma once

#include "ctrc/solver.hpp"
#include "ctrc/tensor.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

// Synthetic problem generation, accuracy metrics and the experiment
// runners behind the phase and compare subcommands.

namespace ctrc {

struct SyntheticSpec {
    std::vector<Shape> shapes;          // one per tensor; first L dims agree
    Index rank = 2;                     // uniform TR rank, broadcast to all bonds
    int shared_modes = 0;               // L
    Index coupled_dim = 0;              // shared block size; 0 means the full rank
    std::vector<double> sampling_rates; // one per tensor, in (0, 1]
    std::uint64_t seed = 0;

    void validate() const;
    Index gamma() const { return coupled_dim > 0 ? coupled_dim : rank; }
};

struct SyntheticProblem {
    CoupledProblem problem;              // observed entries only
    std::vector<DenseTensor> ground_truth;
};

/// Draws i.i.d. standard-normal cores, copies the shared leading blocks of
/// the first L cores across tensors, contracts the ground truth, and samples
/// each mask uniformly without replacement with exactly
/// round(SR * prod(dims)) entries. Reproducible from the seed.
SyntheticProblem generate_synthetic(const SyntheticSpec& spec);

/// ||estimate - truth||_F / sqrt(element count).
double rmse(const DenseTensor& estimate, const DenseTensor& truth);

struct ExperimentGrid {
    std::vector<double> sr1;       // sampling rates of the first tensor
    std::vector<double> sr2;       // sampling rates of the second tensor
    std::vector<Index> ranks;
    std::vector<int> coupled_modes;
    int repetitions = 1;
    double success_threshold = 1e-6;

    void validate() const;
};

struct PhaseCell {
    int L = 0;
    double sr2 = 0.0;
    Index rank = 0;
    double sr1 = 0.0;
    double success_fraction = 0.0; // over repetitions, recovery of tensor 1
    double mean_rmse = 0.0;        // tensor 1, mean over repetitions
    int errors = 0;                // repetitions that threw
};

struct PhaseResult {
    ExperimentGrid grid;
    std::vector<PhaseCell> cells; // sr1 fastest, then rank, then sr2, then L
};

/// Sweeps the grid around base_spec (shapes and seed are taken from it);
/// success means the first tensor's RMSE beats the threshold. Cells run on
/// `threads` workers with per-cell seeds derived from (seed, coordinates),
/// so results do not depend on the schedule. Cell failures are recorded and
/// the sweep continues.
PhaseResult run_phase_transition(const ExperimentGrid& grid, const SyntheticSpec& base_spec,
                                 const SolverConfig& cfg, int threads = 1,
                                 std::ostream* progress = nullptr);

/// One heatmap CSV (rank rows x sr1 columns) per (sr2, L) pair, plus a
/// long-format summary; returns the written file names.
std::vector<std::string> write_phase_csv(const PhaseResult& result, const std::string& out_dir);

struct ComparisonSpec {
    std::vector<DenseTensor> truths;    // fully known tensors to sample from
    std::vector<double> sampling_rates; // one per tensor
    int shared_modes = 0;
    Index coupled_dim = 0;              // 0 means the full rank
    std::vector<Index> ranks;           // uniform ranks to sweep
    int repetitions = 10;
    std::uint64_t seed = 0;
};

struct ComparisonRow {
    Index rank = 0;
    std::string method;  // "coupled" or "tr-als"
    int tensor = 0;      // 1-based
    double rmse_mean = 0.0;
    double rmse_std = 0.0;
    double seconds_mean = 0.0;
    int failed_runs = 0;
};

/// For each rank: `repetitions` paired runs on freshly resampled masks, the
/// coupled solver against per-tensor individual completion. Failures are
/// recorded as missing values and skipped in the aggregates.
std::vector<ComparisonRow> run_comparison(const ComparisonSpec& spec, const SolverConfig& cfg,
                                          std::ostream* progress = nullptr);

void write_comparison_csv(const std::string& path, const std::vector<ComparisonRow>& rows);

} // namespace ctrc
