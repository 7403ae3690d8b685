// SPDX-License-Identifier: MIT
#pragma once

#include "ctrc/solver.hpp"
#include "ctrc/tensor.hpp"
#include "ctrc/tr.hpp"

#include <map>
#include <string>
#include <vector>

// Text file formats. Indices in files are 1-based; values are written with
// full double precision.
//
// Sparse observations ("COO text v1"):
//   line 1: D I_1 ... I_D
//   line 2: nnz
//   then nnz lines: i_1 ... i_D value      (duplicates forbidden)
//
// Dense tensor:
//   line 1: D I_1 ... I_D
//   then one value per line, first index fastest.
//
// Ring factors:
//   line 1: D
//   line 2: R_1 ... R_{D+1}                (R_{D+1} == R_1)
//   line 3: I_1 ... I_D
//   then the cores in order, each flattened first index fastest
//   (core d has shape R_d x I_d x R_{d+1}), one value per line.
//
// Manifests and reports are `key = value` text; '#' starts a comment.

namespace ctrc {

struct CooData {
    DenseTensor tensor; // observed values, zero elsewhere
    ObservationMask mask;
};

CooData read_coo(const std::string& path);
void write_coo(const std::string& path, const DenseTensor& t, const ObservationMask& m);

DenseTensor read_dense(const std::string& path);
void write_dense(const std::string& path, const DenseTensor& t);

TrFactorSet read_factors(const std::string& path);
void write_factors(const std::string& path, const TrFactorSet& f);

/// Ordered key/value text with typed accessors. Unknown keys are kept.
class KeyValues {
public:
    static KeyValues parse_file(const std::string& path);
    static KeyValues parse_text(const std::string& text);

    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    double number(const std::string& key) const;
    long long integer(const std::string& key) const;
    std::vector<double> numbers(const std::string& key) const;
    std::vector<Index> integers(const std::string& key) const;

    void set(const std::string& key, const std::string& value);
    void set_number(const std::string& key, double value);
    void set_integer(const std::string& key, long long value);
    void set_numbers(const std::string& key, std::span<const double> values);
    void set_integers(const std::string& key, std::span<const Index> values);

    void write_file(const std::string& path) const;

private:
    std::vector<std::pair<std::string, std::string>> entries_;
    std::map<std::string, std::size_t> index_;
};

/// A completion problem loaded from a manifest: tensor files (COO), ranks,
/// coupling, solver settings, and optional ground-truth tensors for RMSE
/// traces. Relative paths resolve against the manifest's directory.
///
/// Keys: n_tensors, tensor_<n>, rank_<n>, truth_<n> (optional),
/// coupled_modes, coupled_dims (optional; defaults to the smallest bond),
/// max_iters, tol, seed, init (random-normal | tr-svd-zero-fill),
/// threads, parallel_rows.
struct Manifest {
    CoupledProblem problem;
    SolverConfig config;
    std::vector<DenseTensor> ground_truth; // empty when no truth files given
};

Manifest read_manifest(const std::string& path);

/// Writes a manifest next to already-written tensor files.
void write_manifest(const std::string& path, const std::vector<std::string>& tensor_files,
                    const std::vector<std::string>& truth_files, const CouplingSpec& spec,
                    const SolverConfig& config);

void write_report(const std::string& path, const SolveReport& rep);

/// Minimal CSV writer: one header row then data rows.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

std::string format_double(double v);

} // namespace ctrc
