// SPDX-License-Identifier: MIT
#pragma once

#include <cstdint>
#include <vector>

namespace ctrc {

enum class InitMethod {
    RandomNormal, // seeded standard-normal cores
    TrSvdZeroFill // sequential SVD of the zero-filled observed tensor
};

struct SolverConfig {
    int max_iters = 200;
    double tol = 1e-8; // relative-change stopping threshold
    std::uint64_t seed = 0;
    InitMethod init = InitMethod::RandomNormal;
    bool parallel_rows = false;
    int threads = 1;
    // When set, the report additionally records the full objective after
    // every individual factor update (costs one reconstruction per update).
    bool track_update_objective = false;

    void validate() const;
};

struct SolveReport {
    int iterations = 0;
    std::vector<double> objective;        // per iteration
    std::vector<double> relative_change;  // per iteration
    std::vector<std::vector<double>> rmse; // per tensor, per iteration (when truth given)
    std::vector<double> update_objective; // per factor update (when tracked)
    double wall_seconds = 0.0;
    std::vector<double> iter_seconds;   // per iteration
    double hessian_seconds = 0.0;       // cumulative masked normal-equation build time
};

} // namespace ctrc
