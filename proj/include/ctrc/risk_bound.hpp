// SPDX-License-Identifier: MIT
#pragma once

#include "ctrc/tensor.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

// Numeric evaluation of the excess-risk bound for coupled ring completion
// under a Student-t factor prior: moment-matched F degrees of freedom,
// Beta-function ratio powers, truncated generalized hypergeometric series,
// and the closed-form supremum bound.

namespace ctrc {

struct BoundParams {
    double a = 4.0;  // Student-t shape (> 3 for the df formulas)
    double b = 1.0;  // Student-t scale
    double k = 1.0;  // per-core element count I*R^2
    int D1 = 3;      // order of the first tensor
    int D2 = 3;      // order of the second tensor
    int L = 0;       // number of coupled modes
    double T1 = 1.0; // training sample count, first tensor
    double T2 = 1.0; // training sample count, second tensor
    double S1 = 1.0; // test sample count, first tensor
    double S2 = 1.0; // test sample count, second tensor
    double lipschitz = 1.0; // loss Lipschitz constant
    double delta = 0.05;    // confidence level in (0, 1)
    double epsilon = 0.0;   // F moment-matching parameter

    void validate() const;
};

/// Moment-matched F degrees of freedom (df1, df2) as rational functions of
/// (a, k, epsilon). Throws std::domain_error when a denominator vanishes.
std::pair<double, double> df_star(double a, double k, double epsilon);

struct PfqResult {
    double value = 0.0;
    bool converged = false;
    int terms = 0;
    double peak_term = 0.0; // largest term magnitude encountered
};

/// Truncated generalized hypergeometric series
/// sum_l prod(upper)_l / prod(lower)_l * z^l / l!. Stops when the next term
/// falls below tol relative to the partial sum; a result that still grows at
/// max_terms (or overflows) is returned with converged = false rather than
/// thrown, and so is a sum whose transient peak term exceeds the result by
/// more than ~13 digits (cancellation has consumed double precision).
/// pfq(..., 0) == 1 exactly.
PfqResult pfq(std::span<const double> upper, std::span<const double> lower, double z,
              int max_terms = 10000, double tol = 1e-14);

/// [B(df1 + 1/2, df2 - 1/2) / B(df1, df2)]^L via log-Gamma.
/// Requires df1 > 0 and df2 > 1/2.
double beta_ratio_power(double df1, double df2, int L);

/// Two printed forms of the series argument; they are algebraically equal
/// ((-1)^(D1-D2) == (-1)^(D1+D2)) and kept as a cross-check.
enum class SeriesArgumentForm { Theorem, Appendix };

struct CoupledBoundResult {
    double value = 0.0;
    int case_used = 1; // 1 when |z| <= 1, else the swapped-role form
    double z = 0.0;    // series argument actually used
    PfqResult series;
};

/// Excess-risk bound of the coupled completion: picks between the two
/// printed forms by the magnitude of the hypergeometric argument.
CoupledBoundResult coupled_bound(const BoundParams& p, double epsilon,
                                 SeriesArgumentForm form = SeriesArgumentForm::Theorem);

/// Evaluates one specific form (1 or 2) regardless of the argument
/// magnitude; the automatic switch and cross-checks build on this.
CoupledBoundResult coupled_bound_case(const BoundParams& p, double epsilon, int which,
                                      SeriesArgumentForm form = SeriesArgumentForm::Theorem);

/// Excess-risk bound of tensor n (1 or 2) completed individually.
double individual_bound(const BoundParams& p, int n);

/// Closed-form supremum of the coupled bound (no series evaluation).
double supremum_bound(const BoundParams& p);

struct EpsilonSearchResult {
    double epsilon = 0.0;
    double mismatch = 0.0; // relative mean+variance mismatch at the optimum
};

/// Grid search for the moment-matching parameter: minimizes the relative
/// mean/variance mismatch between the matched F distribution and Monte
/// Carlo k-fold sums of squared Student-t draws.
EpsilonSearchResult epsilon_search(double a, double b, double k, int n_samples,
                                   std::uint64_t seed, double eps_lo = -1.0, double eps_hi = 1.0,
                                   int grid_points = 201);

} // namespace ctrc
