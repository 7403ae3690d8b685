// SPDX-License-Identifier: MIT
#include "ctrc/risk_bound.hpp"

#include "ctrc/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ctrc {

namespace {

double ipow(double x, int n) {
    if (n < 0)
        return 1.0 / ipow(x, -n);
    double r = 1.0;
    for (int i = 0; i < n; ++i)
        r *= x;
    return r;
}

double additive_term(double total_samples, double delta) {
    const double m = total_samples;
    return std::sqrt(2.0 * m * std::log(1.0 / delta) / ((m - 0.5) * (m - 0.5)));
}

double lipschitz_prefactor(double lipschitz, double train_total) {
    return lipschitz * (1.0 + 2.0 / (std::sqrt(2.0 * std::numbers::pi * train_total) - 2.0));
}

} // namespace

void BoundParams::validate() const {
    if (!(a > 3.0))
        throw std::domain_error("a must exceed 3");
    if (!(b > 0.0))
        throw std::domain_error("b must be positive");
    if (!(k >= 1.0))
        throw std::domain_error("k must be at least 1");
    if (D1 < 1 || D2 < 1)
        throw std::domain_error("tensor orders must be positive");
    if (L < 0 || L > std::min(D1, D2))
        throw std::domain_error("L must lie in [0, min(D1, D2)]");
    if (!(T1 >= 1.0) || !(T2 >= 1.0) || !(S1 >= 1.0) || !(S2 >= 1.0))
        throw std::domain_error("sample counts must be at least 1");
    if (!(delta > 0.0) || !(delta < 1.0))
        throw std::domain_error("delta must lie in (0, 1)");
    if (!(lipschitz > 0.0))
        throw std::domain_error("the Lipschitz constant must be positive");
}

std::pair<double, double> df_star(double a, double k, double epsilon) {
    const double e = epsilon;
    const double am2 = a - 2.0;

    const double num1 = -am2 * am2 * (a - 3.0) * e * e -
                        am2 * (a * a * (k - 2.0) - a * (5.0 * k - 14.0) + 6.0 * k - 14.0) * e +
                        (2.0 * a - 1.0) * (a * a * (k + 2.0) - a * (5.0 * k + 1.0) + 6.0 * k - 3.0);
    const double den1 = am2 * am2 * (2.0 * a * k + a - 6.0 * k + 2.0) * e * e +
                        am2 * (a * a * (7.0 * k + 6.0) - 28.0 * a * k + 16.0 * k + a - 2.0) * e +
                        2.0 * (2.0 * a - 1.0) * (a * a * (k + 2.0) - a * (5.0 * k + 1.0) + 3.0 * k);
    if (den1 == 0.0)
        throw std::domain_error("df1 denominator vanishes at epsilon = " + std::to_string(e));

    const double num2 = am2 * am2 * (a - 3.0) * e * e +
                        am2 * (a * a * (k - 5.0) - a * (5.0 * k - 28.0) + 6.0 * (k - 4.0)) * e -
                        (2.0 * a - 1.0) * (a * a * (k + 2.0) - a * (5.0 * k - 2.0) + 6.0 * (k - 1.0));
    const double den2 = am2 * am2 * (a - 3.0) * e * e -
                        (3.0 * a * a * a - 20.0 * a * a + 38.0 * a - 20.0) * e -
                        6.0 * (a - 0.5) * (a - 1.0);
    if (den2 == 0.0)
        throw std::domain_error("df2 denominator vanishes at epsilon = " + std::to_string(e));

    return {k * num1 / den1, num2 / den2};
}

PfqResult pfq(std::span<const double> upper, std::span<const double> lower, double z,
              int max_terms, double tol) {
    if (max_terms < 1)
        throw std::invalid_argument("max_terms must be positive");
    PfqResult res;
    res.value = 1.0;
    res.terms = 1;
    if (z == 0.0) {
        res.converged = true;
        return res;
    }
    // negative parameters make term magnitudes dip and spike again where
    // (param + l) crosses zero; the small-term stop is only sound after the
    // last crossing
    int settle = 0;
    for (double u : upper)
        if (u < 0.0)
            settle = std::max(settle, static_cast<int>(std::ceil(-u)) + 1);
    for (double w : lower)
        if (w < 0.0)
            settle = std::max(settle, static_cast<int>(std::ceil(-w)) + 1);

    double term = 1.0;
    res.peak_term = 1.0;
    for (int l = 0; l < max_terms; ++l) {
        double num = 1.0;
        for (double u : upper)
            num *= u + l;
        if (num == 0.0) { // an upper parameter terminated the series
            res.converged = res.peak_term * 1e-13 <= std::abs(res.value);
            return res;
        }
        double den = 1.0;
        for (double w : lower) {
            const double f = w + l;
            if (f == 0.0)
                throw std::domain_error("lower parameter reached a non-positive integer");
            den *= f;
        }
        term *= num / den * z / (l + 1);
        if (!std::isfinite(term)) {
            res.converged = false;
            return res;
        }
        res.value += term;
        res.terms = l + 2;
        res.peak_term = std::max(res.peak_term, std::abs(term));
        if (l >= settle && std::abs(term) < tol * std::abs(res.value)) {
            // terms decayed; the sum is only trustworthy if cancellation
            // against the transient peak left some significant digits
            res.converged = res.peak_term * 1e-13 <= std::abs(res.value);
            return res;
        }
    }
    res.converged = false;
    return res;
}

double beta_ratio_power(double df1, double df2, int L) {
    if (!(df1 > 0.0) || !(df2 > 0.5))
        throw std::domain_error("beta_ratio_power requires df1 > 0 and df2 > 1/2");
    if (L < 0)
        throw std::domain_error("beta_ratio_power requires L >= 0");
    if (L == 0)
        return 1.0;
    const double log_ratio =
        std::lgamma(df1 + 0.5) + std::lgamma(df2 - 0.5) - std::lgamma(df1) - std::lgamma(df2);
    return std::exp(static_cast<double>(L) * log_ratio);
}

CoupledBoundResult coupled_bound_case(const BoundParams& p, double epsilon, int which,
                                      SeriesArgumentForm form) {
    p.validate();
    if (which != 1 && which != 2)
        throw std::invalid_argument("form index must be 1 or 2");
    const auto [df1, df2] = df_star(p.a, p.k, epsilon);
    if (!(df1 > 0.0) || !(df2 > 0.5))
        throw std::domain_error("matched degrees of freedom out of range at this epsilon");

    const double ratio = df2 * p.b / (df1 * p.a);
    const double T = p.T1 + p.T2;
    const double TS = T + p.S1 + p.S2;
    const double prefactor = lipschitz_prefactor(p.lipschitz, T);
    const double additive = additive_term(TS, p.delta);
    const int m = p.D1 - p.L;
    const int n = p.D2 - p.L;

    auto argument = [&](double t_num, double t_den, int dexp) {
        // the two printed sign conventions coincide; kept for cross-checking
        if (form == SeriesArgumentForm::Theorem)
            return -(t_num / t_den) * ipow(-ratio, dexp);
        return ipow(-1.0, p.D1 + p.D2 + 1) * (t_num / t_den) * ipow(ratio, dexp);
    };

    CoupledBoundResult out;
    out.case_used = which;
    std::vector<double> upper, lower;
    upper.reserve(static_cast<std::size_t>(m + n + 1));
    lower.reserve(static_cast<std::size_t>(m + n));
    upper.push_back(-0.5);
    if (which == 1) {
        out.z = argument(p.T2, p.T1, p.D1 - p.D2);
        upper.insert(upper.end(), static_cast<std::size_t>(m), df1);
        upper.insert(upper.end(), static_cast<std::size_t>(n), df2 - 0.5);
        lower.insert(lower.end(), static_cast<std::size_t>(m), 1.0 - df2);
        lower.insert(lower.end(), static_cast<std::size_t>(n), 0.5 - df1);
        out.series = pfq(upper, lower, out.z);
        out.value = prefactor * std::pow(ratio, p.D2 / 2.0) *
                        beta_ratio_power(df1, df2, p.L) / std::sqrt(p.T2) * out.series.value +
                    additive;
    } else {
        out.z = argument(p.T1, p.T2, p.D2 - p.D1);
        upper.insert(upper.end(), static_cast<std::size_t>(m), df2 - 0.5);
        upper.insert(upper.end(), static_cast<std::size_t>(n), df1);
        lower.insert(lower.end(), static_cast<std::size_t>(m), 0.5 - df1);
        lower.insert(lower.end(), static_cast<std::size_t>(n), 1.0 - df2);
        out.series = pfq(upper, lower, out.z);
        out.value = prefactor * std::pow(ratio, p.D1 / 2.0) *
                        beta_ratio_power(df1, df2, p.L) / std::sqrt(p.T1) * out.series.value +
                    additive;
    }
    return out;
}

CoupledBoundResult coupled_bound(const BoundParams& p, double epsilon, SeriesArgumentForm form) {
    p.validate();
    const auto [df1, df2] = df_star(p.a, p.k, epsilon);
    if (!(df1 > 0.0) || !(df2 > 0.5))
        throw std::domain_error("matched degrees of freedom out of range at this epsilon");
    const double ratio = df2 * p.b / (df1 * p.a);
    const double z1 = form == SeriesArgumentForm::Theorem
                          ? -(p.T2 / p.T1) * ipow(-ratio, p.D1 - p.D2)
                          : ipow(-1.0, p.D1 + p.D2 + 1) * (p.T2 / p.T1) * ipow(ratio, p.D1 - p.D2);
    return coupled_bound_case(p, epsilon, std::abs(z1) <= 1.0 ? 1 : 2, form);
}

double individual_bound(const BoundParams& p, int n) {
    p.validate();
    if (n != 1 && n != 2)
        throw std::invalid_argument("tensor index must be 1 or 2");
    const auto [df1, df2] = df_star(p.a, p.k, p.epsilon);
    if (!(df1 > 0.0) || !(df2 > 0.5))
        throw std::domain_error("matched degrees of freedom out of range at this epsilon");
    const double ratio = df2 * p.b / (df1 * p.a);
    const int D = n == 1 ? p.D1 : p.D2;
    const double Tn = n == 1 ? p.T1 : p.T2;
    const double Sn = n == 1 ? p.S1 : p.S2;
    return lipschitz_prefactor(p.lipschitz, Tn) * std::pow(ratio, D / 2.0) *
               beta_ratio_power(df1, df2, D) / std::sqrt(Tn) +
           additive_term(Tn + Sn, p.delta);
}

double supremum_bound(const BoundParams& p) {
    p.validate();
    const auto [df1, df2] = df_star(p.a, p.k, p.epsilon);
    if (!(df1 > 0.0) || !(df2 > 0.5))
        throw std::domain_error("matched degrees of freedom out of range at this epsilon");
    const double ratio = df2 * p.b / (df1 * p.a);
    const double T = p.T1 + p.T2;
    const double TS = T + p.S1 + p.S2;
    const double base = p.k * p.b / (p.a - 1.0); // second moment of one factor entry, times k
    const double lead = std::sqrt(ipow(base, p.D1 - p.L) / p.T1 + ipow(base, p.D2 - p.L) / p.T2);
    return lipschitz_prefactor(p.lipschitz, T) * std::pow(ratio, p.L / 2.0) *
               beta_ratio_power(df1, df2, p.L) * lead +
           additive_term(TS, p.delta);
}

namespace {

// Marsaglia-Tsang gamma sampler, shape >= 1, unit scale.
double gamma_sample(Rng& rng, double shape) {
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        const double x = rng.normal();
        const double t = 1.0 + c * x;
        if (t <= 0.0)
            continue;
        const double v = t * t * t;
        const double u = rng.uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x)
            return d * v;
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
            return d * v;
    }
}

} // namespace

EpsilonSearchResult epsilon_search(double a, double b, double k, int n_samples,
                                   std::uint64_t seed, double eps_lo, double eps_hi,
                                   int grid_points) {
    if (!(a > 3.0) || !(b > 0.0) || !(k >= 1.0))
        throw std::domain_error("epsilon_search requires a > 3, b > 0, k >= 1");
    if (n_samples < 2 || grid_points < 2 || !(eps_hi > eps_lo))
        throw std::invalid_argument("bad search configuration");

    // Monte Carlo moments of the k-fold sum of squared Student-t draws;
    // one squared draw is b * z^2 / g with z standard normal, g ~ Gamma(a).
    Rng rng(seed);
    const int ki = static_cast<int>(k);
    double mean = 0.0, m2 = 0.0;
    for (int s = 0; s < n_samples; ++s) {
        double sum = 0.0;
        for (int t = 0; t < ki; ++t) {
            const double z = rng.normal();
            sum += b * z * z / gamma_sample(rng, a);
        }
        const double delta = sum - mean;
        mean += delta / (s + 1);
        m2 += delta * (sum - mean);
    }
    const double var = m2 / (n_samples - 1);

    EpsilonSearchResult best;
    best.mismatch = std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid_points; ++i) {
        const double e = eps_lo + (eps_hi - eps_lo) * i / (grid_points - 1);
        double df1, df2;
        try {
            std::tie(df1, df2) = df_star(a, k, e);
        } catch (const std::domain_error&) {
            continue;
        }
        if (!(df1 > 0.0) || !(df2 > 2.0)) // model variance needs df2 > 2
            continue;
        // the k-fold sum is modelled as k times one matched non-standardized
        // draw; df2 <= 2 would make the model variance infinite
        const double scale = k * b / a;
        const double model_mean = scale * df2 / (df2 - 1.0);
        const double model_var = scale * scale * df2 * df2 * (df1 + df2 - 1.0) /
                                 (df1 * (df2 - 1.0) * (df2 - 1.0) * (df2 - 2.0));
        const double mm = std::abs(model_mean - mean) / std::abs(mean) +
                          std::abs(model_var - var) / std::abs(var);
        if (mm < best.mismatch) {
            best.mismatch = mm;
            best.epsilon = e;
        }
    }
    if (!std::isfinite(best.mismatch))
        throw std::domain_error("no feasible epsilon in the search interval");
    return best;
}

} // namespace ctrc
