// SPDX-License-Identifier: MIT
#include "ctrc/solver.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

namespace ctrc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Runs fn(row, hessian_seconds_accumulator) over [0, n); contiguous chunks
// across threads. Rows write disjoint outputs, so results do not depend on
// the partition.
template <typename F>
double for_each_row(Index n, const SolverConfig& cfg, F&& fn) {
    const int want = cfg.parallel_rows ? std::max(1, cfg.threads) : 1;
    const int workers = static_cast<int>(std::min<Index>(want, n));
    if (workers <= 1) {
        double ht = 0.0;
        for (Index i = 0; i < n; ++i)
            fn(i, ht);
        return ht;
    }
    std::vector<double> ht(static_cast<std::size_t>(workers), 0.0);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        const Index lo = n * w / workers;
        const Index hi = n * (w + 1) / workers;
        pool.emplace_back([&, w, lo, hi] {
            for (Index i = lo; i < hi; ++i)
                fn(i, ht[static_cast<std::size_t>(w)]);
        });
    }
    for (auto& th : pool)
        th.join();
    double total = 0.0;
    for (double h : ht)
        total += h;
    return total;
}

void copy_shared_block(const DenseTensor& src, DenseTensor& dst, Index g1, Index g2) {
    const Index sr1 = src.dim(0), n = src.dim(1);
    const Index dr1 = dst.dim(0), dn = dst.dim(1);
    for (Index b = 0; b < g2; ++b)
        for (Index i = 0; i < n; ++i)
            for (Index a = 0; a < g1; ++a)
                dst[a + dr1 * i + dr1 * dn * b] = src[a + sr1 * i + sr1 * n * b];
}

double masked_objective_from_recon(const CoupledProblem& p,
                                   std::span<const DenseTensor> recon) {
    double s = 0.0;
    for (std::size_t n = 0; n < p.tensors.size(); ++n)
        for (Index off : p.masks[n].offsets()) {
            const double e = recon[n][off] - p.tensors[n][off];
            s += e * e;
        }
    return 0.5 * s;
}

} // namespace

void SolverConfig::validate() const {
    if (max_iters < 1)
        throw std::invalid_argument("max_iters must be at least 1");
    if (!(tol > 0.0))
        throw std::invalid_argument("tol must be positive");
    if (threads < 1)
        throw std::invalid_argument("threads must be at least 1");
}

void CouplingSpec::validate(const std::vector<Shape>& shapes) const {
    if (n_tensors < 1)
        throw std::invalid_argument("at least one tensor required");
    if (static_cast<int>(shapes.size()) != n_tensors ||
        static_cast<int>(ranks.size()) != n_tensors)
        throw std::invalid_argument("shapes/ranks count must match n_tensors");
    if (shared_modes < 0)
        throw std::invalid_argument("shared_modes must be nonnegative");
    Index min_order = std::numeric_limits<Index>::max();
    for (int n = 0; n < n_tensors; ++n) {
        const Index D = static_cast<Index>(shapes[static_cast<std::size_t>(n)].size());
        ranks[static_cast<std::size_t>(n)].validate(D);
        min_order = std::min(min_order, D);
    }
    if (shared_modes >= min_order)
        throw std::invalid_argument("shared_modes must be smaller than every tensor order");
    if (shared_modes > 0) {
        if (static_cast<Index>(coupled_dims.size()) != shared_modes + 1)
            throw std::invalid_argument("coupled_dims must list shared_modes+1 block sizes");
        for (Index d = 0; d < shared_modes; ++d)
            for (int n = 1; n < n_tensors; ++n)
                if (shapes[static_cast<std::size_t>(n)][static_cast<std::size_t>(d)] !=
                    shapes[0][static_cast<std::size_t>(d)])
                    throw std::invalid_argument("shared mode dimensions must agree across tensors");
        for (Index d = 0; d <= shared_modes; ++d) {
            if (gamma(d) < 1)
                throw std::invalid_argument("coupled block sizes must be positive");
            for (int n = 0; n < n_tensors; ++n)
                if (gamma(d) > ranks[static_cast<std::size_t>(n)].bond(d))
                    throw std::invalid_argument("coupled block size exceeds a bond dimension");
        }
    }
}

void CoupledProblem::validate() const {
    if (tensors.size() != masks.size())
        throw std::invalid_argument("tensor/mask count mismatch");
    std::vector<Shape> shapes;
    shapes.reserve(tensors.size());
    for (std::size_t n = 0; n < tensors.size(); ++n) {
        if (tensors[n].shape() != masks[n].shape())
            throw std::invalid_argument("tensor and mask shapes differ");
        if (masks[n].is_empty())
            throw std::invalid_argument("observation masks must be nonempty");
        shapes.push_back(tensors[n].shape());
    }
    spec.validate(shapes);
}

ModeObservations::ModeObservations(const DenseTensor& t, const ObservationMask& m) {
    if (t.shape() != m.shape())
        throw std::invalid_argument("tensor and mask shapes differ");
    const Index D = t.order();
    count_ = m.count();
    row_begin_.resize(static_cast<std::size_t>(D));
    cols_.resize(static_cast<std::size_t>(D));
    vals_.resize(static_cast<std::size_t>(D));

    // column strides of each original mode inside the mode-d unfolding,
    // whose columns run over [d+1, ..., D-1, 0, ..., d-1] first-fastest
    std::vector<Shape> col_stride(static_cast<std::size_t>(D), Shape(static_cast<std::size_t>(D), 0));
    for (Index d = 0; d < D; ++d) {
        Index s = 1;
        for (Index j = 1; j < D; ++j) {
            const Index mode = (d + j) % D;
            col_stride[static_cast<std::size_t>(d)][static_cast<std::size_t>(mode)] = s;
            s *= t.dim(mode);
        }
    }

    for (Index d = 0; d < D; ++d) {
        row_begin_[static_cast<std::size_t>(d)].assign(static_cast<std::size_t>(t.dim(d)) + 1, 0);
        cols_[static_cast<std::size_t>(d)].resize(static_cast<std::size_t>(count_));
        vals_[static_cast<std::size_t>(d)].resize(static_cast<std::size_t>(count_));
    }

    for (Index off : m.offsets()) {
        const Shape idx = t.multi_index(off);
        for (Index d = 0; d < D; ++d)
            ++row_begin_[static_cast<std::size_t>(d)][static_cast<std::size_t>(idx[static_cast<std::size_t>(d)]) + 1];
    }
    for (Index d = 0; d < D; ++d)
        for (std::size_t i = 1; i < row_begin_[static_cast<std::size_t>(d)].size(); ++i)
            row_begin_[static_cast<std::size_t>(d)][i] += row_begin_[static_cast<std::size_t>(d)][i - 1];

    std::vector<std::vector<Index>> cursor = row_begin_;
    for (Index off : m.offsets()) {
        const Shape idx = t.multi_index(off);
        const double v = t[off];
        for (Index d = 0; d < D; ++d) {
            Index col = 0;
            for (Index mode = 0; mode < D; ++mode)
                if (mode != d)
                    col += idx[static_cast<std::size_t>(mode)] *
                           col_stride[static_cast<std::size_t>(d)][static_cast<std::size_t>(mode)];
            auto& cur = cursor[static_cast<std::size_t>(d)][static_cast<std::size_t>(idx[static_cast<std::size_t>(d)])];
            cols_[static_cast<std::size_t>(d)][static_cast<std::size_t>(cur)] = col;
            vals_[static_cast<std::size_t>(d)][static_cast<std::size_t>(cur)] = v;
            ++cur;
        }
    }
}

std::span<const Index> ModeObservations::cols(Index d, Index row) const {
    const auto& rb = row_begin_[static_cast<std::size_t>(d)];
    const Index lo = rb[static_cast<std::size_t>(row)], hi = rb[static_cast<std::size_t>(row) + 1];
    return {cols_[static_cast<std::size_t>(d)].data() + lo, static_cast<std::size_t>(hi - lo)};
}

std::span<const double> ModeObservations::vals(Index d, Index row) const {
    const auto& rb = row_begin_[static_cast<std::size_t>(d)];
    const Index lo = rb[static_cast<std::size_t>(row)], hi = rb[static_cast<std::size_t>(row) + 1];
    return {vals_[static_cast<std::size_t>(d)].data() + lo, static_cast<std::size_t>(hi - lo)};
}

Eigen::VectorXd psd_pinv_solve(const Matrix& H, const Eigen::VectorXd& rhs, double rel_cutoff) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(H);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("eigendecomposition failed");
    const Eigen::VectorXd& ev = es.eigenvalues(); // ascending
    const double lmax = ev(ev.size() - 1);
    if (!(lmax > 0.0))
        return Eigen::VectorXd::Zero(H.rows());
    const double cut = rel_cutoff * lmax;
    Eigen::VectorXd y = es.eigenvectors().transpose() * rhs;
    for (Index i = 0; i < y.size(); ++i)
        y(i) = ev(i) > cut ? y(i) / ev(i) : 0.0;
    return es.eigenvectors() * y;
}

Eigen::RowVectorXd row_update_uncoupled(const Matrix& B, const Eigen::RowVectorXd& c_row,
                                        std::span<const Index> obs_cols) {
    const Index K = B.rows();
    if (obs_cols.empty())
        return Eigen::RowVectorXd::Zero(K);
    Matrix Bbar(K, static_cast<Index>(obs_cols.size()));
    Eigen::VectorXd cbar(static_cast<Index>(obs_cols.size()));
    for (Index s = 0; s < static_cast<Index>(obs_cols.size()); ++s) {
        const Index col = obs_cols[static_cast<std::size_t>(s)];
        if (col < 0 || col >= B.cols())
            throw std::out_of_range("observed column index out of range");
        Bbar.col(s) = B.col(col);
        cbar(s) = c_row(col);
    }
    const Matrix H = Bbar * Bbar.transpose();
    const Eigen::VectorXd rhs = Bbar * cbar;
    return psd_pinv_solve(H, rhs).transpose();
}

void update_uncoupled_factor(TrFactorSet& factors, Index d, const ModeObservations& obs,
                             const SolverConfig& cfg, SolveReport* report) {
    const Matrix B = subchain(factors, d);
    const Index K = B.rows();
    const Index n_rows = factors.core(d).dim(1);
    Matrix A(n_rows, K);

    const double hess = for_each_row(n_rows, cfg, [&](Index i, double& ht) {
        const auto cols = obs.cols(d, i);
        if (cols.empty()) {
            A.row(i).setZero();
            return;
        }
        const auto vals = obs.vals(d, i);
        const auto t0 = Clock::now();
        Matrix Bbar(K, static_cast<Index>(cols.size()));
        for (Index s = 0; s < static_cast<Index>(cols.size()); ++s)
            Bbar.col(s) = B.col(cols[static_cast<std::size_t>(s)]);
        const Matrix H = Bbar * Bbar.transpose();
        const Eigen::VectorXd rhs =
            Bbar * Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Index>(vals.size()));
        ht += seconds_since(t0);
        A.row(i) = psd_pinv_solve(H, rhs).transpose();
    });
    if (report)
        report->hessian_seconds += hess;
    set_core_from_unfolding(factors, d, A);
}

std::vector<Index> coupled_first_permutation(Index r1, Index r2, Index gamma1, Index gamma2) {
    if (gamma1 < 0 || gamma1 > r1 || gamma2 < 0 || gamma2 > r2)
        throw std::invalid_argument("coupled block exceeds bond grid");
    std::vector<Index> perm;
    perm.reserve(static_cast<std::size_t>(r1 * r2));
    for (Index a = 0; a < gamma1; ++a)
        for (Index b = 0; b < gamma2; ++b)
            perm.push_back(a * r2 + b);
    for (Index a = 0; a < r1; ++a)
        for (Index b = 0; b < r2; ++b)
            if (a >= gamma1 || b >= gamma2)
                perm.push_back(a * r2 + b);
    return perm;
}

std::pair<Matrix, CoupledLayout> assemble_coupled_hessian(std::span<const Matrix> hessians,
                                                          std::span<const std::vector<Index>> perms,
                                                          Index shared_size) {
    const std::size_t N = hessians.size();
    if (perms.size() != N)
        throw std::invalid_argument("one permutation per Hessian required");

    CoupledLayout layout;
    layout.shared_size = shared_size;
    layout.private_offset.resize(N);
    layout.private_size.resize(N);
    Index total = shared_size;
    for (std::size_t n = 0; n < N; ++n) {
        const Index K = hessians[n].rows();
        if (hessians[n].cols() != K)
            throw std::invalid_argument("Hessians must be square");
        if (static_cast<Index>(perms[n].size()) != K)
            throw std::invalid_argument("permutation length must match Hessian size");
        if (K < shared_size)
            throw std::invalid_argument("Hessian smaller than the coupled block");
        layout.private_offset[n] = total;
        layout.private_size[n] = K - shared_size;
        total += K - shared_size;
    }
    layout.total = total;

    Matrix out = Matrix::Zero(total, total);
    for (std::size_t n = 0; n < N; ++n) {
        const Matrix& H = hessians[n];
        const auto& P = perms[n];
        const Index off = layout.private_offset[n];
        const Index priv = layout.private_size[n];
        auto at = [&](Index p, Index q) { return H(P[static_cast<std::size_t>(p)], P[static_cast<std::size_t>(q)]); };
        for (Index p = 0; p < shared_size; ++p)
            for (Index q = 0; q < shared_size; ++q)
                out(p, q) += at(p, q);
        for (Index p = 0; p < shared_size; ++p)
            for (Index q = 0; q < priv; ++q) {
                // exact-minimizer cross block: the symmetrized half-sum,
                // which equals the plain off-diagonal block for symmetric H
                const double v = 0.5 * (at(p, shared_size + q) + at(shared_size + q, p));
                out(p, off + q) += v;
                out(off + q, p) += v;
            }
        for (Index p = 0; p < priv; ++p)
            for (Index q = 0; q < priv; ++q)
                out(off + p, off + q) = at(shared_size + p, shared_size + q);
    }
    return {std::move(out), std::move(layout)};
}

void update_coupled_factor(std::vector<TrFactorSet>& factors, Index d,
                           std::span<const ModeObservations> obs, const CouplingSpec& spec,
                           const SolverConfig& cfg, SolveReport* report) {
    const int N = spec.n_tensors;
    if (d < 0 || d >= spec.shared_modes)
        throw std::invalid_argument("update_coupled_factor: mode is not coupled");
    const Index g1 = spec.gamma(d), g2 = spec.gamma(d + 1);
    const Index shared = g1 * g2;

    std::vector<Matrix> B(static_cast<std::size_t>(N));
    std::vector<std::vector<Index>> perm(static_cast<std::size_t>(N));
    std::vector<Matrix> A(static_cast<std::size_t>(N));
    const Index n_rows = factors[0].core(d).dim(1);
    for (int n = 0; n < N; ++n) {
        const auto& f = factors[static_cast<std::size_t>(n)];
        B[static_cast<std::size_t>(n)] = subchain(f, d);
        perm[static_cast<std::size_t>(n)] = coupled_first_permutation(f.bond(d), f.bond(d + 1), g1, g2);
        A[static_cast<std::size_t>(n)] = Matrix(n_rows, f.bond(d) * f.bond(d + 1));
    }

    const double hess = for_each_row(n_rows, cfg, [&](Index i, double& ht) {
        std::vector<Matrix> H(static_cast<std::size_t>(N));
        std::vector<Eigen::VectorXd> rhs(static_cast<std::size_t>(N));
        const auto t0 = Clock::now();
        for (int n = 0; n < N; ++n) {
            const Matrix& Bn = B[static_cast<std::size_t>(n)];
            const Index K = Bn.rows();
            const auto cols = obs[static_cast<std::size_t>(n)].cols(d, i);
            const auto vals = obs[static_cast<std::size_t>(n)].vals(d, i);
            if (cols.empty()) {
                H[static_cast<std::size_t>(n)] = Matrix::Zero(K, K);
                rhs[static_cast<std::size_t>(n)] = Eigen::VectorXd::Zero(K);
                continue;
            }
            Matrix Bbar(K, static_cast<Index>(cols.size()));
            for (Index s = 0; s < static_cast<Index>(cols.size()); ++s)
                Bbar.col(s) = Bn.col(cols[static_cast<std::size_t>(s)]);
            H[static_cast<std::size_t>(n)] = Bbar * Bbar.transpose();
            rhs[static_cast<std::size_t>(n)] =
                Bbar * Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Index>(vals.size()));
        }
        ht += seconds_since(t0);

        auto [Hhat, layout] = assemble_coupled_hessian(H, perm, shared);
        Eigen::VectorXd ghat = Eigen::VectorXd::Zero(layout.total);
        for (int n = 0; n < N; ++n) {
            const auto& P = perm[static_cast<std::size_t>(n)];
            const auto& r = rhs[static_cast<std::size_t>(n)];
            for (Index p = 0; p < shared; ++p)
                ghat(p) += r(P[static_cast<std::size_t>(p)]);
            for (Index p = 0; p < layout.private_size[static_cast<std::size_t>(n)]; ++p)
                ghat(layout.private_offset[static_cast<std::size_t>(n)] + p) =
                    r(P[static_cast<std::size_t>(shared + p)]);
        }

        const Eigen::VectorXd x = psd_pinv_solve(Hhat, ghat);

        for (int n = 0; n < N; ++n) {
            const auto& P = perm[static_cast<std::size_t>(n)];
            auto& An = A[static_cast<std::size_t>(n)];
            for (Index p = 0; p < shared; ++p)
                An(i, P[static_cast<std::size_t>(p)]) = x(p);
            for (Index p = 0; p < layout.private_size[static_cast<std::size_t>(n)]; ++p)
                An(i, P[static_cast<std::size_t>(shared + p)]) =
                    x(layout.private_offset[static_cast<std::size_t>(n)] + p);
        }
    });
    if (report)
        report->hessian_seconds += hess;

    for (int n = 0; n < N; ++n)
        set_core_from_unfolding(factors[static_cast<std::size_t>(n)], d, A[static_cast<std::size_t>(n)]);
}

double objective(const CoupledProblem& p, std::span<const TrFactorSet> factors) {
    if (factors.size() != p.tensors.size())
        throw std::invalid_argument("one factor set per tensor required");
    std::vector<DenseTensor> recon;
    recon.reserve(factors.size());
    for (const auto& f : factors)
        recon.push_back(tr_contract(f));
    return masked_objective_from_recon(p, recon);
}

SolveResult solve_ctrc(const CoupledProblem& p, const SolverConfig& cfg,
                       std::span<const DenseTensor> ground_truth) {
    p.validate();
    cfg.validate();
    if (!ground_truth.empty() && ground_truth.size() != p.tensors.size())
        throw std::invalid_argument("ground truth count mismatch");

    const auto t_start = Clock::now();
    const int N = p.spec.n_tensors;
    const Index L = p.spec.shared_modes;

    SolveResult res;
    Rng rng(cfg.seed);
    for (int n = 0; n < N; ++n) {
        const auto& rank = p.spec.ranks[static_cast<std::size_t>(n)];
        const auto& t = p.tensors[static_cast<std::size_t>(n)];
        if (cfg.init == InitMethod::RandomNormal) {
            res.factors.push_back(TrFactorSet::random_normal(t.shape(), rank, rng));
        } else {
            res.factors.push_back(tr_svd(project(t, p.masks[static_cast<std::size_t>(n)]), rank).factors);
        }
    }
    // the coupling constraint holds from the start: shared blocks are taken
    // from the first tensor's cores
    for (Index d = 0; d < L; ++d)
        for (int n = 1; n < N; ++n)
            copy_shared_block(res.factors[0].core(d), res.factors[static_cast<std::size_t>(n)].core(d),
                              p.spec.gamma(d), p.spec.gamma(d + 1));

    std::vector<ModeObservations> obs;
    obs.reserve(static_cast<std::size_t>(N));
    for (int n = 0; n < N; ++n)
        obs.emplace_back(p.tensors[static_cast<std::size_t>(n)], p.masks[static_cast<std::size_t>(n)]);

    std::vector<DenseTensor> prev;
    prev.reserve(static_cast<std::size_t>(N));
    for (int n = 0; n < N; ++n)
        prev.push_back(tr_contract(res.factors[static_cast<std::size_t>(n)]));

    SolveReport& rep = res.report;
    if (!ground_truth.empty())
        rep.rmse.resize(static_cast<std::size_t>(N));

    auto track_update = [&] {
        if (cfg.track_update_objective)
            rep.update_objective.push_back(objective(p, res.factors));
    };

    std::vector<DenseTensor> recon(static_cast<std::size_t>(N));
    for (int k = 0; k < cfg.max_iters; ++k) {
        const auto iter_t0 = Clock::now();
        for (int n = 0; n < N; ++n) {
            const Index D = res.factors[static_cast<std::size_t>(n)].order();
            for (Index d = L; d < D; ++d) {
                update_uncoupled_factor(res.factors[static_cast<std::size_t>(n)], d,
                                        obs[static_cast<std::size_t>(n)], cfg, &rep);
                track_update();
            }
        }
        for (Index d = 0; d < L; ++d) {
            update_coupled_factor(res.factors, d, obs, p.spec, cfg, &rep);
            track_update();
        }

        for (int n = 0; n < N; ++n)
            recon[static_cast<std::size_t>(n)] = tr_contract(res.factors[static_cast<std::size_t>(n)]);

        double num2 = 0.0, den2 = 0.0;
        for (int n = 0; n < N; ++n) {
            const auto& r = recon[static_cast<std::size_t>(n)];
            const auto& q = prev[static_cast<std::size_t>(n)];
            for (Index i = 0; i < r.size(); ++i) {
                const double dlt = r[i] - q[i];
                num2 += dlt * dlt;
                den2 += q[i] * q[i];
            }
        }
        const double rc = den2 > 0.0 ? std::sqrt(num2 / den2)
                                     : (num2 > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);

        rep.objective.push_back(masked_objective_from_recon(p, recon));
        rep.relative_change.push_back(rc);
        rep.iter_seconds.push_back(seconds_since(iter_t0));
        if (!ground_truth.empty())
            for (int n = 0; n < N; ++n) {
                const auto& truth = ground_truth[static_cast<std::size_t>(n)];
                double e2 = 0.0;
                for (Index i = 0; i < truth.size(); ++i) {
                    const double dlt = recon[static_cast<std::size_t>(n)][i] - truth[i];
                    e2 += dlt * dlt;
                }
                rep.rmse[static_cast<std::size_t>(n)].push_back(
                    std::sqrt(e2 / static_cast<double>(truth.size())));
            }
        ++rep.iterations;
        std::swap(prev, recon);
        if (rc < cfg.tol)
            break;
    }

    res.reconstructions = std::move(prev);
    rep.wall_seconds = seconds_since(t_start);
    return res;
}

std::pair<TrFactorSet, SolveReport> tr_als_complete(const DenseTensor& t, const ObservationMask& m,
                                                    const TrRank& r, const SolverConfig& cfg) {
    if (m.is_empty())
        throw std::invalid_argument("tr_als_complete: empty observation mask");
    CoupledProblem p;
    p.tensors.push_back(t);
    p.masks.push_back(m);
    p.spec.n_tensors = 1;
    p.spec.shared_modes = 0;
    p.spec.ranks.push_back(r);
    SolveResult res = solve_ctrc(p, cfg);
    return {std::move(res.factors[0]), std::move(res.report)};
}

} // namespace ctrc
