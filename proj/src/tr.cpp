// SPDX-License-Identifier: MIT
#include "ctrc/tr.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>

namespace ctrc {

void TrRank::validate(Index expected_order) const {
    if (order() != expected_order)
        throw std::invalid_argument("rank vector length must equal tensor order");
    for (Index r : values)
        if (r < 1)
            throw std::invalid_argument("bond dimensions must be positive");
}

TrFactorSet::TrFactorSet(std::vector<DenseTensor> cores) : cores_(std::move(cores)) {
    const Index D = order();
    if (D < 1)
        throw std::invalid_argument("factor set needs at least one core");
    for (Index d = 0; d < D; ++d) {
        const DenseTensor& c = cores_[static_cast<std::size_t>(d)];
        if (c.order() != 3)
            throw std::invalid_argument("cores must be 3-way");
        const DenseTensor& next = cores_[static_cast<std::size_t>((d + 1) % D)];
        if (c.dim(2) != next.dim(0))
            throw std::invalid_argument("bond mismatch between adjacent cores");
    }
}

Shape TrFactorSet::dims() const {
    Shape out(static_cast<std::size_t>(order()));
    for (Index d = 0; d < order(); ++d)
        out[static_cast<std::size_t>(d)] = cores_[static_cast<std::size_t>(d)].dim(1);
    return out;
}

TrRank TrFactorSet::rank() const {
    std::vector<Index> r(static_cast<std::size_t>(order()));
    for (Index d = 0; d < order(); ++d)
        r[static_cast<std::size_t>(d)] = cores_[static_cast<std::size_t>(d)].dim(0);
    return TrRank(std::move(r));
}

Eigen::Map<const Matrix, 0, Eigen::OuterStride<>> TrFactorSet::slice(Index d, Index i) const {
    const DenseTensor& c = cores_[static_cast<std::size_t>(d)];
    const Index r1 = c.dim(0), n = c.dim(1), r2 = c.dim(2);
    // entry (a, i, b) sits at a + r1*i + r1*n*b: column stride r1*n, unit row stride
    return {c.data() + r1 * i, r1, r2, Eigen::OuterStride<>(r1 * n)};
}

TrFactorSet TrFactorSet::zeros(const Shape& dims, const TrRank& rank) {
    rank.validate(static_cast<Index>(dims.size()));
    std::vector<DenseTensor> cores;
    cores.reserve(dims.size());
    for (Index d = 0; d < static_cast<Index>(dims.size()); ++d)
        cores.emplace_back(Shape{rank.bond(d), dims[static_cast<std::size_t>(d)], rank.bond(d + 1)});
    return TrFactorSet(std::move(cores));
}

TrFactorSet TrFactorSet::random_normal(const Shape& dims, const TrRank& rank, Rng& rng) {
    TrFactorSet f = zeros(dims, rank);
    for (Index d = 0; d < f.order(); ++d)
        for (double& v : f.core(d).values())
            v = rng.normal();
    return f;
}

DenseTensor tr_contract(const TrFactorSet& f) {
    const Index D = f.order();
    const Shape dims = f.dims();
    DenseTensor out(dims);

    // suffix[d] = product of slices of cores d..D-1 at the current
    // multi-index, an R_d x R_1 matrix; suffix[D] is the identity.
    std::vector<Matrix> suffix(static_cast<std::size_t>(D) + 1);
    suffix[static_cast<std::size_t>(D)] = Matrix::Identity(f.bond(0), f.bond(0));
    for (Index t = D - 1; t >= 1; --t)
        suffix[static_cast<std::size_t>(t)] = Matrix(f.bond(t), f.bond(0));

    Shape idx(static_cast<std::size_t>(D), 0);
    auto refresh_from = [&](Index d) {
        for (Index t = d; t >= 1; --t)
            suffix[static_cast<std::size_t>(t)].noalias() =
                f.slice(t, idx[static_cast<std::size_t>(t)]) * suffix[static_cast<std::size_t>(t) + 1];
    };
    refresh_from(D - 1);

    for (Index linear = 0; linear < out.size(); ++linear) {
        const auto m0 = f.slice(0, idx[0]);
        const Matrix& s1 = suffix[1];
        double val = 0.0;
        for (Index b = 0; b < m0.cols(); ++b)
            for (Index a = 0; a < m0.rows(); ++a)
                val += m0(a, b) * s1(b, a); // trace(M0 * S1)
        out[linear] = val;

        // odometer step; only suffixes at and below the carried digit change
        for (Index j = 0; j < D; ++j) {
            auto& ij = idx[static_cast<std::size_t>(j)];
            if (++ij < dims[static_cast<std::size_t>(j)]) {
                if (j >= 1)
                    refresh_from(j);
                break;
            }
            ij = 0;
        }
    }
    return out;
}

Matrix core_unfolding(const TrFactorSet& f, Index d) {
    const DenseTensor& c = f.core(d);
    const Index r1 = c.dim(0), n = c.dim(1), r2 = c.dim(2);
    Matrix A(n, r1 * r2);
    for (Index b = 0; b < r2; ++b)
        for (Index i = 0; i < n; ++i)
            for (Index a = 0; a < r1; ++a)
                A(i, a * r2 + b) = c[a + r1 * i + r1 * n * b];
    return A;
}

void set_core_from_unfolding(TrFactorSet& f, Index d, const Matrix& A) {
    DenseTensor& c = f.core(d);
    const Index r1 = c.dim(0), n = c.dim(1), r2 = c.dim(2);
    if (A.rows() != n || A.cols() != r1 * r2)
        throw std::invalid_argument("core unfolding has wrong size");
    for (Index b = 0; b < r2; ++b)
        for (Index i = 0; i < n; ++i)
            for (Index a = 0; a < r1; ++a)
                c[a + r1 * i + r1 * n * b] = A(i, a * r2 + b);
}

Matrix subchain(const TrFactorSet& f, Index d) {
    const Index D = f.order();
    if (d < 0 || d >= D)
        throw std::invalid_argument("subchain: mode index out of range");
    const Index r1 = f.bond(d), r2 = f.bond(d + 1);

    // cores in cyclic order after d
    std::vector<Index> modes;
    modes.reserve(static_cast<std::size_t>(D - 1));
    for (Index j = 1; j < D; ++j)
        modes.push_back((d + j) % D);

    Index cols = 1;
    for (Index m : modes)
        cols *= f.core(m).dim(1);

    Matrix B(r1 * r2, cols);
    const Index K = static_cast<Index>(modes.size());

    if (K == 0) { // single-core ring: the chain is the identity on the bond
        for (Index a = 0; a < r1; ++a)
            for (Index b = 0; b < r2; ++b)
                B(a * r2 + b, 0) = (a == b) ? 1.0 : 0.0;
        return B;
    }

    // suffix[t] = slices of chain positions t..K-1, an R_{modes[t]} x R_d matrix
    std::vector<Matrix> suffix(static_cast<std::size_t>(K) + 1);
    suffix[static_cast<std::size_t>(K)] = Matrix::Identity(r1, r1);
    for (Index t = K - 1; t >= 0; --t)
        suffix[static_cast<std::size_t>(t)] = Matrix(f.bond(modes[static_cast<std::size_t>(t)]), r1);
    Shape idx(static_cast<std::size_t>(K), 0);
    auto refresh_from = [&](Index t) {
        for (Index s = t; s >= 0; --s)
            suffix[static_cast<std::size_t>(s)].noalias() =
                f.slice(modes[static_cast<std::size_t>(s)], idx[static_cast<std::size_t>(s)]) *
                suffix[static_cast<std::size_t>(s) + 1];
    };
    refresh_from(K - 1);

    for (Index j = 0; j < cols; ++j) {
        const Matrix& G = suffix[0]; // r2 x r1 chain product at this column
        for (Index a = 0; a < r1; ++a)
            for (Index b = 0; b < r2; ++b)
                B(a * r2 + b, j) = G(b, a);

        for (Index t = 0; t < K; ++t) {
            auto& it = idx[static_cast<std::size_t>(t)];
            if (++it < f.core(modes[static_cast<std::size_t>(t)]).dim(1)) {
                refresh_from(t);
                break;
            }
            it = 0;
        }
    }
    return B;
}

namespace {

// Bond selection for one SVD step. The rank-targeted variant pads with
// zero singular directions so the requested bond survives degenerate
// data; the tolerance-driven variant sizes the bond to what it keeps.
struct BondPolicy {
    const TrRank* target = nullptr;                      // fixed bonds when set
    std::function<Index(const Eigen::VectorXd&)> choose; // adaptive when set
};

struct TruncatedSvd {
    Matrix left; // rows x bond
    Matrix rest; // bond x cols, rows of S*V^T
    bool clipped = false;
};

TruncatedSvd truncated_svd(const Matrix& W, Index requested, const BondPolicy& policy) {
    Eigen::BDCSVD<Matrix> svd(W, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const Index avail = static_cast<Index>(sv.size());

    Index nonzero = avail;
    while (nonzero > 0 && sv(nonzero - 1) == 0.0)
        --nonzero;

    TruncatedSvd out;
    Index bond = requested;
    Index keep = requested;
    if (policy.choose) {
        keep = std::clamp<Index>(policy.choose(sv), 1, avail);
        bond = keep;
    } else if (keep > avail) {
        out.clipped = true;
        keep = avail;
    }
    // exactly-degenerate directions stay as zero columns, not arbitrary
    // orthonormal ones, so degenerate inputs produce zero cores
    keep = std::min(keep, nonzero);

    out.left = Matrix::Zero(W.rows(), bond);
    out.left.leftCols(keep) = svd.matrixU().leftCols(keep);
    out.rest = Matrix::Zero(bond, W.cols());
    out.rest.topRows(keep) =
        sv.head(keep).asDiagonal() * svd.matrixV().leftCols(keep).transpose();
    return out;
}

TrSvdResult tr_svd_impl(const DenseTensor& t, const TrRank& target, const BondPolicy& policy) {
    const Index D = t.order();
    target.validate(D);
    TrSvdResult res;

    if (D == 1) {
        // a vector is represented by placing it on one diagonal bond pair
        TrFactorSet f = TrFactorSet::zeros(t.shape(), target);
        for (Index i = 0; i < t.dim(0); ++i)
            f.core(0).at(std::array<Index, 3>{0, i, 0}) = t[i];
        res.factors = std::move(f);
        res.rel_error = 0.0;
        return res;
    }

    std::vector<DenseTensor> cores(static_cast<std::size_t>(D));
    const Index R1 = policy.choose ? 1 : target.bond(0);

    // first split: I_1 x (everything else), truncated at R_1*R_2
    Matrix W = unfold_shift(t, 0, 1);
    TruncatedSvd first = truncated_svd(W, R1 * target.bond(1), policy);
    res.rank_clipped = first.clipped;
    const Index R2 = static_cast<Index>(first.left.cols()) / R1;

    // left factor columns are bond pairs (r1, r2) with r2 fastest
    DenseTensor core0(Shape{R1, t.dim(0), R2});
    for (Index r1 = 0; r1 < R1; ++r1)
        for (Index i = 0; i < t.dim(0); ++i)
            for (Index r2 = 0; r2 < R2; ++r2)
                core0[r1 + R1 * i + R1 * t.dim(0) * r2] = first.left(i, r1 * R2 + r2);
    cores[0] = std::move(core0);

    // remainder rows are (r2, r1) column-major; thread r1 to the back of the
    // chain so the last core closes the ring
    Shape rem_shape{R2, R1};
    for (Index dd = 1; dd < D; ++dd)
        rem_shape.push_back(t.dim(dd));
    std::vector<double> rem_data(first.rest.data(), first.rest.data() + first.rest.size());
    DenseTensor rem(rem_shape, std::move(rem_data));
    Shape order{0};
    for (Index j = 2; j < D + 1; ++j)
        order.push_back(j);
    order.push_back(1);
    DenseTensor cur = permute(rem, order); // [R_2, I_2, ..., I_D, R_1]

    for (Index dd = 1; dd < D - 1; ++dd) {
        const Index rd = cur.dim(0);
        const Index n = t.dim(dd);
        Matrix Wd = unfold_shift(cur, 0, 2); // (rd * n) x rest
        TruncatedSvd step = truncated_svd(Wd, target.bond(dd + 1), policy);
        res.rank_clipped = res.rank_clipped || step.clipped;
        const Index rnext = static_cast<Index>(step.left.cols());

        // column-major (rd, n, rnext) is exactly the left factor layout
        std::vector<double> cdata(step.left.data(), step.left.data() + step.left.size());
        cores[static_cast<std::size_t>(dd)] = DenseTensor(Shape{rd, n, rnext}, std::move(cdata));

        Shape next_shape{rnext};
        for (Index j = dd + 1; j < D; ++j)
            next_shape.push_back(t.dim(j));
        next_shape.push_back(R1);
        std::vector<double> ndata(step.rest.data(), step.rest.data() + step.rest.size());
        cur = DenseTensor(next_shape, std::move(ndata));
    }

    // what is left is the final core [R_D, I_D, R_1]
    cores[static_cast<std::size_t>(D - 1)] =
        DenseTensor(Shape{cur.dim(0), t.dim(D - 1), R1}, cur.values());

    res.factors = TrFactorSet(std::move(cores));
    const double tn = fnorm(t);
    if (tn > 0.0) {
        DenseTensor diff = tr_contract(res.factors);
        for (Index i = 0; i < diff.size(); ++i)
            diff[i] -= t[i];
        res.rel_error = fnorm(diff) / tn;
    }
    return res;
}

} // namespace

TrSvdResult tr_svd(const DenseTensor& t, const TrRank& target) {
    BondPolicy policy;
    policy.target = &target;
    return tr_svd_impl(t, target, policy);
}

TrSvdResult tr_svd(const DenseTensor& t, double rel_tol) {
    if (rel_tol < 0.0)
        throw std::invalid_argument("tr_svd: tolerance must be nonnegative");
    const Index D = t.order();
    const double budget =
        rel_tol * fnorm(t) / std::sqrt(static_cast<double>(std::max<Index>(D - 1, 1)));
    BondPolicy policy;
    policy.choose = [budget](const Eigen::VectorXd& sv) {
        // keep the smallest head with discarded mass below the per-SVD budget
        double tail = 0.0;
        Index keep = static_cast<Index>(sv.size());
        for (Index i = static_cast<Index>(sv.size()) - 1; i >= 0; --i) {
            tail += sv(i) * sv(i);
            if (tail > budget * budget)
                break;
            keep = i;
        }
        return std::max<Index>(keep, 1);
    };
    // the requested bonds only seed the first split size; the ring closes
    // through a trivial first bond and every step sizes its own bond
    return tr_svd_impl(t, TrRank::uniform(D, 1), policy);
}

} // namespace ctrc
