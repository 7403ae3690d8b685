// SPDX-License-Identifier: MIT
#include "ctrc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace ctrc {

Index shape_size(const Shape& shape) {
    if (shape.empty())
        throw std::invalid_argument("tensor order must be at least 1");
    Index n = 1;
    for (Index d : shape) {
        if (d < 1)
            throw std::invalid_argument("dimension sizes must be positive");
        n *= d;
    }
    return n;
}

DenseTensor::DenseTensor(Shape shape)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_size(shape_)), 0.0) {}

DenseTensor::DenseTensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != static_cast<Index>(data_.size()))
        throw std::invalid_argument("data length does not match product of dimensions");
}

Index DenseTensor::offset(std::span<const Index> idx) const {
    if (static_cast<Index>(idx.size()) != order())
        throw std::invalid_argument("multi-index order mismatch");
    Index off = 0;
    Index stride = 1;
    for (std::size_t d = 0; d < shape_.size(); ++d) {
        if (idx[d] < 0 || idx[d] >= shape_[d])
            throw std::out_of_range("multi-index out of bounds");
        off += idx[d] * stride;
        stride *= shape_[d];
    }
    return off;
}

Shape DenseTensor::multi_index(Index linear) const {
    Shape idx(shape_.size());
    for (std::size_t d = 0; d < shape_.size(); ++d) {
        idx[d] = linear % shape_[d];
        linear /= shape_[d];
    }
    return idx;
}

Shape DenseTensor::strides() const {
    Shape s(shape_.size());
    Index stride = 1;
    for (std::size_t d = 0; d < shape_.size(); ++d) {
        s[d] = stride;
        stride *= shape_[d];
    }
    return s;
}

ObservationMask::ObservationMask(Shape shape, std::vector<Index> offsets)
    : shape_(std::move(shape)), offsets_(std::move(offsets)) {
    const Index n = shape_size(shape_);
    std::sort(offsets_.begin(), offsets_.end());
    for (std::size_t i = 0; i < offsets_.size(); ++i) {
        if (offsets_[i] < 0 || offsets_[i] >= n)
            throw std::invalid_argument("mask index out of bounds");
        if (i > 0 && offsets_[i] == offsets_[i - 1])
            throw std::invalid_argument("duplicate mask index");
    }
}

ObservationMask ObservationMask::from_multi_indices(const Shape& shape,
                                                    const std::vector<Shape>& indices) {
    DenseTensor probe(shape); // reuse offset arithmetic + bounds checks
    std::vector<Index> offsets;
    offsets.reserve(indices.size());
    for (const auto& idx : indices)
        offsets.push_back(probe.offset(idx));
    return ObservationMask(shape, std::move(offsets));
}

ObservationMask ObservationMask::from_indicator(const DenseTensor& indicator) {
    std::vector<Index> offsets;
    for (Index i = 0; i < indicator.size(); ++i)
        if (indicator[i] != 0.0)
            offsets.push_back(i);
    return ObservationMask(indicator.shape(), std::move(offsets));
}

ObservationMask ObservationMask::full(const Shape& shape) {
    std::vector<Index> offsets(static_cast<std::size_t>(shape_size(shape)));
    std::iota(offsets.begin(), offsets.end(), Index{0});
    return ObservationMask(shape, std::move(offsets));
}

ObservationMask ObservationMask::empty(const Shape& shape) {
    return ObservationMask(shape, {});
}

DenseTensor ObservationMask::indicator() const {
    DenseTensor ind(shape_);
    for (Index off : offsets_)
        ind[off] = 1.0;
    return ind;
}

bool ObservationMask::contains(Index linear) const {
    return std::binary_search(offsets_.begin(), offsets_.end(), linear);
}

double fnorm(const DenseTensor& t) {
    double s = 0.0;
    for (Index i = 0; i < t.size(); ++i)
        s += t[i] * t[i];
    return std::sqrt(s);
}

double inner(const DenseTensor& a, const DenseTensor& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("inner: shape mismatch");
    double s = 0.0;
    for (Index i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

double coupled_fnorm(const DenseTensor& x, const DenseTensor& y) {
    const double nx = fnorm(x);
    const double ny = fnorm(y);
    return std::sqrt(nx * nx + ny * ny);
}

DenseTensor project(const DenseTensor& t, const ObservationMask& m) {
    if (t.shape() != m.shape())
        throw std::invalid_argument("project: tensor and mask shapes differ");
    DenseTensor out(t.shape());
    for (Index off : m.offsets())
        out[off] = t[off];
    return out;
}

DenseTensor hadamard(const DenseTensor& a, const DenseTensor& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("hadamard: shape mismatch");
    DenseTensor out(a.shape());
    for (Index i = 0; i < a.size(); ++i)
        out[i] = a[i] * b[i];
    return out;
}

DenseTensor permute(const DenseTensor& t, std::span<const Index> order) {
    const Index D = t.order();
    if (static_cast<Index>(order.size()) != D)
        throw std::invalid_argument("permute: order length mismatch");
    std::vector<bool> seen(static_cast<std::size_t>(D), false);
    Shape new_shape(static_cast<std::size_t>(D));
    for (Index j = 0; j < D; ++j) {
        const Index src = order[static_cast<std::size_t>(j)];
        if (src < 0 || src >= D || seen[static_cast<std::size_t>(src)])
            throw std::invalid_argument("permute: invalid mode order");
        seen[static_cast<std::size_t>(src)] = true;
        new_shape[static_cast<std::size_t>(j)] = t.dim(src);
    }
    DenseTensor out(new_shape);
    const Shape src_strides = t.strides();
    // stride of output mode j in the source linearization
    Shape gather(static_cast<std::size_t>(D));
    for (Index j = 0; j < D; ++j)
        gather[static_cast<std::size_t>(j)] = src_strides[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])];

    Shape idx(static_cast<std::size_t>(D), 0);
    Index src_off = 0;
    for (Index dst = 0; dst < out.size(); ++dst) {
        out[dst] = t[src_off];
        for (Index j = 0; j < D; ++j) {
            auto& ij = idx[static_cast<std::size_t>(j)];
            src_off += gather[static_cast<std::size_t>(j)];
            if (++ij < new_shape[static_cast<std::size_t>(j)])
                break;
            src_off -= gather[static_cast<std::size_t>(j)] * new_shape[static_cast<std::size_t>(j)];
            ij = 0;
        }
    }
    return out;
}

namespace {

Shape shifted_order(Index D, Index d) {
    Shape order(static_cast<std::size_t>(D));
    for (Index j = 0; j < D; ++j)
        order[static_cast<std::size_t>(j)] = (d + j) % D;
    return order;
}

} // namespace

Matrix unfold_shift(const DenseTensor& t, Index d, Index h) {
    const Index D = t.order();
    if (d < 0 || d >= D)
        throw std::invalid_argument("unfold_shift: mode index out of range");
    if (h < 1 || h > D)
        throw std::invalid_argument("unfold_shift: row mode count out of range");
    const Shape order = shifted_order(D, d);
    const DenseTensor p = permute(t, order);
    Index rows = 1;
    for (Index j = 0; j < h; ++j)
        rows *= p.dim(j);
    const Index cols = p.size() / rows;
    // permuted data is column-major, so the flat buffer is already the
    // rows x cols matrix in column-major order
    return Eigen::Map<const Matrix>(p.data(), rows, cols);
}

DenseTensor fold_shift(const Matrix& m, Index d, Index h, const Shape& shape) {
    const Index D = static_cast<Index>(shape.size());
    if (d < 0 || d >= D)
        throw std::invalid_argument("fold_shift: mode index out of range");
    if (h < 1 || h > D)
        throw std::invalid_argument("fold_shift: row mode count out of range");
    const Shape order = shifted_order(D, d);
    Shape perm_shape(static_cast<std::size_t>(D));
    for (Index j = 0; j < D; ++j)
        perm_shape[static_cast<std::size_t>(j)] = shape[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])];
    if (m.size() != shape_size(perm_shape))
        throw std::invalid_argument("fold_shift: element count mismatch");

    std::vector<double> buf(m.data(), m.data() + m.size());
    DenseTensor permuted(perm_shape, std::move(buf));
    // inverse permutation: mode order^{-1}
    Shape inv(static_cast<std::size_t>(D));
    for (Index j = 0; j < D; ++j)
        inv[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])] = j;
    return permute(permuted, inv);
}

} // namespace ctrc
