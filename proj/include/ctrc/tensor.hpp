// SPDX-License-Identifier: MIT
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

// Dense N-way tensors and the elementary operations everything else is
// built on: Frobenius norms, Hadamard products, observation projection
// and the shifted unfolding used by the ring solvers.
//
// Conventions (fixed for the whole codebase):
//  * Data is linearized column-major: the FIRST index varies fastest.
//    An entry (i_1,...,i_D) (0-based) lives at offset
//    i_1 + I_1*(i_2 + I_2*(i_3 + ...)).
//  * All C++ interfaces use 0-based mode and entry indices. File formats
//    and the CLI use 1-based indices; the I/O layer converts.

namespace ctrc {

using Index = std::int64_t;
using Matrix = Eigen::MatrixXd; // column-major
using Shape = std::vector<Index>;

class DenseTensor {
public:
    DenseTensor() = default;

    /// Zero-filled tensor of the given shape.
    explicit DenseTensor(Shape shape);

    /// Takes ownership of pre-linearized data (column-major).
    DenseTensor(Shape shape, std::vector<double> data);

    Index order() const { return static_cast<Index>(shape_.size()); }
    const Shape& shape() const { return shape_; }
    Index dim(Index d) const { return shape_[static_cast<std::size_t>(d)]; }
    Index size() const { return static_cast<Index>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double operator[](Index linear) const { return data_[static_cast<std::size_t>(linear)]; }
    double& operator[](Index linear) { return data_[static_cast<std::size_t>(linear)]; }

    double at(std::span<const Index> idx) const { return data_[static_cast<std::size_t>(offset(idx))]; }
    double& at(std::span<const Index> idx) { return data_[static_cast<std::size_t>(offset(idx))]; }

    /// Linear offset of a 0-based multi-index (first index fastest).
    Index offset(std::span<const Index> idx) const;

    /// Inverse of offset().
    Shape multi_index(Index linear) const;

    /// Per-mode strides of the linearization.
    Shape strides() const;

    bool same_shape(const DenseTensor& other) const { return shape_ == other.shape_; }

private:
    Shape shape_;
    std::vector<double> data_;
};

/// Number of entries of a shape; throws on non-positive dimensions.
Index shape_size(const Shape& shape);

/// Observed-entry set of a tensor. Stored canonically as a sorted,
/// duplicate-free list of linear offsets; the 0/1 indicator tensor view
/// is derived on demand and the two views agree by construction.
class ObservationMask {
public:
    ObservationMask() = default;

    /// From 0-based linear offsets (sorted and checked for duplicates/bounds).
    ObservationMask(Shape shape, std::vector<Index> offsets);

    /// From 0-based multi-indices.
    static ObservationMask from_multi_indices(const Shape& shape,
                                              const std::vector<Shape>& indices);

    /// From a 0/1 indicator tensor (any nonzero entry counts as observed).
    static ObservationMask from_indicator(const DenseTensor& indicator);

    static ObservationMask full(const Shape& shape);
    static ObservationMask empty(const Shape& shape);

    /// 0/1 indicator tensor view.
    DenseTensor indicator() const;

    const Shape& shape() const { return shape_; }
    const std::vector<Index>& offsets() const { return offsets_; }
    Index count() const { return static_cast<Index>(offsets_.size()); }
    bool is_empty() const { return offsets_.empty(); }
    bool contains(Index linear) const;

private:
    Shape shape_;
    std::vector<Index> offsets_; // sorted, unique, in-bounds
};

/// Frobenius norm: sqrt of the sum of squared entries.
double fnorm(const DenseTensor& t);

/// Sum of elementwise products; fnorm(t)^2 == inner(t,t).
double inner(const DenseTensor& a, const DenseTensor& b);

/// Norm of a pair of tensors: sqrt(fnorm(x)^2 + fnorm(y)^2). Shapes may differ.
double coupled_fnorm(const DenseTensor& x, const DenseTensor& y);

/// Keeps entries where the mask is set, zeroes the rest. Idempotent.
DenseTensor project(const DenseTensor& t, const ObservationMask& m);

/// Elementwise product; shapes must match.
DenseTensor hadamard(const DenseTensor& a, const DenseTensor& b);

/// Reorders modes: result dim j equals t dim order[j], and
/// result(i_{order[0]},...,i_{order[D-1]}) == t(i_0,...,i_{D-1}).
DenseTensor permute(const DenseTensor& t, std::span<const Index> order);

/// Shifted unfolding: permute modes to [d, d+1, ..., D-1, 0, ..., d-1],
/// flatten the first h permuted modes to rows and the rest to columns
/// (column-major on both sides). d and h are 0-based / counted: 0 <= d < D,
/// 1 <= h <= D.
Matrix unfold_shift(const DenseTensor& t, Index d, Index h);

/// Inverse of unfold_shift for the given original shape.
DenseTensor fold_shift(const Matrix& m, Index d, Index h, const Shape& shape);

} // namespace ctrc
