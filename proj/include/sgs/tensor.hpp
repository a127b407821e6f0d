#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "sgs/errors.hpp"

namespace sgs {

using cplx = std::complex<double>;

/// Dense complex tensor with row-major linearization and an ordered list of
/// mode extents. Mode labels are optional bookkeeping and never affect math.
/// Values are immutable in spirit: all operations return new tensors.
class DenseTensor {
public:
    DenseTensor() = default;
    explicit DenseTensor(std::vector<std::int64_t> shape);
    DenseTensor(std::vector<std::int64_t> shape, std::vector<cplx> data);

    static DenseTensor scalar(cplx v);
    static DenseTensor identity(std::int64_t n);

    const std::vector<std::int64_t>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t dim(int mode) const { return shape_.at(mode); }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

    std::vector<cplx>& data() { return data_; }
    const std::vector<cplx>& data() const { return data_; }

    cplx& at(std::initializer_list<std::int64_t> idx);
    cplx at(std::initializer_list<std::int64_t> idx) const;
    std::int64_t linear_index(std::initializer_list<std::int64_t> idx) const;

    const std::vector<std::string>& labels() const { return labels_; }
    DenseTensor with_labels(std::vector<std::string> labels) const;

    /// New tensor whose mode i is this tensor's mode axes[i].
    DenseTensor permute(const std::vector<int>& axes) const;
    /// Same value sequence under a new shape (element count must match).
    DenseTensor reshape(std::vector<std::int64_t> new_shape) const;
    DenseTensor conj() const;
    DenseTensor scaled(cplx alpha) const;
    /// this + alpha * other (shapes must match).
    DenseTensor axpy(const DenseTensor& other, cplx alpha = cplx{1.0, 0.0}) const;

    double norm() const; // Frobenius
    cplx as_scalar() const;

private:
    std::vector<std::int64_t> shape_;
    std::vector<cplx> data_;
    std::vector<std::string> labels_;
};

/// Index-sum contraction of paired modes. modes_a[i] of `a` is summed against
/// modes_b[i] of `b`; result modes are the free modes of `a` then of `b`, in
/// their original order. Realized as permute -> matricize -> matmul.
DenseTensor contract(const DenseTensor& a, const std::vector<int>& modes_a,
                     const DenseTensor& b, const std::vector<int>& modes_b);

/// Tensor (outer) product: all modes of a then all modes of b.
DenseTensor outer(const DenseTensor& a, const DenseTensor& b);

/// Matrix Kronecker product of two 2-mode tensors:
/// result[(i1,i2),(j1,j2)] = a[i1,j1] * b[i2,j2].
DenseTensor kron(const DenseTensor& a, const DenseTensor& b);

/// Trace out pairs of equal-extent modes; remaining modes keep their order.
DenseTensor partial_trace(const DenseTensor& t,
                          const std::vector<std::pair<int, int>>& pairs);

/// Permute to (row_modes, col_modes) and reshape into a matrix.
DenseTensor matricize(const DenseTensor& t, const std::vector<int>& row_modes,
                      const std::vector<int>& col_modes);

} // namespace sgs
