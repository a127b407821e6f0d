#include "sgs/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sgs/kernels.hpp"

namespace sgs {

namespace {
std::int64_t product(const std::vector<std::int64_t>& v) {
    std::int64_t p = 1;
    for (auto e : v) p *= e;
    return p;
}

std::string shape_str(const std::vector<std::int64_t>& v) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    os << ")";
    return os.str();
}
} // namespace

DenseTensor::DenseTensor(std::vector<std::int64_t> shape) : shape_(std::move(shape)) {
    for (auto e : shape_)
        if (e <= 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape_));
    data_.assign(product(shape_), cplx{0.0, 0.0});
}

DenseTensor::DenseTensor(std::vector<std::int64_t> shape, std::vector<cplx> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    for (auto e : shape_)
        if (e <= 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape_));
    if (product(shape_) != static_cast<std::int64_t>(data_.size()))
        throw DimensionError("data size does not match shape " + shape_str(shape_));
}

DenseTensor DenseTensor::scalar(cplx v) {
    DenseTensor t;
    t.data_.assign(1, v);
    return t;
}

DenseTensor DenseTensor::identity(std::int64_t n) {
    DenseTensor t({n, n});
    for (std::int64_t i = 0; i < n; ++i) t.data_[i * n + i] = cplx{1.0, 0.0};
    return t;
}

std::int64_t DenseTensor::linear_index(std::initializer_list<std::int64_t> idx) const {
    if (static_cast<int>(idx.size()) != rank())
        throw DimensionError("index rank mismatch");
    std::int64_t lin = 0;
    int i = 0;
    for (auto v : idx) {
        if (v < 0 || v >= shape_[i]) throw DimensionError("index out of range");
        lin = lin * shape_[i] + v;
        ++i;
    }
    return lin;
}

cplx& DenseTensor::at(std::initializer_list<std::int64_t> idx) { return data_[linear_index(idx)]; }
cplx DenseTensor::at(std::initializer_list<std::int64_t> idx) const { return data_[linear_index(idx)]; }

DenseTensor DenseTensor::with_labels(std::vector<std::string> labels) const {
    if (!labels.empty() && static_cast<int>(labels.size()) != rank())
        throw DimensionError("label count must match rank");
    DenseTensor t = *this;
    t.labels_ = std::move(labels);
    return t;
}

DenseTensor DenseTensor::permute(const std::vector<int>& axes) const {
    if (static_cast<int>(axes.size()) != rank()) throw DimensionError("permute: axes rank mismatch");
    std::vector<bool> seen(rank(), false);
    for (int a : axes) {
        if (a < 0 || a >= rank() || seen[a]) throw DimensionError("permute: invalid axes");
        seen[a] = true;
    }
    DenseTensor out;
    out.shape_.resize(rank());
    for (int i = 0; i < rank(); ++i) out.shape_[i] = shape_[axes[i]];
    out.data_.resize(data_.size());
    if (!data_.empty()) kernels::permute(out.data_.data(), data_.data(), shape_, axes);
    if (!labels_.empty()) {
        out.labels_.resize(rank());
        for (int i = 0; i < rank(); ++i) out.labels_[i] = labels_[axes[i]];
    }
    return out;
}

DenseTensor DenseTensor::reshape(std::vector<std::int64_t> new_shape) const {
    if (product(new_shape) != numel())
        throw DimensionError("reshape: element count mismatch " + shape_str(shape_) + " -> " +
                             shape_str(new_shape));
    DenseTensor out;
    out.shape_ = std::move(new_shape);
    out.data_ = data_;
    return out;
}

DenseTensor DenseTensor::conj() const {
    DenseTensor out = *this;
    for (auto& v : out.data_) v = std::conj(v);
    return out;
}

DenseTensor DenseTensor::scaled(cplx alpha) const {
    DenseTensor out = *this;
    for (auto& v : out.data_) v *= alpha;
    return out;
}

DenseTensor DenseTensor::axpy(const DenseTensor& other, cplx alpha) const {
    if (shape_ != other.shape_) throw DimensionError("axpy: shape mismatch");
    DenseTensor out = *this;
    for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] += alpha * other.data_[i];
    return out;
}

double DenseTensor::norm() const {
    double s = 0.0;
    for (const auto& v : data_) s += std::norm(v);
    return std::sqrt(s);
}

cplx DenseTensor::as_scalar() const {
    if (numel() != 1) throw DimensionError("as_scalar: tensor has " + std::to_string(numel()) + " elements");
    return data_[0];
}

DenseTensor contract(const DenseTensor& a, const std::vector<int>& modes_a,
                     const DenseTensor& b, const std::vector<int>& modes_b) {
    if (modes_a.size() != modes_b.size())
        throw DimensionError("contract: paired mode lists differ in length");
    const int ra = a.rank(), rb = b.rank();
    std::vector<bool> con_a(ra, false), con_b(rb, false);
    std::int64_t k = 1;
    for (std::size_t i = 0; i < modes_a.size(); ++i) {
        const int ma = modes_a[i], mb = modes_b[i];
        if (ma < 0 || ma >= ra || mb < 0 || mb >= rb || con_a[ma] || con_b[mb])
            throw DimensionError("contract: invalid or repeated mode");
        if (a.dim(ma) != b.dim(mb))
            throw DimensionError("contract: extent mismatch " + std::to_string(a.dim(ma)) + " vs " +
                                 std::to_string(b.dim(mb)));
        con_a[ma] = con_b[mb] = true;
        k *= a.dim(ma);
    }

    std::vector<int> perm_a, perm_b;
    std::vector<std::int64_t> out_shape;
    std::vector<std::string> out_labels;
    const bool labeled = !a.labels().empty() && !b.labels().empty();
    std::int64_t fa = 1, fb = 1;
    for (int m = 0; m < ra; ++m)
        if (!con_a[m]) {
            perm_a.push_back(m);
            out_shape.push_back(a.dim(m));
            if (labeled) out_labels.push_back(a.labels()[m]);
            fa *= a.dim(m);
        }
    for (int m : modes_a) perm_a.push_back(m);
    for (int m : modes_b) perm_b.push_back(m);
    for (int m = 0; m < rb; ++m)
        if (!con_b[m]) {
            perm_b.push_back(m);
            out_shape.push_back(b.dim(m));
            if (labeled) out_labels.push_back(b.labels()[m]);
            fb *= b.dim(m);
        }

    const DenseTensor pa = a.permute(perm_a);
    const DenseTensor pb = b.permute(perm_b);
    std::vector<cplx> out_data(fa * fb);
    kernels::matmul(out_data.data(), pa.data().data(), pb.data().data(), fa, k, fb);
    DenseTensor out(out_shape.empty() ? std::vector<std::int64_t>{} : out_shape, std::move(out_data));
    if (labeled) out = out.with_labels(std::move(out_labels));
    return out;
}

DenseTensor outer(const DenseTensor& a, const DenseTensor& b) {
    return contract(a, {}, b, {});
}

DenseTensor kron(const DenseTensor& a, const DenseTensor& b) {
    if (a.rank() != 2 || b.rank() != 2) throw DimensionError("kron: expects 2-mode tensors");
    // (i1,j1,i2,j2) -> (i1,i2,j1,j2)
    DenseTensor t = outer(a, b).permute({0, 2, 1, 3});
    return t.reshape({a.dim(0) * b.dim(0), a.dim(1) * b.dim(1)});
}

DenseTensor partial_trace(const DenseTensor& t, const std::vector<std::pair<int, int>>& pairs) {
    const int r = t.rank();
    std::vector<bool> traced(r, false);
    for (auto [p, q] : pairs) {
        if (p < 0 || p >= r || q < 0 || q >= r || p == q || traced[p] || traced[q])
            throw DimensionError("partial_trace: invalid mode pair");
        if (t.dim(p) != t.dim(q)) throw DimensionError("partial_trace: extent mismatch");
        traced[p] = traced[q] = true;
    }
    std::vector<int> perm;
    std::vector<std::int64_t> out_shape;
    for (int m = 0; m < r; ++m)
        if (!traced[m]) {
            perm.push_back(m);
            out_shape.push_back(t.dim(m));
        }
    std::vector<std::int64_t> diag_dims;
    for (auto [p, q] : pairs) {
        perm.push_back(p);
        perm.push_back(q);
        diag_dims.push_back(t.dim(p));
    }
    const DenseTensor pt = t.permute(perm);
    std::int64_t rest = 1;
    for (auto e : out_shape) rest *= e;
    DenseTensor out(out_shape.empty() ? std::vector<std::int64_t>{} : out_shape);
    std::int64_t traced_block = 1;
    for (auto d : diag_dims) traced_block *= d * d;
    for (std::int64_t i = 0; i < rest; ++i) {
        // Sum the diagonal of the traced modes for this slice.
        cplx acc{0.0, 0.0};
        // Enumerate all diagonal index combinations.
        std::int64_t ndiag = 1;
        for (auto d : diag_dims) ndiag *= d;
        for (std::int64_t c = 0; c < ndiag; ++c) {
            std::int64_t off = 0, cc = c;
            std::int64_t stride = 1;
            // Build offset within the traced block (pairs are adjacent modes).
            std::vector<std::int64_t> digits(diag_dims.size());
            for (std::size_t j = diag_dims.size(); j-- > 0;) {
                digits[j] = cc % diag_dims[j];
                cc /= diag_dims[j];
            }
            for (std::size_t j = 0; j < diag_dims.size(); ++j) {
                off = off * diag_dims[j] * diag_dims[j] + digits[j] * diag_dims[j] + digits[j];
            }
            (void)stride;
            acc += pt.data()[i * traced_block + off];
        }
        out.data()[i] = acc;
    }
    return out;
}

DenseTensor matricize(const DenseTensor& t, const std::vector<int>& row_modes,
                      const std::vector<int>& col_modes) {
    if (static_cast<int>(row_modes.size() + col_modes.size()) != t.rank())
        throw DimensionError("matricize: row and col modes must partition all modes");
    if (row_modes.empty() || col_modes.empty())
        throw DimensionError("matricize: empty partition side");
    std::vector<int> perm = row_modes;
    perm.insert(perm.end(), col_modes.begin(), col_modes.end());
    std::int64_t rows = 1, cols = 1;
    for (int m : row_modes) rows *= t.dim(m);
    for (int m : col_modes) cols *= t.dim(m);
    return t.permute(perm).reshape({rows, cols});
}

} // namespace sgs
