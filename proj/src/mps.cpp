#include "sgs/mps.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "sgs/rng.hpp"

namespace sgs {

namespace {
using EigMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Thin QR with the R diagonal phase-fixed to be real non-negative.
std::pair<EigMat, EigMat> thin_qr(const EigMat& a) {
    const std::int64_t k = std::min(a.rows(), a.cols());
    Eigen::HouseholderQR<EigMat> qr(a);
    EigMat q = qr.householderQ() * EigMat::Identity(a.rows(), k);
    EigMat r = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
    for (std::int64_t j = 0; j < k; ++j) {
        const cplx d = r(j, j);
        const double ad = std::abs(d);
        if (ad > 0.0) {
            const cplx s = d / ad;
            q.col(j) *= s;
            r.row(j) *= std::conj(s);
        }
    }
    return {q, r};
}

EigMat as_matrix(const DenseTensor& t, std::int64_t rows, std::int64_t cols) {
    return Eigen::Map<const EigMat>(t.data().data(), rows, cols);
}

DenseTensor as_tensor(const EigMat& m, std::vector<std::int64_t> shape) {
    DenseTensor t({m.rows(), m.cols()});
    EigMat::Map(t.data().data(), m.rows(), m.cols()) = m;
    return t.reshape(std::move(shape));
}
} // namespace

void MPSRow::validate_shapes() const {
    if (tensors.empty()) throw DimensionError("MPSRow: empty tensor list");
    if (tensors.front().dim(0) != 1 || tensors.back().dim(2) != 1)
        throw DimensionError("MPSRow: boundary bonds must have extent 1");
    for (int c = 0; c + 1 < length(); ++c)
        if (tensors[c].dim(2) != tensors[c + 1].dim(0))
            throw DimensionError("MPSRow: bond mismatch between sites " + std::to_string(c) +
                                 " and " + std::to_string(c + 1));
    for (const auto& t : tensors)
        if (t.rank() != 3) throw DimensionError("MPSRow: site tensors must have 3 modes");
}

MPSRow random_mps(int length, int phys_dim, int bond_dim, std::uint64_t seed) {
    if (length < 1 || phys_dim < 1 || bond_dim < 1)
        throw ValidationError("random_mps: parameters must be >= 1");
    rng::Stream stream(seed);
    MPSRow m;
    // Bond profile capped by the exact ranks reachable from either edge.
    std::vector<std::int64_t> bonds(length + 1, 1);
    for (int i = 1; i < length; ++i) {
        double cap_l = std::pow(static_cast<double>(phys_dim), i);
        double cap_r = std::pow(static_cast<double>(phys_dim), length - i);
        std::int64_t cap = bond_dim;
        if (cap_l < static_cast<double>(cap)) cap = static_cast<std::int64_t>(cap_l);
        if (cap_r < static_cast<double>(cap)) cap = static_cast<std::int64_t>(cap_r);
        bonds[i] = cap;
    }
    for (int c = 0; c < length; ++c)
        m.tensors.push_back(rng::gaussian_tensor({bonds[c], phys_dim, bonds[c + 1]}, stream));
    return canonicalize(m, 0);
}

MPSRow canonicalize(const MPSRow& m, int site) {
    if (site < 0 || site >= m.length()) throw DimensionError("canonicalize: site out of range");
    m.validate_shapes();
    MPSRow out = m;
    const int n = out.length();

    // Left-isometrize sites [0, site), pushing the R factor right.
    for (int c = 0; c < site; ++c) {
        DenseTensor& a = out.tensors[c];
        const std::int64_t dl = a.dim(0), d = a.dim(1), dr = a.dim(2);
        auto [q, r] = thin_qr(as_matrix(a, dl * d, dr));
        const std::int64_t k = q.cols();
        a = as_tensor(q, {dl, d, k});
        DenseTensor& b = out.tensors[c + 1];
        EigMat nb = r * as_matrix(b, b.dim(0), b.dim(1) * b.dim(2));
        b = as_tensor(nb, {k, b.dim(1), b.dim(2)});
    }
    // Right-isometrize sites (site, n-1], pushing the factor left.
    for (int c = n - 1; c > site; --c) {
        DenseTensor& a = out.tensors[c];
        const std::int64_t dl = a.dim(0), d = a.dim(1), dr = a.dim(2);
        // A = L Q with Q having orthonormal rows: QR of the adjoint.
        EigMat at = as_matrix(a, dl, d * dr).adjoint();
        auto [q, r] = thin_qr(at);
        const std::int64_t k = q.cols();
        a = as_tensor(q.adjoint().eval(), {k, d, dr});
        DenseTensor& b = out.tensors[c - 1];
        EigMat nb = as_matrix(b, b.dim(0) * b.dim(1), b.dim(2)) * r.adjoint();
        b = as_tensor(nb, {b.dim(0), b.dim(1), k});
    }

    DenseTensor& cen = out.tensors[site];
    const double nrm = cen.norm();
    if (nrm > 0.0) cen = cen.scaled(cplx{1.0 / nrm, 0.0});
    // Deterministic phase: first nonzero entry real non-negative.
    double mx = 0.0;
    for (const auto& v : cen.data()) mx = std::max(mx, std::abs(v));
    for (const auto& v : cen.data()) {
        if (std::abs(v) > 1e-12 * mx) {
            cen = cen.scaled(std::conj(v) / std::abs(v));
            break;
        }
    }
    out.center = site;
    return out;
}

double mps_norm(const MPSRow& m) {
    return std::sqrt(std::abs(expectation_chain(m, {}).real()));
}

DenseTensor transfer_matrix(const DenseTensor& a, const DenseTensor& op) {
    if (a.rank() != 3) throw DimensionError("transfer_matrix: site tensor must have 3 modes");
    if (op.rank() != 2 || op.dim(0) != a.dim(1) || op.dim(1) != a.dim(1))
        throw DimensionError("transfer_matrix: observable must be d x d");
    // E[(a',a),(b',b)] = sum_{i,i'} <i'|O|i> conj(A^{i'}[a',b']) A^i[a,b]
    DenseTensor x = contract(op, {1}, a, {1});              // (i', a, b)
    DenseTensor e = contract(a.conj(), {1}, x, {0});        // (a', b', a, b)
    const std::int64_t dl = a.dim(0), dr = a.dim(2);
    return e.permute({0, 2, 1, 3}).reshape({dl * dl, dr * dr});
}

cplx expectation_chain(const MPSRow& m, const std::map<int, DenseTensor>& ops) {
    m.validate_shapes();
    DenseTensor l = DenseTensor({1, 1});
    l.data()[0] = cplx{1.0, 0.0}; // (bra bond, ket bond)
    for (int c = 0; c < m.length(); ++c) {
        const DenseTensor& a = m.tensors[c];
        DenseTensor x = contract(l, {1}, a, {0}); // (a', i, b)
        auto it = ops.find(c);
        if (it != ops.end()) {
            const DenseTensor& op = it->second;
            if (op.dim(0) != a.dim(1) || op.dim(1) != a.dim(1))
                throw DimensionError("expectation_chain: observable extent mismatch at site " +
                                     std::to_string(c));
            x = contract(op, {1}, x, {1}).permute({1, 0, 2}); // (a', i', b)
        }
        l = contract(a.conj(), {0, 1}, x, {0, 1}); // (b', b)
    }
    return l.as_scalar();
}

namespace {
DenseTensor right_env(const MPSRow& m, int from) {
    DenseTensor r = DenseTensor({1, 1});
    r.data()[0] = cplx{1.0, 0.0}; // (bra bond, ket bond)
    for (int c = m.length() - 1; c >= from; --c) {
        const DenseTensor& a = m.tensors[c];
        DenseTensor x = contract(a, {2}, r, {1});     // (a, i, b')
        r = contract(x, {1, 2}, a.conj(), {1, 2});    // (a, a') -> reorder
        r = r.permute({1, 0});                        // (bra, ket)
    }
    return r;
}
} // namespace

DenseTensor one_site_rdm(const MPSRow& m, int c) {
    if (c < 0 || c >= m.length()) throw DimensionError("one_site_rdm: site out of range");
    DenseTensor l({1, 1});
    l.data()[0] = cplx{1.0, 0.0};
    for (int k = 0; k < c; ++k) {
        DenseTensor x = contract(l, {1}, m.tensors[k], {0});
        l = contract(m.tensors[k].conj(), {0, 1}, x, {0, 1});
    }
    const DenseTensor r = right_env(m, c + 1);
    const DenseTensor& a = m.tensors[c];
    DenseTensor x = contract(l, {1}, a, {0});          // (a', i, b)
    x = contract(x, {2}, r, {1});                      // (a', i, b')
    DenseTensor rho = contract(x, {0, 2}, a.conj(), {0, 2}); // (i, i')
    return rho;
}

DenseTensor two_site_rdm(const MPSRow& m, int c1, int c2) {
    if (!(0 <= c1 && c1 < c2 && c2 < m.length()))
        throw DimensionError("two_site_rdm: needs 0 <= c1 < c2 < length");
    DenseTensor l({1, 1});
    l.data()[0] = cplx{1.0, 0.0};
    for (int k = 0; k < c1; ++k) {
        DenseTensor x = contract(l, {1}, m.tensors[k], {0});
        l = contract(m.tensors[k].conj(), {0, 1}, x, {0, 1});
    }
    const DenseTensor& a1 = m.tensors[c1];
    DenseTensor x = contract(l, {1}, a1, {0});          // (a', i1, b)
    DenseTensor mdl = contract(a1.conj(), {0}, x, {0}); // (i1', b', i1, b)
    for (int k = c1 + 1; k < c2; ++k) {
        const DenseTensor& a = m.tensors[k];
        DenseTensor y = contract(mdl, {3}, a, {0});       // (i1', b', i1, i, b)
        mdl = contract(y, {1, 3}, a.conj(), {0, 1});      // (i1', i1, b, b') -> fix order
        mdl = mdl.permute({0, 3, 1, 2});                  // (i1', b', i1, b)
    }
    const DenseTensor& a2 = m.tensors[c2];
    DenseTensor y = contract(mdl, {3}, a2, {0});          // (i1', b', i1, i2, b)
    y = contract(y, {1}, a2.conj(), {0});                 // (i1', i1, i2, b, i2', b')
    const DenseTensor r = right_env(m, c2 + 1);
    DenseTensor rho = contract(y, {5, 3}, r, {0, 1});     // (i1', i1, i2, i2')
    // -> rho[(i1,i2),(i1',i2')]
    rho = rho.permute({1, 2, 0, 3});
    const std::int64_t d1 = a1.dim(1), d2 = a2.dim(1);
    return rho.reshape({d1 * d2, d1 * d2});
}

DenseTensor multi_site_rdm(const MPSRow& m, const std::vector<int>& cols) {
    if (cols.empty()) throw DimensionError("multi_site_rdm: empty site list");
    for (std::size_t i = 0; i + 1 < cols.size(); ++i)
        if (cols[i] >= cols[i + 1]) throw DimensionError("multi_site_rdm: sites must ascend");
    if (cols.front() < 0 || cols.back() >= m.length())
        throw DimensionError("multi_site_rdm: site out of range");

    // T modes: open kets, open bras, bra bond, ket bond.
    DenseTensor t({1, 1});
    t.data()[0] = cplx{1.0, 0.0};
    int opens = 0;
    std::size_t next = 0;
    std::int64_t dtot = 1;
    for (int c = 0; c < m.length(); ++c) {
        const DenseTensor& a = m.tensors[c];
        DenseTensor x = contract(t, {2 * opens + 1}, a, {0}); // (..opens.., b', i, bnew)
        if (next < cols.size() && cols[next] == c) {
            DenseTensor y = contract(x, {2 * opens}, a.conj(), {0}); // (..opens.., i, bnew, i', b'new)
            std::vector<int> perm;
            for (int k = 0; k < opens; ++k) perm.push_back(k);            // old kets
            perm.push_back(2 * opens);                                    // new ket i
            for (int k = 0; k < opens; ++k) perm.push_back(opens + k);    // old bras
            perm.push_back(2 * opens + 2);                                // new bra i'
            perm.push_back(2 * opens + 3);                                // b'new
            perm.push_back(2 * opens + 1);                                // bnew
            t = y.permute(perm);
            ++opens;
            ++next;
            dtot *= a.dim(1);
        } else {
            t = contract(x, {2 * opens, 2 * opens + 1}, a.conj(), {0, 1}); // (..opens.., bnew, b'new)
            std::vector<int> perm;
            for (int k = 0; k < 2 * opens; ++k) perm.push_back(k);
            perm.push_back(2 * opens + 1);
            perm.push_back(2 * opens);
            t = t.permute(perm);
        }
    }
    // Boundary bonds are trivial: (kets.., bras.., 1, 1) -> matrix.
    return t.reshape({dtot, dtot});
}

std::vector<cplx> mps_statevector(const MPSRow& m) {
    m.validate_shapes();
    DenseTensor acc = m.tensors[0].reshape({m.tensors[0].dim(1), m.tensors[0].dim(2)});
    for (int c = 1; c < m.length(); ++c) {
        acc = contract(acc, {acc.rank() - 1}, m.tensors[c], {0});
    }
    // Last bond has extent 1.
    std::vector<std::int64_t> shape(acc.shape().begin(), acc.shape().end() - 1);
    std::int64_t total = 1;
    for (auto e : shape) total *= e;
    return acc.reshape({total}).data();
}

cplx mps_overlap(const MPSRow& a, const MPSRow& b) {
    if (a.length() != b.length()) throw DimensionError("mps_overlap: length mismatch");
    DenseTensor l({1, 1});
    l.data()[0] = cplx{1.0, 0.0};
    for (int c = 0; c < a.length(); ++c) {
        DenseTensor x = contract(l, {1}, b.tensors[c], {0});   // (a', i, b)
        l = contract(a.tensors[c].conj(), {0, 1}, x, {0, 1});  // (b', b)
    }
    return l.as_scalar();
}

} // namespace sgs
