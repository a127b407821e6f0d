#include "sgs/sgs_state.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "sgs/linalg.hpp"
#include "sgs/rng.hpp"

namespace sgs {

namespace {
std::int64_t ipow(std::int64_t base, int exp) {
    std::int64_t r = 1;
    while (exp-- > 0) r *= base;
    return r;
}

double unitarity_defect(const DenseTensor& u) {
    if (u.rank() != 2 || u.dim(0) != u.dim(1)) return 1.0;
    const std::int64_t n = u.dim(0);
    DenseTensor g = contract(u.conj(), {0}, u, {0});
    double defect = 0.0;
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            defect = std::max(defect, std::abs(g.data()[i * n + j] - (i == j ? cplx{1, 0} : cplx{0, 0})));
    return defect;
}

/// Reinterpret a column unitary as a 4-mode tensor (up, out_low, in_top, down):
/// out rows t..t+M split as (rows t..t+M-1, row t+M), in rows split as
/// (row t, rows t+1..t+M).
DenseTensor unitary_as_step(const DenseTensor& u, std::int64_t e, std::int64_t block) {
    return u.reshape({block, e, e, block});
}
} // namespace

std::int64_t SGSParams::eff_dim() const { return ipow(physical.local_dim, N); }
std::int64_t SGSParams::unitary_dim() const { return ipow(eff_dim(), M + 1); }

void SGSParams::validate() const {
    if (physical.rows < 1 || physical.cols < 1 || physical.local_dim < 2)
        throw ValidationError("SGSParams: lattice must have H,V >= 1 and d >= 2");
    if (M < 1) throw ValidationError("SGSParams: M must be >= 1");
    if (D < 1) throw ValidationError("SGSParams: D must be >= 1");
    if (N < 1 || physical.rows % N != 0)
        throw ValidationError("SGSParams: H must be divisible by the block size N");
}

SGSState unchecked_sgs(SGSParams params, std::vector<MPSRow> rows,
                       std::vector<std::vector<DenseTensor>> unitaries) {
    SGSState s;
    s.params = params;
    s.rows = std::move(rows);
    s.unitaries = std::move(unitaries);
    return s;
}

SGSState new_sgs(SGSParams params, std::vector<MPSRow> rows,
                 std::vector<std::vector<DenseTensor>> unitaries) {
    params.validate();
    const int hr = params.eff_rows();
    const int v = params.physical.cols;
    const std::int64_t e = params.eff_dim();
    const std::int64_t udim = params.unitary_dim();
    const int nu = params.unitaries_per_column();

    if (static_cast<int>(rows.size()) != hr)
        throw DimensionError("new_sgs: expected " + std::to_string(hr) + " effective rows");
    for (int r = 0; r < hr; ++r) {
        rows[r].validate_shapes();
        if (rows[r].length() != v)
            throw DimensionError("new_sgs: row " + std::to_string(r) + " has wrong length");
        for (int c = 0; c < v; ++c) {
            if (rows[r].phys_dim(c) != e)
                throw DimensionError("new_sgs: row " + std::to_string(r) +
                                     " has wrong physical dimension");
            if (rows[r].tensors[c].dim(0) > params.D || rows[r].tensors[c].dim(2) > params.D)
                throw DimensionError("new_sgs: row " + std::to_string(r) + " exceeds bond limit D");
        }
        const double nrm = mps_norm(rows[r]);
        if (std::abs(nrm - 1.0) > 1e-8)
            throw ValidationError("new_sgs: row " + std::to_string(r) + " is not normalized (norm " +
                                  std::to_string(nrm) + ")");
    }

    if (static_cast<int>(unitaries.size()) != (nu > 0 ? v : 0) && !(nu == 0 && unitaries.empty()))
        throw DimensionError("new_sgs: expected one unitary list per column");
    for (std::size_t c = 0; c < unitaries.size(); ++c) {
        if (static_cast<int>(unitaries[c].size()) != nu)
            throw DimensionError("new_sgs: column " + std::to_string(c) + " must hold " +
                                 std::to_string(nu) + " unitaries");
        for (int t = 0; t < nu; ++t) {
            const DenseTensor& u = unitaries[c][t];
            if (u.rank() != 2 || u.dim(0) != udim || u.dim(1) != udim)
                throw DimensionError("new_sgs: unitary (" + std::to_string(c) + "," +
                                     std::to_string(t) + ") has wrong extent");
            const double defect = unitarity_defect(u);
            if (defect > 1e-8)
                throw ValidationError("new_sgs: unitary (" + std::to_string(c) + "," +
                                      std::to_string(t) + ") defect " + std::to_string(defect));
        }
    }
    return unchecked_sgs(std::move(params), std::move(rows), std::move(unitaries));
}

SGSState random_sgs(const SGSParams& params, std::uint64_t seed, double unitary_scale) {
    params.validate();
    rng::Stream stream(seed);
    std::vector<MPSRow> rows;
    for (int r = 0; r < params.eff_rows(); ++r)
        rows.push_back(random_mps(params.physical.cols, static_cast<int>(params.eff_dim()),
                                  params.D, stream.raw()));
    std::vector<std::vector<DenseTensor>> unitaries;
    const int nu = params.unitaries_per_column();
    if (nu > 0) {
        const std::int64_t udim = params.unitary_dim();
        for (int c = 0; c < params.physical.cols; ++c) {
            std::vector<DenseTensor> col;
            for (int t = 0; t < nu; ++t) {
                DenseTensor k = rng::random_hermitian(udim, stream);
                const double nrm = k.norm();
                if (nrm > 0.0) k = k.scaled(cplx{1.0 / nrm, 0.0});
                col.push_back(unitary_exp(k, unitary_scale));
            }
            unitaries.push_back(std::move(col));
        }
    }
    return new_sgs(params, std::move(rows), std::move(unitaries));
}

SGSState ti_sgs(const DenseTensor& a, const DenseTensor& u, int rows, int cols, int m_span) {
    if (a.rank() != 3 || a.dim(0) != a.dim(2))
        throw DimensionError("ti_sgs: site tensor must be (D, d, D)");
    const std::int64_t dd = a.dim(0), d = a.dim(1);
    SGSParams params;
    params.physical = {rows, cols, static_cast<int>(d)};
    params.M = m_span;
    params.D = static_cast<int>(dd);
    params.N = 1;

    MPSRow row;
    if (cols == 1) {
        DenseTensor first({1, d, 1});
        for (std::int64_t i = 0; i < d; ++i) first.at({0, i, 0}) = a.at({0, i, 0});
        row.tensors.push_back(first);
    } else {
        DenseTensor first({1, d, dd});
        for (std::int64_t i = 0; i < d; ++i)
            for (std::int64_t b = 0; b < dd; ++b) first.at({0, i, b}) = a.at({0, i, b});
        DenseTensor last({dd, d, 1});
        for (std::int64_t b = 0; b < dd; ++b)
            for (std::int64_t i = 0; i < d; ++i) last.at({b, i, 0}) = a.at({b, i, 0});
        row.tensors.push_back(first);
        for (int c = 1; c + 1 < cols; ++c) row.tensors.push_back(a);
        row.tensors.push_back(last);
    }
    if (mps_norm(row) < 1e-12) throw ValidationError("ti_sgs: boundary slice has vanishing norm");
    row = canonicalize(row, 0);

    std::vector<MPSRow> all_rows(rows, row);
    std::vector<std::vector<DenseTensor>> unitaries;
    const int nu = std::max(0, rows - m_span);
    if (nu > 0) unitaries.assign(cols, std::vector<DenseTensor>(nu, u));
    return new_sgs(params, std::move(all_rows), std::move(unitaries));
}

SGSState cluster_state(const LatticeSpec& spec) {
    if (spec.local_dim != 2) throw ValidationError("cluster_state: requires d = 2");
    const int v = spec.cols, h = spec.rows;
    const double is2 = 1.0 / std::sqrt(2.0);

    MPSRow row;
    if (v == 1) {
        row.tensors.push_back(DenseTensor({1, 2, 1}, {cplx{is2, 0}, cplx{is2, 0}}));
    } else {
        // A^i[a, b] = (-1)^{a i} delta_{b,i} / sqrt(2): the bond remembers the
        // previous spin, accumulating the controlled-Z phases along the row.
        DenseTensor first({1, 2, 2});
        for (std::int64_t i = 0; i < 2; ++i) first.at({0, i, i}) = cplx{is2, 0};
        DenseTensor bulk({2, 2, 2});
        for (std::int64_t aa = 0; aa < 2; ++aa)
            for (std::int64_t i = 0; i < 2; ++i)
                bulk.at({aa, i, i}) = cplx{(aa & i) ? -is2 : is2, 0};
        DenseTensor last({2, 2, 1});
        for (std::int64_t aa = 0; aa < 2; ++aa)
            for (std::int64_t i = 0; i < 2; ++i)
                last.at({aa, i, 0}) = cplx{(aa & i) ? -is2 : is2, 0};
        row.tensors.push_back(first);
        for (int c = 1; c + 1 < v; ++c) row.tensors.push_back(bulk);
        row.tensors.push_back(last);
    }

    DenseTensor cz = DenseTensor::identity(4);
    cz.at({3, 3}) = cplx{-1, 0};

    SGSParams params;
    params.physical = spec;
    params.M = 1;
    params.D = v == 1 ? 1 : 2;
    params.N = 1;
    std::vector<MPSRow> rows(h, row);
    std::vector<std::vector<DenseTensor>> unitaries;
    if (h > 1) unitaries.assign(v, std::vector<DenseTensor>(h - 1, cz));
    return new_sgs(params, std::move(rows), std::move(unitaries));
}

SGSState block_rows(const std::vector<MPSRow>& physical_rows, int n, int m_span) {
    if (physical_rows.empty()) throw ValidationError("block_rows: no rows");
    const int h = static_cast<int>(physical_rows.size());
    if (n < 1 || h % n != 0) throw ValidationError("block_rows: H not divisible by N");
    const int v = physical_rows[0].length();
    const std::int64_t d = physical_rows[0].phys_dim(0);

    std::vector<MPSRow> eff_rows;
    std::int64_t max_bond = 1;
    for (int rb = 0; rb < h / n; ++rb) {
        MPSRow eff;
        for (int c = 0; c < v; ++c) {
            DenseTensor t = physical_rows[rb * n].tensors[c];
            for (int k = 1; k < n; ++k) {
                const DenseTensor& nx = physical_rows[rb * n + k].tensors[c];
                // (l1,p1,r1) x (l2,p2,r2) -> (l1 l2, p1 p2, r1 r2)
                DenseTensor o = outer(t, nx).permute({0, 3, 1, 4, 2, 5});
                t = o.reshape({t.dim(0) * nx.dim(0), t.dim(1) * nx.dim(1), t.dim(2) * nx.dim(2)});
            }
            max_bond = std::max(max_bond, t.dim(0));
            eff.tensors.push_back(std::move(t));
        }
        eff_rows.push_back(canonicalize(eff, 0));
    }

    SGSParams params;
    params.physical = {h, v, static_cast<int>(d)};
    params.M = m_span;
    params.D = static_cast<int>(max_bond);
    params.N = n;

    std::vector<std::vector<DenseTensor>> unitaries;
    const int nu = params.unitaries_per_column();
    if (nu > 0)
        unitaries.assign(v, std::vector<DenseTensor>(nu, DenseTensor::identity(params.unitary_dim())));
    return new_sgs(params, std::move(eff_rows), std::move(unitaries));
}

double row_norm_product(const SGSState& s) {
    double p = 1.0;
    for (const auto& r : s.rows) p *= mps_norm(r);
    return p;
}

sv::State to_statevector(const SGSState& s, std::int64_t cap) {
    const std::int64_t dim = s.params.physical.hilbert_dim(cap);
    const int hr = s.eff_rows(), v = s.cols();
    const std::int64_t e = s.params.eff_dim();

    sv::State psi = mps_statevector(s.rows[0]);
    for (int r = 1; r < hr; ++r) {
        const sv::State next = mps_statevector(s.rows[r]);
        sv::State merged(psi.size() * next.size());
        for (std::size_t i = 0; i < psi.size(); ++i)
            for (std::size_t j = 0; j < next.size(); ++j)
                merged[i * next.size() + j] = psi[i] * next[j];
        psi = std::move(merged);
    }

    const int nu = s.params.unitaries_per_column();
    for (int c = 0; c < v && nu > 0; ++c)
        for (int t = nu - 1; t >= 0; --t) {
            std::vector<int> sites;
            for (int k = t; k <= t + s.params.M; ++k) sites.push_back(k * v + c);
            sv::apply_gate(psi, s.unitaries[c][t], sites, hr * v, static_cast<int>(e));
        }

    if (s.params.N > 1) {
        // Regroup effective-site digits (R, c, k) into physical order (R, k, c).
        const int n = s.params.N;
        const std::int64_t d = s.params.physical.local_dim;
        std::vector<std::int64_t> shape(static_cast<std::size_t>(hr) * v * n, d);
        DenseTensor t(shape, std::move(psi));
        std::vector<int> axes;
        for (int r = 0; r < hr; ++r)
            for (int k = 0; k < n; ++k)
                for (int c = 0; c < v; ++c) axes.push_back(r * v * n + c * n + k);
        psi = t.permute(axes).data();
    }
    (void)dim;
    return psi;
}

namespace {
/// Unitary with prescribed orthonormal columns at given positions, completed
/// by an orthonormal basis of the complement.
DenseTensor complete_unitary(std::int64_t n, const std::vector<std::int64_t>& col_positions,
                             const std::vector<std::vector<cplx>>& cols) {
    using Mat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
    const std::int64_t k = static_cast<std::int64_t>(cols.size());
    Mat known(n, k);
    for (std::int64_t j = 0; j < k; ++j)
        for (std::int64_t i = 0; i < n; ++i) known(i, j) = cols[j][i];
    Mat q = Eigen::HouseholderQR<Mat>(known).householderQ() * Mat::Identity(n, n);

    DenseTensor w({n, n});
    std::vector<bool> used(n, false);
    for (std::int64_t j = 0; j < k; ++j) {
        used[col_positions[j]] = true;
        for (std::int64_t i = 0; i < n; ++i) w.data()[i * n + col_positions[j]] = cols[j][i];
    }
    std::int64_t next = k;
    for (std::int64_t j = 0; j < n; ++j) {
        if (used[j]) continue;
        for (std::int64_t i = 0; i < n; ++i) w.data()[i * n + j] = q(i, next);
        ++next;
    }
    return w;
}

struct RowGate {
    DenseTensor gate;
    int first_col;
    int span_cols;
};

/// Staircase gates preparing one row MPS from |0...0>, acting on m+1 sites
/// each; gate c finalizes site c and hands the bond register to sites
/// c+1..c+m.
std::vector<RowGate> row_staircase(const MPSRow& row_in, std::int64_t e) {
    const int v = row_in.length();
    std::int64_t max_bond = 1;
    for (const auto& t : row_in.tensors) max_bond = std::max(max_bond, t.dim(0));
    int m = 1;
    while (ipow(e, m) < max_bond) ++m;
    if (m >= v) {
        // One gate preparing the whole row.
        const auto psi = mps_statevector(row_in);
        const std::int64_t dim = ipow(e, v);
        std::vector<std::vector<cplx>> cols{psi};
        return {{complete_unitary(dim, {0}, cols), 0, v}};
    }

    const MPSRow row = canonicalize(row_in, 0); // right-canonical tensors after site 0
    const std::int64_t block = ipow(e, m);
    const std::int64_t dim = block * e;
    std::vector<RowGate> gates;

    for (int c = 0; c + m < v; ++c) {
        const bool last = (c + m == v - 1);
        DenseTensor amp; // (alpha, out composite of the m+1 gate sites)
        if (!last) {
            const DenseTensor& a = row.tensors[c]; // (dl, e, dr)
            // out = (i, beta-register): amp[alpha, i, beta_enc]
            amp = DenseTensor({a.dim(0), e, block});
            for (std::int64_t al = 0; al < a.dim(0); ++al)
                for (std::int64_t i = 0; i < e; ++i)
                    for (std::int64_t b = 0; b < a.dim(2); ++b)
                        amp.at({al, i, b}) = a.at({al, i, b});
            amp = amp.reshape({a.dim(0), dim});
        } else {
            DenseTensor chain = row.tensors[c]; // absorb sites c..v-1
            for (int k = c + 1; k < v; ++k)
                chain = contract(chain, {chain.rank() - 1}, row.tensors[k], {0});
            // modes (alpha, i_c, ..., i_{v-1}, 1)
            amp = chain.reshape({chain.dim(0), dim});
        }
        const std::int64_t dl = amp.dim(0);
        std::vector<std::int64_t> positions;
        std::vector<std::vector<cplx>> cols;
        for (std::int64_t al = 0; al < dl; ++al) {
            positions.push_back(al * e); // register digits then |0> on the fresh site
            std::vector<cplx> col(dim);
            for (std::int64_t o = 0; o < dim; ++o) col[o] = amp.data()[al * dim + o];
            cols.push_back(std::move(col));
        }
        gates.push_back({complete_unitary(dim, positions, cols), c, m + 1});
    }
    return gates;
}
} // namespace

PrepSequence prepare_sequence(const SGSState& s) {
    PrepSequence seq;
    seq.physical = s.params.physical;
    const int hr = s.eff_rows(), v = s.cols(), n = s.params.N, m_v = s.params.M;

    auto eff_site_phys = [&](int er, int c) {
        std::vector<std::pair<int, int>> out;
        for (int k = 0; k < n; ++k) out.emplace_back(er * n + k, c);
        return out;
    };

    for (int r = 0; r < hr; ++r) {
        for (auto& rg : row_staircase(s.rows[r], s.params.eff_dim())) {
            PrepGate g;
            g.gate = rg.gate;
            for (int c = rg.first_col; c < rg.first_col + rg.span_cols; ++c)
                for (auto site : eff_site_phys(r, c)) g.sites.push_back(site);
            seq.gates.push_back(std::move(g));
        }
    }
    const int nu = s.params.unitaries_per_column();
    for (int c = 0; c < v && nu > 0; ++c)
        for (int t = nu - 1; t >= 0; --t) {
            PrepGate g;
            g.gate = s.unitaries[c][t];
            for (int er = t; er <= t + m_v; ++er)
                for (auto site : eff_site_phys(er, c)) g.sites.push_back(site);
            seq.gates.push_back(std::move(g));
        }
    return seq;
}

sv::State replay(const PrepSequence& seq, std::int64_t cap) {
    const std::int64_t dim = seq.physical.hilbert_dim(cap);
    sv::State psi(dim, cplx{0, 0});
    psi[0] = cplx{1, 0};
    const int v = seq.physical.cols;
    for (const auto& g : seq.gates) {
        std::vector<int> sites;
        for (auto [r, c] : g.sites) sites.push_back(r * v + c);
        sv::apply_gate(psi, g.gate, sites, seq.physical.sites(), seq.physical.local_dim);
    }
    return psi;
}

namespace {
/// Scale mode 0 of a tensor by per-index weights.
DenseTensor scale_mode0(const DenseTensor& t, const std::vector<double>& w) {
    DenseTensor out = t;
    const std::int64_t n0 = t.dim(0);
    const std::int64_t rest = t.numel() / n0;
    for (std::int64_t i = 0; i < n0; ++i)
        for (std::int64_t j = 0; j < rest; ++j) out.data()[i * rest + j] *= w[i];
    return out;
}

/// Split the leading (bond, p_0, ..., p_{k-1}) physical modes off a tensor by
/// repeated SVD. `blob` modes: (bond, p_0 .. p_{k-1}, rest...). Returns the
/// wire tensors (u, d, p) for each split row and the remainder
/// (bond, rest...).
std::pair<std::vector<DenseTensor>, DenseTensor> split_leading_phys(DenseTensor blob, int k) {
    std::vector<DenseTensor> wires;
    for (int l = 0; l < k; ++l) {
        std::vector<int> row_modes{0, 1}, col_modes;
        for (int m = 2; m < blob.rank(); ++m) col_modes.push_back(m);
        auto res = svd(blob, row_modes, col_modes);
        // left: (bond, p, new) -> wire (u=bond, d=new, p)
        wires.push_back(res.left_isometry.permute({0, 2, 1}));
        blob = scale_mode0(res.right_isometry, res.singular_values);
    }
    return {std::move(wires), std::move(blob)};
}

/// Split one effective PEPS tensor (l, u, r, d, p_eff) into `n` stacked
/// physical tensors along the vertical direction; the bottom one keeps the
/// horizontal and down bonds.
std::vector<DenseTensor> split_vertical(const DenseTensor& eff, int n, std::int64_t d) {
    if (n == 1) return {eff};
    std::vector<std::int64_t> shape{eff.dim(0), eff.dim(1), eff.dim(2), eff.dim(3)};
    std::vector<std::int64_t> split_shape{eff.dim(1)};
    for (int k = 0; k < n; ++k) split_shape.push_back(d);
    split_shape.push_back(eff.dim(0));
    split_shape.push_back(eff.dim(2));
    split_shape.push_back(eff.dim(3));
    // (l,u,r,dn,p) -> (u, p_0..p_{n-1}, l, r, dn)
    DenseTensor blob = eff.permute({1, 4, 0, 2, 3})
                           .reshape(split_shape);
    auto [wires, rem] = split_leading_phys(std::move(blob), n - 1);
    std::vector<DenseTensor> out;
    for (int k = 0; k < n - 1; ++k) {
        const DenseTensor& w = wires[k]; // (u, d, p)
        out.push_back(w.reshape({1, w.dim(0), 1, w.dim(1), w.dim(2)}));
    }
    // remainder: (bond, p_{n-1}, l, r, dn) -> (l, bond, r, dn, p)
    out.push_back(rem.permute({2, 0, 3, 4, 1}));
    return out;
}
} // namespace

PepsGrid to_peps(const SGSState& s) {
    const int hr = s.eff_rows(), v = s.cols(), m = s.params.M;
    const std::int64_t e = s.params.eff_dim();
    const std::int64_t block = ipow(e, m);
    const int nu = s.params.unitaries_per_column();

    PepsGrid eff;
    eff.rows = hr;
    eff.cols = v;
    eff.tensors.resize(static_cast<std::size_t>(hr) * v);

    for (int c = 0; c < v; ++c) {
        if (nu == 0) {
            for (int r = 0; r < hr; ++r) {
                const DenseTensor& a = s.rows[r].tensors[c]; // (l, p, r)
                eff.at(r, c) =
                    a.reshape({a.dim(0), 1, a.dim(1), a.dim(2), 1}).permute({0, 1, 3, 4, 2});
            }
            continue;
        }

        // Bottom row: the first-applied unitary absorbs the lowest M+1 row
        // tensors; its horizontal bonds are the stacked row bonds.
        {
            const DenseTensor& u = s.unitaries[c][nu - 1];
            DenseTensor t = unitary_as_step(u, e, block); // (up, i, j, w)
            t = contract(t, {2}, s.rows[hr - m - 1].tensors[c], {1}); // (up,i,w,l0,r0)
            std::vector<std::int64_t> sh{t.dim(0), t.dim(1)};
            for (int k = 0; k < m; ++k) sh.push_back(e);
            sh.push_back(t.dim(3));
            sh.push_back(t.dim(4));
            t = t.reshape(sh); // (up, i, w_1..w_m, l0, r0)
            for (int k = 0; k < m; ++k)
                t = contract(t, {2}, s.rows[hr - m + k].tensors[c], {1});
            // modes now: (up, i, l0, r0, l1, r1, ..., lm, rm)
            std::vector<int> perm;
            std::vector<std::int64_t> lsize{1}, rsize{1};
            for (int k = 0; k <= m; ++k) perm.push_back(2 + 2 * k); // l's
            perm.push_back(0);                                     // up
            for (int k = 0; k <= m; ++k) perm.push_back(3 + 2 * k); // r's
            perm.push_back(1);                                     // i
            t = t.permute(perm);
            std::int64_t lprod = 1, rprod = 1;
            for (int k = 0; k <= m; ++k) {
                lprod *= t.dim(k);
                rprod *= t.dim(m + 2 + k);
            }
            DenseTensor bot = t.reshape({lprod, block, rprod, 1, e});
            if (hr - m - 1 == 0) {
                // Shallow lattice: the same blob also carries the top rows as
                // its "up" composite; split them off.
                std::vector<std::int64_t> sh2;
                for (int k = 0; k < m; ++k) sh2.push_back(e);
                sh2.push_back(lprod);
                sh2.push_back(rprod);
                sh2.push_back(e);
                DenseTensor blob = bot.permute({1, 0, 2, 4, 3}).reshape(sh2);
                // (p_0..p_{m-1}, l, r, i); prepend a trivial bond mode
                std::vector<std::int64_t> sh3{1};
                for (auto x : sh2) sh3.push_back(x);
                blob = blob.reshape(sh3);
                auto [wires, rem] = split_leading_phys(std::move(blob), m);
                for (int l = 0; l < m; ++l)
                    eff.at(l, c) = wires[l].reshape({1, wires[l].dim(0), 1, wires[l].dim(1),
                                                     wires[l].dim(2)});
                // rem: (bond, l, r, i) -> (l, bond, r, 1, i)
                eff.at(m, c) = rem.reshape({rem.dim(0), rem.dim(1), rem.dim(2), 1, rem.dim(3)})
                                   .permute({1, 0, 2, 3, 4});
                continue;
            }
            eff.at(hr - 1, c) = std::move(bot);
        }

        // Bulk rows via the single product U * A.
        for (int t_idx = 1; t_idx <= nu - 2; ++t_idx) {
            const DenseTensor& u = s.unitaries[c][t_idx];
            DenseTensor t = unitary_as_step(u, e, block);            // (up, i, j, dn)
            t = contract(t, {2}, s.rows[t_idx].tensors[c], {1});     // (up, i, dn, l, r)
            eff.at(t_idx + m, c) = t.permute({3, 0, 4, 2, 1});       // (l, u, r, d, p)
        }

        // Top rows from the last-applied unitary, split by SVD.
        {
            const DenseTensor& u = s.unitaries[c][0];
            DenseTensor t = unitary_as_step(u, e, block);        // (out_top, i, j, dn)
            t = contract(t, {2}, s.rows[0].tensors[c], {1});     // (out_top, i, dn, l, r)
            std::vector<std::int64_t> sh{1};
            for (int k = 0; k < m; ++k) sh.push_back(e);
            sh.push_back(e);
            sh.push_back(t.dim(2));
            sh.push_back(t.dim(3));
            sh.push_back(t.dim(4));
            DenseTensor blob = t.reshape(sh); // (1, p_0..p_{m-1}, i_m, dn, l, r)
            auto [wires, rem] = split_leading_phys(std::move(blob), m);
            for (int l = 0; l < m; ++l)
                eff.at(l, c) =
                    wires[l].reshape({1, wires[l].dim(0), 1, wires[l].dim(1), wires[l].dim(2)});
            // rem: (bond, i, dn, l, r) -> (l, bond, r, dn, i)
            eff.at(m, c) = rem.permute({3, 0, 4, 2, 1});
        }
    }

    if (s.params.N == 1) return eff;

    // B-SGS: split every effective tensor into N stacked physical tensors.
    PepsGrid phys;
    phys.rows = s.params.physical.rows;
    phys.cols = v;
    phys.tensors.resize(static_cast<std::size_t>(phys.rows) * v);
    for (int r = 0; r < hr; ++r)
        for (int c = 0; c < v; ++c) {
            auto parts = split_vertical(eff.at(r, c), s.params.N, s.params.physical.local_dim);
            for (int k = 0; k < s.params.N; ++k) phys.at(r * s.params.N + k, c) = parts[k];
        }
    return phys;
}

sv::State contract_peps_dense(const PepsGrid& grid, std::int64_t cap) {
    std::int64_t dim = 1;
    for (const auto& t : grid.tensors) {
        dim *= t.dim(4);
        if (dim > cap) throw ResourceError("contract_peps_dense: over amplitude cap");
    }
    const int h = grid.rows, v = grid.cols;

    // Build each row tensor with modes (u_0, p_0, d_0, ..., u_{V-1}, p_{V-1}, d_{V-1}).
    auto row_tensor = [&](int r) {
        DenseTensor t = grid.at(r, 0); // (l,u,r,d,p)
        t = t.reshape({t.dim(1), t.dim(2), t.dim(3), t.dim(4)}); // drop l=1: (u, rb, d, p)
        t = t.permute({0, 3, 2, 1});                             // (u, p, d, rb)
        for (int c = 1; c < v; ++c) {
            const DenseTensor& b = grid.at(r, c);
            // contract trailing right bond with b's left: frees (prev..., u,r,d,p)
            t = contract(t, {t.rank() - 1}, b, {0});
            // reorder trailing (u, rb, d, p) -> (u, p, d, rb)
            std::vector<int> perm;
            for (int m = 0; m < t.rank() - 4; ++m) perm.push_back(m);
            perm.push_back(t.rank() - 4);
            perm.push_back(t.rank() - 1);
            perm.push_back(t.rank() - 2);
            perm.push_back(t.rank() - 3);
            t = t.permute(perm);
        }
        // trailing right bond has extent 1
        std::vector<std::int64_t> sh(t.shape().begin(), t.shape().end() - 1);
        return t.reshape(sh);
    };

    DenseTensor g = row_tensor(0);
    // Top row u-bonds are trivial; drop them and order (p_0..p_{V-1}, d_0..d_{V-1}).
    {
        std::vector<std::int64_t> sh;
        for (int c = 0; c < v; ++c) {
            sh.push_back(g.dim(3 * c + 1)); // p
            sh.push_back(g.dim(3 * c + 2)); // d
        }
        g = g.reshape(sh); // (p_0, d_0, p_1, d_1, ...)
        std::vector<int> perm;
        for (int c = 0; c < v; ++c) perm.push_back(2 * c);
        for (int c = 0; c < v; ++c) perm.push_back(2 * c + 1);
        g = g.permute(perm);
    }
    for (int r = 1; r < h; ++r) {
        DenseTensor rt = row_tensor(r);
        // contract all d_c of g with u_c of rt
        std::vector<int> gd, ru;
        const int prev_phys = static_cast<int>(g.rank()) - v; // leading phys modes
        for (int c = 0; c < v; ++c) gd.push_back(prev_phys + c);
        for (int c = 0; c < v; ++c) ru.push_back(3 * c);
        g = contract(g, gd, rt, ru);
        // g modes: (phys... of rows < r, p_r0, d_r0, p_r1, d_r1, ...)
        // reorder to (phys..., p_r0, p_r1, ..., d_r0, d_r1, ...)
        std::vector<int> perm;
        const int lead = static_cast<int>(g.rank()) - 2 * v;
        for (int m = 0; m < lead; ++m) perm.push_back(m);
        for (int c = 0; c < v; ++c) perm.push_back(lead + 2 * c);
        for (int c = 0; c < v; ++c) perm.push_back(lead + 2 * c + 1);
        g = g.permute(perm);
    }
    // Bottom d-bonds are trivial: flatten everything in row-major site order.
    return g.reshape({dim}).data();
}

} // namespace sgs
