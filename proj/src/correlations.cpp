#include "sgs/correlations.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sgs/contraction.hpp"
#include "sgs/linalg.hpp"
#include "sgs/rng.hpp"

namespace sgs {

namespace {
std::int64_t ipow(std::int64_t b, int e) {
    std::int64_t r = 1;
    while (e-- > 0) r *= b;
    return r;
}

/// Finite row MPS from a translationally invariant site tensor (D, d, D).
MPSRow row_from_ti(const DenseTensor& a, int cols) {
    if (a.rank() != 3 || a.dim(0) != a.dim(2))
        throw DimensionError("expected a translationally invariant (D, d, D) tensor");
    const std::int64_t dd = a.dim(0), d = a.dim(1);
    MPSRow row;
    if (cols == 1) {
        DenseTensor first({1, d, 1});
        for (std::int64_t i = 0; i < d; ++i) first.at({0, i, 0}) = a.at({0, i, 0});
        row.tensors.push_back(first);
    } else {
        DenseTensor first({1, d, dd});
        DenseTensor last({dd, d, 1});
        for (std::int64_t i = 0; i < d; ++i)
            for (std::int64_t b = 0; b < dd; ++b) {
                first.at({0, i, b}) = a.at({0, i, b});
                last.at({b, i, 0}) = a.at({b, i, 0});
            }
        row.tensors.push_back(first);
        for (int c = 1; c + 1 < cols; ++c) row.tensors.push_back(a);
        row.tensors.push_back(last);
    }
    if (mps_norm(row) < 1e-12) throw ValidationError("TI boundary slice has vanishing norm");
    return canonicalize(row, 0);
}
} // namespace

TransferSpectrum transfer_spectrum(const DenseTensor& site_tensor, bool normalize) {
    if (site_tensor.rank() != 3 || site_tensor.dim(0) != site_tensor.dim(2))
        throw DimensionError("transfer_spectrum: expected a (D, d, D) site tensor");
    const std::int64_t d = site_tensor.dim(1);
    DenseTensor e1 = transfer_matrix(site_tensor, DenseTensor::identity(d));
    auto [vals, vecs] = complex_eig(e1);
    TransferSpectrum spec;
    spec.eigenvalues = vals;
    const double lead = std::abs(vals[0]);
    if (normalize && lead > 0.0)
        for (auto& v : spec.eigenvalues) v /= lead;
    if (vals.size() > 1 && lead > 0.0) {
        spec.ratio = std::abs(vals[1]) / lead;
        spec.degenerate = spec.ratio > 1.0 - 1e-8;
    }
    return spec;
}

DenseTensor random_ti_site_tensor(std::uint64_t seed, std::int64_t bond_dim,
                                  std::int64_t local_dim) {
    rng::Stream st(seed);
    DenseTensor a = rng::gaussian_tensor({bond_dim, local_dim, bond_dim}, st);
    const auto spec = transfer_spectrum(a, false);
    const double lead = std::abs(spec.eigenvalues[0]);
    if (lead <= 0.0) throw ValidationError("random_ti_site_tensor: degenerate draw");
    return a.scaled(cplx{1.0 / std::sqrt(lead), 0});
}

FitResult fit_exponential(const std::vector<int>& deltas, const std::vector<double>& magnitudes,
                          double floor) {
    FitResult fit;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < deltas.size(); ++i)
        if (magnitudes[i] > floor) {
            xs.push_back(static_cast<double>(deltas[i]));
            ys.push_back(std::log(magnitudes[i]));
        }
    fit.points_used = static_cast<int>(xs.size());
    if (fit.points_used < 3) return fit;

    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-30) return fit;
    const double slope = (n * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    const double mean = sy / n;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double pred = intercept + slope * xs[i];
        ss_res += (ys[i] - pred) * (ys[i] - pred);
        ss_tot += (ys[i] - mean) * (ys[i] - mean);
    }
    fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    fit.xi = slope < 0 ? -1.0 / slope : std::numeric_limits<double>::infinity();
    fit.ok = std::isfinite(fit.xi);
    return fit;
}

DecayReport horizontal_correlator(const SGSState& s, const DenseTensor& o1, const DenseTensor& o2,
                                  int row, const std::vector<int>& deltas, int base_col) {
    const int v = s.cols();
    int max_delta = 0;
    for (int d : deltas) max_delta = std::max(max_delta, d);
    const int v1 = base_col >= 0 ? base_col : std::max(0, (v - 1 - max_delta) / 2);
    if (v1 + max_delta >= v) throw DimensionError("horizontal_correlator: distance beyond lattice");

    DecayReport report;
    report.direction = "horizontal";
    report.deltas = deltas;

    ObservableSet only1;
    only1.singles[{row, v1}] = o1;
    const cplx m1 = expect_local(s, only1);
    std::vector<double> mags;
    for (int d : deltas) {
        ObservableSet both;
        both.singles[{row, v1}] = o1;
        both.singles[{row, v1 + d}] = o2;
        ObservableSet only2;
        only2.singles[{row, v1 + d}] = o2;
        const cplx c = expect_local(s, both) - m1 * expect_local(s, only2);
        report.values.push_back(c);
        mags.push_back(std::abs(c));
    }
    report.fit = fit_exponential(deltas, mags);
    return report;
}

VerticalChain vertical_chain(const DenseTensor& a, const DenseTensor& u, int column, int rows,
                             int cols) {
    const std::int64_t d = a.dim(1);
    // Infer the span from the unitary extent.
    int m = 1;
    while (ipow(d, m + 1) < u.dim(0)) ++m;
    if (ipow(d, m + 1) != u.dim(0))
        throw DimensionError("vertical_chain: unitary extent is not d^(M+1)");
    if (rows < m + 1) throw ValidationError("vertical_chain: needs at least M+1 rows");
    if (column < 0 || column >= cols) throw DimensionError("vertical_chain: column out of range");
    const std::int64_t block = ipow(d, m);

    VerticalChain chain;
    chain.rows = rows;
    chain.m_span = m;
    chain.d = d;

    MPSRow row = row_from_ti(a, cols);
    chain.site_rho = one_site_rdm(row, column);
    DenseTensor sqrt_rho = herm_sqrt(chain.site_rho);

    // Chain matrices M^{i i'}_{(aa'),(bb')} = sum U^{i b}_{a g} rho_{g g'} U*^{i' b'}_{a' g'},
    // with the unitary reshaped as (b: carry out, i: freed site, g: fresh input, a: carry in).
    DenseTensor ut = u.reshape({block, d, d, block});
    {
        DenseTensor t1 = contract(ut, {2}, chain.site_rho, {0});  // (b, i, a, g')
        DenseTensor t2 = contract(t1, {3}, ut.conj(), {2});       // (b, i, a, b', i', a')
        DenseTensor mt = t2.permute({1, 4, 2, 5, 0, 3});          // (i, i', a, a', b, b')
        chain.bulk_m = mt.reshape({d, d, block * block, block * block});
    }
    {
        // Lowest span: all M+1 inputs are fresh.
        DenseTensor rho_many = chain.site_rho;
        for (int k = 1; k <= m; ++k) rho_many = kron(rho_many, chain.site_rho);
        DenseTensor t = contract(u, {1}, rho_many, {0});   // (out, g')
        DenseTensor mb = contract(t, {1}, u.conj(), {1});  // (out, out')
        mb = mb.reshape({block, d, block, d}).permute({1, 3, 0, 2}); // (i, i', b, b')
        chain.bottom_m = mb.reshape({d, d, block * block});
    }

    // Purification: top wires, one step site per freed row, ancilla caps.
    MPSRow pur;
    for (int l = 0; l < m; ++l) {
        const std::int64_t dl = ipow(d, l), dr = dl * d;
        DenseTensor wire({dl, d, dr});
        for (std::int64_t x = 0; x < dl; ++x)
            for (std::int64_t i = 0; i < d; ++i) wire.at({x, i, x * d + i}) = cplx{1, 0};
        pur.tensors.push_back(wire);
    }
    {
        DenseTensor step = contract(ut, {2}, sqrt_rho, {0}); // (b, i, a, anc)
        step = step.permute({0, 1, 3, 2}).reshape({block, d * d, block});
        for (int t = 0; t < rows - m; ++t) pur.tensors.push_back(step);
    }
    for (int k = 0; k < m; ++k) {
        const std::int64_t dl = ipow(d, m - k), dr = ipow(d, m - k - 1);
        DenseTensor cap({dl, d, dr});
        for (std::int64_t j = 0; j < d; ++j)
            for (std::int64_t anc = 0; anc < d; ++anc)
                for (std::int64_t r = 0; r < dr; ++r)
                    cap.at({j * dr + r, anc, r}) = sqrt_rho.at({j, anc});
        pur.tensors.push_back(cap);
    }
    pur.validate_shapes();
    chain.purification = std::move(pur);
    return chain;
}

namespace {
std::map<int, DenseTensor> chain_ops(const VerticalChain& chain,
                                     const std::vector<std::pair<int, DenseTensor>>& site_ops) {
    std::map<int, DenseTensor> ops;
    for (const auto& [h, o] : site_ops) {
        if (h < 0 || h >= chain.rows) throw DimensionError("vertical correlator: row out of range");
        if (h < chain.m_span)
            ops[h] = o; // wire site: bare physical index
        else
            ops[h] = kron(o, DenseTensor::identity(chain.d)); // (site x ancilla)
    }
    return ops;
}
} // namespace

cplx vertical_pair_correlator(const VerticalChain& chain, const DenseTensor& o1,
                              const DenseTensor& o2, int h1, int h2) {
    if (h1 >= h2) throw DimensionError("vertical_pair_correlator: needs h1 < h2");
    const cplx n2 = expectation_chain(chain.purification, {});
    const cplx both =
        expectation_chain(chain.purification, chain_ops(chain, {{h1, o1}, {h2, o2}})) / n2;
    const cplx m1 = expectation_chain(chain.purification, chain_ops(chain, {{h1, o1}})) / n2;
    const cplx m2 = expectation_chain(chain.purification, chain_ops(chain, {{h2, o2}})) / n2;
    return both - m1 * m2;
}

DecayReport vertical_correlator(const VerticalChain& chain, const DenseTensor& o1,
                                const DenseTensor& o2, int h1, const std::vector<int>& deltas) {
    DecayReport report;
    report.direction = "vertical";
    report.deltas = deltas;
    std::vector<double> mags;
    for (int d : deltas) {
        const cplx c = vertical_pair_correlator(chain, o1, o2, h1, h1 + d);
        report.values.push_back(c);
        mags.push_back(std::abs(c));
    }
    report.fit = fit_exponential(deltas, mags);
    return report;
}

GMatrixAnalysis g_matrix_analysis(const DenseTensor& a, const DenseTensor& u, int v1, int v2,
                                  int cols) {
    if (!(0 <= v1 && v1 < v2 && v2 < cols)) throw DimensionError("g_matrix_analysis: bad columns");
    const std::int64_t d = a.dim(1);
    int m = 1;
    while (ipow(d, m + 1) < u.dim(0)) ++m;
    const std::int64_t block = ipow(d, m);
    const std::int64_t b2 = block * block;

    MPSRow row = row_from_ti(a, cols);
    DenseTensor sigma1 = one_site_rdm(row, v1);
    DenseTensor sigma2 = one_site_rdm(row, v2);
    DenseTensor rho2 = two_site_rdm(row, v1, v2);

    DenseTensor ut = u.reshape({block, d, d, block});
    auto traced_g = [&](const DenseTensor& rho) {
        DenseTensor t1 = contract(ut, {2}, rho, {0});  // (b, i, a, g')
        DenseTensor t2 = contract(t1, {3}, ut.conj(), {2}); // (b, i, a, b', i', a')
        DenseTensor g = partial_trace(t2, {{1, 4}});   // (b, a, b', a')
        return g.permute({1, 3, 0, 2}).reshape({b2, b2}); // [(a a'), (b b')]
    };

    GMatrixAnalysis out;
    out.g1 = traced_g(sigma1);
    out.g2 = traced_g(sigma2);
    out.g_product = kron(out.g1, out.g2);

    {
        DenseTensor r4 = rho2.reshape({d, d, d, d}); // (g1, g2, g1', g2')
        DenseTensor t1 = contract(ut, {2}, r4, {0});        // (b1,i1,a1, g2,g1',g2')
        DenseTensor t2 = contract(ut, {2}, t1, {3});        // (b2,i2,a2, b1,i1,a1, g1',g2')
        DenseTensor t3 = contract(ut.conj(), {2}, t2, {6}); // (b1',i1',a1', b2,i2,a2, b1,i1,a1, g2')
        DenseTensor t4 = contract(ut.conj(), {2}, t3, {9});
        // modes: (b2',i2',a2', b1',i1',a1', b2,i2,a2, b1,i1,a1)
        DenseTensor g = partial_trace(t4, {{4, 10}, {1, 7}}); // trace i1'~i1, i2'~i2
        // remaining: (b2', a2', b1', a1', b2, a2, b1, a1)
        g = g.permute({7, 3, 5, 1, 6, 2, 4, 0}); // (a1, a1', a2, a2', b1, b1', b2, b2')
        out.g_full = g.reshape({b2 * b2, b2 * b2});
    }

    {
        // Bottom boundary: the lowest span takes M+1 fresh two-column inputs.
        DenseTensor x = rho2.reshape({d, d, d, d});
        DenseTensor many = x;
        for (int k = 1; k <= m; ++k) {
            DenseTensor o = outer(many, x);
            // group (g1-vec, g2-vec, g1'-vec, g2'-vec)
            const int r = many.rank();
            std::vector<int> perm;
            perm.push_back(0);
            perm.push_back(r);
            perm.push_back(1);
            perm.push_back(r + 1);
            perm.push_back(2);
            perm.push_back(r + 2);
            perm.push_back(3);
            perm.push_back(r + 3);
            o = o.permute(perm);
            const std::int64_t g1d = many.dim(0) * d;
            many = o.reshape({g1d, g1d, g1d, g1d});
        }
        DenseTensor t1 = contract(u, {1}, many, {0});       // (o1, g2, g1', g2')
        DenseTensor t2 = contract(u, {1}, t1, {1});         // (o2, o1, g1', g2')
        DenseTensor t3 = contract(u.conj(), {1}, t2, {2});  // (o1', o2, o1, g2')
        DenseTensor t4 = contract(u.conj(), {1}, t3, {3});  // (o2', o1', o2, o1)
        t4 = t4.reshape({block, d, block, d, block, d, block, d});
        // (b2', i2', b1', i1', b2, i2, b1, i1)
        DenseTensor g = partial_trace(t4, {{3, 7}, {1, 5}});
        // remaining: (b2', b1', b2, b1)
        out.g_bottom = g.permute({3, 1, 2, 0}).reshape({b2 * b2});
    }

    auto [vals, vecs] = complex_eig(out.g_full);
    out.mu = vals[0];
    out.gap = vals.size() > 1 ? std::abs(vals[0]) - std::abs(vals[1]) : std::abs(vals[0]);
    out.degenerate = std::abs(out.mu) > 0 && out.gap / std::abs(out.mu) < 1e-8;
    const std::int64_t n = out.g_full.dim(0);
    out.right_vec = DenseTensor({n});
    for (std::int64_t i = 0; i < n; ++i) out.right_vec.data()[i] = vecs.at({i, 0});
    auto [lvals, lvecs] = complex_eig(out.g_full.permute({1, 0}).conj());
    out.left_vec = DenseTensor({n});
    for (std::int64_t i = 0; i < n; ++i) out.left_vec.data()[i] = std::conj(lvecs.at({i, 0}));

    out.product_deviation = out.g_full.axpy(out.g_product, cplx{-1, 0}).norm();
    out.epsilon = transfer_spectrum(a, true).epsilon(v2 - v1);
    return out;
}

} // namespace sgs
