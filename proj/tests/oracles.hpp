#pragma once

// Test-only reference implementations, kept independent of the library's
// contraction/decomposition code paths.

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <vector>

#include "sgs/tensor.hpp"

namespace oracles {

using sgs::cplx;
using sgs::DenseTensor;

/// Plain index-sum contraction evaluated with explicit nested loops.
inline DenseTensor naive_contract(const DenseTensor& a, const std::vector<int>& modes_a,
                                  const DenseTensor& b, const std::vector<int>& modes_b) {
    std::vector<int> free_a, free_b;
    std::vector<bool> ca(a.rank(), false), cb(b.rank(), false);
    for (int m : modes_a) ca[m] = true;
    for (int m : modes_b) cb[m] = true;
    for (int m = 0; m < a.rank(); ++m)
        if (!ca[m]) free_a.push_back(m);
    for (int m = 0; m < b.rank(); ++m)
        if (!cb[m]) free_b.push_back(m);

    std::vector<std::int64_t> out_shape;
    for (int m : free_a) out_shape.push_back(a.dim(m));
    for (int m : free_b) out_shape.push_back(b.dim(m));
    std::int64_t out_total = 1, con_total = 1;
    for (auto e : out_shape) out_total *= e;
    for (int m : modes_a) con_total *= a.dim(m);

    auto strides = [](const DenseTensor& t) {
        std::vector<std::int64_t> s(t.rank(), 1);
        for (int i = t.rank(); i-- > 1;) s[i - 1] = s[i] * t.dim(i);
        return s;
    };
    const auto sa = strides(a);
    const auto sb = strides(b);

    DenseTensor out(out_shape.empty() ? std::vector<std::int64_t>{} : out_shape);
    for (std::int64_t o = 0; o < out_total; ++o) {
        std::int64_t rem = o;
        std::int64_t base_a = 0, base_b = 0;
        for (std::size_t i = out_shape.size(); i-- > 0;) {
            const std::int64_t digit = rem % out_shape[i];
            rem /= out_shape[i];
            if (i < free_a.size())
                base_a += digit * sa[free_a[i]];
            else
                base_b += digit * sb[free_b[i - free_a.size()]];
        }
        cplx acc{0.0, 0.0};
        for (std::int64_t k = 0; k < con_total; ++k) {
            std::int64_t kk = k, off_a = 0, off_b = 0;
            for (std::size_t i = modes_a.size(); i-- > 0;) {
                const std::int64_t digit = kk % a.dim(modes_a[i]);
                kk /= a.dim(modes_a[i]);
                off_a += digit * sa[modes_a[i]];
                off_b += digit * sb[modes_b[i]];
            }
            acc += a.data()[base_a + off_a] * b.data()[base_b + off_b];
        }
        out.data()[o] = acc;
    }
    return out;
}

/// Cyclic Jacobi eigensolver for Hermitian matrices; eigenvalues ascending.
inline std::vector<double> jacobi_herm_eigenvalues(DenseTensor h) {
    const std::int64_t n = h.dim(0);
    auto& a = h.data();
    auto idx = [n](std::int64_t i, std::int64_t j) { return i * n + j; };
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::int64_t p = 0; p < n; ++p)
            for (std::int64_t q = p + 1; q < n; ++q) off += std::norm(a[idx(p, q)]);
        if (std::sqrt(off) < 1e-14) break;
        for (std::int64_t p = 0; p < n; ++p)
            for (std::int64_t q = p + 1; q < n; ++q) {
                const cplx apq = a[idx(p, q)];
                if (std::abs(apq) < 1e-300) continue;
                const double app = a[idx(p, p)].real();
                const double aqq = a[idx(q, q)].real();
                // Phase-rotate column q to make the pivot real, then apply the
                // standard real Jacobi rotation: J = diag(1, e^{-i phi}) * R.
                const double mag = std::abs(apq);
                const cplx phase = apq / mag; // e^{i phi}
                const double tau = (aqq - app) / (2.0 * mag);
                const double t = (tau >= 0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                const cplx jqp = -s * std::conj(phase);
                const cplx jqq = c * std::conj(phase);
                for (std::int64_t k = 0; k < n; ++k) { // A <- A J
                    const cplx akp = a[idx(k, p)], akq = a[idx(k, q)];
                    a[idx(k, p)] = c * akp + jqp * akq;
                    a[idx(k, q)] = s * akp + jqq * akq;
                }
                for (std::int64_t k = 0; k < n; ++k) { // A <- J^dag A
                    const cplx apk = a[idx(p, k)], aqk = a[idx(q, k)];
                    a[idx(p, k)] = c * apk + std::conj(jqp) * aqk;
                    a[idx(q, k)] = s * apk + std::conj(jqq) * aqk;
                }
            }
    }
    std::vector<double> vals(n);
    for (std::int64_t i = 0; i < n; ++i) vals[i] = a[idx(i, i)].real();
    std::sort(vals.begin(), vals.end());
    return vals;
}

/// Truncated power series for exp(i * delta * K).
inline DenseTensor taylor_unitary_exp(const DenseTensor& k, double delta) {
    const std::int64_t n = k.dim(0);
    DenseTensor term = DenseTensor::identity(n);
    DenseTensor sum = term;
    for (int order = 1; order < 64; ++order) {
        DenseTensor next({n, n});
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < n; ++j) {
                cplx acc{0.0, 0.0};
                for (std::int64_t l = 0; l < n; ++l)
                    acc += term.data()[i * n + l] * k.data()[l * n + j];
                next.data()[i * n + j] = acc * cplx{0.0, delta} / static_cast<double>(order);
            }
        term = next;
        sum = sum.axpy(term);
        if (term.norm() < 1e-18) break;
    }
    return sum;
}

/// Amplitude vector of an open-boundary MPS by direct evaluation of the
/// matrix products, one configuration at a time.
inline std::vector<cplx> mps_expand_naive(const std::vector<DenseTensor>& site_tensors) {
    const int n = static_cast<int>(site_tensors.size());
    std::int64_t total = 1;
    for (const auto& t : site_tensors) total *= t.dim(1);
    std::vector<cplx> psi(total);
    for (std::int64_t x = 0; x < total; ++x) {
        std::int64_t rem = x;
        std::vector<std::int64_t> cfg(n);
        for (int c = n; c-- > 0;) {
            cfg[c] = rem % site_tensors[c].dim(1);
            rem /= site_tensors[c].dim(1);
        }
        std::vector<cplx> vec{cplx{1.0, 0.0}};
        for (int c = 0; c < n; ++c) {
            const auto& t = site_tensors[c];
            const std::int64_t dl = t.dim(0), d = t.dim(1), dr = t.dim(2);
            std::vector<cplx> nxt(dr, cplx{0.0, 0.0});
            for (std::int64_t b = 0; b < dr; ++b)
                for (std::int64_t a = 0; a < dl; ++a)
                    nxt[b] += vec[a] * t.data()[(a * d + cfg[c]) * dr + b];
            vec = std::move(nxt);
        }
        psi[x] = vec[0];
    }
    return psi;
}

inline double max_abs_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_abs_diff(const DenseTensor& a, const DenseTensor& b) {
    return max_abs_diff(a.data(), b.data());
}

} // namespace oracles
