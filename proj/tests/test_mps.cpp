#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "sgs/lattice.hpp"
#include "sgs/linalg.hpp"
#include "sgs/mps.hpp"
#include "sgs/rng.hpp"

using namespace sgs;

namespace {
MPSRow product_state(const std::vector<std::vector<cplx>>& site_vectors) {
    MPSRow m;
    for (const auto& v : site_vectors) {
        DenseTensor t({1, static_cast<std::int64_t>(v.size()), 1});
        t.data() = v;
        m.tensors.push_back(t);
    }
    return m;
}

std::vector<cplx> naive_vec(const MPSRow& m) { return oracles::mps_expand_naive(m.tensors); }

cplx naive_overlap(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    cplx s{0, 0};
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}
} // namespace

TEST_CASE("random_mps with one site is a normalized vector") {
    MPSRow m = random_mps(1, 3, 4, 17);
    CHECK(m.length() == 1);
    CHECK(m.tensors[0].dim(0) == 1);
    CHECK(m.tensors[0].dim(2) == 1);
    CHECK(std::abs(m.tensors[0].norm() - 1.0) < 1e-12);
}

TEST_CASE("random_mps is deterministic per seed") {
    MPSRow a = random_mps(5, 2, 3, 7);
    MPSRow b = random_mps(5, 2, 3, 7);
    for (int c = 0; c < 5; ++c)
        for (std::int64_t i = 0; i < a.tensors[c].numel(); ++i) {
            CHECK(a.tensors[c].data()[i].real() == b.tensors[c].data()[i].real());
            CHECK(a.tensors[c].data()[i].imag() == b.tensors[c].data()[i].imag());
        }
}

TEST_CASE("random_mps expands to a unit-norm state vector") {
    MPSRow m = random_mps(6, 2, 4, 23);
    auto psi = naive_vec(m);
    double n2 = 0.0;
    for (auto& v : psi) n2 += std::norm(v);
    CHECK(std::sqrt(n2) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(mps_norm(m) - 1.0) < 1e-12);
}

TEST_CASE("canonicalize is idempotent at the same site") {
    MPSRow m = random_mps(5, 2, 3, 31);
    MPSRow once = canonicalize(m, 2);
    MPSRow twice = canonicalize(once, 2);
    for (int c = 0; c < 5; ++c)
        CHECK(oracles::max_abs_diff(once.tensors[c], twice.tensors[c]) < 1e-12);
}

TEST_CASE("canonicalize of a product row leaves unit-norm site tensors") {
    const cplx h = cplx{1.0 / std::sqrt(2.0), 0};
    MPSRow m = product_state({{h, h}, {h, h}, {h, h}});
    MPSRow c = canonicalize(m, 1);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(c.tensors[k].norm() - 1.0) < 1e-12);
}

TEST_CASE("canonicalize preserves the state and sets isometries") {
    MPSRow m = random_mps(6, 2, 3, 47);
    auto before = naive_vec(m);
    MPSRow c = canonicalize(m, 3);
    auto after = naive_vec(c);
    CHECK(std::abs(std::abs(naive_overlap(before, after)) - 1.0) < 1e-10);

    // Left isometries before the center, right isometries after it.
    for (int k = 0; k < 3; ++k) {
        const DenseTensor& a = c.tensors[k];
        DenseTensor g = contract(a.conj(), {0, 1}, a, {0, 1});
        CHECK(oracles::max_abs_diff(g, DenseTensor::identity(a.dim(2))) < 1e-12);
    }
    for (int k = 4; k < 6; ++k) {
        const DenseTensor& a = c.tensors[k];
        DenseTensor g = contract(a, {1, 2}, a.conj(), {1, 2});
        CHECK(oracles::max_abs_diff(g, DenseTensor::identity(a.dim(0))) < 1e-12);
    }
}

TEST_CASE("transfer matrix of trivial bond tensors") {
    DenseTensor a({1, 2, 1}, {cplx{1, 0}, cplx{0, 0}}); // |0>
    DenseTensor ez = transfer_matrix(a, pauli_z());
    CHECK(ez.shape() == std::vector<std::int64_t>{1, 1});
    CHECK(std::abs(ez.as_scalar() - cplx{1, 0}) < 1e-14);
    DenseTensor ex = transfer_matrix(a, pauli_x());
    CHECK(std::abs(ex.as_scalar()) < 1e-14);
}

TEST_CASE("transfer matrix matches the direct index sum") {
    rng::Stream s(61);
    DenseTensor a = rng::gaussian_tensor({3, 2, 3}, s);
    DenseTensor e = transfer_matrix(a, pauli_y());
    const DenseTensor o = pauli_y();
    for (std::int64_t ap = 0; ap < 3; ++ap)
        for (std::int64_t av = 0; av < 3; ++av)
            for (std::int64_t bp = 0; bp < 3; ++bp)
                for (std::int64_t bv = 0; bv < 3; ++bv) {
                    cplx acc{0, 0};
                    for (std::int64_t i = 0; i < 2; ++i)
                        for (std::int64_t ip = 0; ip < 2; ++ip)
                            acc += o.at({ip, i}) * std::conj(a.at({ap, ip, bp})) * a.at({av, i, bv});
                    CHECK(std::abs(e.at({ap * 3 + av, bp * 3 + bv}) - acc) < 1e-12);
                }
}

TEST_CASE("left-canonical transfer matrix has leading eigenvalue one") {
    MPSRow m = random_mps(5, 2, 3, 73);
    MPSRow c = canonicalize(m, 4);
    const DenseTensor& a = c.tensors[2]; // left of center and square-bonded
    auto [vals, vecs] = complex_eig(transfer_matrix(a, DenseTensor::identity(2)));
    CHECK(std::abs(vals[0]) == doctest::Approx(1.0).epsilon(1e-10));
    for (auto& v : vals) CHECK(std::abs(v) < 1.0 + 1e-10);
}

TEST_CASE("expectation_chain basics") {
    MPSRow m = random_mps(5, 2, 3, 83);
    CHECK(std::abs(expectation_chain(m, {}) - cplx{1, 0}) < 1e-12);

    MPSRow zero = product_state({{cplx{1, 0}, cplx{0, 0}},
                                 {cplx{1, 0}, cplx{0, 0}},
                                 {cplx{1, 0}, cplx{0, 0}}});
    CHECK(std::abs(expectation_chain(zero, {{1, pauli_z()}}) - cplx{1, 0}) < 1e-14);

    // All-identity observables give the squared norm.
    MPSRow scaled = m;
    scaled.tensors[2] = scaled.tensors[2].scaled(cplx{2.0, 0.0});
    std::map<int, DenseTensor> ids;
    for (int c = 0; c < 5; ++c) ids.emplace(c, DenseTensor::identity(2));
    CHECK(std::abs(expectation_chain(scaled, ids) - cplx{4, 0}) < 1e-10);
    CHECK(std::abs(mps_norm(scaled) - 2.0) < 1e-10);
}

TEST_CASE("expectation_chain matches the brute-force state vector") {
    MPSRow m = random_mps(6, 2, 3, 97);
    auto psi = naive_vec(m);
    std::map<int, DenseTensor> ops{{1, pauli_x()}, {3, pauli_z()}};
    const cplx got = expectation_chain(m, ops);

    // <psi| X_1 Z_3 |psi> on the naive vector.
    cplx want{0, 0};
    for (std::int64_t x = 0; x < 64; ++x) {
        std::int64_t flipped = x ^ (1LL << 4); // site 1 of 6, row-major bit
        const double zsign = ((x >> 2) & 1) ? -1.0 : 1.0;
        want += std::conj(psi[flipped]) * zsign * psi[x];
    }
    CHECK(std::abs(got - want) < 1e-10);
}

TEST_CASE("two-site reduced density matrix of a product row factorizes") {
    const cplx h = cplx{1.0 / std::sqrt(2.0), 0};
    MPSRow m = product_state({{h, h}, {cplx{1, 0}, cplx{0, 0}}, {cplx{0, 0}, cplx{1, 0}}});
    DenseTensor rho = two_site_rdm(m, 0, 2);
    // |+><+| tensor |1><1|
    for (std::int64_t i = 0; i < 4; ++i)
        for (std::int64_t j = 0; j < 4; ++j) {
            const std::int64_t i2 = i & 1, j2 = j & 1;
            const cplx want = (i2 == 1 && j2 == 1) ? cplx{0.5, 0} : cplx{0, 0};
            CHECK(std::abs(rho.at({i, j}) - want) < 1e-12);
        }
}

TEST_CASE("two-site reduced density matrix matches the partial-trace oracle") {
    MPSRow m = random_mps(6, 2, 4, 113);
    DenseTensor rho = two_site_rdm(m, 2, 5);
    auto psi = naive_vec(m);

    DenseTensor want({4, 4});
    for (std::int64_t x = 0; x < 64; ++x)
        for (std::int64_t y = 0; y < 64; ++y) {
            const std::int64_t mask = (1LL << 3) | (1LL << 0); // bits for sites 2,5 of 6
            if ((x & ~mask) != (y & ~mask)) continue;
            const std::int64_t a = ((x >> 3) & 1) * 2 + (x & 1);
            const std::int64_t b = ((y >> 3) & 1) * 2 + (y & 1);
            want.data()[a * 4 + b] += psi[x] * std::conj(psi[y]);
        }
    CHECK(oracles::max_abs_diff(rho, want) < 1e-10);

    // Hermitian, unit trace, PSD.
    CHECK(hermiticity_defect(rho) < 1e-10);
    cplx tr{0, 0};
    for (int i = 0; i < 4; ++i) tr += rho.at({i, i});
    CHECK(std::abs(tr - cplx{1, 0}) < 1e-10);
    for (double ev : oracles::jacobi_herm_eigenvalues(rho)) CHECK(ev > -1e-10);
}

TEST_CASE("two-site rdm partial-traced matches the one-site rdm") {
    MPSRow m = random_mps(5, 2, 3, 131);
    DenseTensor rho2 = two_site_rdm(m, 1, 3).reshape({2, 2, 2, 2});
    DenseTensor left = partial_trace(rho2, {{1, 3}});  // trace site 3 -> rdm at 1
    DenseTensor right = partial_trace(rho2, {{0, 2}}); // trace site 1 -> rdm at 3
    CHECK(oracles::max_abs_diff(left, one_site_rdm(m, 1)) < 1e-10);
    CHECK(oracles::max_abs_diff(right, one_site_rdm(m, 3)) < 1e-10);
    CHECK_THROWS_AS(two_site_rdm(m, 3, 1), DimensionError);
}

TEST_CASE("overlap after canonicalization is one in modulus") {
    MPSRow m = random_mps(7, 2, 4, 139);
    MPSRow c = canonicalize(m, 5);
    CHECK(std::abs(std::abs(mps_overlap(m, c)) - 1.0) < 1e-10);
}
