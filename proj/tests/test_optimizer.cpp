#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "sgs/contraction.hpp"
#include "sgs/lattice.hpp"
#include "sgs/linalg.hpp"
#include "sgs/optimizer.hpp"
#include "sgs/rng.hpp"
#include "sgs/sgs_state.hpp"

using namespace sgs;

namespace {
Hamiltonian field_z_model(int h, int v) {
    Hamiltonian ham;
    ham.spec = {h, v, 2};
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < v; ++c) ham.terms.push_back({{{r, c}}, pauli_z()});
    return ham;
}

double unitarity_defect(const DenseTensor& u) {
    DenseTensor g = contract(u.conj(), {0}, u, {0});
    return oracles::max_abs_diff(g, DenseTensor::identity(u.dim(0)));
}
} // namespace

TEST_CASE("row sweeps reach the product ground state of a field model") {
    auto ham = field_z_model(2, 3);
    SGSState s = random_sgs(SGSParams{{2, 3, 2}, 1, 2, 1}, 3);
    // Freeze the unitary layer at the identity so rows decide everything.
    for (auto& col : s.unitaries)
        for (auto& u : col) u = DenseTensor::identity(4);

    OptimizerOptions opts;
    double e = 0.0;
    for (int pass = 0; pass < 3; ++pass) {
        auto [next, e_now] = sweep_rows(s, ham, opts);
        s = std::move(next);
        e = e_now;
    }
    CHECK(e == doctest::Approx(-6.0).epsilon(1e-8));
    CHECK(energy(s, ham) == doctest::Approx(-6.0).epsilon(1e-8));
}

TEST_CASE("the first sweep strictly lowers the energy") {
    auto ham = build_hamiltonian(Model::Heisenberg, {4, 4, 2});
    SGSState s = random_sgs(SGSParams{{4, 4, 2}, 1, 2, 1}, 11);
    const double e0 = energy(s, ham);
    auto [next, e1] = sweep_rows(s, ham, OptimizerOptions{});
    CHECK(e1 < e0 - 1e-3);
    CHECK(energy(next, ham) == doctest::Approx(e1).epsilon(1e-9));
}

TEST_CASE("sweeping a converged state is a fixed point") {
    auto ham = field_z_model(2, 2);
    SGSState s = random_sgs(SGSParams{{2, 2, 2}, 1, 2, 1}, 5);
    OptimizerOptions opts;
    auto [opt, trace] = optimize(s, ham, opts);
    const double e_star = trace.final_energy();
    auto [again, e2] = sweep_rows(opt, ham, opts);
    CHECK(std::abs(e2 - e_star) < 1e-8);
}

TEST_CASE("an already optimal state returns in one outer iteration") {
    auto ham = field_z_model(2, 2);
    SGSState s = random_sgs(SGSParams{{2, 2, 2}, 1, 2, 1}, 5);
    OptimizerOptions opts;
    auto [opt, trace] = optimize(s, ham, opts);
    auto [opt2, trace2] = optimize(opt, ham, opts);
    CHECK(trace2.converged);
    CHECK(trace2.outer_iterations == 1);
    CHECK(std::abs(trace2.final_energy() - trace.final_energy()) < 1e-8);
}

TEST_CASE("unitary updates at an uninvolved column are null steps") {
    Hamiltonian ham;
    ham.spec = {3, 3, 2};
    ham.terms.push_back({{{0, 0}, {1, 0}}, kron(pauli_z(), pauli_z())});
    SGSState s = random_sgs(SGSParams{{3, 3, 2}, 1, 2, 1}, 7);
    auto [next, e] = optimize_unitary(s, ham, 0, 2, OptimizerOptions{});
    CHECK(oracles::max_abs_diff(next.unitaries[2][0], s.unitaries[2][0]) == 0.0);
}

TEST_CASE("unitary updates only accept strict decreases") {
    auto ham = build_hamiltonian(Model::Heisenberg, {3, 3, 2});
    SGSState s = random_sgs(SGSParams{{3, 3, 2}, 1, 2, 1}, 13);
    EnergyTrace trace;
    const double e0 = energy(s, ham);
    trace.add({"init", -1, -1, e0, 0.0, 0.0, true});
    SGSState cur = s;
    for (int c = 0; c < 3; ++c)
        for (int t = 1; t >= 0; --t) {
            auto [next, e] = optimize_unitary(cur, ham, t, c, OptimizerOptions{}, &trace);
            cur = std::move(next);
        }
    CHECK(trace.monotone(1e-12));
    CHECK(energy(cur, ham) < e0);
    for (int c = 0; c < 3; ++c)
        for (int t = 0; t < 2; ++t) CHECK(unitarity_defect(cur.unitaries[c][t]) < 1e-10);
}

TEST_CASE("first-order model matches small accepted steps") {
    auto ham = build_hamiltonian(Model::Heisenberg, {3, 3, 2});
    SGSState s = random_sgs(SGSParams{{3, 3, 2}, 1, 2, 1}, 17);
    OptimizerOptions opts;
    opts.delta0 = 1e-3;
    opts.u_inner_cap = 3;
    EnergyTrace trace;
    double prev = energy(s, ham);
    SGSState cur = s;
    auto [next, e] = optimize_unitary(cur, ham, 1, 1, opts, &trace);
    int checked = 0;
    for (const auto& rec : trace.records) {
        if (!rec.accepted || rec.phase != "u-phase") continue;
        const double actual = rec.energy - prev;
        CHECK(std::abs(actual - rec.predicted_change) <
              0.3 * std::max(std::abs(rec.predicted_change), 1e-14));
        prev = rec.energy;
        ++checked;
    }
    CHECK(checked > 0);
}

TEST_CASE("small-lattice optimization approaches the exact ground state") {
    auto ham = build_hamiltonian(Model::Heisenberg, {2, 2, 2});
    auto [e_exact, vec] = exact_ground(ham);
    REQUIRE(e_exact == doctest::Approx(-8.0).epsilon(1e-9));

    OptimizerOptions opts;
    opts.max_outer_iterations = 60;
    double best = 0.0;
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        SGSState s0 = random_sgs(SGSParams{{2, 2, 2}, 1, 2, 1}, seed);
        auto [opt, trace] = optimize(s0, ham, opts);
        CHECK(trace.monotone(1e-12));
        best = std::min(best, trace.final_energy());
    }
    CHECK(best <= 0.95 * e_exact); // within 5%
    CHECK(best >= e_exact - 1e-9); // variational bound
}

TEST_CASE("gauge moves leave the energy invariant") {
    auto ham = build_hamiltonian(Model::Heisenberg, {3, 3, 2});
    SGSState s = random_sgs(SGSParams{{3, 3, 2}, 1, 2, 1}, 19);
    const double e0 = energy(s, ham);
    for (int site : {0, 1, 2}) {
        SGSState g = s;
        g.rows[1] = canonicalize(g.rows[1], site);
        CHECK(energy(g, ham) == doctest::Approx(e0).epsilon(1e-10));
    }
}

TEST_CASE("optimization is deterministic") {
    auto ham = build_hamiltonian(Model::Heisenberg, {2, 3, 2});
    OptimizerOptions opts;
    opts.max_outer_iterations = 4;
    SGSState s0 = random_sgs(SGSParams{{2, 3, 2}, 1, 2, 1}, 23);
    auto [s1, t1] = optimize(s0, ham, opts);
    auto [s2, t2] = optimize(s0, ham, opts);
    REQUIRE(t1.records.size() == t2.records.size());
    for (std::size_t i = 0; i < t1.records.size(); ++i) {
        CHECK(t1.records[i].energy == t2.records[i].energy);
        CHECK(t1.records[i].delta == t2.records[i].delta);
    }
}

TEST_CASE("blocked-family optimization runs on the blocked lattice") {
    auto ham = build_hamiltonian(Model::Heisenberg, {2, 2, 2});
    SGSState s0 = random_sgs(SGSParams{{2, 2, 2}, 1, 4, 2}, 29); // one effective row
    OptimizerOptions opts;
    opts.max_outer_iterations = 40;
    auto [opt, trace] = optimize(s0, ham, opts);
    CHECK(trace.monotone(1e-12));
    // N = H makes the family complete (a width-2 MPS of dimension-4 sites
    // with D = 4), so the optimizer should essentially reach the ground state.
    CHECK(trace.final_energy() == doctest::Approx(-8.0).epsilon(1e-5));
}

TEST_CASE("optimizer options are validated") {
    OptimizerOptions bad;
    bad.delta0 = 1e-9;
    bad.delta_min = 1e-3;
    auto ham = field_z_model(2, 2);
    SGSState s = random_sgs(SGSParams{{2, 2, 2}, 1, 2, 1}, 31);
    CHECK_THROWS_AS(optimize(s, ham, bad), ValidationError);
}
