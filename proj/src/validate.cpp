#include "sgs/validate.hpp"

#include <cmath>

#include "sgs/contraction.hpp"
#include "sgs/lattice.hpp"

namespace sgs {

namespace {
double max_abs_diff(const sv::State& a, const sv::State& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}
} // namespace

std::vector<CheckResult> oracle_battery(const ValidationConfig& cfg) {
    CheckResult norms{"norm vs statevector", true, 0.0, cfg.tol};
    CheckResult singles{"single-site expectation vs statevector", true, 0.0, cfg.tol};
    CheckResult pairs{"two-site expectation vs statevector", true, 0.0, cfg.tol};
    CheckResult energies{"energy vs statevector", true, 0.0, cfg.tol};
    CheckResult peps{"peps contraction vs statevector", true, 0.0, cfg.tol};
    CheckResult prep{"preparation replay vs statevector", true, 0.0, cfg.tol};

    std::uint64_t seed = cfg.base_seed;
    for (const auto& [h, v, bond] : cfg.lattices) {
        for (int k = 0; k < cfg.seeds_per_lattice; ++k, ++seed) {
            SGSState s = random_sgs(SGSParams{{h, v, 2}, 1, bond, 1}, seed);
            const auto psi = to_statevector(s);
            const int sites = h * v;

            norms.worst = std::max(norms.worst, std::abs(norm(s) - sv::norm(psi)));

            const int r1 = k % h, c1 = k % v;
            const int r2 = (k + 1) % h, c2 = (k + 2) % v;
            {
                ObservableSet obs;
                obs.singles[{r1, c1}] = pauli_z();
                const cplx want = sv::expectation(psi, pauli_z(), {r1 * v + c1}, sites, 2);
                singles.worst =
                    std::max(singles.worst, std::abs(expect_local(s, obs) - want));
            }
            if (r1 != r2 || c1 != c2) {
                ObservableSet obs;
                obs.singles[{r1, c1}] = pauli_z();
                obs.singles[{r2, c2}] = pauli_x();
                DenseTensor joint =
                    (r1 * v + c1) < (r2 * v + c2) ? kron(pauli_z(), pauli_x())
                                                  : kron(pauli_x(), pauli_z());
                std::vector<int> idx{std::min(r1 * v + c1, r2 * v + c2),
                                     std::max(r1 * v + c1, r2 * v + c2)};
                const cplx want = sv::expectation(psi, joint, idx, sites, 2);
                pairs.worst = std::max(pairs.worst, std::abs(expect_local(s, obs) - want));
            }
            {
                auto ham = build_hamiltonian(Model::Heisenberg, {h, v, 2});
                cplx want{0, 0};
                for (const auto& term : ham.terms) {
                    std::vector<int> idx;
                    for (auto [r, c] : term.sites) idx.push_back(r * v + c);
                    want += sv::expectation(psi, term.op, idx, sites, 2);
                }
                energies.worst =
                    std::max(energies.worst, std::abs(energy(s, ham) - want.real()));
            }
            peps.worst =
                std::max(peps.worst, max_abs_diff(contract_peps_dense(to_peps(s)), psi));
            prep.worst = std::max(prep.worst, max_abs_diff(replay(prepare_sequence(s)), psi));
        }
    }

    std::vector<CheckResult> out{norms, singles, pairs, energies, peps, prep};
    for (auto& c : out) c.pass = c.worst < c.tol;
    return out;
}

} // namespace sgs
