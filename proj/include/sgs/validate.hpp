#pragma once

#include <string>
#include <vector>

#include "sgs/sgs_state.hpp"

namespace sgs {

struct CheckResult {
    std::string name;
    bool pass = false;
    double worst = 0.0; // largest deviation observed
    double tol = 0.0;
};

struct ValidationConfig {
    /// (rows, cols, bond D) of the seeded instances; d = 2, M = 1.
    std::vector<std::array<int, 3>> lattices{
        {2, 2, 2}, {2, 3, 2}, {3, 2, 3}, {3, 3, 2}, {2, 4, 4}, {3, 4, 2}};
    int seeds_per_lattice = 4;
    double tol = 1e-9;
    std::uint64_t base_seed = 1000;
};

/// Oracle-equivalence battery: norms, one- and two-site expectations,
/// energies, PEPS contraction and preparation replay all compared against the
/// brute-force statevector on every seeded instance.
std::vector<CheckResult> oracle_battery(const ValidationConfig& cfg = {});

} // namespace sgs
