#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgs/contraction.hpp"
#include "sgs/lattice.hpp"
#include "sgs/sgs_state.hpp"

namespace sgs {

struct OptimizerOptions {
    int max_outer_iterations = 200;
    /// Relative energy change over one full outer iteration that counts as
    /// converged.
    double tolerance = 1e-8;
    /// Line-search start and floor for the unitary updates.
    double delta0 = 0.2;
    double delta_min = 1e-7;
    /// Inner iterations per unitary (generator recomputed each time).
    int u_inner_cap = 30;
    double init_unitary_scale = 0.2;
    std::int64_t dense_eig_cap = 4096;

    void validate() const;
};

struct TraceRecord {
    std::string phase; // "init" | "a-sweep" | "u-phase" | "outer"
    int row = -1;
    int col = -1;
    double energy = 0.0;
    double delta = 0.0;           // accepted step length (u-phase)
    double predicted_change = 0.0; // first-order estimate delta * slope
    bool accepted = true;
};

struct EnergyTrace {
    std::vector<TraceRecord> records;
    bool converged = false;
    int outer_iterations = 0;

    void add(TraceRecord r) { records.push_back(std::move(r)); }
    /// Accepted-step energies never increase beyond the tolerance.
    bool monotone(double tol = 1e-12) const;
    double final_energy() const;
};

/// Alternating variational minimization: per outer iteration one full pass of
/// row-tensor updates (each row swept left-right-left in mixed-canonical
/// gauge) followed by one bottom-up pass of unitary updates on every column.
std::pair<SGSState, EnergyTrace> optimize(const SGSState& s0, const Hamiltonian& h,
                                          const OptimizerOptions& opts);

/// One full row phase over all rows; each site update solves the smallest
/// eigenpair of the Hermitian site environment. Returns the updated state and
/// its energy.
std::pair<SGSState, double> sweep_rows(const SGSState& s, const Hamiltonian& h,
                                       const OptimizerOptions& opts,
                                       EnergyTrace* trace = nullptr);

/// Iterated first-order unitary update at one location: the generator is the
/// unit-Frobenius Hermitian direction opposite the energy gradient, the step
/// is found by backtracking, and a step is accepted only if the energy
/// strictly decreases.
std::pair<SGSState, double> optimize_unitary(const SGSState& s, const Hamiltonian& h, int t,
                                             int col, const OptimizerOptions& opts,
                                             EnergyTrace* trace = nullptr);

} // namespace sgs
