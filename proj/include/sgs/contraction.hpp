#pragma once

#include <map>
#include <optional>
#include <vector>

#include "sgs/lattice.hpp"
#include "sgs/sgs_state.hpp"

namespace sgs {

/// Observable request on the effective lattice: single-site operators plus at
/// most one joint two-site operator on a nearest-neighbor pair.
struct ObservableSet {
    /// (row, col) -> operator of extent eff_dim x eff_dim.
    std::map<std::pair<int, int>, DenseTensor> singles;
    struct JointPair {
        std::pair<int, int> a, b; // lexicographic order; same row or same column
        DenseTensor op;           // composite index (site a, site b)
    };
    std::optional<JointPair> pair;
};

struct LadderStep {
    std::string kind;
    std::int64_t intermediate_entries = 0;
    std::int64_t cost = 0;
};

/// Contraction plan for one expectation value: involved columns, the reduced
/// density matrices required per row, and the predicted step costs. In the
/// bulk two-column case the dominant step cost stays within a fixed small
/// multiple of d^2 D^6.
struct LadderPlan {
    std::vector<int> columns;
    std::vector<std::pair<int, std::vector<int>>> row_rdms;
    std::vector<LadderStep> steps;
    std::int64_t peak_intermediate = 0;
    std::int64_t dominant_cost = 0;
    int first_fold_row = 0;
};

struct ExpectOptions {
    int max_sites = 2;
    /// Raising the site cap past the default requires an explicit
    /// acknowledgment that the cost grows exponentially with it.
    bool ack_cost = false;
    int max_sites_acked = 6;
};

LadderPlan plan_expectation(const SGSState& s, const ObservableSet& obs);

/// State norm: product of the row-MPS norms (the column unitaries cancel).
double norm(const SGSState& s);

/// Exact <Psi| O |Psi> through the ladder network; only unitaries on involved
/// columns at or below the operator rows enter the contraction.
cplx expect_local(const SGSState& s, const ObservableSet& obs, const ExpectOptions& opts = {});

/// <Psi|H|Psi> / <Psi|Psi>. Accepts a Hamiltonian on the effective lattice,
/// or on the physical lattice of a blocked state (blocked internally).
double energy(const SGSState& s, const Hamiltonian& h);

/// Location of a removed tensor.
struct Hole {
    enum class Kind { RowTensor, Unitary } kind;
    int row = 0; // RowTensor: effective row; Unitary: top row t of the span
    int col = 0;
};

/// Contraction of <Psi|H|Psi> with one tensor removed. For a row-tensor hole
/// (with the row gauged to the hole site) the tensor is the Hermitian
/// quadratic form on (left bond, phys, right bond); for a unitary hole it is
/// the gradient Gamma with dE/d(delta) = 2 Re[i delta tr(K Gamma)] along
/// U = exp(i delta K) U0.
struct Environment {
    Hole hole;
    DenseTensor tensor;
    /// RowTensor only: the gauged state the environment refers to, plus the
    /// constant energy offset of terms not touching the hole row.
    std::optional<SGSState> gauged;
};

Environment environment(const SGSState& s, const Hamiltonian& h, const Hole& hole);

namespace detail {

/// One expectation value engine bound to a state; caches per-row reduced
/// density matrices keyed by the involved column set.
class LadderEngine {
public:
    explicit LadderEngine(const SGSState* s) : s_(s) {}

    struct Term {
        std::vector<int> cols; // ascending, size 1..3
        // (row, slot) -> single-site op
        std::map<std::pair<int, int>, DenseTensor> singles;
        struct PairOp {
            bool vertical = false;
            int row = 0;           // vertical: upper row; horizontal: the row
            int slot_a = 0, slot_b = 0; // horizontal: two slots; vertical: slot_a
            DenseTensor op;
        };
        std::optional<PairOp> pair;
        int min_op_row = 0;
        std::vector<int> t0;   // per slot: unitaries below this step cancelled
        int tmin = 0;          // first fold step
    };

    Term make_term(const ObservableSet& obs) const;
    Term make_term(const HamiltonianTerm& t) const;

    /// <Psi| term |Psi> (no norm division).
    cplx value(const Term& term) const;
    /// Effective observable W on the term's slots for one row: the term's
    /// value equals tr(W rho) with rho the row's slot RDM.
    DenseTensor row_hole(const Term& term, int row) const;
    /// Quadratic environment of one column unitary: modes (out, in, out', in')
    /// with value = sum env2 * U[out,in] * conj(U[out',in']).
    DenseTensor gate_hole(const Term& term, int t, int col) const;

    void invalidate_row(int row);
    const SGSState& state() const { return *s_; }
    void rebind(const SGSState* s) { s_ = s; }

    const DenseTensor& rdm(int row, const std::vector<int>& cols) const;

private:
    const SGSState* s_;
    mutable std::map<std::pair<int, std::vector<int>>, DenseTensor> rdm_cache_;
};

} // namespace detail

} // namespace sgs
