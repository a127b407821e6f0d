#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sgs/lattice.hpp"
#include "sgs/mps.hpp"
#include "sgs/statevector.hpp"
#include "sgs/tensor.hpp"

namespace sgs {

/// Parameters of an SGS / B-SGS state on an H x V physical lattice.
/// N physical rows are grouped into one effective row of local dimension d^N
/// (N = 1 is a plain SGS). Row MPS have bond dimension at most D; column
/// unitaries act on M+1 consecutive effective rows.
struct SGSParams {
    LatticeSpec physical;
    int M = 1;
    int D = 2;
    int N = 1;

    int eff_rows() const { return physical.rows / N; }
    std::int64_t eff_dim() const;     // d^N
    std::int64_t unitary_dim() const; // (d^N)^(M+1)
    /// Unitaries per column; zero when the lattice is too shallow for any.
    int unitaries_per_column() const { return std::max(0, eff_rows() - M); }
    void validate() const;
    bool operator==(const SGSParams&) const = default;
};

/// Sequentially generated state: one MPS per effective row plus the ordered
/// column unitaries.
///
/// Conventions (recorded in the file format):
///   - effective rows are indexed 0 (top) .. eff_rows-1 (bottom);
///   - unitaries[c][t] acts on effective rows t..t+M of column c, its matrix
///     composite index ordering those rows top-first, U[out][in];
///   - the state is all row MPS first, then per column the unitaries applied
///     for t = eff_rows-M-1 (bottommost span) down to t = 0.
struct SGSState {
    SGSParams params;
    std::vector<MPSRow> rows;
    std::vector<std::vector<DenseTensor>> unitaries; // [column][t]

    int eff_rows() const { return params.eff_rows(); }
    int cols() const { return params.physical.cols; }
};

inline constexpr std::int64_t kDefaultStatevectorCap = 1ll << 22;

/// Validated constructor: checks shapes, row normalization (1e-8) and
/// unitarity (1e-8).
SGSState new_sgs(SGSParams params, std::vector<MPSRow> rows,
                 std::vector<std::vector<DenseTensor>> unitaries);

/// Constructor that skips validation (test hooks, scaled-row experiments).
SGSState unchecked_sgs(SGSParams params, std::vector<MPSRow> rows,
                       std::vector<std::vector<DenseTensor>> unitaries);

/// Deterministic random state: seeded random rows and identity-perturbed
/// random unitaries exp(i * scale * K).
SGSState random_sgs(const SGSParams& params, std::uint64_t seed, double unitary_scale = 0.2);

/// Translationally invariant description: one site tensor (d, D, D) for every
/// row site and one column unitary everywhere.
SGSState ti_sgs(const DenseTensor& site_tensor, const DenseTensor& unitary, int rows, int cols,
                int m_span = 1);

/// Cluster state on an H x V lattice (d = 2): rows carry the horizontal
/// controlled-Z structure as D = 2 MPS, columns apply vertical controlled-Z.
SGSState cluster_state(const LatticeSpec& spec);

/// Group N physical rows per effective site: row MPS become Kronecker
/// products (bond D^N), unitaries start as identities on the blocked lattice.
SGSState block_rows(const std::vector<MPSRow>& physical_rows, int N, int m_span);

/// Product of the row-MPS norms (= state norm for unitary column layers).
double row_norm_product(const SGSState& s);

/// Brute-force amplitude vector over the physical lattice, row-major site
/// order. Throws ResourceError above the cap.
sv::State to_statevector(const SGSState& s, std::int64_t cap = kDefaultStatevectorCap);

/// One gate of a preparation sequence; sites are physical coordinates, listed
/// most-significant-first for the gate's composite index.
struct PrepGate {
    DenseTensor gate;
    std::vector<std::pair<int, int>> sites;
};

struct PrepSequence {
    LatticeSpec physical;
    std::vector<PrepGate> gates;
};

/// Sequential preparation: per-row staircases building the MPS, then the
/// column unitaries bottom-up. For a plain SGS with D = d^M the gate count is
/// H(V-M) + V(H-M).
PrepSequence prepare_sequence(const SGSState& s);

/// Apply the sequence to |0...0>.
sv::State replay(const PrepSequence& seq, std::int64_t cap = kDefaultStatevectorCap);

/// PEPS export: grid of tensors with modes (l, u, r, d, phys).
struct PepsGrid {
    int rows = 0, cols = 0;
    std::vector<DenseTensor> tensors; // row-major
    const DenseTensor& at(int r, int c) const { return tensors.at(r * cols + c); }
    DenseTensor& at(int r, int c) { return tensors.at(r * cols + c); }
};

/// Exact PEPS form of the state. Bulk tensors follow the single product
/// U * A; the top M rows are obtained by singular value splitting and the
/// bottom row absorbs the lowest row tensors. B-SGS tensors are further split
/// into per-physical-site tensors along the vertical direction.
PepsGrid to_peps(const SGSState& s);

/// Brute-force contraction of a PEPS grid to the amplitude vector (row-major
/// physical sites). Small lattices only.
sv::State contract_peps_dense(const PepsGrid& grid, std::int64_t cap = kDefaultStatevectorCap);

} // namespace sgs
