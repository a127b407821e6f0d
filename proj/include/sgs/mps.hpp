#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "sgs/tensor.hpp"

namespace sgs {

/// Open-boundary matrix product state for one lattice row. Site tensors have
/// modes (left bond, physical, right bond) with boundary bonds of extent 1.
/// Physical dimensions may vary per site (used by purification chains).
struct MPSRow {
    std::vector<DenseTensor> tensors;
    /// Orthogonality center if known: tensors left of it are left isometries,
    /// tensors right of it are right isometries. -1 = unknown gauge.
    int center = -1;

    int length() const { return static_cast<int>(tensors.size()); }
    std::int64_t phys_dim(int c) const { return tensors.at(c).dim(1); }
    std::int64_t bond(int c) const { return tensors.at(c).dim(2); } // right bond of site c

    void validate_shapes() const;
};

/// Deterministic random MPS: normalized, canonical at site 0.
MPSRow random_mps(int length, int phys_dim, int bond_dim, std::uint64_t seed);

/// Gauge the row so `site` is the orthogonality center. The state vector is
/// unchanged up to a global phase; the center tensor is normalized and its
/// first nonzero entry is made real non-negative.
MPSRow canonicalize(const MPSRow& m, int site);

double mps_norm(const MPSRow& m);

/// D^2 x D^2 transfer matrix E_O with (bra, ket) bond pairing on both sides.
DenseTensor transfer_matrix(const DenseTensor& site_tensor, const DenseTensor& op);

/// <m| prod_c O_c |m> with identity at unlisted sites; empty ops gives the
/// squared norm.
cplx expectation_chain(const MPSRow& m, const std::map<int, DenseTensor>& ops);

/// Reduced density matrices (ket-major index pairs), unit trace for
/// normalized rows.
DenseTensor one_site_rdm(const MPSRow& m, int c);
DenseTensor two_site_rdm(const MPSRow& m, int c1, int c2);
/// RDM on an ascending list of sites; composite index in site order.
DenseTensor multi_site_rdm(const MPSRow& m, const std::vector<int>& cols);

/// Brute-force amplitude vector (site 0 most significant).
std::vector<cplx> mps_statevector(const MPSRow& m);

cplx mps_overlap(const MPSRow& a, const MPSRow& b); // <a|b>

} // namespace sgs
