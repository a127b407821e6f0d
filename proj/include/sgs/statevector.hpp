#pragma once

#include <vector>

#include "sgs/tensor.hpp"

namespace sgs::sv {

/// Full amplitude vector of a register of `num_sites` qudits with uniform
/// local dimension d, row-major over sites (site 0 most significant).
using State = std::vector<cplx>;

/// psi <- G psi with G acting on `sites` (most significant first).
void apply_gate(State& psi, const DenseTensor& gate, const std::vector<int>& sites,
                int num_sites, int d);

/// <psi| Op_embedded |psi> with Op acting on `sites`.
cplx expectation(const State& psi, const DenseTensor& op, const std::vector<int>& sites,
                 int num_sites, int d);

/// Reduced density matrix on `sites` (ket row index, bra column index).
DenseTensor reduced_density(const State& psi, const std::vector<int>& sites,
                            int num_sites, int d);

double norm(const State& psi);
cplx overlap(const State& a, const State& b); // <a|b>

} // namespace sgs::sv
