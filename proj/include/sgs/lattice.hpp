#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sgs/tensor.hpp"

namespace sgs {

/// Open-boundary H x V lattice of qudits with local dimension d.
struct LatticeSpec {
    int rows = 1;     // H
    int cols = 1;     // V
    int local_dim = 2; // d

    int sites() const { return rows * cols; }
    /// Register index of site (r, c): row-major, site (0,0) most significant.
    int site_index(int r, int c) const { return r * cols + c; }
    /// d^sites, throws ResourceError beyond `cap`.
    std::int64_t hilbert_dim(std::int64_t cap) const;
    bool operator==(const LatticeSpec&) const = default;
};

/// One- or two-site Hermitian term. Two-site terms act on nearest neighbors;
/// the operator's composite index orders the listed sites first-major.
struct HamiltonianTerm {
    std::vector<std::pair<int, int>> sites; // (row, col), lexicographic order
    DenseTensor op;
};

struct Hamiltonian {
    LatticeSpec spec;
    std::vector<HamiltonianTerm> terms;
    std::optional<std::uint64_t> seed;
    std::string model_name;
    std::string convention; // frustration / rng conventions recorded in outputs
};

enum class Model { Heisenberg, FrustratedXX, Random2Body };

Model model_from_name(const std::string& name);
std::string model_name(Model m);

DenseTensor pauli_x();
DenseTensor pauli_y();
DenseTensor pauli_z();

/// Nearest-neighbor test Hamiltonians on an open H x V lattice. Edge order is
/// all horizontal edges then all vertical edges, row-major. The frustrated
/// model flips the sign of every fourth edge counted from one along each
/// direction; the random model draws each edge term as (M + M^dag)/2 with
/// Gaussian M from the seeded stream.
Hamiltonian build_hamiltonian(Model model, const LatticeSpec& spec,
                              std::optional<std::uint64_t> seed = std::nullopt);

/// Map a Hamiltonian onto the blocked (H/N) x V lattice of d^N-dimensional
/// effective sites. Terms landing on the same effective site/edge are merged.
Hamiltonian block_hamiltonian(const Hamiltonian& h, int block_rows);

/// Embed `op` acting on the given qudit positions into an n-qudit operator.
DenseTensor embed_sites(const DenseTensor& op, const std::vector<int>& positions,
                        int num_qudits, int d);

/// Full Hamiltonian matrix (dense); intended for small systems.
DenseTensor assemble_dense(const Hamiltonian& h);

/// y = H x, matrix-free.
void apply_hamiltonian(const Hamiltonian& h, const cplx* x, cplx* y);

struct ExactOptions {
    std::int64_t hilbert_cap = 1 << 20;
    std::int64_t dense_cap = 2048;
    std::uint64_t seed = 0x9d2c5680;
    double residual_tol = 1e-10;
};

/// Ground energy and unit-norm ground state of the full Hamiltonian: dense
/// diagonalization up to dense_cap, restarted Lanczos above. The returned
/// pair always satisfies |H v - E v| < 1e-8.
std::pair<double, DenseTensor> exact_ground(const Hamiltonian& h, const ExactOptions& opts = {});

} // namespace sgs
