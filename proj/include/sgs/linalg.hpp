#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "sgs/tensor.hpp"

namespace sgs {

/// Result of a (possibly truncated) singular value decomposition.
/// left_isometry has the row modes plus a trailing rank mode; right_isometry
/// has a leading rank mode plus the column modes and already carries the
/// conjugate transpose (reconstruction is left * diag(S) * right).
struct SvdResult {
    DenseTensor left_isometry;
    std::vector<double> singular_values; // descending
    DenseTensor right_isometry;
    double truncation_error = 0.0;
};

/// SVD across the (row_modes | col_modes) bipartition of t.
SvdResult svd(const DenseTensor& t, const std::vector<int>& row_modes,
              const std::vector<int>& col_modes,
              std::optional<std::int64_t> max_keep = std::nullopt);

enum class Extreme { Smallest, Largest };

/// Relative Hermiticity defect max|H - H^dag| / max(1, max|H|).
double hermiticity_defect(const DenseTensor& h);

/// Extreme eigenpair of a Hermitian matrix (2-mode square tensor). Inputs
/// within 1e-10 of Hermitian are symmetrized; beyond that they are rejected.
/// Dense solve up to `dense_cap`, restarted Lanczos above.
std::pair<double, DenseTensor> herm_eig_extreme(const DenseTensor& h, Extreme which,
                                                std::int64_t dense_cap = 4096);

/// Full spectrum (ascending) and eigenvector columns of a Hermitian matrix.
std::pair<std::vector<double>, DenseTensor> herm_eig_full(const DenseTensor& h);

/// Full spectrum of a general complex matrix, sorted by descending modulus,
/// with matching right eigenvector columns.
std::pair<std::vector<cplx>, DenseTensor> complex_eig(const DenseTensor& m);

/// exp(i * delta * K) for Hermitian K, computed by eigendecomposition so the
/// result is unitary by construction.
DenseTensor unitary_exp(const DenseTensor& k, double delta);

/// Hermitian square root of a PSD matrix (small negative eigenvalues clipped).
DenseTensor herm_sqrt(const DenseTensor& rho);

struct LanczosResult {
    double value = 0.0;
    std::vector<cplx> vector;
    double residual = 0.0;
    int matvecs = 0;
};

/// Smallest (or largest) eigenpair of an implicit Hermitian operator by
/// restarted Lanczos with full reorthogonalization. Converges on the explicit
/// residual |A v - lambda v| <= tol * max(1, |lambda|).
LanczosResult lanczos_extreme(const std::function<void(const cplx*, cplx*)>& apply,
                              std::int64_t n, Extreme which, std::uint64_t seed,
                              double tol = 1e-10, int max_basis = 64, int max_restarts = 200);

} // namespace sgs
