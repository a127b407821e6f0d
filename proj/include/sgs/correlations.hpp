#pragma once

#include <string>
#include <vector>

#include "sgs/mps.hpp"
#include "sgs/sgs_state.hpp"

namespace sgs {

/// Spectrum of the identity transfer matrix of a translationally invariant
/// site tensor, sorted by descending modulus.
struct TransferSpectrum {
    std::vector<cplx> eigenvalues;
    double ratio = 0.0; // |lambda_2 / lambda_1|, 0 when absent
    bool degenerate = false;

    /// Decay estimator (lambda2/lambda1)^(delta - 1); 0 when no lambda2.
    double epsilon(int delta) const {
        if (eigenvalues.size() < 2) return 0.0;
        return std::pow(ratio, delta - 1);
    }
};

/// `normalize` rescales so the leading eigenvalue is one.
TransferSpectrum transfer_spectrum(const DenseTensor& site_tensor, bool normalize);

/// Deterministic random (D, d, D) site tensor scaled so its identity transfer
/// matrix has unit leading eigenvalue.
DenseTensor random_ti_site_tensor(std::uint64_t seed, std::int64_t bond_dim,
                                  std::int64_t local_dim);

/// Least-squares exponential fit on log|C| over points above the floor.
struct FitResult {
    double xi = 0.0;
    double r2 = 0.0;
    int points_used = 0;
    bool ok = false;
};
FitResult fit_exponential(const std::vector<int>& deltas, const std::vector<double>& magnitudes,
                          double floor = 1e-13);

struct DecayReport {
    std::string direction; // "horizontal" | "vertical"
    std::vector<int> deltas;
    std::vector<cplx> values; // connected correlators C(delta)
    FitResult fit;
};

/// Connected correlators <O1_{row,v} O2_{row,v+delta}> - <O1><O2> along one
/// row, evaluated exactly through the ladder. The base column is centered for
/// the largest distance unless given.
DecayReport horizontal_correlator(const SGSState& s, const DenseTensor& o1, const DenseTensor& o2,
                                  int row, const std::vector<int>& deltas, int base_col = -1);

/// Single-column chain of a translationally invariant description: the
/// density operator of one column is a matrix product with bond (d^M)^2,
/// realized here together with its purification (an MPS whose bulk physical
/// dimension is d^2, pairing each site with one ancilla).
struct VerticalChain {
    int rows = 0;
    int m_span = 1;
    std::int64_t d = 2;
    DenseTensor site_rho;   // one-site RDM feeding the chain
    DenseTensor bulk_m;     // modes (i, i', (aa'), (bb')) per the chain formula
    DenseTensor bottom_m;   // boundary variant: modes (i, i', (aa')), lowest site
    MPSRow purification;    // finite chain; position r carries row r for r < rows
};

VerticalChain vertical_chain(const DenseTensor& site_tensor, const DenseTensor& unitary,
                             int column, int rows, int cols);

/// Connected <O1_{h1} O2_{h2}> via the purification chain.
cplx vertical_pair_correlator(const VerticalChain& chain, const DenseTensor& o1,
                              const DenseTensor& o2, int h1, int h2);

/// Sweep of connected correlators from a base row, with the exponential fit.
DecayReport vertical_correlator(const VerticalChain& chain, const DenseTensor& o1,
                                const DenseTensor& o2, int h1, const std::vector<int>& deltas);

/// Physically traced chain matrices for a pair of columns and the spectral
/// data controlling the product approximation of the two-column state.
struct GMatrixAnalysis {
    DenseTensor g1, g2;      // per-column G, (D^2) x (D^2) in (aa') pairing
    DenseTensor g_full;      // two-column G from the joint two-site RDM
    DenseTensor g_product;   // kron(g1, g2)
    DenseTensor g_bottom;    // boundary vector of the lowest span
    cplx mu{0, 0};           // leading eigenvalue of g_full
    DenseTensor left_vec, right_vec;
    double gap = 0.0;        // |mu| - |second|
    bool degenerate = false;
    double product_deviation = 0.0; // |g_full - g_product|_F
    double epsilon = 0.0;           // (lambda2/lambda1)^(delta-1) of the row transfer
};

GMatrixAnalysis g_matrix_analysis(const DenseTensor& site_tensor, const DenseTensor& unitary,
                                  int v1, int v2, int cols);

} // namespace sgs
