#pragma once

#include <complex>
#include <cstdint>
#include <vector>

namespace sgs::kernels {

using cplx = std::complex<double>;

/// Global worker-thread count for the parallel kernels (default: OpenMP max).
/// The parallel kernels produce bit-identical results for any thread count:
/// every output element is a fixed-order reduction.
void set_threads(int n);
int threads();

/// C = A * B with row-major dense complex matrices, A: m x k, B: k x n.
/// Serial reference implementation.
void matmul_serial(cplx* c, const cplx* a, const cplx* b,
                   std::int64_t m, std::int64_t k, std::int64_t n);

/// OpenMP-parallel version of matmul_serial (parallel over rows of C).
void matmul_parallel(cplx* c, const cplx* a, const cplx* b,
                     std::int64_t m, std::int64_t k, std::int64_t n);

/// Dispatching entry point: picks the parallel kernel when the problem is
/// large enough and more than one thread is configured.
void matmul(cplx* c, const cplx* a, const cplx* b,
            std::int64_t m, std::int64_t k, std::int64_t n);

/// Reorder a dense row-major tensor: dst mode order is src modes permuted by
/// `axes` (dst mode i = src mode axes[i]). Serial reference.
void permute_serial(cplx* dst, const cplx* src,
                    const std::vector<std::int64_t>& src_shape,
                    const std::vector<int>& axes);

/// OpenMP-parallel version of permute_serial.
void permute_parallel(cplx* dst, const cplx* src,
                      const std::vector<std::int64_t>& src_shape,
                      const std::vector<int>& axes);

/// Dispatching entry point for permutation.
void permute(cplx* dst, const cplx* src,
             const std::vector<std::int64_t>& src_shape,
             const std::vector<int>& axes);

/// y += H x for a sum of local terms embedded on a qudit register; the term
/// operator acts on `sites` (most significant first) of a register with
/// uniform local dimension d and `num_sites` sites. Serial reference.
void apply_local_term_serial(cplx* y, const cplx* x, const cplx* op,
                             const std::vector<int>& sites, int num_sites, int d);

/// OpenMP-parallel version of apply_local_term_serial.
void apply_local_term_parallel(cplx* y, const cplx* x, const cplx* op,
                               const std::vector<int>& sites, int num_sites, int d);

/// Dispatching entry point for local-term application.
void apply_local_term(cplx* y, const cplx* x, const cplx* op,
                      const std::vector<int>& sites, int num_sites, int d);

} // namespace sgs::kernels
