#include "sgs/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <omp.h>

namespace sgs::kernels {

namespace {
std::atomic<int> g_threads{0}; // 0 = uninitialized, use omp_get_max_threads()

int effective_threads() {
    int t = g_threads.load(std::memory_order_relaxed);
    return t > 0 ? t : omp_get_max_threads();
}
} // namespace

void set_threads(int n) { g_threads.store(n < 1 ? 1 : n, std::memory_order_relaxed); }
int threads() { return effective_threads(); }

void matmul_serial(cplx* c, const cplx* a, const cplx* b,
                   std::int64_t m, std::int64_t k, std::int64_t n) {
    for (std::int64_t i = 0; i < m; ++i) {
        cplx* crow = c + i * n;
        std::fill(crow, crow + n, cplx{0.0, 0.0});
        const cplx* arow = a + i * k;
        for (std::int64_t p = 0; p < k; ++p) {
            const cplx av = arow[p];
            if (av == cplx{0.0, 0.0}) continue;
            const cplx* brow = b + p * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_parallel(cplx* c, const cplx* a, const cplx* b,
                     std::int64_t m, std::int64_t k, std::int64_t n) {
    // Row-parallel; each output row is the same fixed-order reduction as the
    // serial kernel, so results are bit-identical for any thread count.
    const int nt = effective_threads();
#pragma omp parallel for schedule(static) num_threads(nt)
    for (std::int64_t i = 0; i < m; ++i) {
        cplx* crow = c + i * n;
        std::fill(crow, crow + n, cplx{0.0, 0.0});
        const cplx* arow = a + i * k;
        for (std::int64_t p = 0; p < k; ++p) {
            const cplx av = arow[p];
            if (av == cplx{0.0, 0.0}) continue;
            const cplx* brow = b + p * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul(cplx* c, const cplx* a, const cplx* b,
            std::int64_t m, std::int64_t k, std::int64_t n) {
    if (effective_threads() > 1 && m * k * n >= (1 << 16) && m > 1)
        matmul_parallel(c, a, b, m, k, n);
    else
        matmul_serial(c, a, b, m, k, n);
}

namespace {
struct PermutePlan {
    std::vector<std::int64_t> dst_shape;
    std::vector<std::int64_t> src_stride_for_dst; // stride in src of dst mode i
    std::int64_t total = 1;
};

PermutePlan make_plan(const std::vector<std::int64_t>& src_shape, const std::vector<int>& axes) {
    const std::size_t r = src_shape.size();
    std::vector<std::int64_t> src_strides(r, 1);
    for (std::size_t i = r; i-- > 1;) src_strides[i - 1] = src_strides[i] * src_shape[i];
    PermutePlan plan;
    plan.dst_shape.resize(r);
    plan.src_stride_for_dst.resize(r);
    for (std::size_t i = 0; i < r; ++i) {
        plan.dst_shape[i] = src_shape[axes[i]];
        plan.src_stride_for_dst[i] = src_strides[axes[i]];
        plan.total *= plan.dst_shape[i];
    }
    return plan;
}

inline std::int64_t src_index(const PermutePlan& plan, std::int64_t dst_idx) {
    std::int64_t s = 0;
    for (std::size_t i = plan.dst_shape.size(); i-- > 0;) {
        s += (dst_idx % plan.dst_shape[i]) * plan.src_stride_for_dst[i];
        dst_idx /= plan.dst_shape[i];
    }
    return s;
}
} // namespace

void permute_serial(cplx* dst, const cplx* src,
                    const std::vector<std::int64_t>& src_shape,
                    const std::vector<int>& axes) {
    const PermutePlan plan = make_plan(src_shape, axes);
    for (std::int64_t i = 0; i < plan.total; ++i) dst[i] = src[src_index(plan, i)];
}

void permute_parallel(cplx* dst, const cplx* src,
                      const std::vector<std::int64_t>& src_shape,
                      const std::vector<int>& axes) {
    const PermutePlan plan = make_plan(src_shape, axes);
    const int nt = effective_threads();
#pragma omp parallel for schedule(static) num_threads(nt)
    for (std::int64_t i = 0; i < plan.total; ++i) dst[i] = src[src_index(plan, i)];
}

void permute(cplx* dst, const cplx* src,
             const std::vector<std::int64_t>& src_shape,
             const std::vector<int>& axes) {
    std::int64_t total = 1;
    for (auto e : src_shape) total *= e;
    if (effective_threads() > 1 && total >= (1 << 16))
        permute_parallel(dst, src, src_shape, axes);
    else
        permute_serial(dst, src, src_shape, axes);
}

namespace {
struct TermPlan {
    std::vector<std::int64_t> target_strides; // stride of each target site
    std::vector<std::int64_t> rest_strides;   // stride of each non-target site
    std::vector<std::int64_t> rest_dims;
    std::int64_t span = 1; // d^(#sites in term)
    std::int64_t rest_total = 1;
    int d = 0;
};

TermPlan make_term_plan(const std::vector<int>& sites, int num_sites, int d) {
    TermPlan plan;
    plan.d = d;
    std::vector<std::int64_t> strides(num_sites, 1);
    for (int i = num_sites; i-- > 1;) strides[i - 1] = strides[i] * d;
    std::vector<bool> is_target(num_sites, false);
    for (int s : sites) {
        plan.target_strides.push_back(strides[s]);
        is_target[s] = true;
        plan.span *= d;
    }
    for (int s = 0; s < num_sites; ++s) {
        if (is_target[s]) continue;
        plan.rest_strides.push_back(strides[s]);
        plan.rest_dims.push_back(d);
        plan.rest_total *= d;
    }
    return plan;
}

inline std::int64_t rest_base(const TermPlan& plan, std::int64_t r) {
    std::int64_t base = 0;
    for (std::size_t i = plan.rest_dims.size(); i-- > 0;) {
        base += (r % plan.rest_dims[i]) * plan.rest_strides[i];
        r /= plan.rest_dims[i];
    }
    return base;
}

inline void term_kernel(const TermPlan& plan, cplx* y, const cplx* x, const cplx* op,
                        std::int64_t r, std::vector<std::int64_t>& offs, std::vector<cplx>& amps) {
    const std::int64_t base = rest_base(plan, r);
    for (std::int64_t a = 0; a < plan.span; ++a) {
        std::int64_t idx = base, aa = a;
        for (std::size_t i = plan.target_strides.size(); i-- > 0;) {
            idx += (aa % plan.d) * plan.target_strides[i];
            aa /= plan.d;
        }
        offs[a] = idx;
        amps[a] = x[idx];
    }
    for (std::int64_t a = 0; a < plan.span; ++a) {
        cplx acc{0.0, 0.0};
        const cplx* oprow = op + a * plan.span;
        for (std::int64_t b = 0; b < plan.span; ++b) acc += oprow[b] * amps[b];
        y[offs[a]] += acc;
    }
}
} // namespace

void apply_local_term_serial(cplx* y, const cplx* x, const cplx* op,
                             const std::vector<int>& sites, int num_sites, int d) {
    const TermPlan plan = make_term_plan(sites, num_sites, d);
    std::vector<std::int64_t> offs(plan.span);
    std::vector<cplx> amps(plan.span);
    for (std::int64_t r = 0; r < plan.rest_total; ++r) term_kernel(plan, y, x, op, r, offs, amps);
}

void apply_local_term_parallel(cplx* y, const cplx* x, const cplx* op,
                               const std::vector<int>& sites, int num_sites, int d) {
    const TermPlan plan = make_term_plan(sites, num_sites, d);
    const int nt = effective_threads();
    // Rest-groups touch disjoint slices of y, so the loop is race-free.
#pragma omp parallel num_threads(nt)
    {
        std::vector<std::int64_t> offs(plan.span);
        std::vector<cplx> amps(plan.span);
#pragma omp for schedule(static)
        for (std::int64_t r = 0; r < plan.rest_total; ++r)
            term_kernel(plan, y, x, op, r, offs, amps);
    }
}

void apply_local_term(cplx* y, const cplx* x, const cplx* op,
                      const std::vector<int>& sites, int num_sites, int d) {
    std::int64_t total = 1;
    for (int i = 0; i < num_sites; ++i) total *= d;
    if (effective_threads() > 1 && total >= (1 << 14))
        apply_local_term_parallel(y, x, op, sites, num_sites, d);
    else
        apply_local_term_serial(y, x, op, sites, num_sites, d);
}

} // namespace sgs::kernels
