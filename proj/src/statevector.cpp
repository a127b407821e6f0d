#include "sgs/statevector.hpp"

#include <cmath>

#include "sgs/errors.hpp"
#include "sgs/kernels.hpp"

namespace sgs::sv {

namespace {
struct SitePlan {
    std::vector<std::int64_t> target_strides;
    std::vector<std::int64_t> rest_strides;
    std::int64_t span = 1;
    std::int64_t rest_total = 1;
    int d = 0;
};

SitePlan make_plan(const std::vector<int>& sites, int num_sites, int d) {
    SitePlan plan;
    plan.d = d;
    std::vector<std::int64_t> strides(num_sites, 1);
    for (int i = num_sites; i-- > 1;) strides[i - 1] = strides[i] * d;
    std::vector<bool> is_target(num_sites, false);
    for (int s : sites) {
        if (s < 0 || s >= num_sites || is_target[s])
            throw DimensionError("statevector: invalid site list");
        plan.target_strides.push_back(strides[s]);
        is_target[s] = true;
        plan.span *= d;
    }
    for (int s = 0; s < num_sites; ++s)
        if (!is_target[s]) {
            plan.rest_strides.push_back(strides[s]);
            plan.rest_total *= d;
        }
    return plan;
}

std::int64_t rest_base(const SitePlan& plan, std::int64_t r) {
    std::int64_t base = 0;
    for (std::size_t i = plan.rest_strides.size(); i-- > 0;) {
        base += (r % plan.d) * plan.rest_strides[i];
        r /= plan.d;
    }
    return base;
}

void gather_offsets(const SitePlan& plan, std::int64_t base, std::vector<std::int64_t>& offs) {
    for (std::int64_t a = 0; a < plan.span; ++a) {
        std::int64_t idx = base, aa = a;
        for (std::size_t i = plan.target_strides.size(); i-- > 0;) {
            idx += (aa % plan.d) * plan.target_strides[i];
            aa /= plan.d;
        }
        offs[a] = idx;
    }
}
} // namespace

void apply_gate(State& psi, const DenseTensor& gate, const std::vector<int>& sites,
                int num_sites, int d) {
    const SitePlan plan = make_plan(sites, num_sites, d);
    if (gate.rank() != 2 || gate.dim(0) != plan.span || gate.dim(1) != plan.span)
        throw DimensionError("apply_gate: gate extent does not match site list");
    std::vector<std::int64_t> offs(plan.span);
    std::vector<cplx> in(plan.span);
    const cplx* g = gate.data().data();
    for (std::int64_t r = 0; r < plan.rest_total; ++r) {
        gather_offsets(plan, rest_base(plan, r), offs);
        for (std::int64_t a = 0; a < plan.span; ++a) in[a] = psi[offs[a]];
        for (std::int64_t a = 0; a < plan.span; ++a) {
            cplx acc{0.0, 0.0};
            const cplx* row = g + a * plan.span;
            for (std::int64_t b = 0; b < plan.span; ++b) acc += row[b] * in[b];
            psi[offs[a]] = acc;
        }
    }
}

cplx expectation(const State& psi, const DenseTensor& op, const std::vector<int>& sites,
                 int num_sites, int d) {
    const SitePlan plan = make_plan(sites, num_sites, d);
    if (op.rank() != 2 || op.dim(0) != plan.span || op.dim(1) != plan.span)
        throw DimensionError("expectation: operator extent does not match site list");
    std::vector<std::int64_t> offs(plan.span);
    const cplx* g = op.data().data();
    cplx total{0.0, 0.0};
    for (std::int64_t r = 0; r < plan.rest_total; ++r) {
        gather_offsets(plan, rest_base(plan, r), offs);
        for (std::int64_t a = 0; a < plan.span; ++a) {
            cplx acc{0.0, 0.0};
            const cplx* row = g + a * plan.span;
            for (std::int64_t b = 0; b < plan.span; ++b) acc += row[b] * psi[offs[b]];
            total += std::conj(psi[offs[a]]) * acc;
        }
    }
    return total;
}

DenseTensor reduced_density(const State& psi, const std::vector<int>& sites, int num_sites,
                            int d) {
    const SitePlan plan = make_plan(sites, num_sites, d);
    DenseTensor rho({plan.span, plan.span});
    std::vector<std::int64_t> offs(plan.span);
    for (std::int64_t r = 0; r < plan.rest_total; ++r) {
        gather_offsets(plan, rest_base(plan, r), offs);
        for (std::int64_t a = 0; a < plan.span; ++a)
            for (std::int64_t b = 0; b < plan.span; ++b)
                rho.data()[a * plan.span + b] += psi[offs[a]] * std::conj(psi[offs[b]]);
    }
    return rho;
}

double norm(const State& psi) {
    double s = 0.0;
    for (const auto& v : psi) s += std::norm(v);
    return std::sqrt(s);
}

cplx overlap(const State& a, const State& b) {
    if (a.size() != b.size()) throw DimensionError("overlap: size mismatch");
    cplx s{0.0, 0.0};
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

} // namespace sgs::sv
