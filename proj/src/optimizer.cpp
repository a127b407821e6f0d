#include "sgs/optimizer.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "sgs/linalg.hpp"

namespace sgs {

void OptimizerOptions::validate() const {
    if (max_outer_iterations < 1) throw ValidationError("optimizer: max_outer_iterations >= 1");
    if (tolerance <= 0) throw ValidationError("optimizer: tolerance must be positive");
    if (!(delta0 > delta_min && delta_min > 0))
        throw ValidationError("optimizer: need delta0 > delta_min > 0");
    if (u_inner_cap < 1) throw ValidationError("optimizer: u_inner_cap >= 1");
}

bool EnergyTrace::monotone(double tol) const {
    bool seen = false;
    double prev = 0.0;
    for (const auto& r : records) {
        if (!r.accepted || r.phase == "init") {
            if (r.phase == "init") {
                prev = r.energy;
                seen = true;
            }
            continue;
        }
        if (seen && r.energy > prev + tol) return false;
        prev = r.energy;
        seen = true;
    }
    return true;
}

double EnergyTrace::final_energy() const {
    for (auto it = records.rbegin(); it != records.rend(); ++it)
        if (it->accepted) return it->energy;
    return 0.0;
}

namespace {

const Hamiltonian* effective_hamiltonian(const SGSState& s, const Hamiltonian& h,
                                         Hamiltonian& storage) {
    if (h.spec == s.params.physical && s.params.N > 1) {
        storage = block_hamiltonian(h, s.params.N);
        return &storage;
    }
    if (!(h.spec.rows == s.eff_rows() && h.spec.cols == s.cols() &&
          h.spec.local_dim == s.params.eff_dim()))
        throw ValidationError("optimizer: Hamiltonian lattice does not match the state");
    return &h;
}

/// Product operators a row-level sweep works with: one single-column factor
/// per involved column.
struct ProductTerm {
    std::map<int, DenseTensor> ops; // col -> (e, e) observable factor
};

/// Decompose an effective observable W on 1 or 2 columns into a sum of
/// single-column products via the operator Schmidt decomposition.
std::vector<ProductTerm> schmidt_products(const DenseTensor& w, const std::vector<int>& cols,
                                          std::int64_t e) {
    std::vector<ProductTerm> out;
    if (cols.size() == 1) {
        out.push_back({{{cols[0], w}}});
        return out;
    }
    DenseTensor t4 = w.reshape({e, e, e, e}).permute({0, 2, 1, 3}); // (q1,p1,q2,p2)
    auto res = svd(t4, {0, 1}, {2, 3});
    const std::int64_t nk = static_cast<std::int64_t>(res.singular_values.size());
    for (std::int64_t kk = 0; kk < nk; ++kk) {
        if (res.singular_values[kk] < 1e-14) continue;
        DenseTensor x({e, e}), y({e, e});
        for (std::int64_t i = 0; i < e * e; ++i) {
            x.data()[i] = res.left_isometry.data()[i * nk + kk] * res.singular_values[kk];
            y.data()[i] = res.right_isometry.data()[kk * e * e + i];
        }
        out.push_back({{{cols[0], x}, {cols[1], y}}});
    }
    return out;
}

/// Transfer step of a row environment: fold one site, optionally with an
/// operator insertion. env is (bra bond, ket bond).
DenseTensor env_step_left(const DenseTensor& env, const DenseTensor& a, const DenseTensor* op) {
    DenseTensor x = contract(env, {1}, a, {0}); // (b', i, b)
    if (op) x = contract(*op, {1}, x, {1}).permute({1, 0, 2});
    return contract(a.conj(), {0, 1}, x, {0, 1}); // (b', b)
}

DenseTensor env_step_right(const DenseTensor& env, const DenseTensor& a, const DenseTensor* op) {
    DenseTensor x = contract(a, {2}, env, {1}); // (a, i, b')
    if (op) x = contract(*op, {1}, x, {1}).permute({1, 0, 2});
    DenseTensor r = contract(x, {1, 2}, a.conj(), {1, 2}); // (a, a')
    return r.permute({1, 0});
}

DenseTensor scalar_env() {
    DenseTensor e({1, 1});
    e.data()[0] = cplx{1, 0};
    return e;
}

/// Smallest eigenpair of the Hermitian site matrix; dense under the cap.
std::pair<double, DenseTensor> solve_site(const DenseTensor& heff, std::int64_t dense_cap) {
    return herm_eig_extreme(heff, Extreme::Smallest, dense_cap);
}

struct RowSweeper {
    const SGSState* state;
    const Hamiltonian* ham;
    const OptimizerOptions* opts;
    int row;
    std::vector<ProductTerm> products;

    /// Build product terms from the per-term effective observables of `row`.
    void build(const detail::LadderEngine& eng) {
        products.clear();
        const std::int64_t e = state->params.eff_dim();
        for (const auto& ht : ham->terms) {
            auto term = eng.make_term(ht);
            DenseTensor w = eng.row_hole(term, row);
            for (auto& p : schmidt_products(w, term.cols, e)) products.push_back(std::move(p));
        }
    }

    const DenseTensor* op_at(const ProductTerm& p, int c) const {
        auto it = p.ops.find(c);
        return it == p.ops.end() ? nullptr : &it->second;
    }

    /// Half sweep updating sites first..last (inclusive, step +-1); the MPS
    /// enters canonical at `first` and leaves canonical at `last`.
    double half_sweep(MPSRow& m, int first, int last, int step, EnergyTrace* trace,
                      double current_energy) {
        const int v = m.length();
        const std::int64_t e = state->params.eff_dim();
        const std::size_t np = products.size();

        // Environment stacks from the far side of the sweep.
        std::vector<std::vector<DenseTensor>> far(np);
        for (std::size_t j = 0; j < np; ++j) {
            far[j].assign(v, scalar_env());
            if (step > 0) {
                DenseTensor env = scalar_env();
                for (int c = v - 1; c > first; --c) {
                    env = env_step_right(env, m.tensors[c], op_at(products[j], c));
                    far[j][c - 1] = env; // environment of sites > c-1
                }
            } else {
                DenseTensor env = scalar_env();
                for (int c = 0; c < first; ++c) {
                    env = env_step_left(env, m.tensors[c], op_at(products[j], c));
                    far[j][c + 1] = env; // environment of sites < c+1
                }
            }
        }
        std::vector<DenseTensor> near(np, scalar_env());

        double energy = current_energy;
        for (int c = first; c != last + step; c += step) {
            const DenseTensor& a = m.tensors[c];
            const std::int64_t dl = a.dim(0), dr = a.dim(2);
            const std::int64_t dim = dl * e * dr;
            DenseTensor heff({dim, dim});
            for (std::size_t j = 0; j < np; ++j) {
                const DenseTensor& l = step > 0 ? near[j] : far[j][c];
                const DenseTensor& r = step > 0 ? far[j][c] : near[j];
                const DenseTensor* op = op_at(products[j], c);
                DenseTensor mid = op ? *op : DenseTensor::identity(e);
                DenseTensor contrib = outer(outer(l, mid), r); // (l',l,p',p,r',r)
                heff = heff.axpy(contrib.permute({0, 2, 4, 1, 3, 5}).reshape({dim, dim}));
            }
            // Hermitize against roundoff before solving.
            for (std::int64_t i = 0; i < dim; ++i)
                for (std::int64_t jj = i; jj < dim; ++jj) {
                    const cplx av = 0.5 * (heff.data()[i * dim + jj] +
                                           std::conj(heff.data()[jj * dim + i]));
                    heff.data()[i * dim + jj] = av;
                    heff.data()[jj * dim + i] = std::conj(av);
                }
            auto [lambda, vec] = solve_site(heff, opts->dense_eig_cap);

            if (lambda <= energy + 1e-12) {
                m.tensors[c] = vec.reshape({dl, e, dr});
                energy = lambda;
                if (trace)
                    trace->add({"a-sweep", row, c, energy, 0.0, 0.0, true});
            } else if (trace) {
                trace->add({"a-sweep", row, c, energy, 0.0, 0.0, false});
            }

            // Move the gauge one site in the sweep direction and extend the
            // near environments.
            if (c != last) {
                if (step > 0) {
                    // local QR: left-isometrize site c, absorb into c+1
                    auto res = svd(m.tensors[c], {0, 1}, {2});
                    m.tensors[c] = res.left_isometry;
                    DenseTensor carry({res.left_isometry.dim(2), m.tensors[c + 1].dim(0)});
                    // carry = diag(S) * right
                    for (std::int64_t i = 0; i < carry.dim(0); ++i)
                        for (std::int64_t jj = 0; jj < carry.dim(1); ++jj)
                            carry.data()[i * carry.dim(1) + jj] =
                                res.singular_values[i] * res.right_isometry.data()[i * carry.dim(1) + jj];
                    m.tensors[c + 1] = contract(carry, {1}, m.tensors[c + 1], {0});
                    for (std::size_t j = 0; j < np; ++j)
                        near[j] = env_step_left(near[j], m.tensors[c], op_at(products[j], c));
                } else {
                    auto res = svd(m.tensors[c], {0}, {1, 2});
                    m.tensors[c] = res.right_isometry;
                    DenseTensor carry({m.tensors[c - 1].dim(2), res.left_isometry.dim(1)});
                    for (std::int64_t i = 0; i < carry.dim(0); ++i)
                        for (std::int64_t jj = 0; jj < carry.dim(1); ++jj)
                            carry.data()[i * carry.dim(1) + jj] =
                                res.left_isometry.data()[i * carry.dim(1) + jj] *
                                res.singular_values[jj];
                    m.tensors[c - 1] = contract(m.tensors[c - 1], {2}, carry, {0});
                    for (std::size_t j = 0; j < np; ++j)
                        near[j] = env_step_right(near[j], m.tensors[c], op_at(products[j], c));
                }
            }
        }
        m.center = last;
        return energy;
    }
};

} // namespace

std::pair<SGSState, double> sweep_rows(const SGSState& s_in, const Hamiltonian& h_in,
                                       const OptimizerOptions& opts, EnergyTrace* trace) {
    opts.validate();
    Hamiltonian storage;
    const Hamiltonian* h = effective_hamiltonian(s_in, h_in, storage);

    SGSState s = s_in;
    double energy_now = energy(s, *h);
    detail::LadderEngine eng(&s);

    for (int r = 0; r < s.eff_rows(); ++r) {
        s.rows[r] = canonicalize(s.rows[r], 0);
        eng.invalidate_row(r);

        RowSweeper sweeper{&s, h, &opts, r, {}};
        sweeper.build(eng);

        MPSRow m = s.rows[r];
        const int v = m.length();
        energy_now = sweeper.half_sweep(m, 0, v - 1, +1, trace, energy_now);
        if (v > 1) energy_now = sweeper.half_sweep(m, v - 1, 0, -1, trace, energy_now);
        s.rows[r] = std::move(m);
        eng.invalidate_row(r);
    }
    return {std::move(s), energy_now};
}

namespace {

/// Fixed: quadratic energy data of one unitary hole.
struct UnitaryProblem {
    DenseTensor env2; // sum over involved terms
    double e_const = 0.0;

    double eval(const DenseTensor& u) const {
        DenseTensor q = contract(env2, {0, 1}, u, {0, 1});
        return e_const + contract(q, {0, 1}, u.conj(), {0, 1}).as_scalar().real();
    }

    DenseTensor gamma(const DenseTensor& u0) const {
        DenseTensor g = contract(env2, {2, 3}, u0.conj(), {0, 1}); // (o, i)
        return contract(u0, {1}, g.permute({1, 0}), {0});
    }
};

UnitaryProblem build_unitary_problem(detail::LadderEngine& eng, const Hamiltonian& h, int t,
                                     int col, const SGSState& s) {
    UnitaryProblem prob;
    const std::int64_t udim = s.params.unitary_dim();
    prob.env2 = DenseTensor({udim, udim, udim, udim});
    for (const auto& ht : h.terms) {
        auto term = eng.make_term(ht);
        int slot = -1;
        for (std::size_t i = 0; i < term.cols.size(); ++i)
            if (term.cols[i] == col) slot = static_cast<int>(i);
        if (slot >= 0 && t >= term.t0[slot]) {
            prob.env2 = prob.env2.axpy(eng.gate_hole(term, t, col));
        } else {
            prob.e_const += eng.value(term).real();
        }
    }
    return prob;
}

} // namespace

std::pair<SGSState, double> optimize_unitary(const SGSState& s_in, const Hamiltonian& h_in,
                                             int t, int col, const OptimizerOptions& opts,
                                             EnergyTrace* trace) {
    opts.validate();
    Hamiltonian storage;
    const Hamiltonian* h = effective_hamiltonian(s_in, h_in, storage);
    if (col < 0 || col >= s_in.cols() || t < 0 || t >= s_in.params.unitaries_per_column())
        throw DimensionError("optimize_unitary: no unitary at this location");

    SGSState s = s_in;
    detail::LadderEngine eng(&s);
    UnitaryProblem prob = build_unitary_problem(eng, *h, t, col, s);

    DenseTensor u = s.unitaries[col][t];
    double e_cur = prob.eval(u);
    const std::int64_t udim = u.dim(0);

    for (int inner = 0; inner < opts.u_inner_cap; ++inner) {
        DenseTensor gamma = prob.gamma(u);
        // K = -Herm(i Gamma) / |Herm(i Gamma)|_F.
        DenseTensor b({udim, udim});
        for (std::int64_t i = 0; i < udim; ++i)
            for (std::int64_t j = 0; j < udim; ++j) {
                const cplx ig = cplx{0, 1} * gamma.data()[i * udim + j];
                const cplx igt = cplx{0, -1} * std::conj(gamma.data()[j * udim + i]);
                b.data()[i * udim + j] = 0.5 * (ig + igt);
            }
        const double bnorm = b.norm();
        if (bnorm < 1e-13 * std::max(1.0, std::abs(e_cur))) {
            if (trace) trace->add({"u-phase", t, col, e_cur, 0.0, 0.0, false});
            break;
        }
        DenseTensor k = b.scaled(cplx{-1.0 / bnorm, 0});

        // Predicted slope dE/d(delta) = 2 Re[i tr(K Gamma)] = -2 |B|_F... kept
        // for the trace as the first-order model.
        DenseTensor kg = contract(k, {1}, gamma, {0});
        cplx trkg{0, 0};
        for (std::int64_t i = 0; i < udim; ++i) trkg += kg.at({i, i});
        const double slope = 2.0 * (cplx{0, 1} * trkg).real();

        bool accepted = false;
        for (double delta = opts.delta0; delta >= opts.delta_min; delta *= 0.5) {
            DenseTensor cand = contract(unitary_exp(k, delta), {1}, u, {0});
            const double e_new = prob.eval(cand);
            if (e_new < e_cur) {
                u = std::move(cand);
                if (trace) trace->add({"u-phase", t, col, e_new, delta, delta * slope, true});
                e_cur = e_new;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (trace) trace->add({"u-phase", t, col, e_cur, 0.0, 0.0, false});
            break;
        }
    }

    s.unitaries[col][t] = std::move(u);
    return {std::move(s), e_cur};
}

std::pair<SGSState, EnergyTrace> optimize(const SGSState& s0, const Hamiltonian& h_in,
                                          const OptimizerOptions& opts) {
    opts.validate();
    Hamiltonian storage;
    const Hamiltonian* h = effective_hamiltonian(s0, h_in, storage);

    SGSState s = s0;
    EnergyTrace trace;
    double e_prev = energy(s, *h);
    trace.add({"init", -1, -1, e_prev, 0.0, 0.0, true});

    for (int outer = 0; outer < opts.max_outer_iterations; ++outer) {
        auto [s_a, e_a] = sweep_rows(s, *h, opts, &trace);
        s = std::move(s_a);

        double e_now = e_a;
        const int nu = s.params.unitaries_per_column();
        for (int c = 0; c < s.cols() && nu > 0; ++c)
            for (int t = nu - 1; t >= 0; --t) {
                auto [s_u, e_u] = optimize_unitary(s, *h, t, c, opts, &trace);
                s = std::move(s_u);
                e_now = e_u;
            }

        trace.outer_iterations = outer + 1;
        trace.add({"outer", outer, -1, e_now, 0.0, 0.0, true});

        const double drift_check = energy(s, *h);
        if (std::abs(drift_check - e_now) > 1e-7 * std::max(1.0, std::abs(e_now)))
            throw ConvergenceError("optimizer: tracked energy drifted from the exact value");

        if (std::abs(e_prev - e_now) < opts.tolerance * std::max(1.0, std::abs(e_now))) {
            trace.converged = true;
            e_prev = e_now;
            break;
        }
        e_prev = e_now;
    }
    return {std::move(s), std::move(trace)};
}

} // namespace sgs
