#include "sgs/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "sgs/kernels.hpp"
#include "sgs/linalg.hpp"
#include "sgs/rng.hpp"

namespace sgs {

std::int64_t LatticeSpec::hilbert_dim(std::int64_t cap) const {
    std::int64_t dim = 1;
    for (int i = 0; i < sites(); ++i) {
        if (dim > cap / local_dim + 1) throw ResourceError("Hilbert dimension exceeds cap");
        dim *= local_dim;
    }
    if (dim > cap) throw ResourceError("Hilbert dimension " + std::to_string(dim) +
                                       " exceeds cap " + std::to_string(cap));
    return dim;
}

Model model_from_name(const std::string& name) {
    if (name == "heisenberg") return Model::Heisenberg;
    if (name == "frustrated_xx") return Model::FrustratedXX;
    if (name == "random2body") return Model::Random2Body;
    throw ValidationError("unknown model '" + name + "'");
}

std::string model_name(Model m) {
    switch (m) {
        case Model::Heisenberg: return "heisenberg";
        case Model::FrustratedXX: return "frustrated_xx";
        case Model::Random2Body: return "random2body";
    }
    return "?";
}

DenseTensor pauli_x() {
    return DenseTensor({2, 2}, {cplx{0, 0}, cplx{1, 0}, cplx{1, 0}, cplx{0, 0}});
}
DenseTensor pauli_y() {
    return DenseTensor({2, 2}, {cplx{0, 0}, cplx{0, -1}, cplx{0, 1}, cplx{0, 0}});
}
DenseTensor pauli_z() {
    return DenseTensor({2, 2}, {cplx{1, 0}, cplx{0, 0}, cplx{0, 0}, cplx{-1, 0}});
}

namespace {
DenseTensor heisenberg_edge() {
    DenseTensor t = kron(pauli_x(), pauli_x());
    t = t.axpy(kron(pauli_y(), pauli_y()));
    t = t.axpy(kron(pauli_z(), pauli_z()));
    return t;
}

DenseTensor xx_edge(double j) {
    DenseTensor t = kron(pauli_x(), pauli_x());
    t = t.axpy(kron(pauli_y(), pauli_y()));
    return t.scaled(cplx{j, 0.0});
}

/// Every fourth edge carries J = -1; edges are counted from one along each
/// direction, so the k-th horizontal edge of a row joins columns k-1 and k.
bool fourth_edge_negative(int lower_coord) { return (lower_coord + 1) % 4 == 0; }
} // namespace

Hamiltonian build_hamiltonian(Model model, const LatticeSpec& spec,
                              std::optional<std::uint64_t> seed) {
    if (spec.rows < 1 || spec.cols < 1) throw ValidationError("lattice extents must be >= 1");
    if (model != Model::Random2Body && spec.local_dim != 2)
        throw ValidationError("model '" + model_name(model) + "' requires local dimension 2");
    if (model == Model::Random2Body && spec.local_dim < 2)
        throw ValidationError("random2body requires local dimension >= 2");

    Hamiltonian h;
    h.spec = spec;
    h.model_name = model_name(model);
    const int d2 = spec.local_dim * spec.local_dim;

    std::optional<rng::Stream> stream;
    if (model == Model::Random2Body) {
        if (!seed) throw ValidationError("random2body requires a seed");
        stream.emplace(*seed);
        h.seed = seed;
        h.convention = std::string("edges=h-then-v,row-major;rng=") + rng::kGeneratorName;
    } else if (model == Model::FrustratedXX) {
        h.convention = "J=-1 on every fourth edge, counted from 1 per direction";
    }

    auto edge_op = [&](bool horizontal, int r, int c) -> DenseTensor {
        switch (model) {
            case Model::Heisenberg: return heisenberg_edge();
            case Model::FrustratedXX: {
                const bool neg = horizontal ? fourth_edge_negative(c) : fourth_edge_negative(r);
                return xx_edge(neg ? -1.0 : 1.0);
            }
            case Model::Random2Body: return rng::random_hermitian(d2, *stream);
        }
        throw ValidationError("unreachable");
    };

    for (int r = 0; r < spec.rows; ++r)
        for (int c = 0; c + 1 < spec.cols; ++c)
            h.terms.push_back({{{r, c}, {r, c + 1}}, edge_op(true, r, c)});
    for (int r = 0; r + 1 < spec.rows; ++r)
        for (int c = 0; c < spec.cols; ++c)
            h.terms.push_back({{{r, c}, {r + 1, c}}, edge_op(false, r, c)});
    return h;
}

DenseTensor embed_sites(const DenseTensor& op, const std::vector<int>& positions,
                        int num_qudits, int d) {
    std::int64_t dim = 1;
    for (int i = 0; i < num_qudits; ++i) dim *= d;
    std::int64_t span = 1;
    for (std::size_t i = 0; i < positions.size(); ++i) span *= d;
    if (op.rank() != 2 || op.dim(0) != span || op.dim(1) != span)
        throw DimensionError("embed_sites: operator extent mismatch");

    std::vector<std::int64_t> strides(num_qudits, 1);
    for (int i = num_qudits; i-- > 1;) strides[i - 1] = strides[i] * d;

    DenseTensor out({dim, dim});
    // Iterate (rest, a, b): row = rest + digits(a), col = rest + digits(b).
    std::int64_t rest_total = dim / span;
    std::vector<std::int64_t> rest_strides;
    std::vector<bool> is_target(num_qudits, false);
    for (int p : positions) is_target[p] = true;
    for (int s = 0; s < num_qudits; ++s)
        if (!is_target[s]) rest_strides.push_back(strides[s]);

    auto spread = [&](std::int64_t packed, const std::vector<std::int64_t>& strs) {
        std::int64_t idx = 0;
        for (std::size_t i = strs.size(); i-- > 0;) {
            idx += (packed % d) * strs[i];
            packed /= d;
        }
        return idx;
    };
    std::vector<std::int64_t> tstrides;
    for (int p : positions) tstrides.push_back(strides[p]);

    for (std::int64_t r = 0; r < rest_total; ++r) {
        const std::int64_t base = spread(r, rest_strides);
        for (std::int64_t a = 0; a < span; ++a) {
            const std::int64_t row = base + spread(a, tstrides);
            for (std::int64_t b = 0; b < span; ++b) {
                const cplx v = op.data()[a * span + b];
                if (v == cplx{0.0, 0.0}) continue;
                out.data()[row * dim + base + spread(b, tstrides)] = v;
            }
        }
    }
    return out;
}

Hamiltonian block_hamiltonian(const Hamiltonian& h, int block_rows) {
    const int n = block_rows;
    if (n < 1 || h.spec.rows % n != 0)
        throw ValidationError("block_hamiltonian: row count not divisible by block size");
    const int d = h.spec.local_dim;
    std::int64_t d_eff = 1;
    for (int i = 0; i < n; ++i) d_eff *= d;

    Hamiltonian out;
    out.spec = LatticeSpec{h.spec.rows / n, h.spec.cols, static_cast<int>(d_eff)};
    out.seed = h.seed;
    out.model_name = h.model_name;
    out.convention = h.convention;

    // Accumulate merged operators keyed by the effective site list.
    std::map<std::vector<std::pair<int, int>>, std::size_t> slot;
    auto add = [&](std::vector<std::pair<int, int>> sites, const DenseTensor& op) {
        auto it = slot.find(sites);
        if (it == slot.end()) {
            slot.emplace(sites, out.terms.size());
            out.terms.push_back({std::move(sites), op});
        } else {
            out.terms[it->second].op = out.terms[it->second].op.axpy(op);
        }
    };

    for (const auto& term : h.terms) {
        if (term.sites.size() == 1) {
            const auto [r, c] = term.sites[0];
            add({{r / n, c}}, embed_sites(term.op, {r % n}, n, d));
        } else {
            const auto [r1, c1] = term.sites[0];
            const auto [r2, c2] = term.sites[1];
            if (r1 == r2) { // horizontal edge: same position inside both blocks
                add({{r1 / n, c1}, {r1 / n, c2}},
                    embed_sites(term.op, {r1 % n, n + r1 % n}, 2 * n, d));
            } else if (r1 / n == r2 / n) { // vertical edge inside one block
                add({{r1 / n, c1}}, embed_sites(term.op, {r1 % n, r2 % n}, n, d));
            } else { // vertical edge across the block boundary
                add({{r1 / n, c1}, {r2 / n, c1}},
                    embed_sites(term.op, {n - 1, n}, 2 * n, d));
            }
        }
    }
    return out;
}

namespace {
std::vector<int> term_site_indices(const Hamiltonian& h, const HamiltonianTerm& t) {
    std::vector<int> idx;
    for (auto [r, c] : t.sites) idx.push_back(h.spec.site_index(r, c));
    return idx;
}
} // namespace

DenseTensor assemble_dense(const Hamiltonian& h) {
    const std::int64_t dim = h.spec.hilbert_dim(1 << 16);
    DenseTensor m({dim, dim});
    for (const auto& term : h.terms) {
        const DenseTensor e = embed_sites(term.op, term_site_indices(h, term), h.spec.sites(),
                                          h.spec.local_dim);
        m = m.axpy(e);
    }
    return m;
}

void apply_hamiltonian(const Hamiltonian& h, const cplx* x, cplx* y) {
    std::int64_t dim = 1;
    for (int i = 0; i < h.spec.sites(); ++i) dim *= h.spec.local_dim;
    std::fill(y, y + dim, cplx{0.0, 0.0});
    for (const auto& term : h.terms)
        kernels::apply_local_term(y, x, term.op.data().data(), term_site_indices(h, term),
                                  h.spec.sites(), h.spec.local_dim);
}

std::pair<double, DenseTensor> exact_ground(const Hamiltonian& h, const ExactOptions& opts) {
    const std::int64_t dim = h.spec.hilbert_dim(opts.hilbert_cap);

    if (h.terms.empty()) {
        DenseTensor v({dim});
        v.data()[0] = cplx{1.0, 0.0};
        return {0.0, v};
    }

    double energy;
    DenseTensor state({dim});
    if (dim <= opts.dense_cap) {
        auto [val, vec] = herm_eig_extreme(assemble_dense(h), Extreme::Smallest, opts.dense_cap);
        energy = val;
        state = vec;
    } else {
        auto apply = [&h](const cplx* in, cplx* out) { apply_hamiltonian(h, in, out); };
        LanczosResult r = lanczos_extreme(apply, dim, Extreme::Smallest, opts.seed,
                                          opts.residual_tol);
        energy = r.value;
        state = DenseTensor({dim}, std::move(r.vector));
    }

    // Hard residual guarantee on the returned pair.
    std::vector<cplx> hv(dim);
    apply_hamiltonian(h, state.data().data(), hv.data());
    double res = 0.0;
    for (std::int64_t i = 0; i < dim; ++i) res += std::norm(hv[i] - energy * state.data()[i]);
    res = std::sqrt(res);
    if (res >= 1e-8)
        throw ConvergenceError("exact_ground: residual " + std::to_string(res) + " too large");
    return {energy, state};
}

} // namespace sgs
