#include "sgs/contraction.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <omp.h>

#include "sgs/kernels.hpp"
#include "sgs/linalg.hpp"

namespace sgs {

namespace detail {

namespace {
std::int64_t ipow(std::int64_t b, int e) {
    std::int64_t r = 1;
    while (e-- > 0) r *= b;
    return r;
}

/// Move mode `from` of t to position `to`, keeping the rest in order.
DenseTensor move_mode(const DenseTensor& t, int from, int to) {
    if (from == to) return t;
    std::vector<int> perm;
    for (int i = 0; i < t.rank(); ++i)
        if (i != from) perm.push_back(i);
    perm.insert(perm.begin() + to, from);
    return t.permute(perm);
}

/// Contract matrix m (mode 1) against mode `pos` of t, result mode back at pos.
DenseTensor apply_matrix_at(const DenseTensor& t, const DenseTensor& m, int pos) {
    return move_mode(contract(m, {1}, t, {pos}), 0, pos);
}

/// Contract a two-slot operator (modes a_out, b_out, a_in, b_in) against modes
/// (pos_a, pos_b) of t; result modes return to their positions.
DenseTensor apply_matrix2_at(const DenseTensor& t, const DenseTensor& op4, int pos_a, int pos_b) {
    DenseTensor r = contract(op4, {2, 3}, t, {pos_a, pos_b});
    // r modes: (a_out, b_out, others in original order minus pos_a/pos_b)
    std::vector<int> perm(t.rank(), -1);
    perm[pos_a] = 0;
    perm[pos_b] = 1;
    int src = 2;
    for (int i = 0; i < t.rank(); ++i)
        if (perm[i] < 0) perm[i] = src++;
    return r.permute(perm);
}

DenseTensor transpose2(const DenseTensor& m) { return m.permute({1, 0}); }

/// Transpose of a two-slot operator: swap out and in mode groups.
DenseTensor transpose4(const DenseTensor& op4) { return op4.permute({2, 3, 0, 1}); }

/// Identity on k mode pairs of extent e: modes (kets.., bras..) with
/// value = prod delta(ket_i, bra_i).
DenseTensor delta_pairs(int k, std::int64_t e) {
    DenseTensor t = DenseTensor::scalar(cplx{1, 0});
    for (int i = 0; i < k; ++i) t = outer(t, DenseTensor::identity(e));
    // modes (a0,b0,a1,b1,...) -> (a.., b..)
    std::vector<int> perm;
    for (int i = 0; i < k; ++i) perm.push_back(2 * i);
    for (int i = 0; i < k; ++i) perm.push_back(2 * i + 1);
    return t.permute(perm);
}
} // namespace

/// Canonical fold layout: modes [ket_0..ket_{K-1}, bra_0..bra_{K-1}] plus,
/// while a vertical pair's lower row is exposed, trailing (x_ket, x_bra).
struct Fold {
    DenseTensor s;
    int k = 0;
    bool deferred = false;

    int ket(int i) const { return i; }
    int bra(int i) const { return k + i; }
    int xk() const { return 2 * k; }
    int xb() const { return 2 * k + 1; }
};

namespace {

/// RDM reshaped to per-slot modes (p_0..p_{K-1}, q_0..q_{K-1}).
DenseTensor rdm_split(const DenseTensor& rho, int k, std::int64_t e) {
    std::vector<std::int64_t> sh(2 * k, e);
    return rho.reshape(sh);
}

/// Stack a fresh row's RDM on top of the fold: ket_i <- (p_i, ket_i).
void stack_above(Fold& f, const DenseTensor& rho_split, std::int64_t e) {
    const int k = f.k;
    DenseTensor t = outer(rho_split, f.s);
    // modes: p(k), q(k), ket(k), bra(k), [x2]
    std::vector<int> perm;
    for (int i = 0; i < k; ++i) {
        perm.push_back(i);
        perm.push_back(2 * k + i);
    }
    for (int i = 0; i < k; ++i) {
        perm.push_back(k + i);
        perm.push_back(3 * k + i);
    }
    if (f.deferred) {
        perm.push_back(4 * k);
        perm.push_back(4 * k + 1);
    }
    t = t.permute(perm);
    std::vector<std::int64_t> sh;
    for (int i = 0; i < k; ++i) sh.push_back(e * f.s.dim(i));
    for (int i = 0; i < k; ++i) sh.push_back(e * f.s.dim(k + i));
    if (f.deferred) {
        sh.push_back(f.s.dim(2 * k));
        sh.push_back(f.s.dim(2 * k + 1));
    }
    f.s = t.reshape(sh);
}

/// Stack an extra row's RDM below the fold (init assembly): ket_i <- (ket_i, p_i).
void stack_below(Fold& f, const DenseTensor& rho_split, std::int64_t e) {
    const int k = f.k;
    DenseTensor t = outer(f.s, rho_split);
    // modes: ket(k), bra(k), p(k), q(k)
    std::vector<int> perm;
    for (int i = 0; i < k; ++i) {
        perm.push_back(i);
        perm.push_back(2 * k + i);
    }
    for (int i = 0; i < k; ++i) {
        perm.push_back(k + i);
        perm.push_back(3 * k + i);
    }
    t = t.permute(perm);
    std::vector<std::int64_t> sh;
    for (int i = 0; i < k; ++i) sh.push_back(f.s.dim(i) * e);
    for (int i = 0; i < k; ++i) sh.push_back(f.s.dim(k + i) * e);
    f.s = t.reshape(sh);
}

/// Split every slot composite into (rest, low) with low extent e. Split
/// layout: [kh_0, kl_0, .., kh_{K-1}, kl_{K-1}, bh_0, bl_0, .., x2].
DenseTensor split_lows(const Fold& f, std::int64_t e) {
    std::vector<std::int64_t> sh;
    const int k = f.k;
    for (int i = 0; i < k; ++i) {
        sh.push_back(f.s.dim(i) / e);
        sh.push_back(e);
    }
    for (int i = 0; i < k; ++i) {
        sh.push_back(f.s.dim(k + i) / e);
        sh.push_back(e);
    }
    if (f.deferred) {
        sh.push_back(f.s.dim(2 * k));
        sh.push_back(f.s.dim(2 * k + 1));
    }
    return f.s.reshape(sh);
}

int split_kl(int i) { return 2 * i + 1; }
int split_kh(int i) { return 2 * i; }
int split_bl(int k, int i) { return 2 * k + 2 * i + 1; }
int split_bh(int k, int i) { return 2 * k + 2 * i; }
int split_x(int k) { return 4 * k; }

} // namespace

LadderEngine::Term LadderEngine::make_term(const ObservableSet& obs) const {
    Term term;
    std::set<int> colset;
    const int hr = s_->eff_rows(), v = s_->cols();
    auto check_site = [&](std::pair<int, int> site) {
        if (site.first < 0 || site.first >= hr || site.second < 0 || site.second >= v)
            throw DimensionError("observable site out of range");
        colset.insert(site.second);
    };
    for (const auto& [site, op] : obs.singles) check_site(site);
    if (obs.pair) {
        check_site(obs.pair->a);
        check_site(obs.pair->b);
        if (!(obs.pair->a < obs.pair->b))
            throw DimensionError("pair sites must be in lexicographic order");
    }
    term.cols.assign(colset.begin(), colset.end());

    auto slot_of = [&](int col) {
        return static_cast<int>(std::lower_bound(term.cols.begin(), term.cols.end(), col) -
                                term.cols.begin());
    };
    const std::int64_t e = s_->params.eff_dim();
    int min_row = hr;
    std::vector<int> col_min_row(term.cols.size(), hr);
    auto touch = [&](std::pair<int, int> site) {
        min_row = std::min(min_row, site.first);
        col_min_row[slot_of(site.second)] = std::min(col_min_row[slot_of(site.second)], site.first);
    };
    for (const auto& [site, op] : obs.singles) {
        if (op.rank() != 2 || op.dim(0) != e || op.dim(1) != e)
            throw DimensionError("single-site observable extent mismatch");
        term.singles[{site.first, slot_of(site.second)}] = op;
        touch(site);
    }
    if (obs.pair) {
        const auto& p = *obs.pair;
        if (p.op.rank() != 2 || p.op.dim(0) != e * e || p.op.dim(1) != e * e)
            throw DimensionError("pair observable extent mismatch");
        Term::PairOp po;
        po.op = p.op;
        if (p.a.second == p.b.second) {
            if (p.b.first != p.a.first + 1)
                throw UnsupportedError("vertical pair operators must act on adjacent rows");
            po.vertical = true;
            po.row = p.a.first;
            po.slot_a = slot_of(p.a.second);
            po.slot_b = po.slot_a;
        } else {
            if (p.a.first != p.b.first)
                throw UnsupportedError("pair operators must share a row or a column");
            po.vertical = false;
            po.row = p.a.first;
            po.slot_a = slot_of(p.a.second);
            po.slot_b = slot_of(p.b.second);
        }
        term.pair = po;
        touch(p.a);
        touch(p.b);
    }
    term.min_op_row = min_row;
    const int m = s_->params.M;
    for (std::size_t i = 0; i < term.cols.size(); ++i)
        term.t0.push_back(std::max(0, col_min_row[i] - m));
    term.tmin = *std::min_element(term.t0.begin(), term.t0.end());
    return term;
}

LadderEngine::Term LadderEngine::make_term(const HamiltonianTerm& t) const {
    ObservableSet obs;
    if (t.sites.size() == 1) {
        obs.singles[t.sites[0]] = t.op;
    } else if (t.sites.size() == 2) {
        obs.pair = ObservableSet::JointPair{t.sites[0], t.sites[1], t.op};
    } else {
        throw UnsupportedError("terms must act on one or two sites");
    }
    return make_term(obs);
}

const DenseTensor& LadderEngine::rdm(int row, const std::vector<int>& cols) const {
    auto key = std::make_pair(row, cols);
    auto it = rdm_cache_.find(key);
    if (it != rdm_cache_.end()) return it->second;
    DenseTensor rho = multi_site_rdm(s_->rows[row], cols);
    return rdm_cache_.emplace(std::move(key), std::move(rho)).first->second;
}

void LadderEngine::invalidate_row(int row) {
    for (auto it = rdm_cache_.begin(); it != rdm_cache_.end();)
        it = it->first.first == row ? rdm_cache_.erase(it) : std::next(it);
}

namespace {

struct StepContext {
    const LadderEngine::Term* term;
    const SGSState* s;
    std::int64_t e;
    int m;
    int nu;
    int k;

    bool defer_created(int t) const {
        return term->pair && term->pair->vertical && term->pair->row + 1 - m == t;
    }
    bool defer_consumed(int t) const {
        return term->pair && term->pair->vertical && term->pair->row - m == t && t >= 0;
    }
    const DenseTensor& gate(int t, int slot) const {
        return s->unitaries[term->cols[slot]][t];
    }
};

/// Forward fold step t: introduce row t, apply gates, handle ops on the
/// consumed row t+M, trace it out.
void forward_step(Fold& f, const StepContext& cx, const LadderEngine& eng, int t) {
    const auto& term = *cx.term;
    const int k = cx.k;
    stack_above(f, rdm_split(eng.rdm(t, term.cols), k, cx.e), cx.e);
    for (int i = 0; i < k; ++i) {
        if (t < term.t0[i]) continue;
        f.s = apply_matrix_at(f.s, cx.gate(t, i), f.ket(i));
        f.s = apply_matrix_at(f.s, cx.gate(t, i).conj(), f.bra(i));
    }

    DenseTensor t2 = split_lows(f, cx.e);
    const int consumed = t + cx.m;
    for (int i = 0; i < k; ++i) {
        auto it = term.singles.find({consumed, i});
        if (it != term.singles.end()) t2 = apply_matrix_at(t2, it->second, split_kl(i));
    }
    if (term.pair && !term.pair->vertical && term.pair->row == consumed) {
        DenseTensor op4 = term.pair->op.reshape({cx.e, cx.e, cx.e, cx.e});
        t2 = apply_matrix2_at(t2, op4, split_kl(term.pair->slot_a), split_kl(term.pair->slot_b));
    }
    if (cx.defer_consumed(t)) {
        DenseTensor op4 = term.pair->op.reshape({cx.e, cx.e, cx.e, cx.e});
        t2 = apply_matrix2_at(t2, op4, split_kl(term.pair->slot_a), split_x(k));
    }

    std::vector<std::pair<int, int>> traces;
    const int keep = cx.defer_created(t) ? term.pair->slot_a : -1;
    for (int i = 0; i < k; ++i)
        if (i != keep) traces.emplace_back(split_kl(i), split_bl(k, i));
    if (cx.defer_consumed(t)) traces.emplace_back(split_x(k), split_x(k) + 1);
    DenseTensor traced = partial_trace(t2, traces);

    // Remaining order: kh_0..kh_{K-1} with kl_keep inline, bh.., bl_keep, [x2].
    if (keep >= 0) {
        // kl_keep sits right after kh_keep; bl_keep after bh_keep. Move both to
        // the trailing deferred positions (xk, xb).
        const int klpos = keep + 1;
        DenseTensor moved = move_mode(traced, klpos, traced.rank() - 1);
        const int blpos = k + keep + 1; // bl shifted left after removing klpos
        f.s = move_mode(moved, blpos, moved.rank() - 1);
        f.deferred = true;
    } else {
        f.s = traced;
        if (cx.defer_consumed(t)) f.deferred = false;
    }
}

Fold make_init(const StepContext& cx, const LadderEngine& eng, int hole_row = -1) {
    const auto& term = *cx.term;
    const int k = cx.k;
    const int hr = cx.s->eff_rows();
    Fold f;
    f.k = k;
    bool first = true;
    for (int r = hr - cx.m; r < hr; ++r) {
        DenseTensor rho = r == hole_row ? delta_pairs(2 * k, cx.e)
                                        : rdm_split(eng.rdm(r, term.cols), k, cx.e);
        // A hole row contributes open modes: handled by the caller keeping
        // them in front (delta wiring below).
        if (r == hole_row) {
            // delta_pairs(2k, e) has modes (a_0..a_{2k-1}, b_0..b_{2k-1});
            // use (a_k.., a_2k) as the open (p, q) and wire (b..) into the fold.
            // Simpler: build identity fold slot-wise.
            DenseTensor id = delta_pairs(k, cx.e); // (p.., w..) pairs: w goes into fold
            DenseTensor idb = delta_pairs(k, cx.e);
            // open kets: id modes (p_i, wk_i); open bras: idb (q_i, wb_i)
            DenseTensor both = outer(id, idb); // (p(k), wk(k), q(k), wb(k))
            if (first) {
                std::vector<int> perm;
                for (int i = 0; i < k; ++i) perm.push_back(i);          // p
                for (int i = 0; i < k; ++i) perm.push_back(2 * k + i);  // q
                for (int i = 0; i < k; ++i) perm.push_back(k + i);      // wk -> kets
                for (int i = 0; i < k; ++i) perm.push_back(3 * k + i);  // wb -> bras
                f.s = both.permute(perm);
                first = false;
            } else {
                // stack_below with the open slot: merge wk into kets, keep (p,q) leading.
                DenseTensor t = outer(f.s, both);
                const int lead = f.s.rank() - 2 * k; // existing leading open modes
                std::vector<int> perm;
                for (int i = 0; i < lead; ++i) perm.push_back(i);
                const int base = f.s.rank();
                for (int i = 0; i < k; ++i) perm.push_back(base + i);         // p
                for (int i = 0; i < k; ++i) perm.push_back(base + 2 * k + i); // q
                for (int i = 0; i < k; ++i) {
                    perm.push_back(lead + i);          // ket_i
                    perm.push_back(base + k + i);      // wk_i
                }
                for (int i = 0; i < k; ++i) {
                    perm.push_back(lead + k + i);      // bra_i
                    perm.push_back(base + 3 * k + i);  // wb_i
                }
                t = t.permute(perm);
                std::vector<std::int64_t> sh;
                for (int i = 0; i < lead + 2 * k; ++i) sh.push_back(t.dim(i));
                for (int i = 0; i < 2 * k; ++i)
                    sh.push_back(t.dim(lead + 2 * k + 2 * i) * t.dim(lead + 2 * k + 2 * i + 1));
                f.s = t.reshape(sh);
            }
            continue;
        }
        if (first) {
            f.s = rho;
            first = false;
        } else if (f.s.rank() == 2 * k) {
            stack_below(f, rho, cx.e);
        } else {
            // leading open modes present: stack below while keeping them.
            const int lead = f.s.rank() - 2 * k;
            DenseTensor t = outer(f.s, rho);
            std::vector<int> perm;
            for (int i = 0; i < lead; ++i) perm.push_back(i);
            for (int i = 0; i < k; ++i) {
                perm.push_back(lead + i);
                perm.push_back(f.s.rank() + i);
            }
            for (int i = 0; i < k; ++i) {
                perm.push_back(lead + k + i);
                perm.push_back(f.s.rank() + k + i);
            }
            t = t.permute(perm);
            std::vector<std::int64_t> sh;
            for (int i = 0; i < lead; ++i) sh.push_back(t.dim(i));
            for (int i = 0; i < 2 * k; ++i)
                sh.push_back(t.dim(lead + 2 * i) * t.dim(lead + 2 * i + 1));
            f.s = t.reshape(sh);
        }
    }
    return f;
}

/// Pending-operator functional at the top of the fold (Heisenberg picture).
/// Returns g in canonical layout; value = sum g[k,b] * S[k,b].
Fold make_finish_functional(const StepContext& cx) {
    const auto& term = *cx.term;
    const int k = cx.k, m = cx.m;
    const int tmin = term.tmin;
    const bool has_x = term.pair && term.pair->vertical && term.pair->row < tmin + m &&
                       term.pair->row + 1 >= tmin + m;
    // Identity functional: per slot per block-row one delta pair; plus x pair.
    const int npairs = k * m + (has_x ? 1 : 0);
    DenseTensor g = delta_pairs(npairs, cx.e);
    // Layout now: kets of all pairs, then bras. Arrange as split-block layout:
    // slot i row j ket at i*m+j; x ket last.
    auto kpos = [&](int slot, int row) { return slot * m + (row - tmin); };
    auto xpos = [&]() { return k * m; };
    // Apply pending single ops (transposed: functional side).
    for (const auto& [key, op] : term.singles) {
        const auto [row, slot] = key;
        if (row < tmin + m) g = apply_matrix_at(g, transpose2(op), kpos(slot, row));
    }
    if (term.pair) {
        const auto& p = *term.pair;
        DenseTensor op4t = transpose4(p.op.reshape({cx.e, cx.e, cx.e, cx.e}));
        if (!p.vertical && p.row < tmin + m)
            g = apply_matrix2_at(g, op4t, kpos(p.slot_a, p.row), kpos(p.slot_b, p.row));
        if (p.vertical && p.row + 1 < tmin + m)
            g = apply_matrix2_at(g, op4t, kpos(p.slot_a, p.row), kpos(p.slot_a, p.row + 1));
        if (has_x) g = apply_matrix2_at(g, op4t, kpos(p.slot_a, p.row), xpos());
    }
    // Merge block rows into slot composites: kets (i*m..i*m+m-1) -> one mode.
    std::vector<std::int64_t> sh;
    const std::int64_t block = ipow(cx.e, m);
    for (int i = 0; i < k; ++i) sh.push_back(block);
    if (has_x) sh.push_back(cx.e);
    for (int i = 0; i < k; ++i) sh.push_back(block);
    if (has_x) sh.push_back(cx.e);
    DenseTensor merged = g.reshape(sh);
    Fold f;
    f.k = k;
    f.deferred = has_x;
    if (has_x) {
        // layout currently (kets.., xk, bras.., xb) -> canonical (kets, bras, xk, xb)
        merged = move_mode(merged, k, 2 * k);          // xk to position after bras-1?
        // after move: (kets(k), bras(k), xk, xb) with xb already trailing
        f.s = merged;
    } else {
        f.s = merged;
    }
    return f;
}

/// Backward (adjoint) step: transform the functional across forward step t.
/// If hole is RowHole, returns the lifted functional split as
/// (p(k), q(k), ket(k), bra(k), [x2]) without contracting the fresh RDM.
enum class BackMode { Through, StopBeforeRdm, StopForGate };

DenseTensor backward_step(Fold& g, const StepContext& cx, const LadderEngine& eng, int t,
                          BackMode mode, int gate_slot = -1) {
    const auto& term = *cx.term;
    const int k = cx.k;
    // Forward: S' = trace(ops(split(gates(stack(rho (x) S)))))
    // Backward: untrace -> ops^T -> merge -> gate adjoints -> unstack.
    const bool created = cx.defer_created(t);   // forward created deferred at this step
    const bool consumed = cx.defer_consumed(t); // forward consumed deferred at this step

    // 1) Untrace: g currently matches S' (canonical; deferred iff created).
    //    Build the split-layout functional with delta insertions at traced lows.
    {
        const int keep = created ? term.pair->slot_a : -1;
        DenseTensor cur = g.s;
        int extra = 0;
        for (int i = 0; i < k; ++i)
            if (i != keep) ++extra;
        const bool untrace_x = consumed;
        DenseTensor deltas = delta_pairs(extra + (untrace_x ? 1 : 0), cx.e);
        DenseTensor t2 = outer(cur, deltas);
        // cur modes: kh(k), bh(k), [xk, xb if created]; delta kets then bras.
        // target split layout: kh_0, kl_0, ..., bh_0, bl_0, ..., [x2]
        std::vector<int> perm;
        const int cur_rank = cur.rank();
        std::vector<int> dk(k, -1), db(k, -1);
        {
            int j = 0;
            for (int i = 0; i < k; ++i)
                if (i != keep) {
                    dk[i] = cur_rank + j;
                    db[i] = cur_rank + extra + (untrace_x ? 1 : 0) + j;
                    ++j;
                }
        }
        for (int i = 0; i < k; ++i) {
            perm.push_back(i); // kh_i
            perm.push_back(i == keep ? 2 * k : dk[i]); // kl: deferred xk or fresh delta
        }
        for (int i = 0; i < k; ++i) {
            perm.push_back(k + i);
            perm.push_back(i == keep ? 2 * k + 1 : db[i]);
        }
        if (untrace_x) {
            perm.push_back(cur_rank + extra);
            perm.push_back(cur_rank + 2 * extra + 1);
        }
        g.s = t2.permute(perm);
        g.deferred = untrace_x;
    }

    // 2) Adjoint of the consumed-row operators.
    const int consumed_row = t + cx.m;
    for (int i = 0; i < k; ++i) {
        auto it = term.singles.find({consumed_row, i});
        if (it != term.singles.end())
            g.s = apply_matrix_at(g.s, transpose2(it->second), split_kl(i));
    }
    if (term.pair && !term.pair->vertical && term.pair->row == consumed_row) {
        DenseTensor op4t = transpose4(term.pair->op.reshape({cx.e, cx.e, cx.e, cx.e}));
        g.s = apply_matrix2_at(g.s, op4t, split_kl(term.pair->slot_a), split_kl(term.pair->slot_b));
    }
    if (consumed) {
        DenseTensor op4t = transpose4(term.pair->op.reshape({cx.e, cx.e, cx.e, cx.e}));
        g.s = apply_matrix2_at(g.s, op4t, split_kl(term.pair->slot_a), split_x(k));
    }

    // 3) Merge lows back into composites.
    {
        std::vector<std::int64_t> sh;
        for (int i = 0; i < k; ++i) sh.push_back(g.s.dim(2 * i) * g.s.dim(2 * i + 1));
        for (int i = 0; i < k; ++i)
            sh.push_back(g.s.dim(2 * k + 2 * i) * g.s.dim(2 * k + 2 * i + 1));
        if (g.deferred) {
            sh.push_back(cx.e);
            sh.push_back(cx.e);
        }
        g.s = g.s.reshape(sh);
    }

    // 4) Gate adjoints (skip the hole slot in gate mode).
    for (int i = 0; i < k; ++i) {
        if (t < term.t0[i]) continue;
        if (mode == BackMode::StopForGate && i == gate_slot) continue;
        const DenseTensor& u = cx.gate(t, i);
        g.s = apply_matrix_at(g.s, transpose2(u), i);
        g.s = apply_matrix_at(g.s, transpose2(u.conj()), k + i);
    }
    if (mode == BackMode::StopForGate) return DenseTensor::scalar(cplx{0, 0});

    // 5) Unstack: split (p_i, ket_i) composites.
    DenseTensor split;
    {
        std::vector<std::int64_t> sh;
        for (int i = 0; i < k; ++i) {
            sh.push_back(cx.e);
            sh.push_back(g.s.dim(i) / cx.e);
        }
        for (int i = 0; i < k; ++i) {
            sh.push_back(cx.e);
            sh.push_back(g.s.dim(k + i) / cx.e);
        }
        if (g.deferred) {
            sh.push_back(cx.e);
            sh.push_back(cx.e);
        }
        split = g.s.reshape(sh);
        // reorder to (p(k), q(k), ket(k), bra(k), [x2])
        std::vector<int> perm;
        for (int i = 0; i < k; ++i) perm.push_back(2 * i);
        for (int i = 0; i < k; ++i) perm.push_back(2 * k + 2 * i);
        for (int i = 0; i < k; ++i) perm.push_back(2 * i + 1);
        for (int i = 0; i < k; ++i) perm.push_back(2 * k + 2 * i + 1);
        if (g.deferred) {
            perm.push_back(4 * k);
            perm.push_back(4 * k + 1);
        }
        split = split.permute(perm);
    }
    if (mode == BackMode::StopBeforeRdm) return split;

    // 6) Contract the fresh RDM (p, q) to finish the adjoint of stack_above.
    DenseTensor rho = rdm_split(eng.rdm(t, term.cols), k, cx.e);
    std::vector<int> gm, rm;
    for (int i = 0; i < 2 * k; ++i) {
        gm.push_back(i);
        rm.push_back(i);
    }
    g.s = contract(rho, rm, split, gm);
    return DenseTensor::scalar(cplx{0, 0});
}

cplx finish_value(const Fold& f, const Fold& finish) {
    std::vector<int> ma, mb;
    for (int i = 0; i < f.s.rank(); ++i) {
        ma.push_back(i);
        mb.push_back(i);
    }
    return contract(finish.s, ma, f.s, mb).as_scalar();
}

StepContext make_context(const LadderEngine::Term& term, const SGSState& s) {
    StepContext cx;
    cx.term = &term;
    cx.s = &s;
    cx.e = s.params.eff_dim();
    cx.m = s.params.M;
    cx.nu = s.params.unitaries_per_column();
    cx.k = static_cast<int>(term.cols.size());
    return cx;
}

double norm_sq_above(const SGSState& s, int tmin, int skip_row = -1) {
    double p = 1.0;
    for (int r = 0; r < tmin; ++r) {
        if (r == skip_row) continue;
        const double n = mps_norm(s.rows[r]);
        p *= n * n;
    }
    return p;
}

/// Product-formula evaluation when the lattice has no column unitaries.
cplx value_no_unitaries(const LadderEngine& eng, const LadderEngine::Term& term,
                        const SGSState& s) {
    const std::int64_t e = s.params.eff_dim();
    cplx total{1.0, 0.0};
    for (int r = 0; r < s.eff_rows(); ++r) {
        // Operator on this row's slots.
        DenseTensor op = DenseTensor::identity(ipow(e, static_cast<int>(term.cols.size())));
        bool any = false;
        auto embed_single = [&](int slot, const DenseTensor& o) {
            DenseTensor full = DenseTensor::scalar(cplx{1, 0});
            for (std::size_t i = 0; i < term.cols.size(); ++i) {
                DenseTensor piece = static_cast<int>(i) == slot ? o : DenseTensor::identity(e);
                full = full.rank() == 0 ? piece : kron(full, piece);
            }
            return full;
        };
        for (const auto& [key, o] : term.singles)
            if (key.first == r) {
                op = contract(embed_single(key.second, o), {1}, op, {0});
                any = true;
            }
        if (term.pair && !term.pair->vertical && term.pair->row == r) {
            if (term.cols.size() != 2)
                throw UnsupportedError("pair with extra columns on a unitary-free lattice");
            op = contract(term.pair->op, {1}, op, {0});
            any = true;
        }
        if (term.pair && term.pair->vertical && (term.pair->row == r || term.pair->row + 1 == r))
            throw UnsupportedError("vertical pair on a lattice without column unitaries");
        (void)any;
        const DenseTensor rho = eng.rdm(r, term.cols);
        // tr(op * rho); with no ops this is the row's squared norm.
        cplx tr{0, 0};
        DenseTensor prod = contract(op, {1}, rho, {0});
        for (std::int64_t i = 0; i < prod.dim(0); ++i) tr += prod.at({i, i});
        total *= tr;
    }
    return total;
}

} // namespace

cplx LadderEngine::value(const Term& term) const {
    const SGSState& s = *s_;
    if (s.params.unitaries_per_column() == 0) {
        if (term.pair && term.pair->vertical) {
            // Rows are independent: evaluate via the two one-site RDMs.
            const auto& p = *term.pair;
            DenseTensor rho_a = rdm(p.row, term.cols);
            DenseTensor rho_b = rdm(p.row + 1, term.cols);
            DenseTensor joint = kron(rho_a, rho_b);
            DenseTensor prod = contract(p.op, {1}, joint, {0});
            cplx tr{0, 0};
            for (std::int64_t i = 0; i < prod.dim(0); ++i) tr += prod.at({i, i});
            double rest = 1.0;
            for (int r = 0; r < s.eff_rows(); ++r) {
                if (r == p.row || r == p.row + 1) continue;
                const double n = mps_norm(s.rows[r]);
                rest *= n * n;
            }
            return tr * rest;
        }
        return value_no_unitaries(*this, term, s);
    }

    StepContext cx = make_context(term, s);
    Fold f = make_init(cx, *this);
    for (int t = cx.nu - 1; t >= term.tmin; --t) forward_step(f, cx, *this, t);
    Fold fin = make_finish_functional(cx);
    return finish_value(f, fin) * norm_sq_above(s, term.tmin);
}

namespace {
/// Row-hole effective observable on a lattice without column unitaries:
/// every row factorizes, so W is the row's own operator scaled by the other
/// rows' factors.
DenseTensor row_hole_no_unitaries(const LadderEngine& eng, const LadderEngine::Term& term,
                                  const SGSState& s, int row) {
    const std::int64_t e = s.params.eff_dim();
    const int k = static_cast<int>(term.cols.size());
    std::int64_t dc = 1;
    for (int i = 0; i < k; ++i) dc *= e;
    if (term.pair && term.pair->vertical)
        throw UnsupportedError("vertical pair on a lattice without column unitaries");

    auto embed_single = [&](int slot, const DenseTensor& o) {
        DenseTensor full = DenseTensor::scalar(cplx{1, 0});
        for (int i = 0; i < k; ++i) {
            DenseTensor piece = i == slot ? o : DenseTensor::identity(e);
            full = full.rank() == 0 ? piece : kron(full, piece);
        }
        return full;
    };
    auto row_op = [&](int r) {
        DenseTensor op = DenseTensor::identity(dc);
        for (const auto& [key, o] : term.singles)
            if (key.first == r) op = contract(embed_single(key.second, o), {1}, op, {0});
        if (term.pair && term.pair->row == r) op = contract(term.pair->op, {1}, op, {0});
        return op;
    };
    cplx scale{1.0, 0.0};
    for (int r = 0; r < s.eff_rows(); ++r) {
        if (r == row) continue;
        DenseTensor prod = contract(row_op(r), {1}, eng.rdm(r, term.cols), {0});
        cplx tr{0, 0};
        for (std::int64_t i = 0; i < dc; ++i) tr += prod.at({i, i});
        scale *= tr;
    }
    return row_op(row).scaled(scale);
}
} // namespace

DenseTensor LadderEngine::row_hole(const Term& term, int row) const {
    const SGSState& s = *s_;
    const std::int64_t e = s.params.eff_dim();
    const std::int64_t dc = ipow(e, static_cast<int>(term.cols.size()));
    if (s.params.unitaries_per_column() == 0)
        return row_hole_no_unitaries(*this, term, s, row);

    if (row < term.tmin) {
        // The fold never touches this row: W = value * I / (its norm factor).
        StepContext cx = make_context(term, s);
        Fold f = make_init(cx, *this);
        for (int t = cx.nu - 1; t >= term.tmin; --t) forward_step(f, cx, *this, t);
        Fold fin = make_finish_functional(cx);
        const cplx val = finish_value(f, fin) * norm_sq_above(s, term.tmin, row);
        return DenseTensor::identity(dc).scaled(val);
    }

    StepContext cx = make_context(term, s);
    const int hr = s.eff_rows();

    // Backward functional down to the step that introduces `row`.
    Fold g = make_finish_functional(cx);
    DenseTensor lifted;
    if (row >= hr - cx.m) {
        for (int t = term.tmin; t <= cx.nu - 1; ++t)
            backward_step(g, cx, *this, t, BackMode::Through);
        // g pairs with the full init; contract all init rows except `row`.
        Fold init_hole = make_init(cx, *this, row);
        // init_hole modes: (p(k), q(k), ket(k), bra(k))
        std::vector<int> hm, gm;
        for (int i = 0; i < 2 * cx.k; ++i) {
            hm.push_back(2 * cx.k + i);
            gm.push_back(i);
        }
        lifted = contract(init_hole.s, hm, g.s, gm); // (p(k), q(k))
    } else {
        for (int t = term.tmin; t < row; ++t) backward_step(g, cx, *this, t, BackMode::Through);
        DenseTensor split = backward_step(g, cx, *this, row, BackMode::StopBeforeRdm);
        // split modes: (p(k), q(k), ket(k), bra(k), [x2])
        Fold f = make_init(cx, *this);
        for (int t = cx.nu - 1; t > row; --t) forward_step(f, cx, *this, t);
        std::vector<int> sm, fm;
        for (int i = 0; i < f.s.rank(); ++i) {
            sm.push_back(2 * cx.k + i);
            fm.push_back(i);
        }
        lifted = contract(split, sm, f.s, fm); // (p(k), q(k))
    }

    // Observable convention: value = tr(W rho) with rho ket-major.
    std::vector<int> perm;
    for (int i = 0; i < cx.k; ++i) perm.push_back(cx.k + i); // q first
    for (int i = 0; i < cx.k; ++i) perm.push_back(i);
    DenseTensor w = lifted.permute(perm).reshape({dc, dc});
    return w.scaled(norm_sq_above(s, term.tmin));
}

DenseTensor LadderEngine::gate_hole(const Term& term, int t, int col) const {
    const SGSState& s = *s_;
    StepContext cx = make_context(term, s);
    int slot = -1;
    for (std::size_t i = 0; i < term.cols.size(); ++i)
        if (term.cols[i] == col) slot = static_cast<int>(i);
    if (slot < 0) throw DimensionError("gate_hole: column not involved in the term");
    if (t < term.t0[slot] || t > cx.nu - 1)
        throw DimensionError("gate_hole: unitary does not enter this term");

    // Forward to the freshly stacked object below the gates of step t.
    Fold f = make_init(cx, *this);
    for (int tt = cx.nu - 1; tt > t; --tt) forward_step(f, cx, *this, tt);
    stack_above(f, rdm_split(rdm(t, term.cols), cx.k, cx.e), cx.e);

    // Backward to the functional above step t; its adjoint pass applies every
    // gate of the step except the hole's two sides.
    Fold g = make_finish_functional(cx);
    for (int tt = term.tmin; tt < t; ++tt) backward_step(g, cx, *this, tt, BackMode::Through);
    backward_step(g, cx, *this, t, BackMode::StopForGate, slot);

    // Contract everything but the hole slot's ket/bra on both sides.
    std::vector<int> gm, fm;
    for (int i = 0; i < f.s.rank(); ++i) {
        if (i == slot || i == cx.k + slot) continue;
        gm.push_back(i);
        fm.push_back(i);
    }
    DenseTensor env = contract(g.s, gm, f.s, fm);
    // modes: (g ket_slot = out, g bra_slot = out', f ket_slot = in, f bra_slot = in')
    DenseTensor e2 = env.permute({0, 2, 1, 3});
    return e2.scaled(norm_sq_above(s, term.tmin));
}

} // namespace detail

double norm(const SGSState& s) { return row_norm_product(s); }

LadderPlan plan_expectation(const SGSState& s, const ObservableSet& obs) {
    detail::LadderEngine eng(&s);
    auto term = eng.make_term(obs);
    LadderPlan plan;
    plan.columns = term.cols;
    plan.first_fold_row = term.tmin;
    const std::int64_t e = s.params.eff_dim();
    const int k = static_cast<int>(term.cols.size());
    const int m = s.params.M;
    std::int64_t block = 1;
    for (int i = 0; i < m; ++i) block *= e;
    const int nu = s.params.unitaries_per_column();

    std::int64_t base = 1;
    for (int i = 0; i < 2 * k; ++i) base *= block;
    const std::int64_t stacked = base * static_cast<std::int64_t>(std::pow(e, 2 * k));
    for (int r = term.tmin; r < s.eff_rows(); ++r)
        plan.row_rdms.push_back({r, term.cols});
    for (int t = nu - 1; t >= term.tmin; --t) {
        plan.steps.push_back({"stack", stacked, stacked});
        plan.steps.push_back({"gates", stacked, 2 * k * stacked * (e * block)});
        plan.steps.push_back({"trace", base, stacked});
    }
    for (const auto& st : plan.steps) {
        plan.peak_intermediate = std::max(plan.peak_intermediate, st.intermediate_entries);
        plan.dominant_cost = std::max(plan.dominant_cost, st.cost);
    }
    return plan;
}

cplx expect_local(const SGSState& s, const ObservableSet& obs, const ExpectOptions& opts) {
    std::size_t sites = obs.singles.size() + (obs.pair ? 2 : 0);
    const int cap = opts.ack_cost ? opts.max_sites_acked : opts.max_sites;
    if (static_cast<int>(sites) > cap)
        throw UnsupportedError("expect_local: " + std::to_string(sites) +
                               " operator sites exceed the cap of " + std::to_string(cap) +
                               " (cost grows exponentially with operator count)");
    detail::LadderEngine eng(&s);
    if (obs.singles.empty() && !obs.pair) {
        const double n = row_norm_product(s);
        return cplx{n * n, 0.0};
    }
    auto term = eng.make_term(obs);
    if (term.cols.size() > 3)
        throw UnsupportedError("expect_local: more than 3 involved columns");
    return eng.value(term);
}

double energy(const SGSState& s, const Hamiltonian& h) {
    Hamiltonian blocked;
    const Hamiltonian* use = &h;
    if (h.spec == s.params.physical && s.params.N > 1) {
        blocked = block_hamiltonian(h, s.params.N);
        use = &blocked;
    }
    if (!(use->spec.rows == s.eff_rows() && use->spec.cols == s.cols() &&
          use->spec.local_dim == s.params.eff_dim()))
        throw ValidationError("energy: Hamiltonian lattice does not match the state");

    detail::LadderEngine eng(&s);
    std::vector<cplx> vals(use->terms.size());
#pragma omp parallel for schedule(dynamic) num_threads(kernels::threads())
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(use->terms.size()); ++i) {
        detail::LadderEngine local(&s);
        vals[i] = local.value(local.make_term(use->terms[i]));
    }
    cplx total{0, 0};
    for (const auto& v : vals) total += v; // fixed summation order
    const double n = row_norm_product(s);
    return total.real() / (n * n);
}

Environment environment(const SGSState& s, const Hamiltonian& h, const Hole& hole) {
    Hamiltonian blocked;
    const Hamiltonian* use = &h;
    if (h.spec == s.params.physical && s.params.N > 1) {
        blocked = block_hamiltonian(h, s.params.N);
        use = &blocked;
    }

    if (hole.kind == Hole::Kind::Unitary) {
        detail::LadderEngine eng(&s);
        const std::int64_t udim = s.params.unitary_dim();
        DenseTensor env2_sum({udim, udim, udim, udim});
        for (const auto& ht : use->terms) {
            auto term = eng.make_term(ht);
            int slot = -1;
            for (std::size_t i = 0; i < term.cols.size(); ++i)
                if (term.cols[i] == hole.col) slot = static_cast<int>(i);
            if (slot < 0 || hole.row < term.t0[slot]) continue;
            env2_sum = env2_sum.axpy(eng.gate_hole(term, hole.row, hole.col));
        }
        // Gamma with dE/d(delta) = 2 Re[i tr(K Gamma)]: Gamma = U0 * G,
        // G[i, o] = sum env2[o, i, o', i'] conj(U0[o', i']).
        const DenseTensor& u0 = s.unitaries[hole.col][hole.row];
        DenseTensor gmat = contract(env2_sum, {2, 3}, u0.conj(), {0, 1}); // (o, i)
        DenseTensor gamma = contract(u0, {1}, gmat.permute({1, 0}), {0});
        Environment env;
        env.hole = hole;
        env.tensor = gamma;
        return env;
    }

    // Row-tensor hole: gauge the row at the hole site first.
    SGSState gauged = s;
    gauged.rows[hole.row] = canonicalize(s.rows[hole.row], hole.col);
    detail::LadderEngine eng(&gauged);
    const std::int64_t e = s.params.eff_dim();
    const DenseTensor& a = gauged.rows[hole.row].tensors[hole.col];
    const std::int64_t dl = a.dim(0), dr = a.dim(2);
    const std::int64_t hole_dim = dl * e * dr;
    DenseTensor heff({hole_dim, hole_dim});

    for (const auto& ht : use->terms) {
        auto term = eng.make_term(ht);
        DenseTensor w = eng.row_hole(term, hole.row);

        // Decompose W into products of single-column operators.
        std::vector<std::pair<std::map<int, DenseTensor>, cplx>> products;
        if (term.cols.size() == 1) {
            products.push_back({{{term.cols[0], w}}, cplx{1, 0}});
        } else if (term.cols.size() == 2) {
            DenseTensor t4 = w.reshape({e, e, e, e}).permute({0, 2, 1, 3}); // (q1,p1,q2,p2)
            auto res = svd(t4, {0, 1}, {2, 3});
            for (std::size_t kk = 0; kk < res.singular_values.size(); ++kk) {
                if (res.singular_values[kk] < 1e-14) continue;
                DenseTensor x({e, e}), y({e, e});
                for (std::int64_t i = 0; i < e * e; ++i) {
                    x.data()[i] = res.left_isometry.data()[i * res.singular_values.size() + kk] *
                                  res.singular_values[kk];
                    y.data()[i] = res.right_isometry.data()[kk * e * e + i];
                }
                products.push_back({{{term.cols[0], x}, {term.cols[1], y}}, cplx{1, 0}});
            }
        } else {
            throw UnsupportedError("environment: terms spanning >2 columns");
        }

        // Row-level environment of the hole site for each product operator.
        for (const auto& [ops, coeff] : products) {
            const MPSRow& row = gauged.rows[hole.row];
            DenseTensor l({1, 1});
            l.data()[0] = cplx{1, 0}; // (bra, ket)
            for (int c = 0; c < hole.col; ++c) {
                DenseTensor x = contract(l, {1}, row.tensors[c], {0}); // (b', i, b)
                auto it = ops.find(c);
                if (it != ops.end())
                    x = contract(it->second, {1}, x, {1}).permute({1, 0, 2});
                l = contract(row.tensors[c].conj(), {0, 1}, x, {0, 1});
            }
            DenseTensor r({1, 1});
            r.data()[0] = cplx{1, 0}; // (bra, ket)
            for (int c = row.length() - 1; c > hole.col; --c) {
                DenseTensor x = contract(row.tensors[c], {2}, r, {1}); // (a, i, b')
                auto it = ops.find(c);
                if (it != ops.end())
                    x = contract(it->second, {1}, x, {1}).permute({1, 0, 2});
                DenseTensor rn = contract(x, {1, 2}, row.tensors[c].conj(), {1, 2}); // (a, a')
                r = rn.permute({1, 0});
            }
            auto it = ops.find(hole.col);
            DenseTensor mid = it != ops.end() ? it->second : DenseTensor::identity(e);
            // H[(l',p',r'),(l,p,r)] = L[l',l] O[p',p] R[r',r]
            DenseTensor contrib = outer(outer(l, mid), r); // (l',l,p',p,r',r)
            contrib = contrib.permute({0, 2, 4, 1, 3, 5}).reshape({hole_dim, hole_dim});
            heff = heff.axpy(contrib, coeff);
        }
    }

    // Hermitize against roundoff.
    DenseTensor sym({hole_dim, hole_dim});
    for (std::int64_t i = 0; i < hole_dim; ++i)
        for (std::int64_t j = 0; j < hole_dim; ++j)
            sym.data()[i * hole_dim + j] = 0.5 * (heff.data()[i * hole_dim + j] +
                                                  std::conj(heff.data()[j * hole_dim + i]));
    Environment env;
    env.hole = hole;
    env.tensor = sym;
    env.gauged = std::move(gauged);
    return env;
}

} // namespace sgs
