#include "sgs/linalg.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "sgs/rng.hpp"

namespace sgs {

namespace {
using EigMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EigMap = Eigen::Map<const EigMat>;

EigMat to_eigen(const DenseTensor& t) {
    if (t.rank() != 2) throw DimensionError("expected a 2-mode tensor");
    return EigMap(t.data().data(), t.dim(0), t.dim(1));
}

DenseTensor from_eigen(const EigMat& m) {
    DenseTensor t({m.rows(), m.cols()});
    EigMat::Map(t.data().data(), m.rows(), m.cols()) = m;
    return t;
}

EigMat symmetrized(const DenseTensor& h, double tol, const char* who) {
    const double defect = hermiticity_defect(h);
    if (defect > tol)
        throw ValidationError(std::string(who) + ": matrix is not Hermitian (defect " +
                              std::to_string(defect) + ")");
    EigMat m = to_eigen(h);
    return 0.5 * (m + m.adjoint().eval());
}
} // namespace

double hermiticity_defect(const DenseTensor& h) {
    if (h.rank() != 2 || h.dim(0) != h.dim(1))
        throw DimensionError("hermiticity_defect: expected a square matrix");
    const std::int64_t n = h.dim(0);
    double defect = 0.0, scale = 1.0;
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j) {
            const cplx a = h.data()[i * n + j];
            const cplx b = std::conj(h.data()[j * n + i]);
            defect = std::max(defect, std::abs(a - b));
            scale = std::max(scale, std::abs(a));
        }
    return defect / scale;
}

SvdResult svd(const DenseTensor& t, const std::vector<int>& row_modes,
              const std::vector<int>& col_modes, std::optional<std::int64_t> max_keep) {
    const DenseTensor m = matricize(t, row_modes, col_modes);
    EigMat a = to_eigen(m);
    Eigen::BDCSVD<EigMat> solver(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = solver.singularValues();
    std::int64_t full = s.size();
    std::int64_t keep = max_keep ? std::min<std::int64_t>(*max_keep, full) : full;
    if (keep < 1) keep = 1;

    double discarded = 0.0;
    for (std::int64_t i = keep; i < full; ++i) discarded += s(i) * s(i);

    SvdResult out;
    out.truncation_error = std::sqrt(discarded);
    out.singular_values.assign(s.data(), s.data() + keep);

    EigMat u = solver.matrixU().leftCols(keep);
    EigMat vh = solver.matrixV().leftCols(keep).adjoint();

    std::vector<std::int64_t> ls, rs;
    for (int mode : row_modes) ls.push_back(t.dim(mode));
    ls.push_back(keep);
    rs.push_back(keep);
    for (int mode : col_modes) rs.push_back(t.dim(mode));
    out.left_isometry = from_eigen(u).reshape(ls);
    out.right_isometry = from_eigen(vh).reshape(rs);
    return out;
}

std::pair<double, DenseTensor> herm_eig_extreme(const DenseTensor& h, Extreme which,
                                                std::int64_t dense_cap) {
    const std::int64_t n = h.dim(0);
    EigMat m = symmetrized(h, 1e-10, "herm_eig_extreme");
    if (n <= dense_cap) {
        Eigen::SelfAdjointEigenSolver<EigMat> es(m);
        const std::int64_t idx = which == Extreme::Smallest ? 0 : n - 1;
        DenseTensor v({n});
        for (std::int64_t i = 0; i < n; ++i) v.data()[i] = es.eigenvectors()(i, idx);
        return {es.eigenvalues()(idx), v};
    }
    auto apply = [&m, n](const cplx* x, cplx* y) {
        Eigen::Map<const Eigen::VectorXcd> vx(x, n);
        Eigen::Map<Eigen::VectorXcd> vy(y, n);
        vy = m * vx;
    };
    LanczosResult r = lanczos_extreme(apply, n, which, 0x5eed, 1e-11);
    return {r.value, DenseTensor({n}, std::move(r.vector))};
}

std::pair<std::vector<double>, DenseTensor> herm_eig_full(const DenseTensor& h) {
    EigMat m = symmetrized(h, 1e-10, "herm_eig_full");
    Eigen::SelfAdjointEigenSolver<EigMat> es(m);
    std::vector<double> vals(es.eigenvalues().data(), es.eigenvalues().data() + m.rows());
    return {vals, from_eigen(es.eigenvectors())};
}

std::pair<std::vector<cplx>, DenseTensor> complex_eig(const DenseTensor& t) {
    if (t.rank() != 2 || t.dim(0) != t.dim(1)) throw DimensionError("complex_eig: square matrix expected");
    EigMat m = to_eigen(t);
    Eigen::ComplexEigenSolver<EigMat> es(m);
    const std::int64_t n = m.rows();
    std::vector<std::int64_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
        return std::abs(es.eigenvalues()(a)) > std::abs(es.eigenvalues()(b));
    });
    std::vector<cplx> vals(n);
    EigMat vecs(n, n);
    for (std::int64_t i = 0; i < n; ++i) {
        vals[i] = es.eigenvalues()(order[i]);
        vecs.col(i) = es.eigenvectors().col(order[i]);
    }
    return {vals, from_eigen(vecs)};
}

DenseTensor unitary_exp(const DenseTensor& k, double delta) {
    EigMat m = symmetrized(k, 1e-10, "unitary_exp");
    Eigen::SelfAdjointEigenSolver<EigMat> es(m);
    const std::int64_t n = m.rows();
    Eigen::VectorXcd phases(n);
    for (std::int64_t i = 0; i < n; ++i)
        phases(i) = std::exp(cplx{0.0, delta * es.eigenvalues()(i)});
    EigMat u = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
    return from_eigen(u);
}

DenseTensor herm_sqrt(const DenseTensor& rho) {
    EigMat m = symmetrized(rho, 1e-8, "herm_sqrt");
    Eigen::SelfAdjointEigenSolver<EigMat> es(m);
    const std::int64_t n = m.rows();
    Eigen::VectorXd vals = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    EigMat s = es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().adjoint();
    return from_eigen(s);
}

LanczosResult lanczos_extreme(const std::function<void(const cplx*, cplx*)>& apply,
                              std::int64_t n, Extreme which, std::uint64_t seed, double tol,
                              int max_basis, int max_restarts) {
    rng::Stream stream(seed);
    std::vector<cplx> v0(n);
    for (auto& v : v0) v = stream.cgauss();

    auto normalize = [n](std::vector<cplx>& v) {
        double s = 0.0;
        for (auto& x : v) s += std::norm(x);
        s = std::sqrt(s);
        for (auto& x : v) x /= s;
        return s;
    };
    normalize(v0);

    LanczosResult result;
    std::vector<cplx> w(n), ritz(n);
    const int basis_cap = static_cast<int>(std::min<std::int64_t>(max_basis, n));

    for (int restart = 0; restart < max_restarts; ++restart) {
        std::vector<std::vector<cplx>> basis;
        std::vector<double> alpha, beta;
        basis.push_back(v0);

        for (int j = 0; j < basis_cap; ++j) {
            apply(basis[j].data(), w.data());
            ++result.matvecs;
            cplx a{0.0, 0.0};
            for (std::int64_t i = 0; i < n; ++i) a += std::conj(basis[j][i]) * w[i];
            alpha.push_back(a.real());
            for (std::int64_t i = 0; i < n; ++i) w[i] -= a * basis[j][i];
            if (j > 0)
                for (std::int64_t i = 0; i < n; ++i) w[i] -= beta[j - 1] * basis[j - 1][i];
            // Full reorthogonalization keeps the basis numerically orthonormal.
            for (const auto& q : basis) {
                cplx ov{0.0, 0.0};
                for (std::int64_t i = 0; i < n; ++i) ov += std::conj(q[i]) * w[i];
                for (std::int64_t i = 0; i < n; ++i) w[i] -= ov * q[i];
            }
            double b = 0.0;
            for (auto& x : w) b += std::norm(x);
            b = std::sqrt(b);
            if (j + 1 >= basis_cap || b < 1e-14) break;
            beta.push_back(b);
            std::vector<cplx> q(n);
            for (std::int64_t i = 0; i < n; ++i) q[i] = w[i] / b;
            basis.push_back(std::move(q));
        }

        const int m = static_cast<int>(alpha.size());
        Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(m, m);
        for (int i = 0; i < m; ++i) {
            tri(i, i) = alpha[i];
            if (i + 1 < m) tri(i, i + 1) = tri(i + 1, i) = beta[i];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri);
        const int idx = which == Extreme::Smallest ? 0 : m - 1;
        const double theta = es.eigenvalues()(idx);

        std::fill(ritz.begin(), ritz.end(), cplx{0.0, 0.0});
        for (int j = 0; j < m; ++j) {
            const double c = es.eigenvectors()(j, idx);
            for (std::int64_t i = 0; i < n; ++i) ritz[i] += c * basis[j][i];
        }
        normalize(ritz);

        apply(ritz.data(), w.data());
        ++result.matvecs;
        double res = 0.0;
        for (std::int64_t i = 0; i < n; ++i) res += std::norm(w[i] - theta * ritz[i]);
        res = std::sqrt(res);

        result.value = theta;
        result.vector = ritz;
        result.residual = res;
        if (res <= tol * std::max(1.0, std::abs(theta))) return result;
        v0 = ritz;
    }
    throw ConvergenceError("lanczos_extreme: residual " + std::to_string(result.residual) +
                           " did not reach tolerance");
}

} // namespace sgs
