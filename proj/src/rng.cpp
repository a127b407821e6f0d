#include "sgs/rng.hpp"

#include <Eigen/Dense>

namespace sgs::rng {

DenseTensor gaussian_tensor(const std::vector<std::int64_t>& shape, Stream& stream) {
    DenseTensor t(shape);
    for (auto& v : t.data()) v = stream.cgauss();
    return t;
}

DenseTensor random_unitary(std::int64_t n, Stream& stream) {
    using Mat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Mat g(n, n);
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j) g(i, j) = stream.cgauss();
    Eigen::HouseholderQR<Mat> qr(g);
    Mat q = qr.householderQ() * Mat::Identity(n, n);
    Mat r = qr.matrixQR().template triangularView<Eigen::Upper>();
    for (std::int64_t j = 0; j < n; ++j) {
        const cplx d = r(j, j);
        const double a = std::abs(d);
        if (a > 0.0) q.col(j) *= d / a;
    }
    DenseTensor out({n, n});
    Mat::Map(out.data().data(), n, n) = q;
    return out;
}

DenseTensor random_hermitian(std::int64_t n, Stream& stream) {
    DenseTensor m = gaussian_tensor({n, n}, stream);
    DenseTensor out({n, n});
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            out.data()[i * n + j] =
                0.5 * (m.data()[i * n + j] + std::conj(m.data()[j * n + i]));
    return out;
}

} // namespace sgs::rng
