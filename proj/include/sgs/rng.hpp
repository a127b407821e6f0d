#pragma once

#include <cstdint>
#include <random>

#include "sgs/tensor.hpp"

namespace sgs::rng {

/// Name of the generator algorithm, recorded in output metadata so that
/// seeded runs stay reproducible across releases.
inline constexpr const char* kGeneratorName = "mt19937_64/box-muller/v1";

/// Deterministic random stream. The Gaussian transform is a fixed Box-Muller
/// implementation rather than std::normal_distribution, whose sequence is
/// implementation-defined.
class Stream {
public:
    explicit Stream(std::uint64_t seed) : eng_(seed) {}

    /// Uniform double in [2^-53, 1], from the top 53 bits of the engine.
    double uniform() {
        const std::uint64_t bits = eng_() >> 11;
        return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
    }

    /// Standard real Gaussian N(0, 1).
    double gauss() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    /// Standard complex Gaussian CN(0, 1): E|z|^2 = 1.
    cplx cgauss() {
        const double re = gauss();
        const double im = gauss();
        return cplx{re, im} / std::sqrt(2.0);
    }

    std::uint64_t raw() { return eng_(); }

private:
    std::mt19937_64 eng_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

/// Tensor with i.i.d. standard complex Gaussian entries.
DenseTensor gaussian_tensor(const std::vector<std::int64_t>& shape, Stream& stream);

/// Haar-like random unitary: QR of a Gaussian matrix with the R diagonal
/// phase-fixed.
DenseTensor random_unitary(std::int64_t n, Stream& stream);

/// (M + M^dag)/2 with M Gaussian.
DenseTensor random_hermitian(std::int64_t n, Stream& stream);

} // namespace sgs::rng
