#include "ddci/fourier.hpp"

#include <cmath>
#include <vector>

namespace ddci {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 transform, in place. sign = -1 forward, +1 inverse.
// No normalization here; the caller applies the orthonormal 1/sqrt(HW) once.
void fft_pow2(cplx* a, std::size_t n, int sign) {
    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len >> 1;
        for (std::size_t j = 0; j < half; ++j) {
            // direct twiddle evaluation keeps the error well under 1e-12
            const double ang = sign * kTwoPi * static_cast<double>(j) / static_cast<double>(len);
            const cplx w(std::cos(ang), std::sin(ang));
            for (std::size_t i = j; i < n; i += len) {
                const cplx u = a[i];
                const cplx v = a[i + half] * w;
                a[i] = u + v;
                a[i + half] = u - v;
            }
        }
    }
}

// O(n^2) fallback for even non-power-of-two sizes; desk-scale only.
void dft_direct(cplx* a, std::size_t n, int sign, std::vector<cplx>& scratch) {
    scratch.assign(n, cplx(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) {
        cplx acc(0.0, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double ang =
                sign * kTwoPi * static_cast<double>((j * k) % n) / static_cast<double>(n);
            acc += a[j] * cplx(std::cos(ang), std::sin(ang));
        }
        scratch[k] = acc;
    }
    for (std::size_t k = 0; k < n; ++k) a[k] = scratch[k];
}

void fft_1d(cplx* a, std::size_t n, int sign, std::vector<cplx>& scratch) {
    if (is_pow2(n))
        fft_pow2(a, n, sign);
    else
        dft_direct(a, n, sign, scratch);
}

// For even sizes fftshift and ifftshift coincide: swap halves.
void shift_2d(ComplexImage& x) {
    const std::size_t h = x.height(), w = x.width();
    const std::size_t hh = h / 2, hw = w / 2;
    for (std::size_t c = 0; c < x.coils(); ++c)
        for (std::size_t i = 0; i < hh; ++i)
            for (std::size_t j = 0; j < w; ++j)
                std::swap(x.at(c, i, j), x.at(c, i + hh, (j + hw) % w));
}

ComplexImage transform_2d(const ComplexImage& in, int sign) {
    ComplexImage x = in;
    shift_2d(x);  // ifftshift
    const std::size_t h = x.height(), w = x.width();
    std::vector<cplx> scratch;
    std::vector<cplx> col(h);
    for (std::size_t c = 0; c < x.coils(); ++c) {
        for (std::size_t i = 0; i < h; ++i) fft_1d(&x.at(c, i, 0), w, sign, scratch);
        for (std::size_t j = 0; j < w; ++j) {
            for (std::size_t i = 0; i < h; ++i) col[i] = x.at(c, i, j);
            fft_1d(col.data(), h, sign, scratch);
            for (std::size_t i = 0; i < h; ++i) x.at(c, i, j) = col[i];
        }
    }
    shift_2d(x);  // fftshift
    const double scale = 1.0 / std::sqrt(static_cast<double>(h) * static_cast<double>(w));
    x *= cplx(scale, 0.0);
    return x;
}

}  // namespace

ComplexImage fft2c(const ComplexImage& x) { return transform_2d(x, -1); }

ComplexImage ifft2c(const ComplexImage& k) { return transform_2d(k, +1); }

}  // namespace ddci
