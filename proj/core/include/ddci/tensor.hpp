#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "ddci/errors.hpp"

namespace ddci {

using cplx = std::complex<double>;

/// Dense row-major array of f64 values. Rank 1..4 covers everything the
/// pipeline stores: bias vectors, 2D images, (channel, H, W) activations and
/// (out, in, k, k) convolution weights.
class RealTensor {
public:
    RealTensor() = default;
    explicit RealTensor(std::vector<std::size_t> shape);
    RealTensor(std::vector<std::size_t> shape, std::vector<double> values);

    static RealTensor zeros_like(const RealTensor& other) { return RealTensor(other.shape_); }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // (c, h, w) indexing for rank-3 tensors.
    double& at3(std::size_t c, std::size_t h, std::size_t w) {
        return data_[(c * shape_[1] + h) * shape_[2] + w];
    }
    double at3(std::size_t c, std::size_t h, std::size_t w) const {
        return data_[(c * shape_[1] + h) * shape_[2] + w];
    }
    // (o, c, p, q) indexing for rank-4 tensors.
    double& at4(std::size_t o, std::size_t c, std::size_t p, std::size_t q) {
        return data_[((o * shape_[1] + c) * shape_[2] + p) * shape_[3] + q];
    }
    double at4(std::size_t o, std::size_t c, std::size_t p, std::size_t q) const {
        return data_[((o * shape_[1] + c) * shape_[2] + p) * shape_[3] + q];
    }

    bool same_shape(const RealTensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    RealTensor& operator+=(const RealTensor& other);
    RealTensor& operator-=(const RealTensor& other);
    RealTensor& operator*=(double s);
    void fill(double v);

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

RealTensor operator+(RealTensor a, const RealTensor& b);
RealTensor operator-(RealTensor a, const RealTensor& b);
RealTensor operator*(RealTensor a, double s);

/// Complex-valued image with a leading coil axis, row-major per coil.
/// Carries both image-domain and k-space-domain data. H and W must be even:
/// the centered FFT convention places the DC bin at (H/2, W/2), which is only
/// unambiguous for even sizes.
class ComplexImage {
public:
    ComplexImage() = default;
    ComplexImage(std::size_t coils, std::size_t height, std::size_t width);
    ComplexImage(std::size_t coils, std::size_t height, std::size_t width, std::vector<cplx> values);

    static ComplexImage zeros_like(const ComplexImage& other) {
        return ComplexImage(other.coils_, other.height_, other.width_);
    }

    std::size_t coils() const { return coils_; }
    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t size() const { return data_.size(); }

    cplx* data() { return data_.data(); }
    const cplx* data() const { return data_.data(); }

    cplx& operator[](std::size_t i) { return data_[i]; }
    cplx operator[](std::size_t i) const { return data_[i]; }

    cplx& at(std::size_t c, std::size_t h, std::size_t w) {
        return data_[(c * height_ + h) * width_ + w];
    }
    cplx at(std::size_t c, std::size_t h, std::size_t w) const {
        return data_[(c * height_ + h) * width_ + w];
    }

    bool same_shape(const ComplexImage& other) const {
        return coils_ == other.coils_ && height_ == other.height_ && width_ == other.width_;
    }
    bool all_finite() const;

    ComplexImage& operator+=(const ComplexImage& other);
    ComplexImage& operator-=(const ComplexImage& other);
    ComplexImage& operator*=(cplx s);

private:
    std::size_t coils_ = 0, height_ = 0, width_ = 0;
    std::vector<cplx> data_;
};

ComplexImage operator+(ComplexImage a, const ComplexImage& b);
ComplexImage operator-(ComplexImage a, const ComplexImage& b);
ComplexImage operator*(ComplexImage a, cplx s);

/// (2C, H, W) real view: channel 2c holds the real part of coil c, channel
/// 2c+1 the imaginary part.
RealTensor complex_to_channels(const ComplexImage& x);

/// Exact inverse of complex_to_channels; channel count must be even.
ComplexImage channels_to_complex(const RealTensor& t);

double l2_norm(const RealTensor& x);
double l2_norm(const ComplexImage& x);

/// sum over entries of conj(a) * b.
cplx cdot(const ComplexImage& a, const ComplexImage& b);
double dot(const RealTensor& a, const RealTensor& b);

/// Counter-based deterministic generator built on the splitmix64 finalizer.
/// Identical seeds yield bit-identical streams on every platform (pure u64
/// arithmetic); see docs/FORMATS.md for the exact recurrence.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via Box-Muller; consumes exactly two draws per call.
    double normal();

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    /// splitmix64 output finalizer, exposed for seed derivation.
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

/// Stable derived seed for independent streams (per-case data, per-case
/// masks, per-epoch shuffles): mix(mix(seed ^ stream_tag) + index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_tag, std::uint64_t index);

namespace stream_tag {
inline constexpr std::uint64_t dataset_case = 0x63617365ULL;  // "case"
inline constexpr std::uint64_t mask = 0x6D61736BULL;          // "mask"
inline constexpr std::uint64_t epoch_shuffle = 0x73687566ULL; // "shuf"
}  // namespace stream_tag

}  // namespace ddci
