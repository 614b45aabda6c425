#include "ddci/tensor.hpp"

#include <cmath>
#include <numeric>

namespace ddci {

namespace {

std::size_t checked_product(const std::vector<std::size_t>& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one dim");
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw ShapeError("tensor dims must be positive");
        if (n > SIZE_MAX / d) throw ShapeError("tensor shape overflows size_t");
        n *= d;
    }
    return n;
}

}  // namespace

RealTensor::RealTensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(checked_product(shape_), 0.0) {}

RealTensor::RealTensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    if (checked_product(shape_) != data_.size())
        throw ShapeError("tensor data length does not match shape");
}

bool RealTensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

RealTensor& RealTensor::operator+=(const RealTensor& other) {
    if (!same_shape(other)) throw ShapeError("tensor shape mismatch in +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

RealTensor& RealTensor::operator-=(const RealTensor& other) {
    if (!same_shape(other)) throw ShapeError("tensor shape mismatch in -=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

RealTensor& RealTensor::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

void RealTensor::fill(double v) {
    for (double& x : data_) x = v;
}

RealTensor operator+(RealTensor a, const RealTensor& b) { return a += b; }
RealTensor operator-(RealTensor a, const RealTensor& b) { return a -= b; }
RealTensor operator*(RealTensor a, double s) { return a *= s; }

ComplexImage::ComplexImage(std::size_t coils, std::size_t height, std::size_t width)
    : coils_(coils), height_(height), width_(width) {
    if (coils == 0) throw ShapeError("coil count must be >= 1");
    if (height == 0 || width == 0) throw ShapeError("image dims must be positive");
    if (height % 2 != 0 || width % 2 != 0)
        throw ShapeError("image height and width must be even (centered FFT convention)");
    data_.assign(coils * height * width, cplx(0.0, 0.0));
}

ComplexImage::ComplexImage(std::size_t coils, std::size_t height, std::size_t width,
                           std::vector<cplx> values)
    : ComplexImage(coils, height, width) {
    if (values.size() != data_.size())
        throw ShapeError("complex image data length does not match C*H*W");
    data_ = std::move(values);
}

bool ComplexImage::all_finite() const {
    for (const cplx& v : data_)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
}

ComplexImage& ComplexImage::operator+=(const ComplexImage& other) {
    if (!same_shape(other)) throw ShapeError("complex image shape mismatch in +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

ComplexImage& ComplexImage::operator-=(const ComplexImage& other) {
    if (!same_shape(other)) throw ShapeError("complex image shape mismatch in -=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

ComplexImage& ComplexImage::operator*=(cplx s) {
    for (cplx& v : data_) v *= s;
    return *this;
}

ComplexImage operator+(ComplexImage a, const ComplexImage& b) { return a += b; }
ComplexImage operator-(ComplexImage a, const ComplexImage& b) { return a -= b; }
ComplexImage operator*(ComplexImage a, cplx s) { return a *= s; }

RealTensor complex_to_channels(const ComplexImage& x) {
    RealTensor t({2 * x.coils(), x.height(), x.width()});
    const std::size_t plane = x.height() * x.width();
    for (std::size_t c = 0; c < x.coils(); ++c) {
        const cplx* src = x.data() + c * plane;
        double* re = t.data() + (2 * c) * plane;
        double* im = t.data() + (2 * c + 1) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            re[i] = src[i].real();
            im[i] = src[i].imag();
        }
    }
    return t;
}

ComplexImage channels_to_complex(const RealTensor& t) {
    if (t.rank() != 3) throw ShapeError("channels_to_complex expects a (ch, H, W) tensor");
    if (t.dim(0) % 2 != 0) throw ShapeError("channel count must be even to reinterpret as complex");
    const std::size_t coils = t.dim(0) / 2;
    ComplexImage x(coils, t.dim(1), t.dim(2));
    const std::size_t plane = x.height() * x.width();
    for (std::size_t c = 0; c < coils; ++c) {
        const double* re = t.data() + (2 * c) * plane;
        const double* im = t.data() + (2 * c + 1) * plane;
        cplx* dst = x.data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] = cplx(re[i], im[i]);
    }
    return x;
}

double l2_norm(const RealTensor& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * x[i];
    return std::sqrt(s);
}

double l2_norm(const ComplexImage& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::norm(x[i]);
    return std::sqrt(s);
}

cplx cdot(const ComplexImage& a, const ComplexImage& b) {
    if (!a.same_shape(b)) throw ShapeError("cdot shape mismatch");
    cplx s(0.0, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

double dot(const RealTensor& a, const RealTensor& b) {
    if (!a.same_shape(b)) throw ShapeError("dot shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double Rng::normal() {
    // Box-Muller; u1 nudged away from 0 so log stays finite.
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw ParamError("Rng::below requires n > 0");
    return next_u64() % n;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_tag, std::uint64_t index) {
    return Rng::mix(Rng::mix(seed ^ stream_tag) + index);
}

}  // namespace ddci
