#include "ddci/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ddci/fourier.hpp"

namespace ddci {

std::size_t SamplingMask::sampled_count() const {
    return static_cast<std::size_t>(std::count(sampled.begin(), sampled.end(), std::uint8_t{1}));
}

SamplingMask SamplingMask::from_columns(std::vector<std::uint8_t> columns) {
    SamplingMask m;
    m.width = columns.size();
    m.sampled = std::move(columns);
    for (auto& v : m.sampled) v = v ? 1 : 0;
    const std::size_t n = m.sampled_count();
    m.acceleration = n > 0 ? static_cast<double>(m.width) / static_cast<double>(n) : 0.0;
    m.center_fraction = 0.0;
    return m;
}

SamplingMask make_mask(std::size_t width, double acceleration, double center_fraction,
                       MaskPattern pattern, Rng rng) {
    if (width == 0 || width % 2 != 0) throw ParamError("mask width must be positive and even");
    if (acceleration <= 0.0) throw ParamError("acceleration must be positive");
    if (center_fraction <= 0.0 || center_fraction >= 1.0)
        throw ParamError("center_fraction must lie in (0, 1)");

    const auto budget = static_cast<std::size_t>(
        std::llround(static_cast<double>(width) / acceleration));
    const auto n_center = static_cast<std::size_t>(
        std::floor(static_cast<double>(width) * center_fraction));
    if (budget < n_center)
        throw ParamError("sampling budget round(W/R) is smaller than the fully sampled center block");
    if (budget > width) throw ParamError("sampling budget exceeds the number of columns");

    SamplingMask m;
    m.width = width;
    m.sampled.assign(width, 0);
    m.acceleration = acceleration;
    m.center_fraction = center_fraction;
    m.seed = rng.seed();
    m.pattern = pattern;

    const std::size_t center_start = width / 2 - n_center / 2;
    for (std::size_t j = 0; j < n_center; ++j) m.sampled[center_start + j] = 1;

    std::vector<std::size_t> rest;
    rest.reserve(width - n_center);
    for (std::size_t j = 0; j < width; ++j)
        if (!m.sampled[j]) rest.push_back(j);

    const std::size_t extra = budget - n_center;
    if (extra >= rest.size()) {
        for (std::size_t j : rest) m.sampled[j] = 1;
        return m;
    }

    if (pattern == MaskPattern::random_lines) {
        // partial Fisher-Yates: the first `extra` entries are a uniform
        // sample without replacement
        for (std::size_t i = 0; i < extra; ++i) {
            const std::size_t j = i + rng.below(rest.size() - i);
            std::swap(rest[i], rest[j]);
            m.sampled[rest[i]] = 1;
        }
    } else {
        for (std::size_t i = 0; i < extra; ++i) {
            const std::size_t pos = (i * rest.size()) / extra;
            m.sampled[rest[pos]] = 1;
        }
    }
    return m;
}

UndersampledSample apply_mask(const ComplexImage& k_full, const SamplingMask& mask) {
    if (k_full.width() != mask.width)
        throw ShapeError("k-space width does not match mask width");
    UndersampledSample s;
    s.k_sparse = ComplexImage::zeros_like(k_full);
    for (std::size_t c = 0; c < k_full.coils(); ++c)
        for (std::size_t i = 0; i < k_full.height(); ++i)
            for (std::size_t j = 0; j < k_full.width(); ++j)
                if (mask.sampled[j]) s.k_sparse.at(c, i, j) = k_full.at(c, i, j);
    s.mask = mask;
    s.k_full = k_full;
    return s;
}

ComplexImage zero_fill_recon(const UndersampledSample& s) { return ifft2c(s.k_sparse); }

RealTensor mask_to_tensor(const SamplingMask& mask) {
    RealTensor t({1, 1, mask.width});
    for (std::size_t j = 0; j < mask.width; ++j) t[j] = mask.sampled[j] ? 1.0 : 0.0;
    return t;
}

SamplingMask mask_from_tensor(const RealTensor& t) {
    if (t.rank() != 3 || t.dim(0) != 1 || t.dim(1) != 1)
        throw ShapeError("mask tensor must have shape (1, 1, W)");
    std::vector<std::uint8_t> cols(t.dim(2));
    for (std::size_t j = 0; j < cols.size(); ++j) cols[j] = t[j] != 0.0 ? 1 : 0;
    return SamplingMask::from_columns(std::move(cols));
}

}  // namespace ddci
