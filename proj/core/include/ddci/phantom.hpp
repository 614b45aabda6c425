#pragma once

#include <vector>

#include "ddci/tensor.hpp"

namespace ddci {

/// One additive ellipse on the [-1,1]^2 plane. phi rotates the (a, b) axes
/// counterclockwise; intensity adds wherever the point lies inside.
struct EllipseSpec {
    double cx = 0.0, cy = 0.0;
    double a = 0.0, b = 0.0;
    double phi = 0.0;  // radians
    double intensity = 0.0;
};

/// The standard 10-ellipse head table (modified intensities; see
/// docs/FORMATS.md for the exact values committed here).
const std::vector<EllipseSpec>& default_head_phantom();

/// Real-valued single-coil image; pixel (i, j) is sampled at the center of
/// its cell, x = -1 + (2j+1)/W, y = 1 - (2i+1)/H (row 0 at the top).
ComplexImage shepp_logan(std::size_t height, std::size_t width,
                         const std::vector<EllipseSpec>& ellipses);

/// Smooth complex coil profiles, normalized so the root-sum-of-squares over
/// coils is exactly 1 at every pixel.
struct SensitivitySet {
    ComplexImage maps;  // (C, H, W)
    std::size_t coils() const { return maps.coils(); }
};

SensitivitySet make_sensitivities(std::size_t height, std::size_t width, std::size_t coils,
                                  Rng rng);

/// Coil c of the output is the pixelwise product sens_c * img.
ComplexImage simulate_multicoil(const ComplexImage& img, const SensitivitySet& sens);

/// Per-pixel sqrt of the sum over coils of |.|^2; the evaluable magnitude.
RealTensor rss_combine(const ComplexImage& x);

/// One synthetic ground-truth case: coil images and their k-space.
struct PhantomCase {
    ComplexImage image_full;  // (C, H, W)
    ComplexImage k_full;      // fft2c(image_full)
    SensitivitySet sens;
};

/// n cases with ellipse axes/intensities perturbed by +-jitter relative
/// noise (centers by +-0.1*jitter absolute). Case seeds derive from
/// (rng.seed, case index), so generation is a pure function of (params, seed).
std::vector<PhantomCase> generate_dataset(std::size_t n, std::size_t height, std::size_t width,
                                          std::size_t coils, double jitter, Rng rng);

}  // namespace ddci
