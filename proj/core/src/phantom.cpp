#include "ddci/phantom.hpp"

#include <cmath>

#include "ddci/fourier.hpp"

namespace ddci {

namespace {

constexpr double kPi = 3.14159265358979323846264338328;

double deg(double d) { return d * kPi / 180.0; }

}  // namespace

const std::vector<EllipseSpec>& default_head_phantom() {
    // Modified (high-contrast) variant of the classic 10-ellipse head table,
    // (cx, cy, a, b, phi, intensity); phi is the CCW rotation of the a-axis.
    static const std::vector<EllipseSpec> table = {
        {0.0, 0.0, 0.69, 0.92, deg(0.0), 1.0},
        {0.0, -0.0184, 0.6624, 0.874, deg(0.0), -0.8},
        {0.22, 0.0, 0.11, 0.31, deg(-18.0), -0.2},
        {-0.22, 0.0, 0.16, 0.41, deg(18.0), -0.2},
        {0.0, 0.35, 0.21, 0.25, deg(0.0), 0.1},
        {0.0, 0.1, 0.046, 0.046, deg(0.0), 0.1},
        {0.0, -0.1, 0.046, 0.046, deg(0.0), 0.1},
        {-0.08, -0.605, 0.046, 0.023, deg(0.0), 0.1},
        {0.0, -0.606, 0.023, 0.023, deg(0.0), 0.1},
        {0.06, -0.605, 0.023, 0.046, deg(0.0), 0.1},
    };
    return table;
}

ComplexImage shepp_logan(std::size_t height, std::size_t width,
                         const std::vector<EllipseSpec>& ellipses) {
    ComplexImage img(1, height, width);
    for (const EllipseSpec& e : ellipses) {
        if (e.a <= 0.0 || e.b <= 0.0) throw ParamError("ellipse semi-axes must be positive");
        const double c = std::cos(e.phi), s = std::sin(e.phi);
        for (std::size_t i = 0; i < height; ++i) {
            const double y = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(height);
            for (std::size_t j = 0; j < width; ++j) {
                const double x =
                    -1.0 + (2.0 * static_cast<double>(j) + 1.0) / static_cast<double>(width);
                const double dx = x - e.cx, dy = y - e.cy;
                const double u = (dx * c + dy * s) / e.a;
                const double v = (-dx * s + dy * c) / e.b;
                if (u * u + v * v <= 1.0) img.at(0, i, j) += cplx(e.intensity, 0.0);
            }
        }
    }
    return img;
}

SensitivitySet make_sensitivities(std::size_t height, std::size_t width, std::size_t coils,
                                  Rng rng) {
    if (coils == 0) throw ParamError("coil count must be >= 1");
    ComplexImage maps(coils, height, width);

    // Wide Gaussian bumps anchored at equally spaced border positions, with a
    // gentle per-coil linear phase; the seed jitters anchor angle and width.
    const double angle0 = rng.uniform(0.0, 2.0 * kPi);
    for (std::size_t c = 0; c < coils; ++c) {
        const double ang = angle0 + 2.0 * kPi * static_cast<double>(c) / static_cast<double>(coils);
        const double cx = std::cos(ang), cy = std::sin(ang);
        const double sigma = 0.9 * (1.0 + 0.1 * rng.uniform(-1.0, 1.0));
        const double px = 0.5 * rng.uniform(-1.0, 1.0);
        const double py = 0.5 * rng.uniform(-1.0, 1.0);
        const double p0 = rng.uniform(0.0, 2.0 * kPi);
        for (std::size_t i = 0; i < height; ++i) {
            const double y = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(height);
            for (std::size_t j = 0; j < width; ++j) {
                const double x =
                    -1.0 + (2.0 * static_cast<double>(j) + 1.0) / static_cast<double>(width);
                const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                const double mag = std::exp(-d2 / (2.0 * sigma * sigma));
                const double phase = p0 + px * x + py * y;
                maps.at(c, i, j) = std::polar(mag, phase);
            }
        }
    }

    // pixelwise RSS normalization (bumps are strictly positive, so safe)
    for (std::size_t i = 0; i < height; ++i)
        for (std::size_t j = 0; j < width; ++j) {
            double rss = 0.0;
            for (std::size_t c = 0; c < coils; ++c) rss += std::norm(maps.at(c, i, j));
            const double inv = 1.0 / std::sqrt(rss);
            for (std::size_t c = 0; c < coils; ++c) maps.at(c, i, j) *= inv;
        }
    return SensitivitySet{std::move(maps)};
}

ComplexImage simulate_multicoil(const ComplexImage& img, const SensitivitySet& sens) {
    if (img.coils() != 1) throw ShapeError("simulate_multicoil expects a single-coil image");
    if (img.height() != sens.maps.height() || img.width() != sens.maps.width())
        throw ShapeError("image and sensitivity dims disagree");
    ComplexImage out = ComplexImage::zeros_like(sens.maps);
    for (std::size_t c = 0; c < out.coils(); ++c)
        for (std::size_t i = 0; i < out.height(); ++i)
            for (std::size_t j = 0; j < out.width(); ++j)
                out.at(c, i, j) = sens.maps.at(c, i, j) * img.at(0, i, j);
    return out;
}

RealTensor rss_combine(const ComplexImage& x) {
    RealTensor out({x.height(), x.width()});
    for (std::size_t i = 0; i < x.height(); ++i)
        for (std::size_t j = 0; j < x.width(); ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < x.coils(); ++c) s += std::norm(x.at(c, i, j));
            out[i * x.width() + j] = std::sqrt(s);
        }
    return out;
}

std::vector<PhantomCase> generate_dataset(std::size_t n, std::size_t height, std::size_t width,
                                          std::size_t coils, double jitter, Rng rng) {
    if (n == 0) throw ParamError("dataset size must be >= 1");
    std::vector<PhantomCase> cases;
    cases.reserve(n);
    const std::vector<EllipseSpec>& base = default_head_phantom();
    for (std::size_t idx = 0; idx < n; ++idx) {
        Rng case_rng(derive_seed(rng.seed(), stream_tag::dataset_case, idx));
        std::vector<EllipseSpec> ellipses = base;
        for (EllipseSpec& e : ellipses) {
            e.cx += 0.1 * jitter * case_rng.uniform(-1.0, 1.0);
            e.cy += 0.1 * jitter * case_rng.uniform(-1.0, 1.0);
            e.a *= 1.0 + jitter * case_rng.uniform(-1.0, 1.0);
            e.b *= 1.0 + jitter * case_rng.uniform(-1.0, 1.0);
            e.intensity *= 1.0 + jitter * case_rng.uniform(-1.0, 1.0);
        }
        PhantomCase pc;
        pc.sens = make_sensitivities(height, width, coils, case_rng);
        pc.image_full = simulate_multicoil(shepp_logan(height, width, ellipses), pc.sens);
        pc.k_full = fft2c(pc.image_full);
        cases.push_back(std::move(pc));
    }
    return cases;
}

}  // namespace ddci
