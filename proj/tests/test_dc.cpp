#include <doctest.h>

#include "ddci/dc.hpp"
#include "ddci/fourier.hpp"

using namespace ddci;

namespace {

ComplexImage random_kspace(std::size_t coils, std::size_t h, std::size_t w, std::uint64_t seed) {
    Rng rng(seed);
    ComplexImage x(coils, h, w);
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
    return x;
}

SamplingMask mask_of(std::vector<std::uint8_t> cols) {
    return SamplingMask::from_columns(std::move(cols));
}

ComplexImage masked(const ComplexImage& k, const SamplingMask& m) {
    ComplexImage out = ComplexImage::zeros_like(k);
    for (std::size_t c = 0; c < k.coils(); ++c)
        for (std::size_t i = 0; i < k.height(); ++i)
            for (std::size_t j = 0; j < k.width(); ++j)
                if (m.sampled[j]) out.at(c, i, j) = k.at(c, i, j);
    return out;
}

}  // namespace

TEST_SUITE("dc") {

TEST_CASE("full and empty masks") {
    ComplexImage pred = random_kspace(2, 4, 4, 1);
    ComplexImage meas = random_kspace(2, 4, 4, 2);

    SamplingMask full = mask_of({1, 1, 1, 1});
    ComplexImage out = data_consistency(pred, masked(meas, full), full);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == meas[i]);

    SamplingMask empty = mask_of({0, 0, 0, 0});
    ComplexImage out2 = data_consistency(pred, masked(meas, empty), empty);
    for (std::size_t i = 0; i < out2.size(); ++i) CHECK(out2[i] == pred[i]);
}

TEST_CASE("columns route by the mask") {
    ComplexImage pred = random_kspace(1, 4, 4, 3);
    ComplexImage meas = random_kspace(1, 4, 4, 4);
    SamplingMask m = mask_of({1, 0, 0, 1});
    ComplexImage ks = masked(meas, m);
    ComplexImage out = data_consistency(pred, ks, m);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(out.at(0, i, 0) == meas.at(0, i, 0));
        CHECK(out.at(0, i, 3) == meas.at(0, i, 3));
        CHECK(out.at(0, i, 1) == pred.at(0, i, 1));
        CHECK(out.at(0, i, 2) == pred.at(0, i, 2));
    }
}

TEST_CASE("idempotence and exact fidelity, bit-exact") {
    ComplexImage pred = random_kspace(2, 8, 8, 5);
    ComplexImage meas = random_kspace(2, 8, 8, 6);
    SamplingMask m = mask_of({1, 0, 1, 0, 0, 1, 0, 1});
    ComplexImage ks = masked(meas, m);

    ComplexImage once = data_consistency(pred, ks, m);
    ComplexImage twice = data_consistency(once, ks, m);
    for (std::size_t i = 0; i < once.size(); ++i) REQUIRE(twice[i] == once[i]);

    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t j = 0; j < 8; ++j)
                if (m.sampled[j]) REQUIRE(once.at(c, i, j) == ks.at(c, i, j));
}

TEST_CASE("linearity in the prediction") {
    ComplexImage a = random_kspace(1, 4, 4, 7);
    ComplexImage b = random_kspace(1, 4, 4, 8);
    ComplexImage meas = random_kspace(1, 4, 4, 9);
    SamplingMask m = mask_of({0, 1, 1, 0});
    ComplexImage ks = masked(meas, m);

    // D(a + b, ks) - D(a, ks) = (a + b) - a off-mask, 0 on-mask = D(b, 0-mask applied)
    ComplexImage lhs = data_consistency(a + b, ks, m) - data_consistency(a, ks, m);
    ComplexImage rhs = data_consistency_backward(b, m);  // b with sampled columns zeroed
    CHECK(l2_norm(lhs - rhs) < 1e-14);
}

TEST_CASE("backward masks the sampled columns") {
    ComplexImage g = random_kspace(1, 4, 4, 10);

    ComplexImage pass = data_consistency_backward(g, mask_of({0, 0, 0, 0}));
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(pass[i] == g[i]);

    ComplexImage zero = data_consistency_backward(g, mask_of({1, 1, 1, 1}));
    CHECK(l2_norm(zero) == 0.0);
}

TEST_CASE("finite differences through a composite graph with one DC node") {
    // scalar loss L(k_pred) = 0.5 || D(F(x), ks) - target ||^2 where x is the
    // variable; gradient = F^-1( masked-complement(D(F(x)) - target) )
    const SamplingMask m = mask_of({1, 0, 1, 0, 0, 1, 0, 0});
    ComplexImage x = random_kspace(1, 8, 8, 11);
    ComplexImage meas = random_kspace(1, 8, 8, 12);
    ComplexImage ks = masked(meas, m);
    ComplexImage target = random_kspace(1, 8, 8, 13);

    const auto loss = [&](const ComplexImage& xin) {
        ComplexImage d = data_consistency(fft2c(xin), ks, m) - target;
        const double n = l2_norm(d);
        return 0.5 * n * n;
    };

    ComplexImage resid = data_consistency(fft2c(x), ks, m) - target;
    ComplexImage analytic = ifft2c(data_consistency_backward(resid, m));

    Rng rng(14);
    const double eps = 1e-5;
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t idx = rng.below(x.size());
        const bool real_part = rng.below(2) == 0;
        ComplexImage xp = x, xm = x;
        const cplx delta = real_part ? cplx(eps, 0.0) : cplx(0.0, eps);
        xp[idx] += delta;
        xm[idx] -= delta;
        const double fd = (loss(xp) - loss(xm)) / (2.0 * eps);
        const double an = real_part ? analytic[idx].real() : analytic[idx].imag();
        CHECK(std::fabs(fd - an) <= 1e-6 * std::max({1.0, std::fabs(fd), std::fabs(an)}));
    }
}

}  // TEST_SUITE
