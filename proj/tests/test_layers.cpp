#include <doctest.h>

#include <cmath>
#include <functional>

#include "ddci/layers.hpp"

using namespace ddci;

namespace {

RealTensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
    RealTensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.uniform(-1.0, 1.0);
    return t;
}

// Central finite differences against an analytic gradient, one tensor.
// rel tolerance with a small absolute floor for near-zero entries.
void check_grad(const std::function<double()>& loss_fn, RealTensor& param,
                const RealTensor& analytic, Rng& rng, int samples, double tol = 1e-5) {
    REQUIRE(param.same_shape(analytic));
    const double eps = 1e-5;
    for (int s = 0; s < samples; ++s) {
        const std::size_t i = rng.below(param.size());
        const double saved = param[i];
        param[i] = saved + eps;
        const double lp = loss_fn();
        param[i] = saved - eps;
        const double lm = loss_fn();
        param[i] = saved;
        const double fd = (lp - lm) / (2.0 * eps);
        const double an = analytic[i];
        const double err = std::fabs(fd - an);
        const bool ok = err <= tol * std::max(std::fabs(fd), std::fabs(an)) || err <= 1e-8;
        if (!ok) {
            CAPTURE(i);
            CAPTURE(fd);
            CAPTURE(an);
        }
        CHECK(ok);
    }
}

// 0.5 * || y - target ||^2 and its gradient wrt y
double half_sq_loss(const RealTensor& y, const RealTensor& target) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - target[i]) * (y[i] - target[i]);
    return 0.5 * s;
}

RealTensor loss_grad(const RealTensor& y, const RealTensor& target) { return y - target; }

// Direct 6-loop convolution, independent of the production kernels.
RealTensor naive_conv(const RealTensor& x, const RealTensor& w, const RealTensor& b) {
    const std::size_t oc = w.dim(0), ic = w.dim(1), k = w.dim(2);
    const std::size_t h = x.dim(1), ww = x.dim(2);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((k - 1) / 2);
    RealTensor y({oc, h, ww});
    for (std::size_t o = 0; o < oc; ++o)
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < ww; ++j) {
                double acc = b[o];
                for (std::size_t c = 0; c < ic; ++c)
                    for (std::size_t p = 0; p < k; ++p)
                        for (std::size_t q = 0; q < k; ++q) {
                            const std::ptrdiff_t ii =
                                static_cast<std::ptrdiff_t>(i + p) - pad;
                            const std::ptrdiff_t jj =
                                static_cast<std::ptrdiff_t>(j + q) - pad;
                            if (ii < 0 || jj < 0 || ii >= static_cast<std::ptrdiff_t>(h) ||
                                jj >= static_cast<std::ptrdiff_t>(ww))
                                continue;
                            acc += w.at4(o, c, p, q) *
                                   x.at3(c, static_cast<std::size_t>(ii),
                                         static_cast<std::size_t>(jj));
                        }
                y.at3(o, i, j) = acc;
            }
    return y;
}

}  // namespace

TEST_SUITE("layers") {

TEST_CASE("1x1 identity kernel and constant-bias conv") {
    Rng rng(1);
    RealTensor x = random_tensor({1, 4, 4}, rng);

    ConvParams ident{RealTensor({1, 1, 1, 1}, {1.0}), RealTensor({1})};
    RealTensor y = conv2d_forward(x, ident, nullptr);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);

    ConvParams bias_only{RealTensor({2, 1, 3, 3}), RealTensor({2}, {0.5, -1.5})};
    RealTensor z = conv2d_forward(x, bias_only, nullptr);
    for (std::size_t i = 0; i < 16; ++i) {
        CHECK(z[i] == 0.5);
        CHECK(z[16 + i] == -1.5);
    }
}

TEST_CASE("conv matches the naive 6-loop oracle") {
    Rng rng(2);
    RealTensor x = random_tensor({3, 8, 8}, rng);
    ConvParams p{random_tensor({4, 3, 3, 3}, rng), random_tensor({4}, rng)};
    RealTensor fast = conv2d_forward(x, p, nullptr);
    RealTensor slow = naive_conv(x, p.w, p.b);
    for (std::size_t i = 0; i < fast.size(); ++i)
        REQUIRE(std::fabs(fast[i] - slow[i]) < 1e-12);

    // generic-kernel path (k=5)
    RealTensor x5 = random_tensor({2, 6, 6}, rng);
    ConvParams p5{random_tensor({3, 2, 5, 5}, rng), random_tensor({3}, rng)};
    RealTensor fast5 = conv2d_forward(x5, p5, nullptr);
    RealTensor slow5 = naive_conv(x5, p5.w, p5.b);
    for (std::size_t i = 0; i < fast5.size(); ++i)
        REQUIRE(std::fabs(fast5[i] - slow5[i]) < 1e-12);
}

TEST_CASE("conv channel mismatch is rejected") {
    Rng rng(3);
    RealTensor x = random_tensor({3, 4, 4}, rng);
    ConvParams p{random_tensor({4, 2, 3, 3}, rng), random_tensor({4}, rng)};
    CHECK_THROWS_AS(conv2d_forward(x, p, nullptr), ShapeError);
}

TEST_CASE("conv backward: bias gradient is the spatial sum; zero upstream ") {
    Rng rng(4);
    RealTensor x = random_tensor({2, 5, 5}, rng);
    ConvParams p{random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng)};
    Tape tape;
    conv2d_forward(x, p, &tape);
    RealTensor gy = random_tensor({3, 5, 5}, rng);
    ConvGrads g = conv2d_backward(gy, tape);
    for (std::size_t o = 0; o < 3; ++o) {
        double sum = 0.0;
        for (std::size_t i = 0; i < 25; ++i) sum += gy[o * 25 + i];
        CHECK(g.b[o] == doctest::Approx(sum).epsilon(1e-12));
    }

    Tape tape2;
    conv2d_forward(x, p, &tape2);
    ConvGrads gz = conv2d_backward(RealTensor({3, 5, 5}), tape2);
    CHECK(l2_norm(gz.x) == 0.0);
    CHECK(l2_norm(gz.w) == 0.0);
    CHECK(l2_norm(gz.b) == 0.0);
}

TEST_CASE("conv backward matches finite differences (k=3 and k=5)") {
    for (const std::size_t k : {std::size_t{3}, std::size_t{5}}) {
        Rng rng(5 + k);
        RealTensor x = random_tensor({2, 6, 6}, rng);
        ConvParams p{random_tensor({3, 2, k, k}, rng, 0.5), random_tensor({3}, rng, 0.5)};
        RealTensor target = random_tensor({3, 6, 6}, rng);

        const auto loss = [&]() {
            return half_sq_loss(conv2d_forward(x, p, nullptr), target);
        };
        Tape tape;
        RealTensor y = conv2d_forward(x, p, &tape);
        ConvGrads g = conv2d_backward(loss_grad(y, target), tape);

        check_grad(loss, p.w, g.w, rng, 30);
        check_grad(loss, p.b, g.b, rng, 3);
        check_grad(loss, x, g.x, rng, 30);
    }
}

TEST_CASE("tape order violations are detected") {
    Rng rng(6);
    RealTensor x = random_tensor({1, 4, 4}, rng);
    ConvParams p{random_tensor({1, 1, 3, 3}, rng), random_tensor({1}, rng)};
    Tape tape;
    conv2d_forward(x, p, &tape);
    relu_forward(x, &tape);
    // conv pop while a relu node is on top
    CHECK_THROWS_AS(conv2d_backward(x, tape), Error);
    // drain correctly, then pop an empty tape
    relu_backward(x, tape);
    conv2d_backward(x, tape);
    CHECK_THROWS_AS(relu_backward(x, tape), Error);
}

TEST_CASE("relu forward/backward basics") {
    RealTensor x({3}, {-1.0, 0.0, 2.0});
    Tape tape;
    RealTensor y = relu_forward(x, &tape);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
    CHECK(y[2] == 2.0);

    RealTensor up({3}, {1.0, 1.0, 1.0});
    RealTensor g = relu_backward(up, tape);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);  // gradient defined as 0 at the kink
    CHECK(g[2] == 1.0);

    RealTensor yy = relu_forward(y, nullptr);
    for (std::size_t i = 0; i < 3; ++i) CHECK(yy[i] == y[i]);  // idempotent
}

TEST_CASE("relu matches finite differences away from zero") {
    Rng rng(7);
    RealTensor x = random_tensor({2, 4, 4}, rng);
    for (std::size_t i = 0; i < x.size(); ++i)
        if (std::fabs(x[i]) < 0.1) x[i] = 0.2;  // stay away from the kink
    RealTensor target = random_tensor({2, 4, 4}, rng);

    const auto loss = [&]() { return half_sq_loss(relu_forward(x, nullptr), target); };
    Tape tape;
    RealTensor y = relu_forward(x, &tape);
    RealTensor gx = relu_backward(loss_grad(y, target), tape);
    check_grad(loss, x, gx, rng, 20, 1e-6);
}

TEST_CASE("se block: zero params halve the input; zero input stays zero") {
    Rng rng(8);
    RealTensor x = random_tensor({4, 3, 3}, rng);
    SeParams zero{FcParams{RealTensor({2, 4}), RealTensor({2})},
                  FcParams{RealTensor({4, 2}), RealTensor({4})}};
    RealTensor y = se_block_forward(x, zero, nullptr);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(y[i] == doctest::Approx(0.5 * x[i]).epsilon(1e-15));

    RealTensor xz({4, 3, 3});
    SeParams p{FcParams{random_tensor({2, 4}, rng), random_tensor({2}, rng)},
               FcParams{random_tensor({4, 2}, rng), random_tensor({4}, rng)}};
    RealTensor yz = se_block_forward(xz, p, nullptr);
    CHECK(l2_norm(yz) == 0.0);
}

TEST_CASE("se block full gradient matches finite differences") {
    Rng rng(9);
    RealTensor x = random_tensor({4, 6, 6}, rng);
    SeParams p{FcParams{random_tensor({2, 4}, rng), random_tensor({2}, rng)},
               FcParams{random_tensor({4, 2}, rng), random_tensor({4}, rng)}};
    RealTensor target = random_tensor({4, 6, 6}, rng);

    const auto loss = [&]() { return half_sq_loss(se_block_forward(x, p, nullptr), target); };
    Tape tape;
    RealTensor y = se_block_forward(x, p, &tape);
    SeGrads g = se_block_backward(loss_grad(y, target), tape);

    check_grad(loss, p.reduce.w, g.params.reduce.w, rng, 8, 1e-5);
    check_grad(loss, p.reduce.b, g.params.reduce.b, rng, 2, 1e-5);
    check_grad(loss, p.expand.w, g.params.expand.w, rng, 8, 1e-5);
    check_grad(loss, p.expand.b, g.params.expand.b, rng, 4, 1e-5);
    check_grad(loss, x, g.x, rng, 30, 1e-5);

    // zero upstream -> zero grads everywhere
    Tape tape2;
    se_block_forward(x, p, &tape2);
    SeGrads gz = se_block_backward(RealTensor({4, 6, 6}), tape2);
    CHECK(l2_norm(gz.x) == 0.0);
    CHECK(l2_norm(gz.params.reduce.w) == 0.0);
    CHECK(l2_norm(gz.params.expand.w) == 0.0);
}

TEST_CASE("se block with zero params: grad check through the gate") {
    Rng rng(10);
    RealTensor x = random_tensor({4, 4, 4}, rng);
    SeParams p{FcParams{RealTensor({2, 4}), RealTensor({2})},
               FcParams{RealTensor({4, 2}), RealTensor({4})}};
    RealTensor target = random_tensor({4, 4, 4}, rng);
    const auto loss = [&]() { return half_sq_loss(se_block_forward(x, p, nullptr), target); };
    Tape tape;
    RealTensor y = se_block_forward(x, p, &tape);
    SeGrads g = se_block_backward(loss_grad(y, target), tape);
    check_grad(loss, x, g.x, rng, 20, 1e-5);
}

TEST_CASE("se divisibility violation is rejected") {
    SubnetConfig bad{2, 6, 3, 4, 1};  // 6 % 4 != 0
    CHECK_THROWS_AS(validate(bad), ParamError);
}

TEST_CASE("subnet: zero params are the identity; shape preserved") {
    SubnetConfig cfg{2, 4, 3, 2, 2};
    SubnetParams zero = zero_subnet_params(cfg);
    Rng rng(11);
    RealTensor x = random_tensor({2, 6, 6}, rng);
    RealTensor y = subnet_forward(x, zero, cfg, nullptr);
    REQUIRE(y.same_shape(x));
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);

    SubnetParams p = init_subnet_params(cfg, rng);
    RealTensor y2 = subnet_forward(x, p, cfg, nullptr);
    CHECK(y2.same_shape(x));
}

TEST_CASE("subnet end-to-end gradient matches finite differences") {
    SubnetConfig cfg{2, 4, 3, 2, 2};
    Rng rng(12);
    SubnetParams p = init_subnet_params(cfg, rng);
    RealTensor x = random_tensor({2, 6, 6}, rng);
    RealTensor target = random_tensor({2, 6, 6}, rng);

    const auto loss = [&]() { return half_sq_loss(subnet_forward(x, p, cfg, nullptr), target); };
    Tape tape;
    RealTensor y = subnet_forward(x, p, cfg, &tape);
    SubnetGrads g = subnet_backward(loss_grad(y, target), cfg, tape);
    CHECK(tape.empty());

    check_grad(loss, p.lift.w, g.params.lift.w, rng, 12, 1e-5);
    check_grad(loss, p.lift.b, g.params.lift.b, rng, 4, 1e-5);
    for (std::size_t b = 0; b < 2; ++b) {
        check_grad(loss, p.blocks[b].conv1.w, g.params.blocks[b].conv1.w, rng, 12, 1e-5);
        check_grad(loss, p.blocks[b].conv2.w, g.params.blocks[b].conv2.w, rng, 12, 1e-5);
        check_grad(loss, p.blocks[b].conv1.b, g.params.blocks[b].conv1.b, rng, 4, 1e-5);
        check_grad(loss, p.blocks[b].se.reduce.w, g.params.blocks[b].se.reduce.w, rng, 8, 1e-5);
        check_grad(loss, p.blocks[b].se.expand.w, g.params.blocks[b].se.expand.w, rng, 8, 1e-5);
        check_grad(loss, p.blocks[b].se.expand.b, g.params.blocks[b].se.expand.b, rng, 4, 1e-5);
    }
    check_grad(loss, p.project.w, g.params.project.w, rng, 12, 1e-5);
    check_grad(loss, p.project.b, g.params.project.b, rng, 2, 1e-5);
    check_grad(loss, x, g.x, rng, 20, 1e-5);
}

TEST_CASE("tape replay determinism: identical gradients across two passes") {
    SubnetConfig cfg{2, 4, 3, 2, 1};
    Rng rng(13);
    SubnetParams p = init_subnet_params(cfg, rng);
    RealTensor x = random_tensor({2, 6, 6}, rng);
    RealTensor gy = random_tensor({2, 6, 6}, rng);

    Tape t1, t2;
    subnet_forward(x, p, cfg, &t1);
    subnet_forward(x, p, cfg, &t2);
    SubnetGrads g1 = subnet_backward(gy, cfg, t1);
    SubnetGrads g2 = subnet_backward(gy, cfg, t2);
    for (std::size_t i = 0; i < g1.x.size(); ++i) REQUIRE(g1.x[i] == g2.x[i]);
    for (std::size_t i = 0; i < g1.params.lift.w.size(); ++i)
        REQUIRE(g1.params.lift.w[i] == g2.params.lift.w[i]);
}

TEST_CASE("init: deterministic, zero biases, fan-in variance") {
    SubnetConfig cfg{2, 8, 3, 2, 1};
    Rng r1(99), r2(99);
    SubnetParams a = init_subnet_params(cfg, r1);
    SubnetParams b = init_subnet_params(cfg, r2);
    for (std::size_t i = 0; i < a.lift.w.size(); ++i) REQUIRE(a.lift.w[i] == b.lift.w[i]);
    CHECK(l2_norm(a.lift.b) == 0.0);
    CHECK(l2_norm(a.blocks[0].conv1.b) == 0.0);
    CHECK(l2_norm(a.blocks[0].se.reduce.b) == 0.0);
    CHECK(l2_norm(a.project.b) == 0.0);

    // empirical variance of He-uniform weights over >= 1e4 draws
    Rng rng(100);
    SubnetConfig wide{2, 64, 3, 2, 1};
    SubnetParams w = init_subnet_params(wide, rng);
    const RealTensor& conv1 = w.blocks[0].conv1.w;  // fan_in = 64*9 = 576
    REQUIRE(conv1.size() >= 10000);
    double mean = 0.0;
    for (std::size_t i = 0; i < conv1.size(); ++i) mean += conv1[i];
    mean /= static_cast<double>(conv1.size());
    double var = 0.0;
    for (std::size_t i = 0; i < conv1.size(); ++i)
        var += (conv1[i] - mean) * (conv1[i] - mean);
    var /= static_cast<double>(conv1.size());
    const double expect = 2.0 / 576.0;
    CHECK(var > 0.8 * expect);
    CHECK(var < 1.2 * expect);
}

}  // TEST_SUITE
